// Client-side sensor frame rendering. Reimplements the server simulator's
// noise-free blob model so that frames drawn in the browser segment and
// featurize identically on the server: value at pixel p is
// pressure * exp(-|p - center|^2 / (2 * radius^2)).

export interface SensorConfig {
  rows: number;
  cols: number;
  frameRate: number;
}

export const DEFAULT_CONFIG: SensorConfig = { rows: 16, cols: 16, frameRate: 30 };

/** One sensor frame as a rows x cols nested array (the wire format). */
export type Frame = number[][];

export interface FingerParams {
  radius: number;        // blob std-dev in grid pixels
  peakPressure: number;  // pressure at ramp peak
}

export const DEFAULT_FINGER: FingerParams = { radius: 1.5, peakPressure: 60 };

export function renderFrame(
  center: [number, number],
  pressure: number,
  radius: number,
  config: SensorConfig,
): Frame {
  const [r, c] = center;
  if (r < 0 || r > config.rows - 1 || c < 0 || c > config.cols - 1) {
    throw new Error(`finger center (${r}, ${c}) outside ${config.rows}x${config.cols} grid`);
  }
  if (pressure < 0) throw new Error('pressure must be non-negative');
  const denom = 2 * radius * radius;
  const frame: Frame = [];
  for (let i = 0; i < config.rows; i++) {
    const row = new Array<number>(config.cols);
    for (let j = 0; j < config.cols; j++) {
      const d2 = (i - r) * (i - r) + (j - c) * (j - c);
      row[j] = pressure * Math.exp(-d2 / denom);
    }
    frame.push(row);
  }
  return frame;
}

export function zeroFrame(config: SensorConfig): Frame {
  return Array.from({ length: config.rows }, () => new Array<number>(config.cols).fill(0));
}
