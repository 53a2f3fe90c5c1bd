// Pointer capture: raw pointer events -> samples -> sensor-rate frames.

import { Frame, FingerParams, SensorConfig, renderFrame, zeroFrame } from './frames.js';

export interface PointerSample {
  x: number;        // canvas px
  y: number;
  pressure: number; // 0..1 from the pointer event, 0/0.5 means "no hardware pressure"
  t: number;        // ms
}

/** Minimal slice of a PointerEvent so tests can script input. */
export interface PointerEventLike {
  offsetX: number;
  offsetY: number;
  pressure: number;
  timeStamp: number;
}

/**
 * Records one stroke at a time from pointerdown/move/up. Leaving the canvas
 * ends the stroke (treat pointerleave as up). Timestamps are forced monotone
 * within a stroke.
 */
export class StrokeRecorder {
  private current: PointerSample[] | null = null;
  readonly strokes: PointerSample[][] = [];

  down(e: PointerEventLike): void {
    this.current = [];
    this.push(e);
  }

  move(e: PointerEventLike): void {
    if (this.current) this.push(e);
  }

  up(e: PointerEventLike): PointerSample[] | null {
    if (!this.current) return null;
    this.push(e);
    const stroke = this.current;
    this.current = null;
    this.strokes.push(stroke);
    return stroke;
  }

  private push(e: PointerEventLike): void {
    const s = this.current!;
    const last = s.length ? s[s.length - 1].t : -Infinity;
    s.push({
      x: e.offsetX,
      y: e.offsetY,
      pressure: e.pressure,
      t: Math.max(e.timeStamp, last), // clamp out-of-order event timestamps
    });
  }
}

/**
 * Canvas -> sensor grid mapping that preserves aspect ratio: the grid is
 * inscribed in the canvas (letterboxed), never stretched.
 */
export function canvasToGrid(
  x: number, y: number,
  canvasW: number, canvasH: number,
  config: SensorConfig,
): [number, number] {
  const side = Math.min(canvasW, canvasH);
  const ox = (canvasW - side) / 2;
  const oy = (canvasH - side) / 2;
  const col = ((x - ox) / side) * (config.cols - 1);
  const row = ((y - oy) / side) * (config.rows - 1);
  const clamp = (v: number, hi: number) => Math.min(Math.max(v, 0), hi);
  return [clamp(row, config.rows - 1), clamp(col, config.cols - 1)];
}

function syntheticRamp(n: number): number[] {
  // rise-hold-fall, mirroring the simulator's tap envelope; commodity mice
  // report no usable pressure so this stands in for it
  if (n <= 2) return new Array(n).fill(0.8);
  const out = new Array<number>(n);
  for (let i = 0; i < n; i++) out[i] = 0.35 + 0.65 * Math.sin((Math.PI * i) / (n - 1));
  out[0] = Math.max(out[0], 0.35);
  out[n - 1] = Math.max(out[n - 1], 0.35);
  return out;
}

function hasHardwarePressure(samples: PointerSample[]): boolean {
  // mice report a constant 0.5 while down (or 0); real digitizers vary
  return samples.some((s) => s.pressure > 0 && s.pressure !== 0.5);
}

export interface ResampledStroke {
  centers: [number, number][]; // grid (row, col) per frame
  pressures: number[];         // 0..1 per frame
}

/**
 * Resample a stroke to the sensor frame rate by linear interpolation.
 * A click shorter than one frame period still produces the 2-frame minimum
 * event the server's segmenter requires.
 */
export function resampleStroke(
  samples: PointerSample[],
  canvasW: number, canvasH: number,
  config: SensorConfig,
): ResampledStroke {
  if (!samples.length) return { centers: [], pressures: [] };
  const t0 = samples[0].t;
  const durMs = samples[samples.length - 1].t - t0;
  const period = 1000 / config.frameRate;
  const n = Math.max(2, Math.round(durMs / period) + 1);
  const centers: [number, number][] = [];
  const pressures: number[] = [];
  let k = 0;
  for (let i = 0; i < n; i++) {
    const t = t0 + Math.min(i * period, durMs);
    while (k + 1 < samples.length && samples[k + 1].t < t) k++;
    const a = samples[k];
    const b = samples[Math.min(k + 1, samples.length - 1)];
    const span = b.t - a.t;
    const u = span > 0 ? Math.min(Math.max((t - a.t) / span, 0), 1) : 0;
    centers.push(canvasToGrid(a.x + u * (b.x - a.x), a.y + u * (b.y - a.y),
                              canvasW, canvasH, config));
    pressures.push(a.pressure + u * (b.pressure - a.pressure));
  }
  if (!hasHardwarePressure(samples)) {
    return { centers, pressures: syntheticRamp(n) };
  }
  return { centers, pressures };
}

/**
 * Render a resampled stroke into wire frames, padded with leading/trailing
 * zero frames so the server's online segmenter sees the gesture complete.
 */
export function strokeToFrames(
  stroke: ResampledStroke,
  config: SensorConfig,
  finger: FingerParams,
  pad = 3,
): Frame[] {
  const frames: Frame[] = [];
  for (let i = 0; i < pad; i++) frames.push(zeroFrame(config));
  for (let i = 0; i < stroke.centers.length; i++) {
    frames.push(renderFrame(stroke.centers[i], finger.peakPressure * stroke.pressures[i],
                            finger.radius, config));
  }
  for (let i = 0; i < pad; i++) frames.push(zeroFrame(config));
  return frames;
}
