"""Feature extraction for gesture events.

Each event becomes a fixed-length vector: for f selected frames, an n x n
pressure window cut around the finger (row-major), then optional per-frame
(vx, vy) velocities, then optional gesture duration in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .segmentation import GestureEvent, frame_max

ALLOWED_N = (3, 5, 7)
ALLOWED_F = (3, 5, 30)


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    window_n: int = 5
    frames_f: int = 5
    include_velocity: bool = False
    include_duration: bool = True

    def __post_init__(self):
        if self.window_n not in ALLOWED_N:
            raise FeatureError(f"window_n must be one of {ALLOWED_N}")
        if self.frames_f not in ALLOWED_F:
            raise FeatureError(f"frames_f must be one of {ALLOWED_F}")

    @property
    def length(self) -> int:
        n = self.frames_f * self.window_n ** 2
        if self.include_velocity:
            n += 2 * self.frames_f
        if self.include_duration:
            n += 1
        return n


# Named presets matching the three gesture datasets
PRESETS = {
    "tap": FeatureConfig(window_n=5, frames_f=5, include_velocity=False, include_duration=True),
    "circle": FeatureConfig(window_n=7, frames_f=30, include_velocity=True, include_duration=True),
    "random": FeatureConfig(window_n=7, frames_f=30, include_velocity=True, include_duration=True),
}


@dataclass
class FeatureVector:
    values: np.ndarray
    schema: list[str]  # one descriptor per position


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray  # zero-variance features carry std=0 and map to 0


@dataclass
class LabeledDataset:
    vectors: np.ndarray       # (m, d)
    labels: list[str]
    gesture_kind: str
    schema: list[str]
    scaler: Scaler | None = None

    @property
    def classes(self) -> list[str]:
        return sorted(set(self.labels))


def extract_window(frame: np.ndarray, center: tuple[int, int], n: int) -> np.ndarray:
    """n x n patch centered at `center`; out-of-bounds pixels are zero."""
    if n % 2 == 0:
        raise FeatureError("window size must be odd")
    half = n // 2
    out = np.zeros((n, n))
    rows, cols = frame.shape
    r0, c0 = center[0] - half, center[1] - half
    rs, re = max(r0, 0), min(r0 + n, rows)
    cs, ce = max(c0, 0), min(c0 + n, cols)
    if rs < re and cs < ce:
        out[rs - r0:re - r0, cs - c0:ce - c0] = frame[rs:re, cs:ce]
    return out


def window_center(frame: np.ndarray, n: int) -> tuple[float, float]:
    """Sub-pixel finger center: value-weighted centroid of the window around
    the frame maximum. Falls back to the argmax pixel for a zero window."""
    _, (r, c) = frame_max(frame)
    win = extract_window(frame, (r, c), n)
    total = win.sum()
    if total <= 0:
        return float(r), float(c)
    half = n // 2
    ii = np.arange(n)
    wr = (win.sum(axis=1) @ ii) / total + (r - half)
    wc = (win.sum(axis=0) @ ii) / total + (c - half)
    return float(wr), float(wc)


def _select_positions(length: int, f: int) -> np.ndarray:
    # round-half-down so e.g. 14.5 -> 14
    raw = np.arange(f) * (length - 1) / (f - 1)
    return np.ceil(raw - 0.5).astype(int)


def select_frames(event: GestureEvent, f: int, n: int):
    """Pick f representative frames with windows and sub-pixel centers.

    Long events: linearly separated real frames (first and last always
    included). Short events: windows and centers linearly interpolated in
    time between neighboring real frames.

    Returns (windows (f,n,n), centers (f,2), positions (f,) fractional
    indices into the event).
    """
    if f < 2:
        raise FeatureError("need f >= 2 frames")
    length = event.frame_count
    if length == 0:
        raise FeatureError("empty event")

    real_windows = np.empty((length, n, n))
    real_centers = np.empty((length, 2))
    for i, frame in enumerate(event.frames):
        _, loc = frame_max(frame)
        real_windows[i] = extract_window(frame, loc, n)
        real_centers[i] = window_center(frame, n)

    if length == 1:
        windows = np.repeat(real_windows, f, axis=0)
        centers = np.repeat(real_centers, f, axis=0)
        return windows, centers, np.zeros(f)

    if length >= f:
        idx = _select_positions(length, f)
        return real_windows[idx], real_centers[idx], idx.astype(float)

    pos = np.arange(f) * (length - 1) / (f - 1)
    lo = np.minimum(np.floor(pos).astype(int), length - 2)
    w = (pos - lo)[:, None]
    centers = (1 - w) * real_centers[lo] + w * real_centers[lo + 1]
    w3 = w[:, :, None]
    windows = (1 - w3) * real_windows[lo] + w3 * real_windows[lo + 1]
    return windows, centers, pos


def compute_velocity(centers: np.ndarray, positions: np.ndarray,
                     frame_rate: float) -> np.ndarray:
    """Forward-difference (vx, vy) in px/s per selected frame.

    `positions` are the fractional event-frame indices of the selections,
    so the time step between selections is their gap over the frame rate.
    The last frame repeats the previous velocity.
    """
    f = len(centers)
    if f < 2:
        raise FeatureError("need at least 2 centers")
    out = np.zeros((f, 2))
    for i in range(f - 1):
        dt = (positions[i + 1] - positions[i]) / frame_rate
        if dt <= 0:
            out[i] = 0.0
            continue
        vy = (centers[i + 1, 0] - centers[i, 0]) / dt
        vx = (centers[i + 1, 1] - centers[i, 1]) / dt
        out[i] = (vx, vy)
    out[-1] = out[-2]
    return out


def featurize(event: GestureEvent, config: FeatureConfig) -> FeatureVector:
    n, f = config.window_n, config.frames_f
    windows, centers, positions = select_frames(event, f, n)
    parts = [windows.reshape(-1)]
    schema = [f"frame{k}:pressure({i},{j})"
              for k in range(f) for i in range(n) for j in range(n)]
    if config.include_velocity:
        vel = compute_velocity(centers, positions, event.frame_rate)
        parts.append(vel.reshape(-1))
        schema += [f"frame{k}:{axis}" for k in range(f) for axis in ("vx", "vy")]
    if config.include_duration:
        parts.append(np.array([event.duration]))
        schema.append("duration")
    values = np.concatenate(parts)
    assert len(values) == config.length == len(schema)
    return FeatureVector(values=values, schema=schema)


def build_dataset(events, labels, config: FeatureConfig, kind: str) -> LabeledDataset:
    vecs, schema = [], None
    for ev in events:
        fv = featurize(ev, config)
        vecs.append(fv.values)
        schema = fv.schema
    if not vecs:
        raise FeatureError("no events to featurize")
    return LabeledDataset(vectors=np.array(vecs), labels=list(labels),
                          gesture_kind=kind, schema=schema)


def normalize_fit(dataset: LabeledDataset) -> tuple[LabeledDataset, Scaler]:
    """Per-feature z-score; zero-variance features map to 0."""
    X = dataset.vectors
    if len(X) < 2:
        raise FeatureError("need at least 2 rows to normalize")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    scaler = Scaler(mean=mean, std=std)
    normalized = LabeledDataset(
        vectors=normalize_apply(scaler, X),
        labels=list(dataset.labels),
        gesture_kind=dataset.gesture_kind,
        schema=list(dataset.schema),
        scaler=scaler,
    )
    return normalized, scaler


def normalize_apply(scaler: Scaler, values: np.ndarray) -> np.ndarray:
    safe = np.where(scaler.std > 0, scaler.std, 1.0)
    out = (values - scaler.mean) / safe
    return np.where(scaler.std > 0, out, 0.0)
