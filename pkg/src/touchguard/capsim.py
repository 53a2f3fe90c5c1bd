"""Capacitive sensor array simulator.

Produces frame streams for parameterized synthetic users: a finger is an
isotropic Gaussian pressure blob plus per-pixel sensor noise. Gestures are
taps (stationary blob, ramped pressure), circles (blob traversing a closed
loop) and random draws (low-pass-filtered random walk). All randomness is
derived from explicit seeds; same inputs give bit-identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GESTURE_KINDS = ("tap", "circle", "random")


class SimError(ValueError):
    """Rejected input to the simulator."""


@dataclass(frozen=True)
class SensorConfig:
    rows: int = 16
    cols: int = 16
    frame_rate: float = 30.0
    noise_sigma: float = 1.0

    def __post_init__(self):
        if self.rows < 7 or self.cols < 7:
            raise SimError("sensor grid must be at least 7x7")
        if self.frame_rate <= 0:
            raise SimError("frame_rate must be positive")
        if self.noise_sigma < 0:
            raise SimError("noise_sigma must be non-negative")


@dataclass(frozen=True)
class TrajectoryBias:
    """Per-user path idiosyncrasies for circle and random gestures."""

    offset_row: float = 0.0
    offset_col: float = 0.0
    radius_scale: float = 1.0
    eccentricity: float = 0.0   # 0 = circle, >0 squashes one axis
    heading_drift: float = 0.0  # rad/s bias added to random-walk headings


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    finger_radius: float = 1.5
    peak_pressure: float = 60.0
    pressure_jitter: float = 0.05
    speed: float = 25.0
    tap_duration_mean: float = 0.167
    tap_duration_std: float = 0.03
    trajectory_bias: TrajectoryBias = field(default_factory=TrajectoryBias)
    rng_seed: int = 0

    def __post_init__(self):
        if self.finger_radius <= 0:
            raise SimError("finger_radius must be positive")
        if self.peak_pressure <= 0:
            raise SimError("peak_pressure must be positive")
        if self.tap_duration_mean <= 0:
            raise SimError("tap_duration_mean must be positive")


@dataclass
class TruthSpan:
    start: int
    end: int  # inclusive index of the last touching frame
    user_id: str
    kind: str


@dataclass
class RawRecording:
    config: SensorConfig
    frames: np.ndarray      # (T, rows, cols)
    timestamps: np.ndarray  # (T,), seconds from stream start
    truth: list[TruthSpan] | None = None


def render_frame(center, profile: UserProfile, config: SensorConfig,
                 pressure: float, rng: np.random.Generator) -> np.ndarray:
    """Render one frame: Gaussian blob at `center` (row, col) plus noise.

    Value at pixel p is pressure * exp(-|p-center|^2 / (2 r^2)) + N(0, sigma),
    clamped at zero.
    """
    r, c = center
    if not (0 <= r <= config.rows - 1 and 0 <= c <= config.cols - 1):
        raise SimError(f"finger center {center} outside {config.rows}x{config.cols} grid")
    if pressure < 0:
        raise SimError("pressure must be non-negative")
    rows = np.arange(config.rows)[:, None]
    cols = np.arange(config.cols)[None, :]
    d2 = (rows - r) ** 2 + (cols - c) ** 2
    frame = pressure * np.exp(-d2 / (2.0 * profile.finger_radius ** 2))
    if config.noise_sigma > 0:
        frame = frame + rng.normal(0.0, config.noise_sigma, size=frame.shape)
    return np.maximum(frame, 0.0)


def _noise_frames(n, config: SensorConfig, rng) -> np.ndarray:
    shape = (n, config.rows, config.cols)
    if config.noise_sigma == 0:
        return np.zeros(shape)
    return np.maximum(rng.normal(0.0, config.noise_sigma, size=shape), 0.0)


def _tap_path(profile: UserProfile, config: SensorConfig, rng):
    dur = max(2.0 / config.frame_rate,
              rng.normal(profile.tap_duration_mean, profile.tap_duration_std))
    n = max(2, round(dur * config.frame_rate))
    margin = 2.0
    r = rng.uniform(margin, config.rows - 1 - margin)
    c = rng.uniform(margin, config.cols - 1 - margin)
    centers = np.tile([r, c], (n, 1))
    # rise-hold-fall ramp; floor keeps every touching frame well above noise
    u = np.linspace(0.0, 1.0, n)
    ramp = 0.35 + 0.65 * np.sin(math.pi * u) if n > 2 else np.full(n, 0.8)
    ramp[0] = max(ramp[0], 0.35)
    ramp[-1] = max(ramp[-1], 0.35)
    return centers, ramp


def _circle_path(profile: UserProfile, config: SensorConfig, rng):
    bias = profile.trajectory_bias
    cr = (config.rows - 1) / 2.0 + bias.offset_row
    cc = (config.cols - 1) / 2.0 + bias.offset_col
    base_radius = min(config.rows, config.cols) / 4.0
    radius = base_radius * bias.radius_scale * rng.uniform(0.9, 1.1)
    max_r = min(cr, config.rows - 1 - cr, cc, config.cols - 1 - cc) - 0.5
    radius = min(radius, max(1.0, max_r))
    loop_len = 2 * math.pi * radius
    n = max(4, round(loop_len / profile.speed * config.frame_rate))
    phase = rng.uniform(0, 2 * math.pi)
    theta = phase + np.linspace(0.0, 2 * math.pi, n)
    rr = cr + radius * (1.0 - bias.eccentricity) * np.sin(theta)
    cc_ = cc + radius * np.cos(theta)
    centers = np.column_stack([rr, cc_])
    ramp = 0.75 + 0.25 * np.sin(math.pi * np.linspace(0, 1, n))
    return centers, ramp


def _random_path(profile: UserProfile, config: SensorConfig, rng):
    dur = rng.uniform(0.8, 1.6)
    n = max(4, round(dur * config.frame_rate))
    dt = 1.0 / config.frame_rate
    margin = 1.5
    pos = np.array([rng.uniform(margin, config.rows - 1 - margin),
                    rng.uniform(margin, config.cols - 1 - margin)])
    heading = rng.uniform(0, 2 * math.pi)
    turn = 0.0
    centers = np.empty((n, 2))
    for i in range(n):
        centers[i] = pos
        # low-pass filtered heading changes give smooth strokes
        turn = 0.7 * turn + 0.3 * rng.normal(0.0, 2.5)
        heading += (turn + profile.trajectory_bias.heading_drift) * dt * 10
        step = profile.speed * dt
        pos = pos + step * np.array([math.sin(heading), math.cos(heading)])
        for axis, hi in ((0, config.rows - 1 - margin), (1, config.cols - 1 - margin)):
            if pos[axis] < margin:
                pos[axis] = 2 * margin - pos[axis]
                heading = -heading if axis == 0 else math.pi - heading
            elif pos[axis] > hi:
                pos[axis] = 2 * hi - pos[axis]
                heading = -heading if axis == 0 else math.pi - heading
    ramp = 0.75 + 0.25 * np.sin(math.pi * np.linspace(0, 1, n))
    return centers, ramp


_PATHS = {"tap": _tap_path, "circle": _circle_path, "random": _random_path}


def synth_gesture(profile: UserProfile, kind: str, config: SensorConfig,
                  seed) -> tuple[np.ndarray, tuple[int, int]]:
    """Simulate one gesture, padded with >=2 pure-noise frames on each side.

    Returns (frames, (touch_start, touch_end)) where the indices bound the
    touching segment inclusively, relative to the returned array.
    """
    if kind not in GESTURE_KINDS:
        raise SimError(f"unknown gesture kind {kind!r}")
    rng = np.random.default_rng(seed)
    centers, ramp = _PATHS[kind](profile, config, rng)
    peak = profile.peak_pressure * (1.0 + rng.normal(0.0, profile.pressure_jitter))
    peak = max(peak, 0.2 * profile.peak_pressure)
    pad = 3
    n = len(centers)
    frames = np.empty((n + 2 * pad, config.rows, config.cols))
    frames[:pad] = _noise_frames(pad, config, rng)
    for i in range(n):
        frames[pad + i] = render_frame(centers[i], profile, config, peak * ramp[i], rng)
    frames[pad + n:] = _noise_frames(pad, config, rng)
    return frames, (pad, pad + n - 1)


def synth_corpus(profiles: list[UserProfile], per_user_counts: dict[str, int],
                 config: SensorConfig, seed: int) -> RawRecording:
    """Concatenate shuffled gestures from all profiles, with truth spans."""
    if not profiles:
        raise SimError("need at least one profile")
    ids = [p.user_id for p in profiles]
    if len(set(ids)) != len(ids):
        raise SimError("profile user_ids must be unique")
    for kind, count in per_user_counts.items():
        if kind not in GESTURE_KINDS:
            raise SimError(f"unknown gesture kind {kind!r}")
        if count < 1:
            raise SimError("per-user counts must be >= 1")

    jobs = []
    for ui, profile in enumerate(profiles):
        for kind, count in sorted(per_user_counts.items()):
            for j in range(count):
                gseed = [seed, profile.rng_seed, ui, GESTURE_KINDS.index(kind), j]
                jobs.append((profile, kind, gseed))
    order_rng = np.random.default_rng([seed, 0xC0FFEE])
    order_rng.shuffle(jobs)

    chunks, truth, offset = [], [], 0
    for profile, kind, gseed in jobs:
        frames, (s, e) = synth_gesture(profile, kind, config, gseed)
        truth.append(TruthSpan(offset + s, offset + e, profile.user_id, kind))
        chunks.append(frames)
        offset += len(frames)
    frames = np.concatenate(chunks, axis=0)
    timestamps = np.arange(len(frames)) / config.frame_rate
    return RawRecording(config=config, frames=frames, timestamps=timestamps, truth=truth)


def make_profiles(n_users: int, spread: float = 1.0, seed: int = 0) -> list[UserProfile]:
    """Build n distinguishable synthetic users; `spread` scales how far apart
    their parameters sit (the separability knob)."""
    if n_users < 1:
        raise SimError("need at least one user")
    profiles = []
    for i in range(n_users):
        d = spread * i
        bias = TrajectoryBias(
            offset_row=0.9 * spread * math.sin(2.1 * i),
            offset_col=0.9 * spread * math.cos(1.3 * i),
            radius_scale=1.0 + 0.18 * spread * ((i % 3) - 1),
            eccentricity=min(0.4, 0.08 * d),
            heading_drift=0.6 * spread * ((i % 2) * 2 - 1),
        )
        profiles.append(UserProfile(
            user_id=f"user{i}",
            finger_radius=1.1 + 0.3 * d,
            peak_pressure=50.0 + 14.0 * d,
            pressure_jitter=0.05,
            speed=18.0 + 7.0 * d,
            tap_duration_mean=0.12 + 0.055 * d,
            tap_duration_std=0.02,
            trajectory_bias=bias,
            rng_seed=seed * 1000 + i,
        ))
    return profiles
