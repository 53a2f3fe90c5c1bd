"""Gesture event segmentation.

A finger is on the panel while the per-frame maximum exceeds a threshold;
an event runs from touch-down to lift-off. Runs shorter than
``min_event_frames`` are discarded as noise spikes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .capsim import RawRecording


class SegmentationError(ValueError):
    pass


@dataclass
class GestureEvent:
    frames: np.ndarray   # (n, rows, cols) contiguous touching frames
    start_index: int
    end_index: int       # inclusive
    frame_rate: float

    @property
    def frame_count(self) -> int:
        return self.end_index - self.start_index + 1

    @property
    def duration(self) -> float:
        return self.frame_count / self.frame_rate


def frame_max(frame: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Maximum value and its (row, col); ties go to smallest row, then col."""
    if frame.size == 0:
        raise SegmentationError("empty frame")
    idx = int(np.argmax(frame))  # argmax scans row-major, giving the tie-break
    r, c = divmod(idx, frame.shape[1])
    return float(frame[r, c]), (r, c)


def detect_events(recording: RawRecording, threshold: float,
                  min_event_frames: int = 2) -> list[GestureEvent]:
    """Maximal runs of consecutive frames whose maximum exceeds `threshold`."""
    if threshold <= 0:
        raise SegmentationError("threshold must be positive")
    maxima = recording.frames.reshape(len(recording.frames), -1).max(axis=1)
    touching = maxima > threshold
    events = []
    i, n = 0, len(touching)
    while i < n:
        if not touching[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and touching[j + 1]:
            j += 1
        if j - i + 1 >= min_event_frames:
            events.append(GestureEvent(
                frames=recording.frames[i:j + 1].copy(),
                start_index=i,
                end_index=j,
                frame_rate=recording.config.frame_rate,
            ))
        i = j + 1
    return events


def calibrate_threshold(noise_frames) -> float:
    """mean + 6*std of per-frame maxima over noise-only frames."""
    noise_frames = np.asarray(noise_frames)
    if len(noise_frames) < 10:
        raise SegmentationError("need at least 10 noise frames to calibrate")
    maxima = noise_frames.reshape(len(noise_frames), -1).max(axis=1)
    return float(maxima.mean() + 6.0 * maxima.std())
