"""Enrollment / authentication HTTP service.

Endpoints:
  POST /users/{user_id}/enroll   body {kind, events:[[frame,...],...]} or
                                 {kind, frames:[frame,...]} (auto-segmented)
  POST /sessions                 body {user_id, kind, vote_window?}
  WS   /sessions/{id}/frames     in:  {session, frames:[frame,...], t0}
                                 out: {gesture_index, score, accept}

A frame on the wire is a rows x cols nested array. Each session owns a
bounded frame buffer (drop-oldest past 10 s); completed gestures are
segmented online, featurized, scored against the enrolled mixture model and
accepted iff the score clears the user threshold. Model artifacts are
immutable after enrollment and swapped atomically on re-enrollment.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from . import pipeline, segmentation, store
from .capsim import RawRecording, SensorConfig
from .featurization import PRESETS, LabeledDataset, featurize
from .segmentation import GestureEvent

ENROLL_FLOOR = 30
BUFFER_SECONDS = 10.0


def _enrollment_path(model_dir, user_id, kind):
    return os.path.join(model_dir, f"{user_id}.{kind}.json")


@dataclass
class Enrollment:
    detector: pipeline.GmmDetector
    kind: str
    seg_threshold: float
    config: SensorConfig


@dataclass
class Session:
    session_id: str
    user_id: str
    kind: str
    enrollment: Enrollment
    vote_window: int = 1
    buffer: list = field(default_factory=list)   # pending frames (2D arrays)
    gesture_index: int = 0
    decision_log: list = field(default_factory=list)
    recent: list = field(default_factory=list)   # recent accept booleans for voting
    lock: threading.Lock = field(default_factory=threading.Lock)


def _frames_to_events(frames, config, threshold):
    rec = RawRecording(config=config, frames=np.asarray(frames, dtype=float),
                       timestamps=np.arange(len(frames)) / config.frame_rate)
    return segmentation.detect_events(rec, threshold)


def _complete_runs(buffer, threshold, frame_rate):
    """Split the buffer into completed gesture events and the retained tail.

    A run is complete once at least 2 sub-threshold frames follow it; the
    trailing (possibly still-touching) portion stays buffered.
    """
    maxima = [float(np.max(f)) for f in buffer]
    touching = [m > threshold for m in maxima]
    events, consumed = [], 0
    i, n = 0, len(buffer)
    while i < n:
        if not touching[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and touching[j + 1]:
            j += 1
        below_after = n - 1 - j
        if below_after < 2:
            break  # run may still be in progress
        if j - i + 1 >= 2:
            events.append(GestureEvent(
                frames=np.array(buffer[i:j + 1]), start_index=i, end_index=j,
                frame_rate=frame_rate))
        consumed = j + 1
        i = j + 1
    if consumed == 0 and not any(touching):
        consumed = max(0, n - 2)  # pure noise: keep only a short tail
    return events, consumed


class AuthService:
    def __init__(self, model_dir="./models", default_config: SensorConfig | None = None):
        self.model_dir = model_dir
        self.config = default_config or SensorConfig()
        os.makedirs(model_dir, exist_ok=True)
        self.enrollments: dict[tuple[str, str], Enrollment] = {}
        self.sessions: dict[str, Session] = {}
        self.lock = threading.Lock()

    # ------------------------------------------------------------- enrollment

    def enroll(self, user_id: str, kind: str, events=None, frames=None,
               acceptance_quantile=0.05, seed=0) -> dict:
        if kind not in PRESETS:
            raise ValueError(f"unknown gesture kind {kind!r}")
        if events is None and frames is None:
            raise ValueError("provide 'events' or 'frames'")
        if frames is not None:
            frames = np.asarray(frames, dtype=float)
            rec = RawRecording(config=self.config, frames=frames,
                               timestamps=np.arange(len(frames)) / self.config.frame_rate)
            seg_threshold = pipeline.auto_threshold(rec)
            gesture_events = segmentation.detect_events(rec, seg_threshold)
        else:
            arrays = [np.asarray(e, dtype=float) for e in events]
            all_frames = np.concatenate(arrays, axis=0) if arrays else np.zeros((0, 1, 1))
            rec = RawRecording(config=self.config, frames=all_frames,
                               timestamps=np.arange(len(all_frames)) / self.config.frame_rate)
            seg_threshold = pipeline.auto_threshold(rec) if len(all_frames) >= 10 else 1.0
            gesture_events = [GestureEvent(frames=a, start_index=0,
                                           end_index=len(a) - 1,
                                           frame_rate=self.config.frame_rate)
                              for a in arrays]
        n = len(gesture_events)
        if n < ENROLL_FLOOR:
            raise InsufficientSamples(ENROLL_FLOOR - n, ENROLL_FLOOR, n)
        cfg = PRESETS[kind]
        vecs = np.array([featurize(ev, cfg).values for ev in gesture_events])
        ds = LabeledDataset(vectors=vecs, labels=[user_id] * n, gesture_kind=kind,
                            schema=featurize(gesture_events[0], cfg).schema)
        det = pipeline.fit_gmm_detector(ds, acceptance_quantile=acceptance_quantile,
                                        seed=seed)
        path = _enrollment_path(self.model_dir, user_id, kind)
        store.save_enrollment(path, det.model, det.threshold, det.scaler,
                              det.pca, kind)
        # sidecar with segmentation threshold + sensor shape for sessions
        store._atomic_write(path + ".meta", json.dumps({
            "seg_threshold": seg_threshold, "rows": self.config.rows,
            "cols": self.config.cols, "frame_rate": self.config.frame_rate,
            "noise_sigma": self.config.noise_sigma}))
        enrollment = Enrollment(detector=det, kind=kind,
                                seg_threshold=seg_threshold, config=self.config)
        with self.lock:
            self.enrollments[(user_id, kind)] = enrollment
        return {"user_id": user_id, "kind": kind, "gesture_count": n,
                "acceptance_quantile": acceptance_quantile,
                "threshold": det.threshold.threshold, "k": det.model.k}

    def _get_enrollment(self, user_id, kind) -> Enrollment:
        with self.lock:
            if (user_id, kind) in self.enrollments:
                return self.enrollments[(user_id, kind)]
        path = _enrollment_path(self.model_dir, user_id, kind)
        if not os.path.exists(path):
            raise KeyError(f"user {user_id!r} is not enrolled for {kind!r}")
        model, threshold, scaler, pca, file_kind = store.load_enrollment(path)
        meta = {"seg_threshold": 5.0, "rows": self.config.rows,
                "cols": self.config.cols, "frame_rate": self.config.frame_rate,
                "noise_sigma": self.config.noise_sigma}
        if os.path.exists(path + ".meta"):
            with open(path + ".meta") as f:
                meta.update(json.load(f))
        det = pipeline.GmmDetector(model=model, threshold=threshold,
                                   scaler=scaler, pca=pca)
        enrollment = Enrollment(
            detector=det, kind=file_kind, seg_threshold=meta["seg_threshold"],
            config=SensorConfig(rows=meta["rows"], cols=meta["cols"],
                                frame_rate=meta["frame_rate"],
                                noise_sigma=meta["noise_sigma"]))
        with self.lock:
            self.enrollments[(user_id, kind)] = enrollment
        return enrollment

    # --------------------------------------------------------------- sessions

    def open_session(self, user_id, kind, vote_window=1) -> Session:
        enrollment = self._get_enrollment(user_id, kind)
        session = Session(session_id=uuid.uuid4().hex, user_id=user_id,
                          kind=kind, enrollment=enrollment,
                          vote_window=max(1, int(vote_window)))
        with self.lock:
            self.sessions[session.session_id] = session
        return session

    def authenticate_chunk(self, session: Session, frames) -> list[dict]:
        """Feed a chunk of frames; returns decisions for completed gestures."""
        if not len(frames):
            return []
        enrollment = session.enrollment
        cfg = enrollment.config
        decisions = []
        with session.lock:
            for f in frames:
                arr = np.asarray(f, dtype=float)
                if arr.shape != (cfg.rows, cfg.cols):
                    raise ValueError(f"frame shape {arr.shape} does not match "
                                     f"sensor {cfg.rows}x{cfg.cols}")
                session.buffer.append(arr)
            max_frames = int(BUFFER_SECONDS * cfg.frame_rate)
            if len(session.buffer) > max_frames:
                session.buffer = session.buffer[-max_frames:]
            events, consumed = _complete_runs(session.buffer,
                                              enrollment.seg_threshold,
                                              cfg.frame_rate)
            if consumed:
                session.buffer = session.buffer[consumed:]
            for ev in events:
                vec = featurize(ev, PRESETS[session.kind]).values
                ok, score = enrollment.detector.accept(vec)
                ok = bool(np.asarray(ok).reshape(-1)[0])
                score = float(np.asarray(score).reshape(-1)[0])
                session.recent.append(ok)
                if session.vote_window > 1:
                    window = session.recent[-session.vote_window:]
                    accept = sum(window) * 2 > len(window)
                else:
                    accept = ok
                decision = {"gesture_index": session.gesture_index,
                            "score": score, "accept": bool(accept)}
                session.gesture_index += 1
                session.decision_log.append(decision)
                decisions.append(decision)
        return decisions


class InsufficientSamples(ValueError):
    def __init__(self, missing, floor, got):
        self.missing, self.floor, self.got = missing, floor, got
        super().__init__(f"need {missing} more gestures "
                         f"(floor {floor}, got {got})")


def create_app(model_dir="./models", config: SensorConfig | None = None) -> FastAPI:
    service = AuthService(model_dir=model_dir, default_config=config)
    app = FastAPI(title="touchguard authd")
    app.state.service = service

    @app.post("/users/{user_id}/enroll")
    def enroll(user_id: str, body: dict):
        try:
            return service.enroll(
                user_id, body.get("kind", "tap"),
                events=body.get("events"), frames=body.get("frames"),
                acceptance_quantile=body.get("acceptance_quantile", 0.05),
                seed=body.get("seed", 0))
        except InsufficientSamples as e:
            raise HTTPException(status_code=422, detail={
                "error": "insufficient_samples", "need_more": e.missing,
                "floor": e.floor, "got": e.got})
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))

    @app.post("/sessions")
    def open_session(body: dict):
        try:
            session = service.open_session(
                body["user_id"], body.get("kind", "tap"),
                vote_window=body.get("vote_window", 1))
        except KeyError as e:
            raise HTTPException(status_code=404, detail=str(e))
        return {"session_id": session.session_id, "user_id": session.user_id,
                "kind": session.kind, "vote_window": session.vote_window}

    @app.get("/sessions/{session_id}/log")
    def session_log(session_id: str):
        session = service.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return {"decisions": session.decision_log}

    @app.websocket("/sessions/{session_id}/frames")
    async def frames(ws: WebSocket, session_id: str):
        await ws.accept()
        session = service.sessions.get(session_id)
        if session is None:
            await ws.send_json({"error": "unknown session"})
            await ws.close()
            return
        try:
            while True:
                msg = await ws.receive_json()
                try:
                    decisions = service.authenticate_chunk(
                        session, msg.get("frames", []))
                except ValueError as e:
                    await ws.send_json({"error": str(e)})
                    continue
                for d in decisions:
                    await ws.send_json(d)
                await ws.send_json({"ack": len(msg.get("frames", [])),
                                    "pending_frames": len(session.buffer)})
        except WebSocketDisconnect:
            pass

    return app
