"""Persistence: file formats for recordings, datasets, masks, and models.

Primary format is self-describing JSON / JSON-lines (header line carries
kind + version + schema hash); frame streams also support a packed ``.npz``
binary variant. Writes are atomic (temp file + rename). See FORMATS.md for
byte-level examples.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np

from .anomaly import AnomalyThreshold, GmmModel
from .capsim import RawRecording, SensorConfig, TruthSpan
from .dimreduce import FeatureMask, PcaModel
from .featurization import LabeledDataset, Scaler
from .linmodels import LogRegModel, SoftmaxModel
from .svm import BinarySvm, KernelSpec, SvmModel

FORMAT_VERSION = 1


class StoreError(ValueError):
    pass


def _schema_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _atomic_write(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tg-tmp-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_json(text, path, offset=0):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise StoreError(f"{path}: corrupt file at byte {offset + e.pos}: {e.msg}") from None


def _check_header(header, expected_kind, path):
    if not isinstance(header, dict) or "kind" not in header:
        raise StoreError(f"{path}: missing header line")
    if header["kind"] != expected_kind:
        raise StoreError(f"{path}: expected kind {expected_kind!r}, found {header['kind']!r}")
    if header.get("version") != FORMAT_VERSION:
        raise StoreError(f"{path}: unsupported format version {header.get('version')!r} "
                         f"(supported: {FORMAT_VERSION})")


# ------------------------------------------------------------------ recording

def save_recording(path, rec: RawRecording):
    path = os.fspath(path)
    if path.endswith(".npz"):
        truth = [(t.start, t.end, t.user_id, t.kind) for t in rec.truth or []]
        cfg = rec.config
        d = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tg-tmp-", suffix=".npz")
        os.close(fd)
        np.savez_compressed(
            tmp, frames=rec.frames, timestamps=rec.timestamps,
            config=np.array([cfg.rows, cfg.cols, cfg.frame_rate, cfg.noise_sigma]),
            truth=json.dumps(truth), version=np.array([FORMAT_VERSION]))
        os.replace(tmp, path)
        return
    cfg = rec.config
    header = {"kind": "recording", "version": FORMAT_VERSION,
              "rows": cfg.rows, "cols": cfg.cols,
              "frame_rate": cfg.frame_rate, "noise_sigma": cfg.noise_sigma}
    header["schema_hash"] = _schema_hash({k: header[k] for k in ("rows", "cols")})
    lines = [json.dumps(header)]
    for t, frame in zip(rec.timestamps, rec.frames):
        lines.append(json.dumps({"t": float(t), "v": frame.reshape(-1).tolist()}))
    _atomic_write(path, "\n".join(lines) + "\n")
    if rec.truth is not None:
        truth = [{"start": s.start, "end": s.end, "user_id": s.user_id, "kind": s.kind}
                 for s in rec.truth]
        _atomic_write(_truth_path(path), json.dumps(truth, indent=1))


def _truth_path(path):
    return os.fspath(path) + ".truth.json"


def load_recording(path) -> RawRecording:
    path = os.fspath(path)
    if path.endswith(".npz"):
        with np.load(path, allow_pickle=False) as z:
            if int(z["version"][0]) != FORMAT_VERSION:
                raise StoreError(f"{path}: unsupported format version {int(z['version'][0])}")
            rows, cols, rate, sigma = z["config"]
            truth = [TruthSpan(int(s), int(e), u, k)
                     for s, e, u, k in json.loads(str(z["truth"]))]
            return RawRecording(
                config=SensorConfig(rows=int(rows), cols=int(cols),
                                    frame_rate=float(rate), noise_sigma=float(sigma)),
                frames=z["frames"], timestamps=z["timestamps"],
                truth=truth or None)
    with open(path) as f:
        text = f.read()
    lines = text.splitlines()
    if not lines:
        raise StoreError(f"{path}: empty file")
    header = _parse_json(lines[0], path)
    _check_header(header, "recording", path)
    cfg = SensorConfig(rows=header["rows"], cols=header["cols"],
                       frame_rate=header["frame_rate"],
                       noise_sigma=header["noise_sigma"])
    frames, ts = [], []
    offset = len(lines[0]) + 1
    for line in lines[1:]:
        if line.strip():
            rec = _parse_json(line, path, offset)
            frames.append(np.array(rec["v"]).reshape(cfg.rows, cfg.cols))
            ts.append(rec["t"])
        offset += len(line) + 1
    truth = None
    tp = _truth_path(path)
    if os.path.exists(tp):
        with open(tp) as f:
            truth = [TruthSpan(t["start"], t["end"], t["user_id"], t["kind"])
                     for t in _parse_json(f.read(), tp)]
    return RawRecording(config=cfg, frames=np.array(frames),
                        timestamps=np.array(ts), truth=truth)


# -------------------------------------------------------------------- dataset

def save_dataset(path, ds: LabeledDataset):
    header = {"kind": "dataset", "version": FORMAT_VERSION,
              "gesture_kind": ds.gesture_kind, "schema": list(ds.schema),
              "schema_hash": _schema_hash(list(ds.schema))}
    if ds.scaler is not None:
        header["scaler"] = {"mean": ds.scaler.mean.tolist(),
                            "std": ds.scaler.std.tolist()}
    lines = [json.dumps(header)]
    for label, row in zip(ds.labels, ds.vectors):
        lines.append(json.dumps({"label": label, "values": row.tolist()}))
    _atomic_write(path, "\n".join(lines) + "\n")


def load_dataset(path) -> LabeledDataset:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise StoreError(f"{path}: empty file")
    header = _parse_json(lines[0], path)
    _check_header(header, "dataset", path)
    labels, rows = [], []
    offset = len(lines[0]) + 1
    for line in lines[1:]:
        if line.strip():
            rec = _parse_json(line, path, offset)
            labels.append(rec["label"])
            rows.append(rec["values"])
        offset += len(line) + 1
    if not rows:
        raise StoreError(f"{path}: zero records")
    scaler = None
    if "scaler" in header:
        scaler = Scaler(mean=np.array(header["scaler"]["mean"]),
                        std=np.array(header["scaler"]["std"]))
    return LabeledDataset(vectors=np.array(rows), labels=labels,
                          gesture_kind=header["gesture_kind"],
                          schema=header["schema"], scaler=scaler)


# ----------------------------------------------------------------------- mask

def save_mask(path, mask: FeatureMask):
    payload = {"kind": "mask", "version": FORMAT_VERSION,
               "selected": list(mask.selected),
               "score_trace": [[int(c), float(a)] for c, a in mask.score_trace]}
    _atomic_write(path, json.dumps(payload, indent=1))


def load_mask(path) -> FeatureMask:
    with open(path) as f:
        payload = _parse_json(f.read(), path)
    _check_header(payload, "mask", path)
    return FeatureMask(selected=list(payload["selected"]),
                       score_trace=[(c, a) for c, a in payload["score_trace"]])


# --------------------------------------------------------------------- models

def _kernel_to_json(k: KernelSpec):
    return {"kind": k.kind, "gamma": k.gamma, "degree": k.degree, "coef0": k.coef0}


def _kernel_from_json(d):
    return KernelSpec(kind=d["kind"], gamma=d["gamma"],
                      degree=d["degree"], coef0=d["coef0"])


def model_to_json(model) -> dict:
    base = {"kind": "model", "version": FORMAT_VERSION}
    if isinstance(model, LogRegModel):
        return {**base, "type": "logreg", "theta": model.theta.tolist(),
                "classes": model.classes, "l2_lambda": model.l2_lambda,
                "iterations": model.iterations, "final_loss": model.final_loss}
    if isinstance(model, SoftmaxModel):
        return {**base, "type": "softmax", "theta": model.theta.tolist(),
                "classes": model.classes, "l2_lambda": model.l2_lambda,
                "iterations": model.iterations, "final_loss": model.final_loss}
    if isinstance(model, SvmModel):
        return {**base, "type": "svm", "classes": model.classes,
                "C": model.C, "kernel": _kernel_to_json(model.kernel),
                "binaries": [{
                    "support_vectors": b.support_vectors.tolist(),
                    "dual_coef": b.dual_coef.tolist(),
                    "bias": b.bias, "converged": b.converged,
                } for b in model.binaries]}
    if isinstance(model, GmmModel):
        return {**base, "type": "gmm", "k": model.k, "phi": model.phi.tolist(),
                "mu": model.mu.tolist(), "sigma": model.sigma.tolist(),
                "reg_eps": model.reg_eps}
    if isinstance(model, PcaModel):
        return {**base, "type": "pca", "mean": model.mean.tolist(),
                "components": model.components.tolist(),
                "explained_variance_ratio": model.explained_variance_ratio.tolist()}
    if isinstance(model, Scaler):
        return {**base, "type": "scaler", "mean": model.mean.tolist(),
                "std": model.std.tolist()}
    raise StoreError(f"unsupported model type {type(model).__name__}")


def model_from_json(d, path="<json>"):
    _check_header(d, "model", path)
    t = d.get("type")
    if t == "logreg":
        return LogRegModel(theta=np.array(d["theta"]), classes=d["classes"],
                           l2_lambda=d["l2_lambda"], iterations=d["iterations"],
                           final_loss=d["final_loss"])
    if t == "softmax":
        return SoftmaxModel(theta=np.array(d["theta"]), classes=d["classes"],
                            l2_lambda=d["l2_lambda"], iterations=d["iterations"],
                            final_loss=d["final_loss"])
    if t == "svm":
        kernel = _kernel_from_json(d["kernel"])
        binaries = [BinarySvm(support_vectors=np.array(b["support_vectors"]),
                              dual_coef=np.array(b["dual_coef"]),
                              bias=b["bias"], kernel=kernel, C=d["C"],
                              converged=b["converged"])
                    for b in d["binaries"]]
        return SvmModel(classes=d["classes"], binaries=binaries,
                        kernel=kernel, C=d["C"])
    if t == "gmm":
        return GmmModel(k=d["k"], phi=np.array(d["phi"]), mu=np.array(d["mu"]),
                        sigma=np.array(d["sigma"]), reg_eps=d["reg_eps"])
    if t == "pca":
        return PcaModel(mean=np.array(d["mean"]),
                        components=np.array(d["components"]),
                        explained_variance_ratio=np.array(d["explained_variance_ratio"]))
    if t == "scaler":
        return Scaler(mean=np.array(d["mean"]), std=np.array(d["std"]))
    raise StoreError(f"{path}: unknown model type {t!r}")


def save_model(path, model, extra: dict | None = None):
    payload = model_to_json(model)
    if extra:
        payload.update(extra)
    _atomic_write(path, json.dumps(payload, indent=1))


def load_model(path, with_extra=False):
    with open(path) as f:
        payload = _parse_json(f.read(), path)
    model = model_from_json(payload, path)
    if with_extra:
        return model, payload
    return model


# ------------------------------------------------------------------ enrollment

def save_enrollment(path, model: GmmModel, threshold: AnomalyThreshold,
                    scaler: Scaler | None, pca: PcaModel | None, kind: str):
    payload = {"kind": "enrollment", "version": FORMAT_VERSION,
               "gesture_kind": kind,
               "gmm": model_to_json(model),
               "threshold": {"threshold": threshold.threshold,
                             "acceptance_quantile": threshold.acceptance_quantile},
               "scaler": model_to_json(scaler) if scaler is not None else None,
               "pca": model_to_json(pca) if pca is not None else None}
    _atomic_write(path, json.dumps(payload))


def load_enrollment(path):
    with open(path) as f:
        payload = _parse_json(f.read(), path)
    _check_header(payload, "enrollment", path)
    model = model_from_json(payload["gmm"], path)
    threshold = AnomalyThreshold(
        threshold=payload["threshold"]["threshold"],
        acceptance_quantile=payload["threshold"]["acceptance_quantile"])
    scaler = model_from_json(payload["scaler"], path) if payload["scaler"] else None
    pca = model_from_json(payload["pca"], path) if payload["pca"] else None
    return model, threshold, scaler, pca, payload["gesture_kind"]
