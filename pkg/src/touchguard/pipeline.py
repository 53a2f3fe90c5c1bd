"""End-to-end glue: corpus -> events -> datasets -> models -> report.

Shared by the CLI, the auth service, and the evaluation harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import anomaly, capsim, dimreduce, evaluation, linmodels, segmentation, svm
from .capsim import RawRecording, SensorConfig
from .featurization import (PRESETS, FeatureConfig, LabeledDataset, build_dataset,
                            normalize_apply, normalize_fit)


class PipelineError(ValueError):
    pass


def auto_threshold(recording: RawRecording) -> float:
    """Touch threshold without truth annotations: the quietest frames are
    noise-only (every gesture is padded with noise frames), so calibrate on
    frames whose maximum sits near the low percentile of per-frame maxima."""
    maxima = recording.frames.reshape(len(recording.frames), -1).max(axis=1)
    floor = np.percentile(maxima, 5)
    noise = recording.frames[maxima < 1.5 * max(floor, 1e-9)]
    if len(noise) < 10:
        noise = recording.frames[np.argsort(maxima)[:10]]
    return segmentation.calibrate_threshold(noise)


def labeled_events(recording: RawRecording, threshold: float | None = None):
    """Segment and attach truth labels by span overlap.

    Returns (events, labels, kinds) keeping only events that overlap exactly
    one truth span.
    """
    if recording.truth is None:
        raise PipelineError("recording has no truth annotations")
    if threshold is None:
        threshold = auto_threshold(recording)
    events = segmentation.detect_events(recording, threshold)
    spans = sorted(recording.truth, key=lambda s: s.start)
    out_events, labels, kinds = [], [], []
    for ev in events:
        hits = [s for s in spans
                if s.start <= ev.end_index and ev.start_index <= s.end]
        if len(hits) == 1:
            out_events.append(ev)
            labels.append(hits[0].user_id)
            kinds.append(hits[0].kind)
    return out_events, labels, kinds


def corpus_datasets(recording: RawRecording,
                    configs: dict[str, FeatureConfig] | None = None,
                    threshold: float | None = None) -> dict[str, LabeledDataset]:
    """One labeled dataset per gesture kind present in the corpus."""
    configs = configs or PRESETS
    events, labels, kinds = labeled_events(recording, threshold)
    out = {}
    for kind in sorted(set(kinds)):
        sel = [i for i, k in enumerate(kinds) if k == kind]
        out[kind] = build_dataset([events[i] for i in sel],
                                  [labels[i] for i in sel],
                                  configs[kind], kind)
    return out


@dataclass
class GmmDetector:
    """Per-user anomaly detector with its preprocessing chain."""
    model: anomaly.GmmModel
    threshold: anomaly.AnomalyThreshold
    scaler: object
    pca: dimreduce.PcaModel | None

    def score(self, vectors: np.ndarray):
        X = normalize_apply(self.scaler, np.atleast_2d(vectors))
        if self.pca is not None:
            X = dimreduce.pca_transform(self.pca, X)
        return anomaly.gmm_score(self.model, X)

    def accept(self, vectors: np.ndarray):
        s = self.score(vectors)
        return np.asarray(s) >= self.threshold.threshold, s


def _choose_k(X, k_max, reg_eps, seed):
    """Holdout log-likelihood sweep over k = 1..k_max."""
    rng = np.random.default_rng(seed)
    idx = rng.permutation(len(X))
    cut = max(2, int(0.8 * len(X)))
    tr, ho = X[idx[:cut]], X[idx[cut:]]
    if len(ho) < 2:
        return 1
    best_k, best_ll = 1, -np.inf
    for k in range(1, k_max + 1):
        if len(tr) < 5 * k:
            break
        m = anomaly.gmm_fit(tr, k=k, reg_eps=reg_eps, seed=seed)
        ll = anomaly.log_likelihood(m, ho) / len(ho)
        if ll > best_ll + 1e-9:
            best_k, best_ll = k, ll
    return best_k


def fit_gmm_detector(dataset: LabeledDataset, k="auto", reg_eps=1e-3, seed=0,
                     variance_target=0.9, acceptance_quantile=0.05,
                     use_pca=True) -> GmmDetector:
    """Normalize, optionally PCA-reduce, fit the mixture, and calibrate the
    user threshold from the training scores. `k="auto"` sweeps 1..3 by
    holdout log-likelihood."""
    norm, scaler = normalize_fit(dataset)
    X = norm.vectors
    pca = None
    if use_pca:
        pca = dimreduce.pca_fit(X, variance_target)
        X = dimreduce.pca_transform(pca, X)
    if k == "auto":
        k = _choose_k(X, 3, reg_eps, seed)
    k = min(k, len(X))
    model = anomaly.gmm_fit(X, k=k, reg_eps=reg_eps, seed=seed)
    scores = anomaly.gmm_score(model, X)
    threshold = anomaly.calibrate_threshold(scores, acceptance_quantile)
    return GmmDetector(model=model, threshold=threshold, scaler=scaler, pca=pca)


def default_corpus(n_users=4, taps=200, circles=100, randoms=100, seed=0,
                   spread=1.0, config: SensorConfig | None = None) -> RawRecording:
    """The evaluation corpus shape: all users tap and draw circles, the first
    two users also draw random patterns."""
    config = config or SensorConfig()
    profiles = capsim.make_profiles(n_users, spread=spread, seed=seed)
    parts = []
    if taps or circles:
        counts = {}
        if taps:
            counts["tap"] = taps
        if circles:
            counts["circle"] = circles
        parts.append(capsim.synth_corpus(profiles, counts, config, seed))
    if randoms:
        parts.append(capsim.synth_corpus(profiles[:2], {"random": randoms},
                                         config, seed + 7919))
    frames = np.concatenate([p.frames for p in parts], axis=0)
    truth, offset = [], 0
    for p in parts:
        for s in p.truth:
            truth.append(capsim.TruthSpan(s.start + offset, s.end + offset,
                                          s.user_id, s.kind))
        offset += len(p.frames)
    timestamps = np.arange(len(frames)) / config.frame_rate
    return RawRecording(config=config, frames=frames, timestamps=timestamps,
                        truth=truth)


def run_table3(seeds=(0, 1, 2), n_users=4, taps=200, circles=100, randoms=100,
               svm_params=None, grid_kind=None, gmm_k="auto", spread=1.0,
               train_fraction=0.8):
    """Accuracy table over (model family x gesture kind), averaged over seeds.

    `svm_params` maps kind -> (C, gamma); kinds listed in `grid_kind` run a
    full C/gamma grid search on the first seed's training split instead.
    Returns (rows, markdown, details).
    """
    svm_params = dict(svm_params or {})
    grid_kind = set(grid_kind or ())
    kinds_present = ["tap", "circle", "random"]
    acc = {name: {k: [] for k in kinds_present}
           for name in ("logreg_binary", "softmax", "svm", "gmm_pass", "gmm_fail")}
    train_acc = {name: {k: [] for k in kinds_present} for name in acc}
    details = {"svm_params": {}, "grid": {}}

    for si, seed in enumerate(seeds):
        rec = default_corpus(n_users=n_users, taps=taps, circles=circles,
                             randoms=randoms, seed=seed, spread=spread)
        datasets = corpus_datasets(rec)
        for kind, ds in datasets.items():
            train, test = evaluation.split(ds, train_fraction, seed=seed)
            norm_train, scaler = normalize_fit(train)
            Xtr, Xte = norm_train.vectors, normalize_apply(scaler, test.vectors)

            # binary logistic: first two users
            classes = sorted(set(train.labels))
            two = set(classes[:2])
            btr = [i for i, l in enumerate(train.labels) if l in two]
            bte = [i for i, l in enumerate(test.labels) if l in two]
            lr = linmodels.logreg_train(Xtr[btr], [train.labels[i] for i in btr])
            _, pred_tr = linmodels.logreg_predict(lr, Xtr[btr])
            _, pred_te = linmodels.logreg_predict(lr, Xte[bte])
            pred_tr = pred_tr if isinstance(pred_tr, list) else [pred_tr]
            pred_te = pred_te if isinstance(pred_te, list) else [pred_te]
            train_acc["logreg_binary"][kind].append(evaluation.score(
                pred_tr, [train.labels[i] for i in btr]).accuracy)
            acc["logreg_binary"][kind].append(evaluation.score(
                pred_te, [test.labels[i] for i in bte]).accuracy)

            # softmax over all users of this kind (skipped for 2-class random
            # where it coincides with binary logistic)
            if len(classes) > 2:
                sm = linmodels.softmax_train(Xtr, train.labels)
                _, p_tr = linmodels.softmax_predict(sm, Xtr)
                _, p_te = linmodels.softmax_predict(sm, Xte)
                train_acc["softmax"][kind].append(
                    evaluation.score(p_tr, train.labels).accuracy)
                acc["softmax"][kind].append(
                    evaluation.score(p_te, test.labels).accuracy)

            # SVM-RBF with given or grid-searched parameters
            if kind in grid_kind and kind not in details["svm_params"]:
                gr = evaluation.grid_search(norm_train, folds=3, seed=seed)
                details["grid"][kind] = gr
                details["svm_params"][kind] = (gr.best_c, gr.best_gamma)
            C, gamma = details["svm_params"].get(kind) or svm_params.get(
                kind, (10.0, 0.01))
            model = svm.one_vs_rest_train(Xtr, train.labels, C,
                                          svm.KernelSpec(kind="rbf", gamma=gamma))
            _, p_tr = svm.svm_predict(model, Xtr)
            _, p_te = svm.svm_predict(model, Xte)
            p_tr = p_tr if isinstance(p_tr, list) else [p_tr]
            p_te = p_te if isinstance(p_te, list) else [p_te]
            train_acc["svm"][kind].append(evaluation.score(p_tr, train.labels).accuracy)
            acc["svm"][kind].append(evaluation.score(p_te, test.labels).accuracy)

            # GMM anomaly: per user, pass = genuine acceptance on held-out
            # gestures, fail = impostor true-rejection
            pass_rates, fail_rates = [], []
            for user in classes:
                own_tr = train.vectors[[i for i, l in enumerate(train.labels) if l == user]]
                own_te = test.vectors[[i for i, l in enumerate(test.labels) if l == user]]
                other_te = test.vectors[[i for i, l in enumerate(test.labels) if l != user]]
                det = fit_gmm_detector(LabeledDataset(
                    vectors=own_tr, labels=[user] * len(own_tr),
                    gesture_kind=kind, schema=list(ds.schema)), k=gmm_k, seed=seed)
                ok, _ = det.accept(own_te)
                pass_rates.append(float(np.mean(ok)))
                rej, _ = det.accept(other_te)
                fail_rates.append(float(1.0 - np.mean(rej)))
            acc["gmm_pass"][kind].append(float(np.mean(pass_rates)))
            acc["gmm_fail"][kind].append(float(np.mean(fail_rates)))

    def avg(vals):
        return float(np.mean(vals)) if vals else None

    rows = []
    names = {"logreg_binary": "Log Reg (Binary)", "softmax": "Log Reg (Softmax)",
             "svm": "SVM", "gmm_pass": "Mult Gauss (pass)",
             "gmm_fail": "Mult Gauss (fail)"}
    for key, name in names.items():
        results = {}
        for kind in kinds_present:
            tr = avg(train_acc[key][kind]) if key in ("logreg_binary", "softmax", "svm") else None
            te = avg(acc[key][kind])
            if te is not None:
                results[kind] = (tr, te)
        rows.append({"model": name, "results": results})
    markdown = evaluation.format_report(rows, kinds_present)
    return rows, markdown, details
