"""Train/test protocol, metrics, C/gamma grid search, and report generation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .featurization import LabeledDataset
from .svm import KernelSpec, one_vs_rest_train, svm_predict


class EvalError(ValueError):
    pass


# Default decade-stepped axes: C in 1e-3..1e10, gamma in 1e-15..1e3
DEFAULT_C_AXIS = tuple(10.0 ** e for e in range(-3, 11))
DEFAULT_GAMMA_AXIS = tuple(10.0 ** e for e in range(-15, 4))


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (k, k), rows true, cols predicted
    classes: list

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class Metrics:
    accuracy: float
    precision: dict
    recall: dict
    f1: dict
    macro_f1: float
    confusion: ConfusionMatrix
    zero_division_flag: bool = False


@dataclass
class GridSearchResult:
    c_axis: list[float]
    gamma_axis: list[float]
    scores: np.ndarray  # (|C|, |gamma|) CV accuracy
    best_c: float
    best_gamma: float
    best_score: float


def split(dataset: LabeledDataset, train_fraction=0.8, seed=0):
    """Stratified, deterministic train/test split."""
    if not 0 < train_fraction < 1:
        raise EvalError("train_fraction must be in (0, 1)")
    labels = np.asarray(dataset.labels)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < 2:
            raise EvalError(f"class {cls!r} has fewer than 2 samples")
        rng.shuffle(idx)
        n_train = int(round(train_fraction * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.extend(idx[:n_train].tolist())
        test_idx.extend(idx[n_train:].tolist())
    train_idx.sort()
    test_idx.sort()

    def take(ix):
        return LabeledDataset(
            vectors=dataset.vectors[ix],
            labels=[dataset.labels[i] for i in ix],
            gesture_kind=dataset.gesture_kind,
            schema=list(dataset.schema),
            scaler=dataset.scaler,
        )
    return take(train_idx), take(test_idx)


def score(predictions, truth) -> Metrics:
    """Accuracy, per-class precision/recall/F1 (zero-division -> 0, flagged),
    macro F1, and the confusion matrix."""
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise EvalError("predictions and truth must have equal length")
    classes = sorted(set(truth) | set(predictions))
    k = len(classes)
    pos = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((k, k), dtype=int)
    for t, p in zip(truth, predictions):
        counts[pos[t], pos[p]] += 1
    accuracy = float(np.trace(counts)) / len(truth)
    precision, recall, f1 = {}, {}, {}
    flagged = False
    for c in classes:
        i = pos[c]
        tp = counts[i, i]
        pred_total = counts[:, i].sum()
        true_total = counts[i, :].sum()
        if pred_total == 0 or true_total == 0:
            flagged = flagged or pred_total == 0 or true_total == 0
        precision[c] = tp / pred_total if pred_total else 0.0
        recall[c] = tp / true_total if true_total else 0.0
        denom = precision[c] + recall[c]
        f1[c] = 2 * precision[c] * recall[c] / denom if denom else 0.0
        if denom == 0:
            flagged = True
    macro_f1 = float(np.mean([f1[c] for c in classes]))
    return Metrics(accuracy=accuracy, precision=precision, recall=recall,
                   f1=f1, macro_f1=macro_f1,
                   confusion=ConfusionMatrix(counts=counts, classes=classes),
                   zero_division_flag=flagged)


def grid_search(dataset: LabeledDataset, c_axis=DEFAULT_C_AXIS,
                gamma_axis=DEFAULT_GAMMA_AXIS, folds=5, seed=0,
                max_passes=20) -> GridSearchResult:
    """Per-cell stratified CV accuracy for an RBF SVM; best cell by accuracy,
    ties toward smaller C then smaller gamma."""
    from .dimreduce import stratified_folds
    c_axis = list(c_axis)
    gamma_axis = list(gamma_axis)
    if not c_axis or not gamma_axis:
        raise EvalError("grid axes must be non-empty")
    X = np.asarray(dataset.vectors, dtype=float)
    labels = np.asarray(dataset.labels)
    fold = stratified_folds(labels, folds, seed=seed)
    scores = np.zeros((len(c_axis), len(gamma_axis)))
    for gi, gamma in enumerate(gamma_axis):
        kernel = KernelSpec(kind="rbf", gamma=gamma)
        for ci, C in enumerate(c_axis):
            correct = 0
            for f in range(folds):
                tr, te = fold != f, fold == f
                model = one_vs_rest_train(X[tr], labels[tr].tolist(), C, kernel,
                                          max_passes=max_passes)
                _, pred = svm_predict(model, X[te])
                if not isinstance(pred, list):
                    pred = [pred]
                correct += sum(p == t for p, t in zip(pred, labels[te]))
            scores[ci, gi] = correct / len(labels)
    best_ci, best_gi, best = 0, 0, -1.0
    for ci in range(len(c_axis)):
        for gi in range(len(gamma_axis)):
            if scores[ci, gi] > best + 1e-12:
                best, best_ci, best_gi = scores[ci, gi], ci, gi
    return GridSearchResult(c_axis=c_axis, gamma_axis=gamma_axis, scores=scores,
                            best_c=c_axis[best_ci], best_gamma=gamma_axis[best_gi],
                            best_score=float(best))


def run_table3(**kwargs):
    """Accuracy table per (model family x gesture kind); see pipeline.run_table3."""
    from .pipeline import run_table3 as _run
    return _run(**kwargs)


def format_report(rows: list[dict], kinds: list[str]) -> str:
    """Markdown table: one row per model, train/test accuracy per gesture kind."""
    header = "| Model | " + " | ".join(f"{k} (train / test)" for k in kinds) + " |"
    sep = "|" + "---|" * (len(kinds) + 1)
    lines = [header, sep]
    for row in rows:
        cells = []
        for k in kinds:
            tr, te = row["results"].get(k, (None, None))
            cells.append("NA" if tr is None and te is None else
                         f"{'NA' if tr is None else f'{tr:.1%}'} / "
                         f"{'NA' if te is None else f'{te:.1%}'}")
        lines.append(f"| {row['model']} | " + " | ".join(cells) + " |")
    return "\n".join(lines)
