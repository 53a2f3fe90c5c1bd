"""Feature selection (RFECV) and dimensionality reduction (PCA).

RFECV repeatedly trains a linear-kernel SVM, ranks features by squared
weight (summed over one-vs-rest sub-models), drops the lowest-ranked, and
keeps the feature count with the best stratified k-fold CV accuracy.

PCA eigen-decomposes the sample covariance with an in-repo cyclic Jacobi
solver; when there are fewer samples than features it works on the Gram
matrix instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .featurization import LabeledDataset
from .svm import KernelSpec, SvmModel, one_vs_rest_train, svm_predict


class DimReduceError(ValueError):
    pass


@dataclass
class FeatureMask:
    selected: list[int]                       # schema indices, ascending
    score_trace: list[tuple[int, float]]      # (active feature count, CV accuracy)


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray               # (q, d) orthonormal rows
    explained_variance_ratio: np.ndarray


# ---------------------------------------------------------------- eigensolver

def jacobi_eigh(A, tol=1e-12, max_sweeps=60):
    """Symmetric eigendecomposition by cyclic Jacobi rotations.

    Returns (eigenvalues desc, eigenvectors as columns).
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimReduceError("matrix must be square")
    V = np.eye(n)
    if n == 1:
        return A[0].copy(), V
    scale = np.max(np.abs(A)) or 1.0
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= tol * scale:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w)[::-1]
    return w[order], V[:, order]


# ------------------------------------------------------------------------ PCA

def pca_fit(X, variance_target=0.9) -> PcaModel:
    """Keep the smallest component count reaching `variance_target` cumulative
    explained variance."""
    X = np.asarray(X, dtype=float)
    m, d = X.shape
    if m < 2:
        raise DimReduceError("need at least 2 samples")
    if not 0 < variance_target <= 1:
        raise DimReduceError("variance_target must be in (0, 1]")
    mean = X.mean(axis=0)
    Xc = X - mean

    if m < d:
        # Gram-matrix route: eigvecs of X Xc^T map to covariance eigvecs
        G = Xc @ Xc.T / (m - 1)
        w, U = jacobi_eigh(G)
        w = np.maximum(w, 0.0)
        keep = w > max(w.max(), 1e-300) * 1e-12
        w, U = w[keep], U[:, keep]
        comps = (Xc.T @ U) / np.sqrt(np.maximum(w * (m - 1), 1e-300))
        comps = comps.T  # rows are directions
    else:
        cov = Xc.T @ Xc / (m - 1)
        w, V = jacobi_eigh(cov)
        w = np.maximum(w, 0.0)
        keep = w > max(w.max(), 1e-300) * 1e-12
        w = w[keep]
        comps = V[:, keep].T

    total = w.sum()
    ratios = w / total if total > 0 else np.zeros_like(w)
    cum = np.cumsum(ratios)
    q = int(np.searchsorted(cum, variance_target - 1e-12) + 1)
    q = min(q, len(w))
    return PcaModel(mean=mean, components=comps[:q],
                    explained_variance_ratio=ratios[:q])


def pca_transform(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (x - model.mean) @ model.components.T


def pca_inverse(model: PcaModel, z) -> np.ndarray:
    return np.asarray(z, dtype=float) @ model.components + model.mean


# ---------------------------------------------------------------------- RFECV

def stratified_folds(labels, k, seed=0):
    """Deterministic stratified k-fold assignment; returns fold index per row."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    fold = np.empty(len(labels), dtype=int)
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        fold[idx] = np.arange(len(idx)) % k
    return fold


def _linear_weights(model: SvmModel) -> np.ndarray:
    """Sum over one-vs-rest sub-models of squared linear weights w_j^2."""
    d = model.binaries[0].support_vectors.shape[1]
    total = np.zeros(d)
    for b in model.binaries:
        w = b.dual_coef @ b.support_vectors
        total += w ** 2
    return total


def _cv_accuracy(X, labels, fold, k, C, kernel, max_passes):
    correct = 0
    labels_arr = np.asarray(labels)
    for f in range(k):
        tr, te = fold != f, fold == f
        if len(set(labels_arr[tr].tolist())) < 2 or not te.any():
            raise DimReduceError("degenerate single-class fold; re-stratify")
        model = one_vs_rest_train(X[tr], labels_arr[tr].tolist(), C, kernel,
                                  max_passes=max_passes)
        _, pred = svm_predict(model, X[te])
        if not isinstance(pred, list):
            pred = [pred]
        correct += sum(p == t for p, t in zip(pred, labels_arr[te]))
    return correct / len(labels_arr)


def rfecv(dataset: LabeledDataset, folds=10, step=None, C=1.0, seed=0,
          max_passes=30, refine_below=50) -> FeatureMask:
    """Backward feature elimination scored by linear-SVM CV accuracy.

    `step=None` removes max(1, 5% of active features) per iteration, and a
    step of 1 below `refine_below` active features. Returns the mask at the
    feature count with the best CV accuracy, ties toward fewer features.
    """
    X = np.asarray(dataset.vectors, dtype=float)
    labels = list(dataset.labels)
    m, d = X.shape
    if folds < 2:
        raise DimReduceError("folds must be >= 2")
    if m < folds:
        raise DimReduceError("need at least `folds` rows")
    col_std = X.std(axis=0)
    if np.any(np.abs(X.mean(axis=0)) > 1.0) or np.any(col_std > 10.0):
        import warnings
        warnings.warn("rfecv expects normalized features", stacklevel=2)

    kernel = KernelSpec(kind="linear")
    fold = stratified_folds(labels, folds, seed=seed)
    active = list(range(d))
    trace = []
    masks = {}

    while True:
        acc = _cv_accuracy(X[:, active], labels, fold, folds, C, kernel, max_passes)
        trace.append((len(active), acc))
        masks[len(active)] = list(active)
        if len(active) == 1:
            break
        model = one_vs_rest_train(X[:, active], labels, C, kernel,
                                  max_passes=max_passes)
        ranking = _linear_weights(model)
        if step is not None:
            drop = min(step, len(active) - 1)
        elif len(active) <= refine_below:
            drop = 1
        else:
            drop = max(1, int(0.05 * len(active)))
            drop = min(drop, len(active) - 1)
        order = np.argsort(ranking)  # ascending: weakest first
        dead = set(order[:drop].tolist())
        active = [f for i, f in enumerate(active) if i not in dead]

    best_acc = max(a for _, a in trace)
    best_count = min(c for c, a in trace if a >= best_acc - 1e-12)
    return FeatureMask(selected=sorted(masks[best_count]), score_trace=trace)


def apply_mask(dataset: LabeledDataset, mask: FeatureMask) -> LabeledDataset:
    sel = mask.selected
    return LabeledDataset(
        vectors=dataset.vectors[:, sel],
        labels=list(dataset.labels),
        gesture_kind=dataset.gesture_kind,
        schema=[dataset.schema[i] for i in sel],
        scaler=None,
    )


def heatmap_export(mask: FeatureMask, schema: list[str]):
    """Aggregate selected pressure features over frames into a (row, col)
    count grid; velocity/duration selections are reported separately."""
    import re
    grid: dict[tuple[int, int], int] = {}
    side: dict[str, int] = {}
    for i in mask.selected:
        desc = schema[i]
        m = re.match(r"frame\d+:pressure\((\d+),(\d+)\)", desc)
        if m:
            key = (int(m.group(1)), int(m.group(2)))
            grid[key] = grid.get(key, 0) + 1
        else:
            name = desc.split(":")[-1]
            side[name] = side.get(name, 0) + 1
    n = 1 + max((max(r, c) for r, c in grid), default=-1)
    arr = np.zeros((n, n), dtype=int)
    for (r, c), v in grid.items():
        arr[r, c] = v
    return arr, side
