"""Soft-margin kernel SVM trained by sequential minimal optimization (SMO)
on the dual, with linear / polynomial / RBF kernels and one-vs-rest
multiclass.

The solver follows Platt's two-multiplier updates with working-pair
selection by maximal KKT violation (most-violating pair), which makes
training deterministic for a fixed dataset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SvmError(ValueError):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"              # linear | polynomial | rbf
    gamma: float = 0.1             # rbf
    degree: int = 3                # polynomial
    coef0: float = 1.0             # polynomial

    def __post_init__(self):
        if self.kind not in ("linear", "polynomial", "rbf"):
            raise SvmError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.gamma <= 0:
            raise SvmError("rbf gamma must be positive")
        if self.kind == "polynomial" and self.degree < 1:
            raise SvmError("polynomial degree must be >= 1")


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise SvmError("kernel arguments must share a dimension")
    if spec.kind == "linear":
        return float(x @ y)
    if spec.kind == "polynomial":
        return float((x @ y + spec.coef0) ** spec.degree)
    return float(np.exp(-spec.gamma * np.sum((x - y) ** 2)))


def kernel_matrix(spec: KernelSpec, X, Y=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = X if Y is None else np.asarray(Y, dtype=float)
    G = X @ Y.T
    if spec.kind == "linear":
        return G
    if spec.kind == "polynomial":
        return (G + spec.coef0) ** spec.degree
    sq_x = np.sum(X ** 2, axis=1)[:, None]
    sq_y = np.sum(Y ** 2, axis=1)[None, :]
    d2 = np.maximum(sq_x + sq_y - 2.0 * G, 0.0)
    return np.exp(-spec.gamma * d2)


@dataclass
class BinarySvm:
    support_vectors: np.ndarray  # (s, d)
    dual_coef: np.ndarray        # (s,) alpha_i * y_i
    bias: float
    kernel: KernelSpec
    C: float
    converged: bool = True
    train_alpha: np.ndarray | None = None  # full alpha vector, kept for diagnostics

    def decision(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.support_vectors.shape[1]:
            raise SvmError("feature dimension mismatch")
        K = kernel_matrix(self.kernel, X, self.support_vectors)
        return K @ self.dual_coef + self.bias


@dataclass
class SvmModel:
    """Binary or one-vs-rest multiclass SVM."""
    classes: list
    binaries: list[BinarySvm]    # one per class for k>2, single entry for k=2
    kernel: KernelSpec
    C: float

    @property
    def is_multiclass(self) -> bool:
        return len(self.classes) > 2


def _smo(K, y, C, tol=1e-3, max_passes=100, trace=None):
    """Most-violating-pair SMO on a precomputed kernel matrix.

    Returns (alpha, bias, converged). F_i caches the decision value without
    bias minus the label; the pair (argmin over I_up, argmax over I_low)
    is the maximal KKT violation.
    """
    m = len(y)
    alpha = np.zeros(m)
    F = -y.astype(float)
    yK = K * y[None, :]
    max_updates = max(2000, 60 * m) * max(1, max_passes // 100)
    updates = 0
    converged = False

    while updates < max_updates:
        up_mask = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low_mask = ((y < 0) & (alpha < C - 1e-12)) | ((y > 0) & (alpha > 1e-12))
        if not up_mask.any() or not low_mask.any():
            converged = True
            break
        Fu = np.where(up_mask, F, np.inf)
        Fl = np.where(low_mask, F, -np.inf)
        i = int(np.argmin(Fu))   # b_up
        j = int(np.argmax(Fl))   # b_low
        if F[j] - F[i] <= 2 * tol:
            converged = True
            break

        a1, a2 = alpha[i], alpha[j]
        y1, y2 = y[i], y[j]
        s = y1 * y2
        if s > 0:
            L, H = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        else:
            L, H = max(0.0, a2 - a1), min(C, C + a2 - a1)
        if H - L < 1e-14:
            # pair cannot move; nudge F with no change and stop to avoid looping
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta > 1e-14:
            a2_new = a2 + y2 * (F[i] - F[j]) / eta
            a2_new = min(max(a2_new, L), H)
        else:
            # flat direction: move a2 to the bound with the better objective
            f1, f2 = F[i] + y1, F[j] + y2
            L1 = a1 + s * (a2 - L)
            H1 = a1 + s * (a2 - H)
            Lobj = (L1 * f1 + L * f2 - 0.5 * L1 ** 2 * K[i, i]
                    - 0.5 * L ** 2 * K[j, j] - s * L * L1 * K[i, j])
            Hobj = (H1 * f1 + H * f2 - 0.5 * H1 ** 2 * K[i, i]
                    - 0.5 * H ** 2 * K[j, j] - s * H * H1 * K[i, j])
            if Lobj > Hobj + 1e-12:
                a2_new = L
            elif Hobj > Lobj + 1e-12:
                a2_new = H
            else:
                break
        if abs(a2_new - a2) < 1e-14:
            break
        a1_new = a1 + s * (a2 - a2_new)
        alpha[i], alpha[j] = a1_new, a2_new
        F = F + yK[:, i] * (a1_new - a1) + yK[:, j] * (a2_new - a2)
        updates += 1
        if trace is not None:
            trace.append(dual_objective(alpha, y, K))

    # bias from free support vectors, else midpoint of the KKT gap
    free = (alpha > 1e-9) & (alpha < C - 1e-9)
    if free.any():
        bias = float(np.mean(-F[free]))
    else:
        up_mask = ((y > 0) & (alpha < C - 1e-12)) | ((y < 0) & (alpha > 1e-12))
        low_mask = ((y < 0) & (alpha < C - 1e-12)) | ((y > 0) & (alpha > 1e-12))
        b_up = F[up_mask].min() if up_mask.any() else 0.0
        b_low = F[low_mask].max() if low_mask.any() else 0.0
        bias = float(-(b_up + b_low) / 2.0)
    return alpha, bias, converged


def dual_objective(alpha, y, K) -> float:
    """W(alpha) = sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij."""
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def svm_train_binary(X, y, C, kernel: KernelSpec, tol=1e-3, max_passes=100,
                     trace=None) -> BinarySvm:
    """Train on +-1 labels. Support vectors are the alpha > 0 points."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise SvmError("binary training needs both +1 and -1 labels")
    if C <= 0:
        raise SvmError("C must be positive")
    K = kernel_matrix(kernel, X)
    # stop the pair loop at half the requested tolerance so the final KKT
    # conditions hold within `tol` once the bias is fixed
    alpha, bias, converged = _smo(K, y, C, tol=tol / 2, max_passes=max_passes,
                                  trace=trace)
    sv = alpha > 1e-9
    if not sv.any():
        sv = np.zeros(len(y), dtype=bool)
        sv[0] = True
    return BinarySvm(support_vectors=X[sv].copy(),
                     dual_coef=(alpha * y)[sv],
                     bias=bias, kernel=kernel, C=C, converged=converged,
                     train_alpha=alpha)


def svm_predict(model, x):
    """Decision value(s) and label(s); multiclass picks the argmax one-vs-rest
    decision, ties to the lowest class index."""
    if isinstance(model, BinarySvm):
        d = model.decision(x)
        labels = np.where(d >= 0, 1, -1)
        if d.shape == (1,):
            return float(d[0]), int(labels[0])
        return d, labels
    scores = np.column_stack([b.decision(x) for b in model.binaries])
    if len(model.classes) == 2:
        d = scores[:, 0]
        labels = [model.classes[1] if v >= 0 else model.classes[0] for v in d]
    else:
        idx = scores.argmax(axis=1)
        labels = [model.classes[i] for i in idx]
        d = scores
    if len(labels) == 1:
        return (d[0], labels[0])
    return d, labels


def one_vs_rest_train(X, labels, C, kernel: KernelSpec, tol=1e-3,
                      max_passes=100) -> SvmModel:
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise SvmError("need at least 2 classes")
    labels = list(labels)
    for cls in classes:
        if labels.count(cls) == 0:
            raise SvmError(f"class {cls!r} is empty")
    X = np.asarray(X, dtype=float)
    binaries = []
    targets = classes[1:2] if len(classes) == 2 else classes
    for cls in targets:
        y = np.array([1.0 if lbl == cls else -1.0 for lbl in labels])
        binaries.append(svm_train_binary(X, y, C, kernel, tol=tol,
                                         max_passes=max_passes))
    return SvmModel(classes=classes, binaries=binaries, kernel=kernel, C=C)


def kkt_violations(binary: BinarySvm, X, y, alpha, tol=1e-3) -> int:
    """Count training points violating the KKT conditions beyond `tol`:
    alpha=0 needs y*f >= 1-tol, free alpha needs |y*f - 1| <= tol,
    alpha=C needs y*f <= 1+tol."""
    yf = np.asarray(y, dtype=float) * binary.decision(X)
    C = binary.C
    bad = 0
    for a, m in zip(alpha, yf):
        if a < 1e-9:
            bad += m < 1 - tol
        elif a > C - 1e-9:
            bad += m > 1 + tol
        else:
            bad += abs(m - 1) > tol
    return int(bad)
