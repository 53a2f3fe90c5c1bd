"""Binary logistic and multiclass softmax regression.

Trained by full-batch gradient descent with backtracking line search;
optional L2 penalty excludes the bias term.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelError(ValueError):
    pass


def sigmoid(z):
    """Overflow-safe logistic function."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out if out.ndim else float(out)


def _add_bias(X):
    return np.hstack([np.ones((len(X), 1)), X])


@dataclass
class LogRegModel:
    theta: np.ndarray          # (d+1,), bias first
    classes: list              # [negative, positive]
    l2_lambda: float = 0.0
    iterations: int = 0
    final_loss: float = 0.0


@dataclass
class SoftmaxModel:
    theta: np.ndarray          # (k, d+1), bias column first
    classes: list
    l2_lambda: float = 0.0
    iterations: int = 0
    final_loss: float = 0.0


def logreg_loss_grad(theta, Xb, y, l2_lambda):
    """Mean negative log-likelihood + (lambda/2)|theta_noBias|^2 and gradient."""
    m = len(y)
    z = Xb @ theta
    p = sigmoid(z)
    eps = 1e-300
    loss = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    grad = Xb.T @ (p - y) / m
    if l2_lambda > 0:
        loss += 0.5 * l2_lambda * np.sum(theta[1:] ** 2)
        grad = grad.copy()
        grad[1:] += l2_lambda * theta[1:]
    return loss, grad


def softmax_probs(scores):
    """Row-wise softmax with max subtraction for stability."""
    s = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=1, keepdims=True)


def softmax_loss_grad(theta, Xb, Y, l2_lambda):
    """Mean cross-entropy and gradient; Y is one-hot (m, k), theta (k, d+1)."""
    m = len(Y)
    P = softmax_probs(Xb @ theta.T)
    eps = 1e-300
    loss = -np.sum(Y * np.log(P + eps)) / m
    grad = (P - Y).T @ Xb / m
    if l2_lambda > 0:
        loss += 0.5 * l2_lambda * np.sum(theta[:, 1:] ** 2)
        grad = grad.copy()
        grad[:, 1:] += l2_lambda * theta[:, 1:]
    return loss, grad


def _descend(loss_grad, theta0, max_iter, tol):
    """Gradient descent with backtracking line search on a convex loss."""
    theta = theta0
    loss, grad = loss_grad(theta)
    step = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        gnorm = np.linalg.norm(grad)
        if gnorm < tol:
            break
        step = min(step * 2.0, 1e4)
        while step > 1e-16:
            cand = theta - step * grad
            new_loss, new_grad = loss_grad(cand)
            if new_loss <= loss - 0.5 * step * gnorm ** 2 * 1e-4:
                theta, loss, grad = cand, new_loss, new_grad
                break
            step *= 0.5
        else:
            break
    return theta, loss, it


def logreg_train(X, labels, l2_lambda=0.0, max_iter=5000, tol=1e-6) -> LogRegModel:
    classes = sorted(set(labels))
    if len(classes) != 2:
        raise ModelError(f"logistic regression needs exactly 2 classes, got {len(classes)}")
    y = np.array([classes.index(lbl) for lbl in labels], dtype=float)
    Xb = _add_bias(np.asarray(X, dtype=float))
    theta0 = np.zeros(Xb.shape[1])
    theta, loss, it = _descend(
        lambda t: logreg_loss_grad(t, Xb, y, l2_lambda), theta0, max_iter, tol)
    return LogRegModel(theta=theta, classes=classes, l2_lambda=l2_lambda,
                       iterations=it, final_loss=float(loss))


def logreg_predict(model: LogRegModel, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != len(model.theta) - 1:
        raise ModelError("feature dimension mismatch")
    p = sigmoid(_add_bias(x) @ model.theta)
    labels = [model.classes[1] if pi >= 0.5 else model.classes[0] for pi in p]
    if len(labels) == 1:
        return float(p[0]), labels[0]
    return p, labels


def softmax_train(X, labels, l2_lambda=0.0, max_iter=5000, tol=1e-6) -> SoftmaxModel:
    classes = sorted(set(labels))
    k = len(classes)
    if k < 2:
        raise ModelError("softmax regression needs at least 2 classes")
    idx = np.array([classes.index(lbl) for lbl in labels])
    Y = np.zeros((len(idx), k))
    Y[np.arange(len(idx)), idx] = 1.0
    Xb = _add_bias(np.asarray(X, dtype=float))
    theta0 = np.zeros((k, Xb.shape[1]))
    theta, loss, it = _descend(
        lambda t: softmax_loss_grad(t, Xb, Y, l2_lambda), theta0, max_iter, tol)
    return SoftmaxModel(theta=theta, classes=classes, l2_lambda=l2_lambda,
                        iterations=it, final_loss=float(loss))


def softmax_predict(model: SoftmaxModel, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.theta.shape[1] - 1:
        raise ModelError("feature dimension mismatch")
    P = softmax_probs(_add_bias(x) @ model.theta.T)
    labels = [model.classes[int(np.argmax(row))] for row in P]
    if len(labels) == 1:
        return P[0], labels[0]
    return P, labels
