import itertools

import numpy as np
import pytest

from touchguard.svm import (BinarySvm, KernelSpec, SvmError, dual_objective,
                            kernel_eval, kernel_matrix, kkt_violations,
                            one_vs_rest_train, svm_predict, svm_train_binary)


def brute_force_dual(X, y, C, kernel, steps=13, levels=4):
    """Independent oracle: grid maximization of the dual over feasible alpha.

    Grids the first n-1 multipliers, solves the last from sum(alpha*y) = 0,
    then refines around the best cell.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    K = kernel_matrix(kernel, X)
    Q = K * np.outer(y, y)

    lo = np.zeros(n - 1)
    hi = np.full(n - 1, C)
    best_alpha, best_obj = None, -np.inf
    for _ in range(levels):
        axes = [np.linspace(lo[i], hi[i], steps) for i in range(n - 1)]
        grid = np.array(list(itertools.product(*axes)))
        last = -y[-1] * (grid @ y[:-1])
        ok = (last >= -1e-12) & (last <= C + 1e-12)
        if not ok.any():
            break
        alphas = np.column_stack([grid[ok], np.clip(last[ok], 0, C)])
        objs = alphas.sum(axis=1) - 0.5 * np.einsum("ki,ij,kj->k", alphas, Q, alphas)
        i = int(np.argmax(objs))
        if objs[i] > best_obj:
            best_obj = float(objs[i])
            best_alpha = alphas[i]
        span = (hi - lo) / (steps - 1)
        lo = np.maximum(best_alpha[:-1] - span, 0.0)
        hi = np.minimum(best_alpha[:-1] + span, C)
    return best_alpha, best_obj


def test_kernel_values():
    x = np.array([1.0, 0.0])
    y = np.array([0.0, 1.0])
    assert kernel_eval(KernelSpec(kind="linear"), x, y) == 0.0
    assert kernel_eval(KernelSpec(kind="rbf", gamma=0.5), x, x) == 1.0
    a = np.zeros(4)
    b = np.full(4, 5.0)  # |a-b|^2 = 100
    assert kernel_eval(KernelSpec(kind="rbf", gamma=0.01), a, b) == \
        pytest.approx(np.exp(-1.0), abs=1e-12)
    assert kernel_eval(KernelSpec(kind="polynomial", degree=2, coef0=1.0),
                       x, y) == pytest.approx(1.0)


def test_kernel_symmetry():
    rng = np.random.default_rng(0)
    specs = [KernelSpec(kind="linear"), KernelSpec(kind="rbf", gamma=0.3),
             KernelSpec(kind="polynomial", degree=3, coef0=0.5)]
    for spec in specs:
        for _ in range(20):
            x, y = rng.normal(size=(2, 5))
            assert kernel_eval(spec, x, y) == pytest.approx(
                kernel_eval(spec, y, x), abs=1e-12)


def test_kernel_spec_validation():
    with pytest.raises(SvmError):
        KernelSpec(kind="rbf", gamma=0.0)
    with pytest.raises(SvmError):
        KernelSpec(kind="sigmoid")


def test_two_point_analytic_solution():
    X = np.array([[-1.0], [1.0]])
    y = np.array([-1.0, 1.0])
    model = svm_train_binary(X, y, C=100.0, kernel=KernelSpec(kind="linear"))
    # decision function f(x) = x: both points support vectors with alpha 0.5
    assert np.allclose(np.sort(np.abs(model.dual_coef)), [0.5, 0.5], atol=1e-6)
    assert model.bias == pytest.approx(0.0, abs=1e-6)
    d, _ = svm_predict(model, np.array([[0.0]]))
    assert d == pytest.approx(0.0, abs=1e-6)
    d, lbl = svm_predict(model, np.array([[0.7]]))
    assert d == pytest.approx(0.7, abs=1e-6) and lbl == 1


def test_xor_linear_fails_rbf_succeeds():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([-1.0, 1.0, 1.0, -1.0])
    lin = svm_train_binary(X, y, C=10.0, kernel=KernelSpec(kind="linear"))
    _, pred = svm_predict(lin, X)
    assert np.mean(pred == y) <= 0.75
    rbf = svm_train_binary(X, y, C=10.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
    _, pred = svm_predict(rbf, X)
    assert np.mean(pred == y) == 1.0


def test_feature_scaling_gamma_invariance():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 3))
    y = np.sign(X[:, 0] + 0.5 * X[:, 1] + 0.1)
    y[y == 0] = 1
    c = 3.0
    m1 = svm_train_binary(X, y, C=5.0, kernel=KernelSpec(kind="rbf", gamma=0.7))
    m2 = svm_train_binary(c * X, y, C=5.0,
                          kernel=KernelSpec(kind="rbf", gamma=0.7 / c ** 2))
    Xt = rng.normal(size=(20, 3))
    d1, _ = svm_predict(m1, Xt)
    d2, _ = svm_predict(m2, c * Xt)
    assert np.allclose(d1, d2, atol=1e-6)


@pytest.mark.parametrize("seed,n,C,kind", [
    (0, 4, 1.0, "linear"), (1, 5, 1.0, "rbf"), (2, 6, 2.0, "rbf"),
    (3, 6, 0.5, "linear"), (4, 5, 2.0, "polynomial"),
])
def test_smo_matches_brute_force_dual(seed, n, C, kind):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = np.array([1.0] * (n // 2) + [-1.0] * (n - n // 2))
    rng.shuffle(y)
    if len(set(y)) < 2:
        y[0] = -y[0]
    kernel = {"linear": KernelSpec(kind="linear"),
              "rbf": KernelSpec(kind="rbf", gamma=0.8),
              "polynomial": KernelSpec(kind="polynomial", degree=2, coef0=1.0)}[kind]
    model = svm_train_binary(X, y, C=C, kernel=kernel, tol=1e-4)
    K = kernel_matrix(kernel, X)
    smo_obj = dual_objective(model.train_alpha, y, K)
    _, bf_obj = brute_force_dual(X, y, C, kernel)
    assert smo_obj == pytest.approx(bf_obj, abs=1e-3)
    assert smo_obj >= bf_obj - 1e-3  # SMO should not be beaten by the grid


def test_dual_feasibility_and_kkt():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(60, 4))
    y = np.sign(X[:, 0] - X[:, 2] + 0.3 * rng.normal(size=60))
    y[y == 0] = 1
    for C in (0.5, 10.0):
        model = svm_train_binary(X, y, C=C, kernel=KernelSpec(kind="rbf", gamma=0.5))
        alpha = model.train_alpha
        assert np.all(alpha >= -1e-9) and np.all(alpha <= C + 1e-9)
        assert abs(np.sum(alpha * y)) <= 1e-6
        assert kkt_violations(model, X, y, alpha, tol=1e-3) == 0
        # free support vectors sit on the margin
        free = (alpha > 1e-6) & (alpha < C - 1e-6)
        if free.any():
            yf = y[free] * model.decision(X[free])
            assert np.all(np.abs(yf - 1) <= 1e-3 + 1e-6)


def test_smo_objective_monotone():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(25, 3))
    y = np.sign(X[:, 0] + 0.2)
    y[y == 0] = 1
    trace = []
    svm_train_binary(X, y, C=2.0, kernel=KernelSpec(kind="rbf", gamma=1.0),
                     trace=trace)
    diffs = np.diff(trace)
    assert np.all(diffs >= -1e-9)


def test_multiclass_separable_clusters():
    rng = np.random.default_rng(7)
    centers = np.array([[0, 0], [10, 0], [0, 10]], dtype=float)
    Xtr = np.concatenate([c + rng.normal(0, 0.5, size=(20, 2)) for c in centers])
    Xte = np.concatenate([c + rng.normal(0, 0.5, size=(8, 2)) for c in centers])
    labels = sum([[f"c{i}"] * 20 for i in range(3)], [])
    truth = sum([[f"c{i}"] * 8 for i in range(3)], [])
    model = one_vs_rest_train(Xtr, labels, C=10.0,
                              kernel=KernelSpec(kind="rbf", gamma=0.5))
    assert len(model.binaries) == 3
    _, pred = svm_predict(model, Xte)
    assert pred == truth


def test_two_class_ovr_equals_binary():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 2))
    labels = ["a" if x[0] > 0 else "b" for x in X]
    ovr = one_vs_rest_train(X, labels, C=5.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
    assert len(ovr.binaries) == 1
    y = np.array([1.0 if l == "b" else -1.0 for l in labels])
    binary = svm_train_binary(X, y, C=5.0, kernel=KernelSpec(kind="rbf", gamma=1.0))
    Xt = rng.normal(size=(15, 2))
    d_ovr, _ = svm_predict(ovr, Xt)
    d_bin, _ = svm_predict(binary, Xt)
    assert np.allclose(d_ovr, d_bin, atol=1e-9)


def test_preset_parameter_fixtures_plumb_through():
    # regression fixtures for parameter plumbing, not accuracy claims
    fixtures = {"tap": (10.0, 0.01), "circle": (1000.0, 0.01), "random": (0.1, 1000.0)}
    rng = np.random.default_rng(9)
    X = rng.normal(size=(20, 2))
    labels = ["a" if x[0] > 0 else "b" for x in X]
    for C, gamma in fixtures.values():
        model = one_vs_rest_train(X, labels, C=C,
                                  kernel=KernelSpec(kind="rbf", gamma=gamma))
        assert model.C == C
        assert model.kernel.gamma == gamma
        for b in model.binaries:
            assert np.all(np.abs(b.dual_coef) <= C + 1e-9)


def test_single_class_rejected():
    with pytest.raises(SvmError):
        svm_train_binary(np.ones((4, 2)), np.ones(4), C=1.0,
                         kernel=KernelSpec(kind="linear"))
    with pytest.raises(SvmError):
        one_vs_rest_train(np.ones((4, 2)), ["a"] * 4, C=1.0,
                          kernel=KernelSpec(kind="linear"))
