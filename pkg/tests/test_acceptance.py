"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with `pytest -v -s tests/test_acceptance.py` to see them
inline; plain `pytest` shows them for failing tests)."""

import hashlib
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from test_svm import brute_force_dual
from touchguard import (anomaly, capsim, dimreduce, evaluation, linmodels,
                        pipeline, segmentation, store, svm)
from touchguard.anomaly import _component_log_joint, _logsumexp
from touchguard.authd import create_app
from touchguard.featurization import (ALLOWED_F, ALLOWED_N, PRESETS,
                                      FeatureConfig, LabeledDataset,
                                      featurize, normalize_fit)


def check(name, ok, detail=""):
    line = f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print("\n" + line)
    assert ok, line


def test_feature_length_law():
    tap_len = PRESETS["tap"].length
    ok = tap_len == 126
    combos_ok = True
    config = capsim.SensorConfig()
    profile = capsim.make_profiles(1, seed=0)[0]
    frames, (s, e) = capsim.synth_gesture(profile, "circle", config, [1])
    event = segmentation.GestureEvent(frames=frames[s:e + 1], start_index=s,
                                      end_index=e, frame_rate=config.frame_rate)
    for n in ALLOWED_N:
        for f in ALLOWED_F:
            for vel in (False, True):
                for dur in (False, True):
                    cfg = FeatureConfig(window_n=n, frames_f=f,
                                        include_velocity=vel,
                                        include_duration=dur)
                    expect = f * n * n + (2 * f if vel else 0) + (1 if dur else 0)
                    fv = featurize(event, cfg)
                    combos_ok &= cfg.length == expect == len(fv.values) == len(fv.schema)
    check("feature-length law", ok and combos_ok,
          f"taps={tap_len}, all (n,f) combos exact: {combos_ok}")


def test_gradient_correctness():
    rng = np.random.default_rng(0)
    m, d, k = 20, 4, 3
    X = rng.normal(size=(m, d))
    Xb = np.hstack([np.ones((m, 1)), X])
    y = rng.integers(0, 2, m).astype(float)
    Y = np.eye(k)[rng.integers(0, k, m)]
    h = 1e-6
    worst = 0.0

    def central(fun, theta):
        g = np.zeros_like(theta)
        it = np.nditer(theta, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            tp, tm = theta.copy(), theta.copy()
            tp[i] += h
            tm[i] -= h
            g[i] = (fun(tp)[0] - fun(tm)[0]) / (2 * h)
        return g

    for _ in range(10):
        theta = rng.normal(size=d + 1)
        loss, grad = linmodels.logreg_loss_grad(theta, Xb, y, 0.1)
        num = central(lambda t: linmodels.logreg_loss_grad(t, Xb, y, 0.1), theta)
        worst = max(worst, np.max(np.abs(grad - num) / (np.abs(num) + 1e-8)))
    for _ in range(10):
        theta = rng.normal(size=(k, d + 1))
        loss, grad = linmodels.softmax_loss_grad(theta, Xb, Y, 0.1)
        num = central(lambda t: linmodels.softmax_loss_grad(t, Xb, Y, 0.1), theta)
        worst = max(worst, np.max(np.abs(grad - num) / (np.abs(num) + 1e-8)))
    check("gradient correctness", worst < 1e-5, f"worst relative error {worst:.2e}")


def test_svm_oracle():
    rng = np.random.default_rng(1)
    ok = True
    details = []
    instances = [
        (rng.normal(size=(4, 2)), np.array([1, 1, -1, -1.0]), 1.0,
         svm.KernelSpec(kind="linear")),
        (rng.normal(size=(5, 2)), np.array([1, -1, 1, -1, 1.0]), 0.7,
         svm.KernelSpec(kind="rbf", gamma=0.5)),
        (rng.normal(size=(6, 3)), np.array([1, 1, 1, -1, -1, -1.0]), 5.0,
         svm.KernelSpec(kind="polynomial", degree=2)),
    ]
    for X, y, C, kernel in instances:
        model = svm.svm_train_binary(X, y, C, kernel)
        K = svm.kernel_matrix(kernel, X)
        got = svm.dual_objective(model.train_alpha, y, K)
        _, oracle = brute_force_dual(X, y, C, kernel)
        ok &= abs(got - oracle) <= 1e-3
        viol = svm.kkt_violations(model, X, y, model.train_alpha, tol=1e-3)
        ok &= viol == 0
        details.append(f"gap {abs(got - oracle):.1e} kkt {viol}")

    Xxor = np.array([[0, 0], [0, 1], [1, 0], [1, 1.0]])
    yxor = np.array([-1, 1, 1, -1.0])
    rbf = svm.svm_train_binary(Xxor, yxor, 10.0, svm.KernelSpec(kind="rbf", gamma=2.0))
    rbf_acc = np.mean(np.sign(rbf.decision(Xxor)) == yxor)
    lin = svm.svm_train_binary(Xxor, yxor, 10.0, svm.KernelSpec(kind="linear"))
    lin_acc = np.mean(np.sign(lin.decision(Xxor)) == yxor)
    ok &= rbf_acc == 1.0 and lin_acc <= 0.75
    check("SVM oracle", ok,
          "; ".join(details) + f"; XOR rbf {rbf_acc:.2f} linear {lin_acc:.2f}")


def test_em_properties():
    ok = True
    worst_dip, worst_resp, worst_phi = 0.0, 0.0, 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = np.concatenate([rng.normal(-2, 0.6, size=(30, 3)),
                            rng.normal(2, 0.8, size=(30, 3))])
        model = anomaly.gmm_fit(X, k=2, reg_eps=1e-6, seed=seed)
        trace = np.array(model.log_likelihood_trace)
        dip = float(np.max(np.maximum(trace[:-1] - trace[1:], 0))) if len(trace) > 1 else 0.0
        worst_dip = max(worst_dip, dip)
        lj = _component_log_joint((model.phi, model.mu, model.sigma), X)
        Q = np.exp(lj - _logsumexp(lj, axis=1)[:, None])
        worst_resp = max(worst_resp, float(np.max(np.abs(Q.sum(axis=1) - 1))))
        worst_phi = max(worst_phi, abs(model.phi.sum() - 1))
    ok &= worst_dip <= 1e-9 and worst_resp <= 1e-12 and worst_phi <= 1e-9

    # k=1 has a closed form: sample mean and biased covariance
    rng = np.random.default_rng(99)
    X = rng.normal(size=(40, 3)) @ np.diag([2.0, 1.0, 0.5])
    one = anomaly.gmm_fit(X, k=1, reg_eps=0.0, seed=0)
    mu_err = float(np.max(np.abs(one.mu[0] - X.mean(axis=0))))
    cov_err = float(np.max(np.abs(one.sigma[0] - np.cov(X.T, bias=True))))
    ok &= one.phi[0] == 1.0 and mu_err <= 1e-9 and cov_err <= 1e-9
    check("EM properties", ok,
          f"max dip {worst_dip:.1e}, resp {worst_resp:.1e}, phi {worst_phi:.1e}, "
          f"k=1 mu {mu_err:.1e} cov {cov_err:.1e}")


def test_pca_properties():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 8)) @ np.diag([4, 3, 2, 1.5, 1, 0.5, 0.2, 0.1])
    model = dimreduce.pca_fit(X, 1.0)
    C = model.components
    orth = float(np.max(np.abs(C @ C.T - np.eye(len(C)))))
    monotone = bool(np.all(np.diff(model.explained_variance_ratio) <= 1e-12))

    t = rng.normal(size=50)
    R1 = np.outer(t, [1.0, -2.0, 0.5]) + 7.0
    r1 = dimreduce.pca_fit(R1, 0.99)
    recon = dimreduce.pca_inverse(r1, dimreduce.pca_transform(r1, R1))
    recon_err = float(np.max(np.abs(recon - R1)))
    ok = orth <= 1e-8 and monotone and len(r1.components) == 1 and recon_err <= 1e-9
    check("PCA properties", ok,
          f"orth {orth:.1e}, ratios monotone {monotone}, rank-1 comps "
          f"{len(r1.components)}, recon {recon_err:.1e}")


def test_rfecv_plant_and_recover():
    t0 = time.time()
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = 60
        X = rng.normal(size=(m, 201))
        labels = ["pos" if rng.uniform() > 0.5 else "neg" for _ in range(m)]
        planted = int(rng.integers(201))
        X[:, planted] = [1.0 if l == "pos" else -1.0 for l in labels]
        X[:, planted] += rng.normal(0, 0.05, size=m)
        ds = LabeledDataset(vectors=X, labels=labels, gesture_kind="tap",
                            schema=[f"f{i}" for i in range(201)])
        ds, _ = normalize_fit(ds)
        mask = dimreduce.rfecv(ds, folds=4, seed=seed)
        hits += planted in mask.selected
    took = time.time() - t0
    check("RFECV plant-and-recover", hits >= 9 and took < 120,
          f"{hits}/10 seeds, {took:.0f}s")


@pytest.fixture(scope="module")
def table3():
    """Full-size three-seed table; the C/gamma grid search runs once over the
    complete decade axes on a per-user subsample of the first seed's training
    taps, and the chosen cell is reused for every refit."""
    t0 = time.time()
    rec = pipeline.default_corpus(seed=0)
    ds = pipeline.corpus_datasets(rec)["tap"]
    train, _ = evaluation.split(ds, 0.8, seed=0)
    idx = []
    for u in sorted(set(train.labels)):
        idx.extend([i for i, l in enumerate(train.labels) if l == u][:40])
    sub = LabeledDataset(vectors=train.vectors[idx],
                         labels=[train.labels[i] for i in idx],
                         gesture_kind="tap", schema=list(ds.schema))
    sub, _ = normalize_fit(sub)
    grid = evaluation.grid_search(sub, folds=3, seed=0)
    rows, markdown, details = pipeline.run_table3(
        seeds=(0, 1, 2), svm_params={"tap": (grid.best_c, grid.best_gamma)})
    return rows, grid, time.time() - t0


def test_synthetic_table3_analogue(table3):
    rows, grid, took = table3
    by_model = {r["model"]: r["results"] for r in rows}
    logreg = by_model["Log Reg (Binary)"]["tap"][1]
    svm_acc = by_model["SVM"]["tap"][1]
    gmm_pass = by_model["Mult Gauss (pass)"]["tap"][1]
    gmm_fail = by_model["Mult Gauss (fail)"]["tap"][1]
    ok = (logreg >= 0.95 and svm_acc >= 0.90 and gmm_pass >= 0.85
          and gmm_fail >= 0.78 and took < 600)
    check("synthetic accuracy-table analogue", ok,
          f"logreg {logreg:.3f}, svm {svm_acc:.3f} (C={grid.best_c:g}, "
          f"gamma={grid.best_gamma:g}), gmm pass {gmm_pass:.3f} / "
          f"reject {gmm_fail:.3f}, {took:.0f}s")


def test_segmentation_truth_match():
    total, matched = 0, 0
    for seed in range(5):
        rec = pipeline.default_corpus(n_users=2, taps=20, circles=10,
                                      randoms=10, seed=seed)
        threshold = pipeline.auto_threshold(rec)
        events = segmentation.detect_events(rec, threshold)
        spans = sorted(rec.truth, key=lambda s: s.start)
        total += len(spans)
        ei = 0
        for s in spans:
            while ei < len(events) and events[ei].end_index < s.start - 1:
                ei += 1
            if ei < len(events) and \
               abs(events[ei].start_index - s.start) <= 1 and \
               abs(events[ei].end_index - s.end) <= 1:
                matched += 1
                ei += 1
    check("segmentation truth match", matched == total,
          f"{matched}/{total} gestures within +-1 frame over 5 seeds")


def test_determinism(tmp_path):
    def run(tag):
        digests = {}
        rec = pipeline.default_corpus(n_users=2, taps=35, circles=0,
                                      randoms=0, seed=11)
        p = tmp_path / f"{tag}.jsonl"
        store.save_recording(p, rec)
        digests["corpus"] = hashlib.sha256(p.read_bytes()).hexdigest()

        ds = pipeline.corpus_datasets(rec)["tap"]
        p = tmp_path / f"{tag}.ds"
        store.save_dataset(p, ds)
        digests["dataset"] = hashlib.sha256(p.read_bytes()).hexdigest()

        norm, scaler = normalize_fit(ds)
        mask = dimreduce.rfecv(LabeledDataset(
            vectors=norm.vectors[:, :40], labels=ds.labels, gesture_kind="tap",
            schema=list(ds.schema[:40])), folds=4, seed=1)
        p = tmp_path / f"{tag}.mask"
        store.save_mask(p, mask)
        digests["mask"] = hashlib.sha256(p.read_bytes()).hexdigest()

        for name, model in (
            ("logreg", linmodels.logreg_train(norm.vectors, ds.labels)),
            ("svm", svm.one_vs_rest_train(norm.vectors, ds.labels, 10.0,
                                          svm.KernelSpec(kind="rbf", gamma=0.01))),
        ):
            p = tmp_path / f"{tag}.{name}.json"
            store.save_model(p, model)
            digests[name] = hashlib.sha256(p.read_bytes()).hexdigest()

        det = pipeline.fit_gmm_detector(LabeledDataset(
            vectors=ds.vectors[:35], labels=ds.labels[:35],
            gesture_kind="tap", schema=list(ds.schema)), seed=2)
        p = tmp_path / f"{tag}.enroll.json"
        store.save_enrollment(p, det.model, det.threshold, det.scaler,
                              det.pca, "tap")
        digests["enrollment"] = hashlib.sha256(p.read_bytes()).hexdigest()
        return digests

    first, second = run("a"), run("b")
    diffs = [k for k in first if first[k] != second[k]]
    check("determinism", not diffs,
          f"stages hashed twice: {sorted(first)}; mismatches: {diffs or 'none'}")


def test_service_end_to_end(tmp_path):
    config = capsim.SensorConfig()
    alice, mallory = capsim.make_profiles(2, spread=1.5, seed=4)

    def stream_frames(profile, n, seed0):
        parts = [capsim.synth_gesture(profile, "tap", config, [seed0, i])[0]
                 for i in range(n)]
        return np.concatenate(parts, axis=0)

    app = create_app(model_dir=str(tmp_path / "models"), config=config)
    client = TestClient(app)
    enroll = stream_frames(alice, 40, 500)
    r = client.post("/users/a/enroll", json={"kind": "tap",
                                             "frames": enroll.tolist()})
    assert r.status_code == 200

    def run_session(frames):
        sid = client.post("/sessions", json={"user_id": "a",
                                             "kind": "tap"}).json()["session_id"]
        decisions = []
        with client.websocket_connect(f"/sessions/{sid}/frames") as ws:
            for i in range(0, len(frames), 30):
                ws.send_json({"session": sid,
                              "frames": frames[i:i + 30].tolist(),
                              "t0": i / config.frame_rate})
                while True:
                    msg = ws.receive_json()
                    if "ack" in msg:
                        break
                    decisions.append((msg["gesture_index"], msg["score"],
                                      msg["accept"]))
        return decisions

    genuine = stream_frames(alice, 20, 600)
    impostor = stream_frames(mallory, 20, 700)
    d_genuine = run_session(genuine)
    d_impostor = run_session(impostor)
    d_replay = run_session(genuine)
    accept = float(np.mean([a for _, _, a in d_genuine]))
    reject = float(np.mean([not a for _, _, a in d_impostor]))
    ok = (len(d_genuine) >= 15 and accept > 0.5 and reject > 0.5
          and d_replay == d_genuine)
    check("service end-to-end", ok,
          f"genuine accept {accept:.2f}, impostor reject {reject:.2f}, "
          f"replay identical: {d_replay == d_genuine}")
