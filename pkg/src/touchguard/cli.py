"""touchguard command line interface.

Subcommands: gen, segment, featurize, select, train, eval, grid, report,
serve. Files flow between stages as JSON-lines (see FORMATS.md).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import capsim, dimreduce, evaluation, linmodels, pipeline, segmentation, store, svm
from .featurization import PRESETS, LabeledDataset, normalize_apply, normalize_fit


def _cmd_gen(args):
    config = capsim.SensorConfig(rows=args.rows, cols=args.cols,
                                 noise_sigma=args.noise_sigma)
    profiles = capsim.make_profiles(args.users, spread=args.spread, seed=args.seed)
    kinds = args.kind.split(",") if args.kind != "all" else list(capsim.GESTURE_KINDS)
    counts = {k: args.count for k in kinds}
    rec = capsim.synth_corpus(profiles, counts, config, args.seed)
    store.save_recording(args.out, rec)
    print(f"wrote {len(rec.frames)} frames, {len(rec.truth)} gestures -> {args.out}")


def _cmd_segment(args):
    rec = store.load_recording(args.infile)
    if args.threshold == "auto":
        threshold = pipeline.auto_threshold(rec)
    else:
        threshold = float(args.threshold)
    events = segmentation.detect_events(rec, threshold)
    out = {"kind": "events", "version": store.FORMAT_VERSION,
           "threshold": threshold,
           "events": [{"start": e.start_index, "end": e.end_index,
                       "duration": e.duration} for e in events]}
    with open(args.out, "w") as f:
        json.dump(out, f, indent=1)
    print(f"{len(events)} events at threshold {threshold:.3f} -> {args.out}")


def _cmd_featurize(args):
    rec = store.load_recording(args.infile)
    configs = {args.config: PRESETS[args.config]}
    datasets = pipeline.corpus_datasets(rec, configs=configs)
    if args.config not in datasets:
        sys.exit(f"no {args.config!r} gestures in the recording")
    ds = datasets[args.config]
    if args.normalize:
        ds, _ = normalize_fit(ds)
    store.save_dataset(args.out, ds)
    print(f"{ds.vectors.shape[0]} x {ds.vectors.shape[1]} dataset -> {args.out}")


def _cmd_select(args):
    ds = store.load_dataset(args.infile)
    if ds.scaler is None:
        ds, _ = normalize_fit(ds)
    mask = dimreduce.rfecv(ds, folds=args.folds, seed=args.seed)
    store.save_mask(args.out, mask)
    best = max(a for _, a in mask.score_trace)
    print(f"{len(mask.selected)} features selected (best CV accuracy {best:.3f}) -> {args.out}")


def _cmd_train(args):
    ds = store.load_dataset(args.infile)
    norm, scaler = normalize_fit(ds)
    X = norm.vectors
    if args.model == "logreg":
        model = linmodels.logreg_train(X, ds.labels, l2_lambda=args.l2)
    elif args.model == "softmax":
        model = linmodels.softmax_train(X, ds.labels, l2_lambda=args.l2)
    elif args.model == "svm":
        kernel = svm.KernelSpec(kind=args.kernel, gamma=args.gamma)
        model = svm.one_vs_rest_train(X, ds.labels, args.C, kernel)
    elif args.model == "gmm":
        if args.user is None:
            sys.exit("--user is required for gmm training")
        own = X[[i for i, l in enumerate(ds.labels) if l == args.user]]
        if not len(own):
            sys.exit(f"no samples for user {args.user!r}")
        det = pipeline.fit_gmm_detector(LabeledDataset(
            vectors=own, labels=[args.user] * len(own),
            gesture_kind=ds.gesture_kind, schema=list(ds.schema)), seed=args.seed)
        store.save_enrollment(args.out, det.model, det.threshold, scaler,
                              det.pca, ds.gesture_kind)
        print(f"gmm (k={det.model.k}, threshold {det.threshold.threshold:.2f}) -> {args.out}")
        return
    else:
        sys.exit(f"unknown model {args.model!r}")
    store.save_model(args.out, model, extra={
        "scaler": {"mean": scaler.mean.tolist(), "std": scaler.std.tolist()}})
    print(f"{args.model} model -> {args.out}")


def _cmd_eval(args):
    model, payload = store.load_model(args.model, with_extra=True)
    ds = store.load_dataset(args.test)
    X = ds.vectors
    if "scaler" in payload:
        from .featurization import Scaler
        sc = Scaler(mean=np.array(payload["scaler"]["mean"]),
                    std=np.array(payload["scaler"]["std"]))
        X = normalize_apply(sc, X)
    if payload["type"] == "logreg":
        _, pred = linmodels.logreg_predict(model, X)
    elif payload["type"] == "softmax":
        _, pred = linmodels.softmax_predict(model, X)
    elif payload["type"] == "svm":
        _, pred = svm.svm_predict(model, X)
    else:
        sys.exit(f"cannot evaluate model type {payload['type']!r}")
    if not isinstance(pred, list):
        pred = [pred]
    metrics = evaluation.score(pred, ds.labels)
    report = [f"accuracy: {metrics.accuracy:.4f}",
              f"macro F1: {metrics.macro_f1:.4f}",
              "confusion (rows=true):"]
    report.append("  " + " ".join(str(c) for c in metrics.confusion.classes))
    for cls, row in zip(metrics.confusion.classes, metrics.confusion.counts):
        report.append(f"  {cls}: {row.tolist()}")
    text = "\n".join(report)
    if args.report:
        with open(args.report, "w") as f:
            f.write(text + "\n")
    print(text)


def _cmd_grid(args):
    ds = store.load_dataset(args.infile)
    if ds.scaler is None:
        ds, _ = normalize_fit(ds)
    result = evaluation.grid_search(ds, folds=args.folds, seed=args.seed)
    with open(args.out, "w") as f:
        f.write("C\\gamma," + ",".join(f"{g:g}" for g in result.gamma_axis) + "\n")
        for C, row in zip(result.c_axis, result.scores):
            f.write(f"{C:g}," + ",".join(f"{v:.4f}" for v in row) + "\n")
    print(f"best C={result.best_c:g} gamma={result.best_gamma:g} "
          f"accuracy={result.best_score:.3f} -> {args.out}")


def _cmd_report(args):
    rows, markdown, _ = pipeline.run_table3(
        seeds=tuple(int(s) for s in args.seeds.split(",")),
        taps=args.taps, circles=args.circles, randoms=args.randoms)
    if args.out:
        with open(args.out, "w") as f:
            f.write(markdown + "\n")
    print(markdown)


def _cmd_serve(args):
    import uvicorn
    from .authd import create_app
    app = create_app(model_dir=args.model_dir)
    host, _, port = args.bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


def build_parser():
    p = argparse.ArgumentParser(prog="touchguard")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic corpus")
    g.add_argument("--users", type=int, default=4)
    g.add_argument("--kind", default="all", help="tap,circle,random or 'all'")
    g.add_argument("--count", type=int, default=100, help="gestures per user per kind")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--spread", type=float, default=1.0)
    g.add_argument("--rows", type=int, default=16)
    g.add_argument("--cols", type=int, default=16)
    g.add_argument("--noise-sigma", type=float, default=1.0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    s = sub.add_parser("segment", help="cut a recording into gesture events")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--threshold", default="auto")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_segment)

    f = sub.add_parser("featurize", help="build a labeled feature dataset")
    f.add_argument("--config", choices=list(PRESETS), required=True)
    f.add_argument("--in", dest="infile", required=True)
    f.add_argument("--normalize", action="store_true")
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_featurize)

    sel = sub.add_parser("select", help="RFECV feature selection")
    sel.add_argument("--in", dest="infile", required=True)
    sel.add_argument("--folds", type=int, default=10)
    sel.add_argument("--seed", type=int, default=0)
    sel.add_argument("--out", required=True)
    sel.set_defaults(func=_cmd_select)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--model", choices=["logreg", "softmax", "svm", "gmm"], required=True)
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--l2", type=float, default=0.0)
    t.add_argument("--C", type=float, default=10.0)
    t.add_argument("--gamma", type=float, default=0.01)
    t.add_argument("--kernel", choices=["linear", "polynomial", "rbf"], default="rbf")
    t.add_argument("--user", help="user id for gmm enrollment")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="evaluate a model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--test", required=True)
    e.add_argument("--report")
    e.set_defaults(func=_cmd_eval)

    gr = sub.add_parser("grid", help="C/gamma grid search for an RBF SVM")
    gr.add_argument("--in", dest="infile", required=True)
    gr.add_argument("--folds", type=int, default=5)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--out", required=True)
    gr.set_defaults(func=_cmd_grid)

    r = sub.add_parser("report", help="full accuracy table on a synthetic corpus")
    r.add_argument("--seeds", default="0,1,2")
    r.add_argument("--taps", type=int, default=200)
    r.add_argument("--circles", type=int, default=100)
    r.add_argument("--randoms", type=int, default=100)
    r.add_argument("--out")
    r.set_defaults(func=_cmd_report)

    sv = sub.add_parser("serve", help="run the enrollment/authentication service")
    sv.add_argument("--bind", default=None)
    sv.add_argument("--model-dir", default="./models")
    sv.set_defaults(func=_cmd_serve)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "serve" and args.bind is None:
        import os
        args.bind = os.environ.get("TOUCHGUARD_BIND", "127.0.0.1:8787")
    args.func(args)


if __name__ == "__main__":
    main()
