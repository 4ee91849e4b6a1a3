"""Command-line entry point.

Commands: gen-data, train-classifier, train-explainer, explain, sample,
evaluate, report.  Values come from built-in defaults, then the optional
config file (INI sections named after commands), then flags.  All randomness
derives from one root seed through named substreams, so reruns with the same
seed produce byte-identical outputs.  Exit codes: 0 ok, 2 usage/input error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys
import zlib

import numpy as np

from . import metrics, plots
from .counterfactual import explain_counterfactual, explain_node, save_records
from .gcn import GcnClassifier, train_classifier
from .graphs import (Dataset, GRAPH_TASK, gen_ba3motif, gen_tree_motif_dataset,
                     load_dataset, save_dataset)
from .ppgn import PpgnDenoiser
from .sampler import SamplerConfig, density, sample_model_level, save_trajectory
from .training import MODE_CF, TrainConfig, train_explainer

EXIT_USAGE = 2
EXIT_NUMERIC = 3

# substream tags: one fixed integer per pipeline stage
STREAMS = {"data": 1, "train": 2, "explain": 3, "sample": 4, "eval": 5}


def stream_rng(seed: int, name: str, extra: int = 0) -> np.random.Generator:
    return np.random.default_rng((seed, STREAMS[name], extra))


def worker_cap() -> int:
    try:
        return max(1, int(os.environ.get("D4_THREADS", "1")))
    except ValueError:
        return 1


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise CliError(f"config file not found: {path}")
        cfg.read(path)
    return cfg


def _merge(args, cfg, section: str, defaults: dict):
    """Fill argparse `None` values from config, then built-in defaults."""
    for key, (default, cast) in defaults.items():
        attr = key.replace("-", "_")
        if getattr(args, attr, None) is None:
            if cfg.has_option(section, key):
                setattr(args, attr, cast(cfg.get(section, key)))
            else:
                setattr(args, attr, default)
    return args


def _require_file(path: str, what: str):
    if not path or not os.path.exists(path):
        raise CliError(f"{what} not found: {path}")


# -- commands ----------------------------------------------------------------


def cmd_gen_data(args, cfg):
    _merge(args, cfg, "gen-data", {
        "kind": ("ba3motif", str), "graphs": (300, int), "depth": (6, int),
        "motifs": (30, int), "seed": (0, int), "out": ("dataset.jsonl", str),
        "base-n-min": (13, int), "base-n-max": (25, int),
        "features": ("ones", str)})
    if args.kind == "ba3motif":
        ds = gen_ba3motif(args.graphs, args.seed,
                          base_n=(args.base_n_min, args.base_n_max),
                          features=args.features)
    elif args.kind in ("tree-cycle", "tree-grid"):
        motif = "cycle6" if args.kind == "tree-cycle" else "grid3x3"
        ds = gen_tree_motif_dataset(args.depth, motif, args.motifs, args.seed,
                                    features=args.features)
    else:
        raise CliError(f"unknown dataset kind {args.kind!r}")
    save_dataset(ds, args.out)
    nodes = [g.n for g in ds.graphs]
    edges = [g.num_edges() for g in ds.graphs]
    print(f"wrote {args.out}: {len(ds.graphs)} graph(s), task={ds.task}, "
          f"avg nodes {np.mean(nodes):.2f}, avg edges {np.mean(edges):.2f}")
    return 0


def cmd_train_classifier(args, cfg):
    _merge(args, cfg, "train-classifier", {
        "dataset": (None, str), "out": ("classifier.ckpt", str),
        "epochs": (200, int), "lr": (1e-3, float), "gamma": (0.998, float),
        "layers": (3, int), "hidden": (32, int), "batch": (32, int),
        "seed": (0, int), "smoothing": (0.0, float), "log": (None, str)})
    _require_file(args.dataset, "dataset")
    ds = load_dataset(args.dataset)
    rows = []
    try:
        clf, test_acc = train_classifier(
            ds, epochs=args.epochs, lr=args.lr, gamma=args.gamma,
            layers=args.layers, hidden=args.hidden, batch=args.batch,
            seed=args.seed, smoothing=args.smoothing,
            log=lambda e, loss, va: rows.append((e, loss, va)))
    except FloatingPointError as e:
        raise CliError(str(e), EXIT_NUMERIC)
    clf.save(args.out)
    log_path = args.log or args.out + ".log.csv"
    with open(log_path, "w") as fh:
        fh.write("epoch,loss,val_acc\n")
        for e, loss, va in rows:
            fh.write(f"{e},{loss:.6f},{va:.6f}\n")
    print(f"wrote {args.out}; test accuracy {test_acc:.4f}")
    return 0


def cmd_train_explainer(args, cfg):
    _merge(args, cfg, "train-explainer", {
        "dataset": (None, str), "classifier": (None, str),
        "out": ("denoiser.ckpt", str), "alpha": (0.1, float), "t": (100, int),
        "epochs": (300, int), "batch": (32, int), "lr": (1e-3, float),
        "gamma": (0.998, float), "lambda": (1.0, float), "blocks": (6, int),
        "hidden": (64, int), "seed": (0, int), "mode": (MODE_CF, str),
        "max-instances": (0, int), "trace": (None, str)})
    _require_file(args.dataset, "dataset")
    _require_file(args.classifier, "classifier checkpoint")
    ds = load_dataset(args.dataset)
    clf = GcnClassifier.load(args.classifier)
    if clf.feature_dim != ds.feature_dim:
        raise CliError("classifier checkpoint incompatible with dataset")
    if args.mode == MODE_CF and args.alpha == 0:
        print("warning: alpha=0 makes counterfactual mode identical to "
              "model-level training", file=sys.stderr)
    tc = TrainConfig(alpha=args.alpha, T=args.t, epochs=args.epochs,
                     batch=args.batch, lr=args.lr, gamma=args.gamma,
                     lam=getattr(args, "lambda"), blocks=args.blocks,
                     hidden=args.hidden, seed=args.seed, mode=args.mode,
                     max_instances=args.max_instances or None)
    trace = args.trace or args.out + "_trace.csv"
    try:
        denoiser = train_explainer(ds, clf, tc, trace_path=trace)
    except FloatingPointError as e:
        raise CliError(str(e), EXIT_NUMERIC)
    denoiser.save(args.out)
    print(f"wrote {args.out}; loss trace {trace}")
    return 0


def _load_models(args, ds):
    _require_file(args.classifier, "classifier checkpoint")
    _require_file(args.denoiser, "denoiser checkpoint")
    clf = GcnClassifier.load(args.classifier)
    den = PpgnDenoiser.load(args.denoiser)
    # node-task counterfactual denoisers carry one extra center-indicator channel
    if clf.feature_dim != ds.feature_dim or \
            den.feature_dim not in (ds.feature_dim, ds.feature_dim + 1):
        raise CliError("checkpoint metadata incompatible with dataset")
    return clf, den


def _test_instances(ds: Dataset):
    """(id, graph-or-node) explanation targets from the test split."""
    if ds.task == GRAPH_TASK:
        return [(i, ds.graphs[i]) for i in ds.test_idx]
    return [(v, v) for v in ds.test_idx]


def cmd_explain(args, cfg):
    _merge(args, cfg, "explain", {
        "dataset": (None, str), "classifier": (None, str),
        "denoiser": (None, str), "mr": (0.1, float), "views": (1, int),
        "strategy": ("topk", str), "seed": (0, int),
        "out": ("explanations.jsonl", str)})
    _require_file(args.dataset, "dataset")
    ds = load_dataset(args.dataset)
    clf, den = _load_models(args, ds)
    records = []
    for inst_id, target in _test_instances(ds):
        rng = stream_rng(args.seed, "explain", inst_id)
        if ds.task == GRAPH_TASK:
            rec = explain_counterfactual(den, clf, target, args.mr, rng,
                                         num_views=args.views,
                                         strategy=args.strategy,
                                         graph_id=inst_id)
        else:
            rec = explain_node(den, clf, ds.graphs[0], target, args.mr, rng,
                               num_views=args.views, strategy=args.strategy)
        records.append(rec)
    save_records(records, args.out)
    print(f"wrote {args.out}: {len(records)} records, "
          f"cf_acc {metrics.cf_accuracy(records):.4f}, "
          f"fidelity {metrics.fidelity(records):.4f}")
    return 0


def cmd_sample(args, cfg):
    _merge(args, cfg, "sample", {
        "classifier": (None, str), "denoiser": (None, str), "n": (6, int),
        "k": (20, int), "t": (50, int), "target-class": (1, int),
        "runs": (1, int), "density-weight": (0.0, float), "seed": (0, int),
        "features": ("ones", str), "out": ("sample", str)})
    _require_file(args.classifier, "classifier checkpoint")
    _require_file(args.denoiser, "denoiser checkpoint")
    clf = GcnClassifier.load(args.classifier)
    den = PpgnDenoiser.load(args.denoiser)
    if clf.feature_dim != den.feature_dim:
        raise CliError("checkpoint metadata mismatch between models")
    scfg = SamplerConfig(n_nodes=args.n, candidates=args.k, steps=args.t,
                         target_class=args.target_class,
                         density_weight=args.density_weight,
                         features=args.features)
    confs, dens = [], []
    for run in range(args.runs):
        rng = stream_rng(args.seed, "sample", run)
        g, conf, traj = sample_model_level(den, clf, scfg, rng)
        confs.append(conf)
        dens.append(density(g))
        save_trajectory(traj, f"{args.out}_run{run}_trajectory.csv")
        with open(f"{args.out}_run{run}_graph.json", "w") as fh:
            iu, ju = np.nonzero(np.triu(g.adj, 1))
            fh.write(json.dumps({"n": g.n, "confidence": round(conf, 6),
                                 "density": round(density(g), 6),
                                 "edges": [[int(i), int(j)] for i, j in zip(iu, ju)]},
                                sort_keys=True) + "\n")
    print(f"sampled {args.runs} explanation(s): mean confidence "
          f"{np.mean(confs):.4f}, mean density {np.mean(dens):.4f}")
    return 0


def cmd_evaluate(args, cfg):
    _merge(args, cfg, "evaluate", {
        "dataset": (None, str), "classifier": (None, str),
        "denoiser": (None, str), "seed": (0, int), "views": (1, int),
        "mmd": (0, int), "mmd-mr": (0.2, float), "robustness": (0, int),
        "sigmas": ("0,0.02,0.04,0.06,0.08,0.1", str), "topk": (5, int),
        "max-instances": (0, int), "out-prefix": ("eval", str)})
    _require_file(args.dataset, "dataset")
    ds = load_dataset(args.dataset)
    clf, den = _load_models(args, ds)
    report = evaluate_protocol(
        ds, clf, den, seed=args.seed, views=args.views,
        with_mmd=bool(args.mmd), mmd_mr=args.mmd_mr,
        with_robustness=bool(args.robustness),
        sigmas=[float(s) for s in args.sigmas.split(",")],
        topk=args.topk, max_instances=args.max_instances or None)
    written = report.write_csvs(args.out_prefix)
    report.write_text(args.out_prefix + "_report.txt")
    print("wrote " + ", ".join(written + [args.out_prefix + "_report.txt"]))
    return 0


def evaluate_protocol(ds, clf, den, seed=0, views=1, with_mmd=False,
                      mmd_mr=0.2, with_robustness=False, sigmas=None,
                      topk=5, max_instances=None) -> metrics.MetricReport:
    """Sweep the 10-point MR grid; optionally MMD and Top-K robustness."""
    from .training import explanation_instances
    instances = explanation_instances(ds, clf, idx=ds.test_idx,
                                      max_instances=max_instances,
                                      rng=stream_rng(seed, "eval", 999))
    report = metrics.MetricReport()
    cf_curve, fid_curve, base_curve = [], [], []
    for gi, mr in enumerate(report.mr_grid):
        recs = [explain_counterfactual(den, clf, g, mr,
                                       stream_rng(seed, "eval", 1000 * gi + i),
                                       num_views=views, graph_id=i)
                for i, g in enumerate(instances)]
        base = [metrics.random_baseline(g, mr, clf,
                                        stream_rng(seed, "eval", 777000 + 1000 * gi + i))
                for i, g in enumerate(instances)]
        cf_curve.append(metrics.cf_accuracy(recs))
        fid_curve.append(metrics.fidelity(recs))
        base_curve.append(metrics.cf_accuracy(base))
    report.cf_acc = np.array(cf_curve)
    report.fid = np.array(fid_curve)
    report.baseline_cf_acc = np.array(base_curve)
    report.cf_acc_auc = metrics.auc_over_mr(report.cf_acc)
    report.fid_auc = metrics.auc_over_mr(report.fid)
    report.baseline_auc = metrics.auc_over_mr(report.baseline_cf_acc)
    if with_mmd:
        recs = [explain_counterfactual(den, clf, g, mmd_mr,
                                       stream_rng(seed, "eval", 500000 + i),
                                       num_views=views)
                for i, g in enumerate(instances)]
        base = [metrics.random_baseline(g, mmd_mr, clf,
                                        stream_rng(seed, "eval", 600000 + i))
                for i, g in enumerate(instances)]
        report.mmd = metrics.mmd_suite([r.explanation for r in recs], instances)
        report.mmd_baseline = metrics.mmd_suite([r.explanation for r in base],
                                                instances)
        report.density_mean = float(np.mean([density(r.explanation) for r in recs]))
    if with_robustness:
        def explain_det(g):
            # seed from graph content so identical graphs explain identically
            key = zlib.crc32(g.adj.tobytes())
            return explain_counterfactual(den, clf, g, 0.2,
                                          stream_rng(seed, "eval", key),
                                          num_views=views)
        report.robustness = metrics.topk_robustness(
            explain_det, instances, topk, sigmas or [0.0, 0.05, 0.1],
            stream_rng(seed, "eval", 31337))
    return report


def cmd_report(args, cfg):
    _merge(args, cfg, "report", {"prefix": ("eval", str)})
    made = plots.render_all(args.prefix)
    if not made:
        raise CliError(f"no evaluation CSVs found for prefix {args.prefix!r}")
    print("rendered " + ", ".join(made))
    return 0


# -- argument plumbing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="d4x",
        description="diffusion-based explanations for graph classifiers")
    parser.add_argument("--config", help="INI config file; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)

    def opt(p, *names, **kw):
        kw.setdefault("default", None)
        p.add_argument(*names, **kw)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset file")
    opt(p, "--kind", choices=["ba3motif", "tree-cycle", "tree-grid"])
    for flag, typ in [("--graphs", int), ("--depth", int), ("--motifs", int),
                      ("--seed", int), ("--base-n-min", int),
                      ("--base-n-max", int)]:
        opt(p, flag, type=typ)
    opt(p, "--out")
    opt(p, "--features", choices=["ones", "degree", "degree-onehot"])
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-classifier", help="train and freeze the target GCN")
    for flag, typ in [("--epochs", int), ("--lr", float), ("--gamma", float),
                      ("--layers", int), ("--hidden", int), ("--batch", int),
                      ("--seed", int), ("--smoothing", float)]:
        opt(p, flag, type=typ)
    for flag in ["--dataset", "--out", "--log"]:
        opt(p, flag)
    p.set_defaults(fn=cmd_train_classifier)

    p = sub.add_parser("train-explainer", help="train the denoising explainer")
    for flag, typ in [("--alpha", float), ("--t", int), ("--epochs", int),
                      ("--batch", int), ("--lr", float), ("--gamma", float),
                      ("--lambda", float), ("--blocks", int), ("--hidden", int),
                      ("--seed", int), ("--max-instances", int)]:
        opt(p, flag, type=typ)
    for flag in ["--dataset", "--classifier", "--out", "--trace"]:
        opt(p, flag)
    opt(p, "--mode", choices=["counterfactual", "model-level"])
    p.set_defaults(fn=cmd_train_explainer)

    p = sub.add_parser("explain", help="generate counterfactual explanations")
    for flag, typ in [("--mr", float), ("--views", int), ("--seed", int)]:
        opt(p, flag, type=typ)
    for flag in ["--dataset", "--classifier", "--denoiser", "--out"]:
        opt(p, flag)
    opt(p, "--strategy", choices=["topk", "bernoulli"])
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("sample", help="generate model-level explanations")
    for flag, typ in [("--n", int), ("--k", int), ("--t", int),
                      ("--target-class", int), ("--runs", int),
                      ("--density-weight", float), ("--seed", int)]:
        opt(p, flag, type=typ)
    for flag in ["--classifier", "--denoiser", "--out"]:
        opt(p, flag)
    opt(p, "--features", choices=["ones", "degree", "degree-onehot"])
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("evaluate", help="run the evaluation protocol")
    for flag, typ in [("--seed", int), ("--views", int), ("--mmd", int),
                      ("--mmd-mr", float), ("--robustness", int),
                      ("--topk", int), ("--max-instances", int)]:
        opt(p, flag, type=typ)
    for flag in ["--dataset", "--classifier", "--denoiser", "--sigmas",
                 "--out-prefix"]:
        opt(p, flag)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("report", help="render figures from evaluation CSVs")
    opt(p, "--prefix")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_config(args.config)
        return args.fn(args, cfg)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
