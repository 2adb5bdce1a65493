"""Command-line surface.

Subcommands: ``build-graph``, ``diffuse``, ``one-pass``, ``dynamic-pass``,
``eval``, ``gen``, ``project``. Exit codes: 0 ok, 1 runtime/data error,
2 usage error. Every failure prints a one-line diagnostic on stderr. Output
files are written atomically, and report directories hold rendered figures
alongside the delimited outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import viz
from .certainty import certainty_weights
from .errors import GnzError
from .formats import (
    LabelSet,
    PredictionTable,
    export_projection,
    atomic_write_text,
    read_embeddings,
    read_labels,
    read_predictions,
    read_truth,
    write_embeddings,
    write_labels,
    write_predictions,
)
from .graph import build_knn_graph, normalized_operator, read_graph, write_edge_list, write_graph
from .metrics import evaluate
from .pipeline import config_from_json, dynamic_pass, one_pass, stage_seed
from .spreading import DiffusionConfig, diffuse_iterative, seed_matrix, select_alpha
from .synth import blobs, sample_labels, two_moons
from .tvratio import L1Config, diffuse_l1


def _resolve_threads(value: int | None) -> int:
    if value is None:
        env = os.environ.get("GNZ_THREADS")
        value = int(env) if env else 1
    if value == 0:
        value = os.cpu_count() or 1
    if value < 0:
        raise GnzError(f"--threads must be >= 0, got {value}")
    return value


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master RNG seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker thread cap (0 = auto; falls back to GNZ_THREADS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnz",
        description="Graph-based semi-supervised classification via p-Laplacian label diffusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="embeddings -> symmetric kNN graph (GNZG)")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--metric", choices=["euclidean", "cosine"], default="euclidean")
    p.add_argument("--kernel", choices=["gaussian-local", "binary"], default="gaussian-local")
    p.add_argument("--edge-list", help="also write a plain-text 'i j w' edge list")
    _add_common(p)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("diffuse", help="graph + labels -> predictions CSV")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=["p1", "p2"], default="p2")
    p.add_argument("--alpha", type=float, default=0.99)
    p.add_argument("--grid", help="comma-separated alpha grid; overrides --alpha via holdout search")
    p.add_argument("--holdout-fraction", type=float, default=0.25)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--outer-iters", type=int, default=20, help="p1 outer ratio iterations")
    p.add_argument("--inner-iters", type=int, default=500, help="p1 inner primal-dual iterations")
    p.add_argument("--tv-normalization", choices=["plain", "degree"], default="plain")
    p.add_argument("--denominator", choices=["l1", "l1-median-centered"], default="l1")
    p.add_argument("--report", help="write solver details as JSON")
    _add_common(p)
    p.set_defaults(func=cmd_diffuse)

    for name, help_text in (("one-pass", "run the one-pass pipeline"),
                            ("dynamic-pass", "run the dynamic-pass pipeline")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--out", help="predictions CSV (overrides config)")
        p.add_argument("--report-dir", help="directory for report.json + figures (overrides config)")
        p.add_argument("--epochs", type=int, help="override epoch count (dynamic)")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=None)
        p.set_defaults(func=cmd_one_pass if name == "one-pass" else cmd_dynamic_pass)

    p = sub.add_parser("eval", help="predictions + truth -> metrics")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--json", action="store_true", help="print the report as JSON")
    p.add_argument("--out", help="also write the JSON report to a file")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="generate a seeded synthetic dataset")
    p.add_argument("--dataset", choices=["two-moons", "blobs"], required=True)
    p.add_argument("--n", type=int, default=600)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--classes", type=int, default=4, help="blobs only")
    p.add_argument("--sep", type=float, default=6.0, help="blobs only")
    p.add_argument("--dim", type=int, default=2, help="blobs only")
    p.add_argument("--labels-per-class", type=int, default=10)
    p.add_argument("--out-dir", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("project", help="embeddings -> 2-D principal-component CSV")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also render a scatter PNG")
    p.add_argument("--truth", help="labels CSV used to color the plot")
    _add_common(p)
    p.set_defaults(func=cmd_project)

    return parser


def cmd_build_graph(args) -> int:
    emb = read_embeddings(args.embeddings)
    g = build_knn_graph(emb, args.k, args.metric, args.kernel)
    write_graph(g, args.out)
    if args.edge_list:
        write_edge_list(g, args.edge_list)
    print(f"graph: {g.n} nodes, {g.nnz // 2} edges -> {args.out}")
    return 0


def cmd_diffuse(args) -> int:
    g = read_graph(args.graph)
    labels = read_labels(args.labels, g.n)
    threads = _resolve_threads(args.threads)
    info: dict = {"method": args.method}
    if args.method == "p2":
        s = normalized_operator(g)
        alpha = args.alpha
        if args.grid:
            grid = [float(a) for a in args.grid.split(",") if a.strip()]
            sel = select_alpha(s, labels, grid, args.holdout_fraction,
                               seed=stage_seed(args.seed, "alpha-holdout"))
            alpha = sel.alpha
            info["alpha_table"] = [list(row) for row in sel.table]
        cfg = DiffusionConfig(alpha=alpha, tol=args.tol, max_iter=args.max_iter)
        h, rep = diffuse_iterative(s, seed_matrix(labels), cfg)
        info.update(alpha=alpha, iterations=rep.iterations, residual=rep.residual)
    else:
        cfg = L1Config(
            outer_iters=args.outer_iters,
            inner_iters=args.inner_iters,
            tv_normalization=args.tv_normalization,
            denominator=args.denominator,
        )
        h, reports = diffuse_l1(g, labels, cfg, threads=threads)
        info["final_ratios"] = [r.ratios[-1] for r in reports]
    table = PredictionTable.from_scores(h)
    write_predictions(table, args.out)
    if args.report:
        atomic_write_text(args.report, json.dumps(info, indent=2, sort_keys=True) + "\n")
    print(f"predictions for {table.n} nodes -> {args.out}")
    return 0


def _run_pipeline(args, runner, mode: str) -> int:
    cfg = config_from_json(args.config)
    updates = {"mode": mode}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.epochs is not None:
        updates["epochs"] = args.epochs
    if args.threads is not None:
        updates["threads"] = _resolve_threads(args.threads)
    from dataclasses import replace

    cfg = replace(cfg, **updates)
    out = args.out or cfg.out or "predictions.csv"
    report_dir = args.report_dir or cfg.report_dir

    table, report = runner(cfg, run_dir=report_dir)
    write_predictions(table, out)
    if report_dir:
        _write_report_dir(report_dir, table, report)
    last = report.records[-1]
    acc = f", accuracy {last.accuracy_vs_truth:.4f}" if last.accuracy_vs_truth is not None else ""
    warn = f" [degraded: {report.degraded}]" if report.degraded else ""
    print(f"{mode}: {len(report.records)} epoch(s){acc} -> {out}{warn}")
    return 0


def _write_report_dir(report_dir: str, table: PredictionTable, report) -> None:
    os.makedirs(report_dir, exist_ok=True)
    atomic_write_text(
        os.path.join(report_dir, "report.json"),
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
    )
    if report.final_embeddings is not None:
        proj = export_projection(report.final_embeddings, os.path.join(report_dir, "projection.csv"))
        viz.save_projection_scatter(
            proj, table.labels, os.path.join(report_dir, "projection.png"),
            title="final embeddings (predicted labels)",
        )
    viz.save_epoch_metrics(report.records, os.path.join(report_dir, "epoch_metrics.png"))
    viz.save_certainty_histogram(
        certainty_weights(table.scores), os.path.join(report_dir, "certainty_hist.png")
    )
    if report.records:
        viz.save_class_histogram(
            report.records[-1].pseudo_histogram, os.path.join(report_dir, "class_histogram.png")
        )
    if report.alpha_table:
        viz.save_alpha_table(report.alpha_table, os.path.join(report_dir, "alpha_search.png"))


def cmd_one_pass(args) -> int:
    return _run_pipeline(args, one_pass, "one-pass")


def cmd_dynamic_pass(args) -> int:
    return _run_pipeline(args, dynamic_pass, "dynamic")


def cmd_eval(args) -> int:
    table = read_predictions(args.predictions)
    truth = read_truth(args.truth, table.n)
    rep = evaluate(table.labels, table.scores, truth)
    payload = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    if args.json:
        print(payload)
    else:
        print(f"accuracy:  {rep.accuracy:.6f}")
        for c, auc in enumerate(rep.per_class_auc):
            print(f"auc[{c}]:    {'absent' if auc is None else format(auc, '.6f')}")
        print(f"macro auc: {rep.macro_auc:.6f}")
    if args.out:
        atomic_write_text(args.out, payload + "\n")
    return 0


def cmd_gen(args) -> int:
    if args.dataset == "two-moons":
        x, y = two_moons(args.n, args.noise, args.seed)
    else:
        x, y = blobs(args.n, args.classes, args.noise, args.sep, args.dim, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    write_embeddings(x, os.path.join(args.out_dir, "embeddings.gnze"))
    c = int(y.max()) + 1
    truth = LabelSet(n=len(y), num_classes=c, labeled=tuple((i, int(y[i])) for i in range(len(y))))
    write_labels(truth, os.path.join(args.out_dir, "truth.csv"))
    subset = sample_labels(y, args.labels_per_class, seed=stage_seed(args.seed, "labels"))
    write_labels(subset, os.path.join(args.out_dir, "labels.csv"))
    print(f"{args.dataset}: n={len(y)}, {c} classes, {len(subset.labeled)} labeled -> {args.out_dir}")
    return 0


def cmd_project(args) -> int:
    emb = read_embeddings(args.embeddings)
    proj = export_projection(emb, args.out)
    if args.plot:
        if args.truth:
            labels = read_truth(args.truth, emb.shape[0])
        else:
            labels = np.zeros(emb.shape[0], dtype=np.int64)
        viz.save_projection_scatter(proj, labels, args.plot)
    print(f"projection for {emb.shape[0]} rows -> {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except (GnzError, OSError) as e:
        print(f"gnz: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
