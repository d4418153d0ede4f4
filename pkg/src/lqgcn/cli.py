"""Command-line surface: train / eval / synth / sweep.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .graph import features_from_inputs
from .io import (
    DataError,
    NumericError,
    UsageError,
    file_digest,
    parse_affiliations,
    parse_cover,
    parse_edge_list,
    parse_attributes,
    save_checkpoint,
    write_affiliations,
    write_attributes,
    write_cover,
    write_edge_list,
    write_manifest,
    write_train_log,
)
from .kernel import RngStream
from .metrics import Cover, onmi, recall_best_match
from .synthetic import make_planted
from .training import TrainConfig, threshold_assign, train


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lqgcn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit affiliations on a graph")
    p_train.add_argument("--edges", required=True)
    p_train.add_argument("--attrs")
    p_train.add_argument("--truth")
    p_train.add_argument("--k", type=int, required=True)
    p_train.add_argument("--variant", choices=["main", "ablation"], default="main")
    p_train.add_argument("--input", choices=["x", "g", "u"], default="x")
    p_train.add_argument("--alpha", type=float, default=1.0)
    p_train.add_argument("--beta", type=float, default=1.0)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--hidden", type=int, default=128)
    p_train.add_argument("--dropout", type=float, default=0.5)
    p_train.add_argument("--threshold", type=float, default=0.5)
    p_train.add_argument("--iters", type=int, default=1000)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--lq", choices=["on", "off"], default="on")
    p_train.add_argument("--out", required=True)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="score a predicted cover against truth")
    p_eval.add_argument("--pred", required=True)
    p_eval.add_argument("--truth", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_synth = sub.add_parser("synth", help="generate a planted instance")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--k", type=int, required=True)
    p_synth.add_argument("--overlap", type=float, default=0.1)
    p_synth.add_argument("--strength", type=float, default=1.5)
    p_synth.add_argument("--eta", type=float, default=0.01)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_sweep = sub.add_parser("sweep", help="threshold sweep over saved affiliations")
    p_sweep.add_argument("--affiliations", required=True)
    p_sweep.add_argument("--truth", required=True)
    p_sweep.add_argument("--thresholds", required=True, help="comma-separated, e.g. 0.3,0.5,0.7")
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def cmd_train(args) -> int:
    if args.input in ("x", "u") and not args.attrs:
        raise UsageError(f"--input {args.input} requires --attrs")
    graph = parse_edge_list(args.edges)
    attrs = parse_attributes(args.attrs) if args.attrs else None
    if attrs is not None and attrs.shape[0] != graph.n_nodes:
        raise DataError(
            f"attribute rows {attrs.shape[0]} do not match graph nodes {graph.n_nodes}"
        )
    features = features_from_inputs(graph, attrs, args.input)
    cfg = TrainConfig(
        k=args.k,
        hidden=args.hidden,
        alpha=args.alpha,
        beta=args.beta,
        lr=args.lr,
        dropout=args.dropout,
        threshold=args.threshold,
        max_iters=args.iters,
        seed=args.seed,
        variant=args.variant,
        lq_enabled=args.lq == "on",
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    inputs = {"edges": {"path": str(args.edges), "sha256": file_digest(args.edges)}}
    if args.attrs:
        inputs["attrs"] = {"path": str(args.attrs), "sha256": file_digest(args.attrs)}
    if args.truth:
        inputs["truth"] = {"path": str(args.truth), "sha256": file_digest(args.truth)}

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    outputs = {
        "affiliations": str(outdir / "affiliations.tsv"),
        "cover": str(outdir / "cover.txt"),
        "train_log": str(outdir / "train_log.jsonl"),
        "checkpoint": str(outdir / "checkpoint.npz"),
        "manifest": str(outdir / "manifest.json"),
    }
    write_manifest(outputs["manifest"], config=cfg, inputs=inputs, outputs=outputs, version=__version__)

    result = train(graph, features, cfg)
    write_affiliations(outputs["affiliations"], result.f)
    cover = threshold_assign(result.f, cfg.threshold, rescale=cfg.threshold_rescale)
    write_cover(outputs["cover"], cover)
    write_train_log(outputs["train_log"], result.log)
    save_checkpoint(outputs["checkpoint"], result.params)

    if args.truth:
        truth = parse_cover(args.truth, n_nodes=graph.n_nodes)
        print(f"onmi={onmi(truth, cover):.6f}")
        print(f"recall={recall_best_match(truth, cover):.6f}")
    if result.log.diverged:
        raise NumericError("training diverged; last finite checkpoint was written")
    return 0


def cmd_eval(args) -> int:
    pred = parse_cover(args.pred)
    truth = parse_cover(args.truth)
    n = max(pred.n_nodes, truth.n_nodes)
    pred = Cover(n_nodes=n, communities=pred.communities)
    truth = Cover(n_nodes=n, communities=truth.communities)
    print(f"onmi={onmi(truth, pred):.6f}")
    print(f"recall={recall_best_match(truth, pred):.6f}")
    return 0


def cmd_synth(args) -> int:
    try:
        inst = make_planted(
            args.n, args.k, args.overlap, args.strength, RngStream(args.seed), eta=args.eta
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    attrs = np.zeros((args.n, args.k), dtype=np.float64)
    attrs[np.arange(args.n), inst.base_groups] = 1.0
    write_edge_list(outdir / "edges.txt", inst.graph)
    write_attributes(outdir / "attributes.txt", attrs, sparse=True)
    write_cover(outdir / "truth.txt", inst.cover_true)
    print(f"n={inst.graph.n_nodes} edges={inst.graph.n_edges} k={args.k} out={outdir}")
    return 0


def cmd_sweep(args) -> int:
    f = parse_affiliations(args.affiliations)
    truth = parse_cover(args.truth, n_nodes=f.shape[0])
    try:
        thresholds = [float(tok) for tok in args.thresholds.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"bad --thresholds value {args.thresholds!r}") from None
    if not thresholds:
        raise UsageError("--thresholds must list at least one value")
    for p in thresholds:
        cover = threshold_assign(f, p)
        print(
            f"p={p:.6f} onmi={onmi(truth, cover):.6f} "
            f"recall={recall_best_match(truth, cover):.6f}"
        )
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
