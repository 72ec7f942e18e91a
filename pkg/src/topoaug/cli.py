"""Command-line entry point.

Exit codes: 0 on success, 1 on usage or validation errors, 2 on runtime
failures (including a failed gradient check).
"""

from __future__ import annotations

import argparse
import sys
from collections import Counter
from dataclasses import replace

import numpy as np

from .construct import complex_statistics
from .graph import StructureError, validate_complex
from .io import (
    DatasetError,
    ExperimentConfig,
    build_complex,
    load_dataset,
    load_model_state,
    save_complex,
    save_metrics,
    save_model_state,
)
from .models import build_model
from .training import TrainingError, aggregate, evaluate, fit, run_experiment, split_nodes
from .wl import wl_distinguishes

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; route it to our usage code instead
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _strategy_params(args) -> dict:
    params = {}
    for name in ("min_size", "window", "tau", "metric"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    return params


def cmd_build_cc(args) -> int:
    ds = load_dataset(args.dataset)
    cc = build_complex(ds, args.strategy, _strategy_params(args))
    report = validate_complex(cc)
    if not report.ok:
        raise TrainingError("constructed complex failed validation: " + "; ".join(report.messages()))
    stats = complex_statistics(ds.graph, cc)
    sizes = Counter(len(c) for c in cc.cells_of_rank(2))
    print(f"nodes                 {stats['num_nodes']}")
    print(f"edges                 {stats['num_edges']}")
    print(f"hyperedges            {stats['num_hyperedges']}")
    print(f"avg node degree       {stats['avg_node_degree']:.4f}")
    print(f"avg hyperedge degree  {stats['avg_hyperedge_degree']:.4f}")
    for size in sorted(sizes):
        print(f"  {sizes[size]} hyperedge{'s' if sizes[size] != 1 else ''} of size {size}")
    save_complex(cc, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _prepare(cfg: ExperimentConfig):
    ds = load_dataset(cfg.dataset)
    cc = build_complex(ds, cfg.strategy, cfg.strategy_params)
    task = cfg.task or ds.task
    if task != ds.task:
        ds = replace(ds, task=task)
    return ds, ds.node_dataset(cc)


def cmd_train(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.epochs is not None:
        cfg.epochs = args.epochs
    _, data = _prepare(cfg)
    variant = cfg.variant()
    tcfg = cfg.train_config(data.task)

    records = []
    seeds = list(cfg.seeds)
    if cfg.model_state:
        model, first = fit(data, variant, tcfg)
        records.append(first)
        meta = {
            "backbone": variant.backbone,
            "topoaug": variant.augmentation == "topoaug",
            "phase": variant.phase,
            "include_edges": variant.include_edges,
            "in_dim": int(data.features.shape[1]),
            "out_dim": data.out_dim,
            "hidden": cfg.hidden_dim,
            "dropout": cfg.dropout,
            "task": data.task,
            "seed": tcfg.seed,
            "strategy": cfg.strategy,
            "strategy_params": cfg.strategy_params,
        }
        save_model_state(cfg.model_state, model.state_dict(), meta)
        seeds = seeds[1:]
    if seeds:
        records += run_experiment(data, variant, replace(tcfg, seed=seeds[0]), seeds, workers=cfg.workers).records

    for r in records:
        print(f"seed {r.seed}: val {r.val:.4f}  test {r.test:.4f}  ({r.metric}, {r.seconds:.1f}s)")
    agg = aggregate(records)
    print(f"{variant.label}: test {agg['test_mean']:.4f} ± {agg['test_std']:.4f} over {agg['runs']} runs")
    if cfg.output:
        save_metrics(records, cfg.output)
        print(f"wrote {cfg.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    state, meta = load_model_state(args.model_state)
    ds = load_dataset(args.dataset)
    strategy = args.strategy or meta["strategy"]
    params = meta["strategy_params"] if args.strategy is None else _strategy_params(args)
    cc = build_complex(ds, strategy, params)
    if meta["task"] != ds.task:
        ds = replace(ds, task=meta["task"])
    data = ds.node_dataset(cc)
    if data.features.shape[1] != meta["in_dim"]:
        raise DatasetError(f"dataset has {data.features.shape[1]} features, model expects {meta['in_dim']}")
    model = build_model(
        meta["backbone"],
        meta["in_dim"],
        meta["out_dim"],
        hidden=meta["hidden"],
        dropout=meta["dropout"],
        topoaug=meta["topoaug"],
        phase=meta["phase"],
        rng=np.random.default_rng(0),
    )
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise DatasetError(f"{args.model_state}: {exc}") from exc
    seed = meta["seed"] if args.seed is None else args.seed
    result = evaluate(model, data, split_nodes(data.graph.num_nodes, seed), include_edges=meta["include_edges"])
    print(f"val {result['val']:.4f}  test {result['test']:.4f}  ({result['metric']})")
    return EXIT_OK


def wl_demo_verdicts() -> tuple[bool, bool]:
    """(C6 vs 2xK3 distinguishable by plain 1-WL, distinguishable with clique cells)."""
    from .construct import clique_hyperedges
    from .synthetic import cycle, two_triangles

    c6, k3k3 = cycle(6), two_triangles()
    plain = wl_distinguishes(c6, k3k3)
    with_cells = wl_distinguishes(c6, k3k3, clique_hyperedges(c6), clique_hyperedges(k3k3))
    return plain, with_cells


def cmd_wl_demo(args) -> int:
    plain, with_cells = wl_demo_verdicts()
    print("C6 vs two disjoint triangles")
    print("indistinguishable without hyperedges" if not plain else "distinguishable without hyperedges")
    print("distinguishable with hyperedges" if with_cells else "indistinguishable with hyperedges")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_gradcheck_suite

    results = run_gradcheck_suite(tolerance=args.tolerance, seed=args.seed, hidden=args.hidden)
    failed = 0
    for name, rep in results.items():
        worst_name, worst = max(rep.max_rel_error.items(), key=lambda kv: kv[1], default=("-", 0.0))
        status = "ok" if rep.passed else "FAIL"
        failed += not rep.passed
        print(f"{status:4s} {name:40s} max rel err {worst:.2e} ({worst_name})")
    print(f"{len(results) - failed}/{len(results)} checks passed at tolerance {args.tolerance:g}")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topoaug", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def strategy_flags(p, required: bool):
        p.add_argument("--strategy", required=required, choices=["cliques", "window", "threshold", "provided"])
        p.add_argument("--min-size", type=int, dest="min_size")
        p.add_argument("--window", type=int)
        p.add_argument("--tau", type=float)
        p.add_argument("--metric", choices=["euclidean", "cosine"])

    p = sub.add_parser("build-cc", help="construct a combinatorial complex and print its statistics")
    p.add_argument("--dataset", required=True)
    strategy_flags(p, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_cc)

    p = sub.add_parser("train", help="run an experiment config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="run only this seed instead of the config's list")
    p.add_argument("--epochs", type=int, help="override the configured epoch count")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model state")
    p.add_argument("--model-state", required=True, dest="model_state")
    p.add_argument("--dataset", required=True)
    p.add_argument("--seed", type=int, help="split seed (defaults to the training seed)")
    strategy_flags(p, required=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("wl-demo", help="1-WL on C6 vs two triangles, with and without clique cells")
    p.set_defaults(func=cmd_wl_demo)

    p = sub.add_parser("gradcheck", help="finite-difference check of every op, layer and pipeline")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, StructureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # anything else is a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
