"""Command line entry point.

    dycil [--config F] [--seed N] [--out-dir D] [--device X] <command> [options]

Commands: generate, train, eval, case-study, validate.
Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import torch

from .config import ConfigError, load_generate_config, load_run_config
from .datagen import (
    GeneratorConfigError, generate_synthetic_collab, generate_temporal_motif, random_dynamic_graph,
    save_ground_truth,
)
from .graph import GraphError, SplitSpec, load_dynamic_graph, save_dynamic_graph, validate
from .objective import NumericalFailure
from .subgraph import DegenerateInputError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("dycil")


def _overrides(args) -> dict:
    out = dict(kv.split("=", 1) for kv in args.set or [])
    out = {k.strip(): v.strip() for k, v in out.items()}
    if args.seed is not None:
        out["seed"] = str(args.seed)
    return out


def cmd_generate(args) -> int:
    over = _overrides(args)
    if "seed" in over:
        over["motif.seed" if args.kind != "synthetic_collab" else "collab.seed"] = over.pop("seed")
    if args.kind:
        over["kind"] = args.kind
    cfg = load_generate_config(args.config, over)
    out = Path(args.out_dir or "data")
    if cfg.kind == "temporal_motif":
        ds = generate_temporal_motif(cfg.motif)
        save_dynamic_graph(ds.graph, out)
        save_ground_truth(ds, out)
        split = ds.split()
    elif cfg.kind == "synthetic_collab":
        base = random_dynamic_graph(cfg.num_nodes, cfg.base_T, cfg.base_feature_dim, seed=cfg.collab.seed)
        graph = generate_synthetic_collab(base, cfg.collab)
        save_dynamic_graph(graph, out)
        split = SplitSpec(cfg.collab.train_end, cfg.val_end, graph.T)
    else:
        raise ConfigError({"kind": f"unknown dataset kind {cfg.kind!r}"})
    meta = {"dataset": cfg.kind, "train_end": split.train_end, "val_end": split.val_end,
            "test_end": split.test_end}
    (out / "split.json").write_text(json.dumps(meta) + "\n")
    print(f"wrote {cfg.kind} to {out}")
    return EXIT_OK


def _run_config(args):
    over = _overrides(args)
    if getattr(args, "data", None):
        over["data"] = args.data
    if args.device:
        over["device"] = args.device
    return load_run_config(args.config, over)


def cmd_train(args) -> int:
    from .experiment import run_experiment

    cfg = _run_config(args)
    if not cfg.data:
        raise ConfigError({"data": "dataset path is required"})
    summary = run_experiment(cfg, args.out_dir or "runs")
    print(json.dumps({"val": summary["val"], "test": summary["test"], "variant": summary["ablation"]["variant"]}))
    return EXIT_OK


def cmd_eval(args) -> int:
    from .experiment import evaluate_checkpoint, export_splits, write_json
    from .train import load_checkpoint

    cfg = _run_config(args)
    graph = load_dynamic_graph(cfg.data)
    result = evaluate_checkpoint(args.checkpoint, graph, cfg.split(graph.T))
    print(json.dumps(result))
    if args.out_dir:
        write_json(Path(args.out_dir) / "eval.json", result)
    if args.export_splits:
        model, _, _ = load_checkpoint(args.checkpoint, graph)
        export_splits(model, graph, args.export_splits)
    return EXIT_OK


def cmd_case_study(args) -> int:
    from .experiment import case_study, case_study_from_checkpoints, load_houses, write_case_csv

    cfg = _run_config(args)
    graph = load_dynamic_graph(cfg.data)
    split = cfg.split(graph.T)
    houses = load_houses(cfg.data, graph.T)
    out = Path(args.out_dir or "case_study")
    out.mkdir(parents=True, exist_ok=True)
    if args.checkpoints:
        rows = case_study_from_checkpoints(args.checkpoints, graph, split, houses)
        write_case_csv(out / "case_study.csv", rows)
    else:
        rows, _ = case_study(graph, split, cfg.train, houses, out)
    print(f"wrote {len(rows)} rows to {out / 'case_study.csv'}")
    return EXIT_OK


def cmd_validate(args) -> int:
    path = args.data
    if path is None:
        path = _run_config(args).data
    graph = load_dynamic_graph(path)
    problems = validate(graph)
    for v in problems:
        print(v)
    if problems:
        return EXIT_DATA
    print(f"ok: {graph.T} snapshots, {graph.global_node_count} nodes")
    return EXIT_OK


def _global_flags(p, default):
    p.add_argument("--config", default=default, help="flat key = value config file")
    p.add_argument("--seed", type=int, default=default, help="base seed (overrides the config)")
    p.add_argument("--out-dir", default=default, help="output directory")
    p.add_argument("--device", default=default, help="torch device token (default cpu)")
    p.add_argument("--set", action="append", default=default, metavar="KEY=VALUE", help="override one config key")
    p.add_argument("-v", "--verbose", action="store_true", default=default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dycil", description=__doc__.splitlines()[0])
    _global_flags(p, argparse.SUPPRESS)
    p.set_defaults(config=None, seed=None, out_dir=None, device=None, set=None, verbose=False)
    # the same flags are also accepted after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic dataset")
    g.add_argument("--kind", choices=("temporal_motif", "synthetic_collab"))
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", parents=[common], help="train num_runs seeds and write summary.json")
    t.add_argument("--data")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--data")
    e.add_argument("--export-splits", metavar="DIR", help="write split_<t>.causal/.variant edge lists")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("case-study", parents=[common], help="per-epoch motif recall vs test metric")
    c.add_argument("--data")
    c.add_argument("--checkpoints", nargs="+", help="epoch checkpoints to score instead of training")
    c.set_defaults(func=cmd_case_study)

    v = sub.add_parser("validate", parents=[common], help="check a dataset directory")
    v.add_argument("--data")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    if args.device:
        try:
            torch.device(args.device)
        except RuntimeError as exc:
            print(f"config error: --device: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphError, GeneratorConfigError, DegenerateInputError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
