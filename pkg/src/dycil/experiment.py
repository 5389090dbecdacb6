"""Run orchestration: multi-seed experiments, checkpoint evaluation, case study, split export."""
from __future__ import annotations

import json
import logging
import statistics
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .config import RunConfig, dump
from .datagen import house_edges, load_ground_truth
from .graph import DynamicGraph, SplitSpec, load_dynamic_graph
from .model import DyCIL, ForwardOutput, PreparedGraph, prepare
from .objective import NODE, TrainConfig
from .train import build_targets, evaluate, load_checkpoint, train

log = logging.getLogger(__name__)


def _atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    tmp.replace(path)


def write_json(path, obj) -> None:
    _atomic_text(Path(path), json.dumps(obj, indent=2, sort_keys=False) + "\n")


def aggregate(values: Sequence[Optional[float]]) -> dict:
    """Mean and sample standard deviation (0 for a single run)."""
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None}
    return {"mean": statistics.fmean(vals), "std": statistics.stdev(vals) if len(vals) > 1 else 0.0}


def run_experiment(cfg: RunConfig, out_dir, graph: Optional[DynamicGraph] = None) -> dict:
    """Train ``cfg.num_runs`` seeds (base seed + 0, 1, ...) and write summary.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = graph if graph is not None else load_dynamic_graph(cfg.data)
    split = cfg.split(graph.T)
    _atomic_text(out_dir / "config.txt", dump(cfg))
    runs = []
    for i in range(cfg.num_runs):
        tc = replace(cfg.train, seed=cfg.train.seed + i)
        run_dir = out_dir / f"run_{i}"
        res = train(graph, split, tc, run_dir, checkpoint_every=cfg.checkpoint_every)
        runs.append({"seed": tc.seed, "best_epoch": res.best_epoch, "epochs": len(res.records),
                     "val": res.best_val, "test": res.test_at_best, "dir": run_dir.name})
        log.info("run %d seed %d: val %s test %s", i, tc.seed, res.best_val, res.test_at_best)
    summary = {
        "task": cfg.train.task,
        "dataset": cfg.dataset or Path(cfg.data).name,
        "ablation": {"variant": cfg.train.variant, "no_sg": cfg.train.no_sg,
                     "no_am": cfg.train.no_am, "no_eg": cfg.train.no_eg},
        "val": aggregate([r["val"] for r in runs]),
        "test": aggregate([r["test"] for r in runs]),
        "runs": runs,
    }
    write_json(out_dir / "summary.json", summary)
    return summary


@torch.no_grad()
def evaluate_checkpoint(path, graph: DynamicGraph, split: SplitSpec) -> dict:
    """Causal-branch val/test metrics of a saved model with the fixed negative seed."""
    model, tc, payload = load_checkpoint(path, graph)
    model.eval()
    pg = prepare(graph, tc.torch_dtype)
    seen = None
    if tc.inductive and tc.task == NODE:
        seen = {int(n) for tg in build_targets(pg, tc, 2, split.train_end, None) for n in tg.ids}
    val_t = build_targets(pg, tc, split.train_end + 1, split.val_end, tc.negative_seed, seen)
    test_t = build_targets(pg, tc, split.val_end + 1, split.test_end, tc.negative_seed, seen)
    out = model(pg, t_max=min(graph.T, split.test_end - 1))
    return {"epoch": payload["epoch"], "val_metric": evaluate(model, out.z, val_t),
            "test_metric": evaluate(model, out.z, test_t)}


def pooled_recall(out: ForwardOutput, pg: PreparedGraph, houses: dict) -> float:
    """Fraction of all planted houses, pooled over snapshots, whose six edges are all causal."""
    hits = total = 0
    for t in range(1, len(out.causal_index) + 1):
        if t not in houses:
            continue
        edges = pg.snaps[t - 1].snapshot.edges[out.causal_index[t - 1]]
        chosen = {(int(u), int(v)) for u, v in edges}
        for h in houses[t]:
            total += 1
            hits += all(e in chosen for e in house_edges(h))
    if total == 0:
        raise ValueError("no ground-truth houses in range")
    return hits / total


class RecallTracker:
    """on_epoch callback collecting (epoch, motif_recall, test_metric)."""

    def __init__(self, houses: dict, pg: PreparedGraph):
        self.houses = houses
        self.pg = pg
        self.rows: list = []

    def __call__(self, epoch, model, out, record):
        self.rows.append((epoch, pooled_recall(out, self.pg, self.houses), record.test_metric))


def case_study(graph: DynamicGraph, split: SplitSpec, tc: TrainConfig, houses: dict, out_dir=None):
    """Train while recording motif recall each epoch; returns (rows, TrainResult)."""
    pg = prepare(graph, tc.torch_dtype)
    tracker = RecallTracker(houses, pg)
    res = train(graph, split, tc, out_dir, on_epoch=tracker)
    if out_dir is not None:
        write_case_csv(Path(out_dir) / "case_study.csv", tracker.rows)
    return tracker.rows, res


@torch.no_grad()
def case_study_from_checkpoints(paths: Sequence, graph: DynamicGraph, split: SplitSpec, houses: dict) -> list:
    rows = []
    for p in sorted(paths, key=lambda p: torch.load(p, map_location="cpu", weights_only=False)["epoch"]):
        model, tc, payload = load_checkpoint(p, graph)
        model.eval()
        pg = prepare(graph, tc.torch_dtype)
        out = model(pg, t_max=min(graph.T, split.test_end - 1))
        test_t = build_targets(pg, tc, split.val_end + 1, split.test_end, tc.negative_seed)
        rows.append((payload["epoch"], pooled_recall(out, pg, houses), evaluate(model, out.z, test_t)))
    return rows


def write_case_csv(path, rows) -> None:
    lines = ["epoch,motif_recall,test_metric"]
    for epoch, rec, test in rows:
        lines.append(f"{epoch},{rec!r},{'' if test is None else repr(float(test))}")
    _atomic_text(Path(path), "\n".join(lines) + "\n")


@torch.no_grad()
def export_splits(model: DyCIL, graph: DynamicGraph, out_dir) -> list:
    """Write split_<t>.causal and split_<t>.variant edge lists for every snapshot."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model.eval()
    pg = prepare(graph, model.config.torch_dtype)
    out = model(pg)
    written = []
    for t in range(1, graph.T + 1):
        edges = graph[t].edges
        for suffix, idx in (("causal", np.sort(out.causal_index[t - 1])), ("variant", out.variant_index[t - 1])):
            p = out_dir / f"split_{t}.{suffix}"
            _atomic_text(p, "".join(f"{u} {v}\n" for u, v in edges[idx]))
            written.append(p)
    return written


def load_houses(data_dir, T: int) -> dict:
    return load_ground_truth(data_dir, T)
