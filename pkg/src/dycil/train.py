"""Training procedure: per-epoch scoring, split, embeddings, environment, intervention, step.

Predictions made from embeddings at t target labels (or links) of snapshot t + 1.
"""
from __future__ import annotations

import copy
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from .environment import kl_divergence, reparameterize
from .graph import DynamicGraph, SplitSpec
from .metrics import accuracy, auc, negative_sample
from .model import DyCIL, PreparedGraph, prepare
from .objective import (
    LINK, NODE, LossBreakdown, NumericalFailure, TrainConfig, causal_prediction,
    intervened_prediction, intervention_loss, task_loss, total_loss,
)

log = logging.getLogger(__name__)

METRIC_KEYS = ("epoch", "loss_inv", "loss_do", "loss_env", "loss_total", "val_metric", "test_metric")


@dataclass
class MetricsRecord:
    epoch: int
    loss_inv: float
    loss_do: float
    loss_env: float
    loss_total: float
    val_metric: Optional[float]
    test_metric: Optional[float]
    wall_seconds: float = 0.0

    def to_json(self) -> str:
        """One metrics.jsonl line; wall time is left out so reruns are byte-identical."""
        return json.dumps({k: getattr(self, k) for k in METRIC_KEYS})


@dataclass(eq=False)
class Targets:
    """Prediction targets at snapshot t + 1, addressed through embeddings at t."""

    t: int
    rows: torch.Tensor    # node task: (P,) global rows; link task: (P, 2) global rows
    local: torch.Tensor   # same shape, local rows in snapshot t
    y: torch.Tensor
    ids: np.ndarray       # node ids (P,) or id pairs (P, 2), for bookkeeping

    def keys(self) -> set:
        """(ids..., target timestamp) tuples, used to audit train/test disjointness."""
        if self.ids.ndim == 1:
            return {(int(n), self.t + 1) for n in self.ids}
        return {(int(u), int(v), self.t + 1) for u, v in self.ids}


def node_targets(pg: PreparedGraph, t: int, exclude: Optional[set] = None) -> Optional[Targets]:
    nxt = pg.graph[t + 1]
    if nxt.labels is None:
        return None
    lookup = {int(n): i for i, n in enumerate(pg.node_ids)}
    ids, rows, local, ys = [], [], [], []
    for n, lab in zip(nxt.node_ids, nxt.labels):
        g = lookup[int(n)]
        loc = pg.local_of[t - 1, g]
        if lab < 0 or loc < 0 or (exclude and int(n) in exclude):
            continue
        ids.append(int(n)); rows.append(g); local.append(loc); ys.append(int(lab))
    if not ids:
        return None
    return Targets(t, torch.as_tensor(rows), torch.as_tensor(local), torch.as_tensor(ys), np.asarray(ids))


def link_targets(pg: PreparedGraph, t: int, seed) -> Optional[Targets]:
    """Edges of snapshot t + 1 between nodes present at t, plus as many sampled non-edges."""
    nxt = pg.graph[t + 1]
    lookup = {int(n): i for i, n in enumerate(pg.node_ids)}
    cur = pg.local_of[t - 1]
    candidates = [int(n) for n in nxt.node_ids if cur[lookup[int(n)]] >= 0]
    cand_set = set(candidates)
    pos = np.array([(u, v) for u, v in nxt.edges if u in cand_set and v in cand_set], dtype=np.int64).reshape(-1, 2)
    if not len(pos):
        return None
    neg = negative_sample(nxt, len(pos), seed, nodes=candidates)
    ids = np.concatenate([pos, neg])
    rows = np.vectorize(lookup.__getitem__, otypes=[np.int64])(ids)
    local = cur[rows]
    y = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    return Targets(t, torch.as_tensor(rows), torch.as_tensor(local), torch.as_tensor(y, dtype=pg.snaps[0].x.dtype), ids)


def build_targets(pg: PreparedGraph, cfg: TrainConfig, first: int, last: int, seed, exclude=None) -> list:
    """Targets whose label timestamp lies in [first, last]."""
    out = []
    for t1 in range(max(first, 2), last + 1):
        if cfg.task == NODE:
            tg = node_targets(pg, t1 - 1, exclude)
        else:
            tg = link_targets(pg, t1 - 1, seed=None if seed is None else [seed, t1])
        if tg is not None:
            out.append(tg)
    return out


def predict(model: DyCIL, z: torch.Tensor, tg: Targets) -> torch.Tensor:
    zt = z[tg.t - 1]
    if model.task == NODE:
        return causal_prediction(zt[tg.rows], NODE, model.classifier)
    return causal_prediction(zt, LINK, model.classifier, pairs=tg.rows)


def env_logits(model: DyCIL, samples: torch.Tensor, tg: Targets) -> torch.Tensor:
    """Environment-branch logits for the targets, one row per sampled instance."""
    if model.task == NODE:
        return model.env_classifier(samples[:, tg.local])
    return model.env_classifier(samples[:, tg.local[:, 0]], samples[:, tg.local[:, 1]])


def compute_loss(model: DyCIL, pg: PreparedGraph, targets: list, cfg: TrainConfig,
                 generator: torch.Generator, t_max: Optional[int] = None) -> LossBreakdown:
    if not targets:
        raise ValueError("no training targets")
    t_max = t_max or max(tg.t for tg in targets)
    out = model(pg, t_max=t_max)
    inv_terms, do_terms, env_terms = [], [], []
    zero = out.z.new_zeros(())
    for tg in targets:
        logits = predict(model, out.z, tg)
        inv_terms.append(task_loss(logits, tg.y, cfg.task))
        if cfg.no_eg:
            continue
        ps = pg.snaps[tg.t - 1]
        posterior, prior = model.environment(ps, out.variant_index[tg.t - 1])
        env_terms.append(kl_divergence(posterior, prior))
        eps = torch.randn((cfg.interventions_per_timestamp,) + tuple(posterior.mean.shape),
                          generator=generator, dtype=posterior.mean.dtype)
        samples = reparameterize(posterior, eps)
        y_do = intervened_prediction(logits, env_logits(model, samples, tg))
        do_terms.append(intervention_loss(task_loss(y_do, tg.y, cfg.task, reduction="instance")))
    loss_inv = torch.stack(inv_terms).mean()
    loss_do = torch.stack(do_terms).mean() if do_terms else zero
    loss_env = torch.stack(env_terms).mean() if env_terms else zero
    return total_loss(loss_inv, loss_do, loss_env, cfg.lam)


@torch.no_grad()
def evaluate(model: DyCIL, z: torch.Tensor, targets: list) -> Optional[float]:
    """Pooled ACC (node task) or AUC (link task) from the causal branch only."""
    if not targets:
        return None
    logits = [predict(model, z, tg) for tg in targets]
    ys = torch.cat([tg.y for tg in targets]).numpy()
    if model.task == NODE:
        pred = torch.cat([l.argmax(-1) for l in logits]).numpy()
        return accuracy(pred, ys)
    return auc(torch.cat(logits).numpy(), ys)


def save_checkpoint(path, model: DyCIL, cfg: TrainConfig, epoch: int, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"state_dict": model.state_dict(), "config": asdict(cfg), "epoch": epoch}
    payload.update(extra or {})
    tmp = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path, graph: DynamicGraph):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = TrainConfig(**payload["config"])
    model = build_model(graph, cfg)
    model.load_state_dict(payload["state_dict"])
    return model, cfg, payload


def build_model(graph: DynamicGraph, cfg: TrainConfig) -> DyCIL:
    with _default_dtype(cfg.torch_dtype):
        return DyCIL(graph.feature_dim, cfg, graph.num_classes)


class _default_dtype:
    def __init__(self, dtype):
        self.dtype = dtype

    def __enter__(self):
        self.prev = torch.get_default_dtype()
        torch.set_default_dtype(self.dtype)

    def __exit__(self, *exc):
        torch.set_default_dtype(self.prev)


@dataclass(eq=False)
class TrainResult:
    model: DyCIL
    records: list
    best_epoch: int
    best_val: Optional[float]
    test_at_best: Optional[float]
    prepared: PreparedGraph
    train_keys: set = field(default_factory=set)
    test_keys: set = field(default_factory=set)


def train(graph: DynamicGraph, split: SplitSpec, cfg: TrainConfig, out_dir=None,
          on_epoch: Optional[Callable] = None, checkpoint_every: int = 0) -> TrainResult:
    """Fit the model with early stopping on the validation metric.

    ``on_epoch(epoch, model, eval_output, record)`` runs after each evaluation.
    With ``out_dir`` set, metrics.jsonl and checkpoint.pt (best epoch) are
    written there; ``checkpoint_every=k`` additionally keeps every k-th epoch
    under checkpoints/.
    """
    split.check(graph.T)
    cfg.check()
    torch.manual_seed(cfg.seed)
    np.random.seed(cfg.seed % 2 ** 32)
    generator = torch.Generator().manual_seed(cfg.seed)

    pg = prepare(graph, cfg.torch_dtype)
    model = build_model(graph, cfg)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)

    fixed_seed = cfg.negative_seed
    train_targets = build_targets(pg, cfg, 2, split.train_end, seed=[cfg.seed, 0])
    exclude = None
    if cfg.inductive and cfg.task == NODE:
        exclude = {int(n) for tg in train_targets for n in tg.ids}
    val_targets = build_targets(pg, cfg, split.train_end + 1, split.val_end, fixed_seed, exclude)
    test_targets = build_targets(pg, cfg, split.val_end + 1, split.test_end, fixed_seed, exclude)
    if not train_targets:
        raise ValueError("split leaves no training targets")
    train_keys = set().union(*(tg.keys() for tg in train_targets))
    test_keys = set().union(*(tg.keys() for tg in test_targets)) if test_targets else set()
    eval_t_max = max(tg.t for tg in val_targets + test_targets) if (val_targets or test_targets) else 1

    metrics_fh = None
    ckpt_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out_dir / "metrics.jsonl", "w", newline="\n")
        ckpt_path = out_dir / "checkpoint.pt"

    records = []
    best_val, best_epoch, best_state, test_at_best = -np.inf, 0, None, None
    last_good = None
    stale = 0
    start = time.perf_counter()
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            model.train()
            if cfg.task == LINK and epoch > 1:
                train_targets = build_targets(pg, cfg, 2, split.train_end, seed=[cfg.seed, epoch])
            try:
                parts = compute_loss(model, pg, train_targets, cfg, generator)
                if not torch.isfinite(parts.total):
                    raise NumericalFailure("loss_total")
            except NumericalFailure as err:
                raise NumericalFailure(err.component, str(last_good) if last_good else None) from None
            opt.zero_grad()
            parts.total.backward()
            opt.step()

            model.eval()
            with torch.no_grad():
                out = model(pg, t_max=eval_t_max)
            val = evaluate(model, out.z, val_targets)
            test = evaluate(model, out.z, test_targets)
            rec = MetricsRecord(epoch, **parts.as_floats(), val_metric=val, test_metric=test,
                                wall_seconds=time.perf_counter() - start)
            records.append(rec)
            if metrics_fh:
                metrics_fh.write(rec.to_json() + "\n")
                metrics_fh.flush()
            if on_epoch is not None:
                on_epoch(epoch, model, out, rec)

            score = -np.inf if val is None else val
            if best_state is None or score > best_val:
                best_val, best_epoch, test_at_best = score, epoch, test
                best_state = copy.deepcopy(model.state_dict())
                stale = 0
                if ckpt_path is not None:
                    last_good = save_checkpoint(ckpt_path, model, cfg, epoch)
            else:
                stale += 1
            if checkpoint_every and out_dir is not None and epoch % checkpoint_every == 0:
                save_checkpoint(out_dir / "checkpoints" / f"epoch_{epoch:04d}.pt", model, cfg, epoch)
            log.debug("epoch %d loss %.4f val %s test %s", epoch, rec.loss_total, val, test)
            if stale >= cfg.patience:
                break
    finally:
        if metrics_fh:
            metrics_fh.close()

    model.load_state_dict(best_state)
    return TrainResult(model, records, best_epoch, None if best_val == -np.inf else best_val,
                       test_at_best, pg, train_keys, test_keys)
