"""Evaluation metrics and negative sampling."""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .graph import Snapshot


class MetricError(ValueError):
    pass


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise MetricError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # average ranks over ties (1-based)
    ranks = np.empty(len(s), dtype=np.float64)
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy(pred: Sequence[int], true: Sequence[int]) -> float:
    p, t = np.asarray(pred), np.asarray(true)
    if p.shape != t.shape:
        raise MetricError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise MetricError("accuracy of an empty prediction set")
    return float((p == t).mean())


def negative_sample(snapshot: Snapshot, count: int, seed, nodes: Optional[Iterable[int]] = None) -> np.ndarray:
    """Uniform sample without replacement of unordered non-adjacent node pairs.

    Returns a canonical (count, 2) array of node ids with u < v. ``nodes``
    restricts the candidate endpoints to a subset of the snapshot's nodes.
    """
    ids = np.sort(np.asarray(list(nodes) if nodes is not None else snapshot.node_ids, dtype=np.int64))
    n = len(ids)
    existing = snapshot.edge_set()
    rng = np.random.default_rng(seed)
    n_pairs = n * (n - 1) // 2
    if n <= 3000:
        iu, ju = np.triu_indices(n, k=1)
        u, v = ids[iu], ids[ju]
        if existing:
            e = np.array(sorted(existing), dtype=np.int64)
            base = max(int(ids.max()), int(e.max())) + 1
            key = u * base + v
            ekey = e[:, 0] * base + e[:, 1]
            keep = ~np.isin(key, ekey)
            u, v = u[keep], v[keep]
        if count > len(u):
            raise MetricError(f"asked for {count} negatives but only {len(u)} non-edges exist")
        pick = np.sort(rng.choice(len(u), size=count, replace=False))
        return np.stack([u[pick], v[pick]], axis=1).reshape(-1, 2)

    idset = set(ids.tolist())
    in_set = sum(1 for a, b in existing if a in idset and b in idset)
    if count > n_pairs - in_set:
        raise MetricError(f"asked for {count} negatives but only {n_pairs - in_set} non-edges exist")
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        a = ids[rng.integers(0, n, size=2 * (count - len(chosen)) + 8)]
        b = ids[rng.integers(0, n, size=len(a))]
        for x, y in zip(a.tolist(), b.tolist()):
            if x == y:
                continue
            pair = (x, y) if x < y else (y, x)
            if pair in existing or pair in chosen:
                continue
            chosen.add(pair)
            if len(chosen) == count:
                break
    return np.array(sorted(chosen), dtype=np.int64).reshape(-1, 2)
