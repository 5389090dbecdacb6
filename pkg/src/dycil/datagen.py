"""Synthetic benchmarks: planted-motif node classification and shifted-feature link prediction."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import torch

from .graph import DynamicGraph, Snapshot, SplitSpec, canonical_edges, check


class GeneratorConfigError(ValueError):
    pass


# role classes of the causal motif
TOP, MIDDLE, BOTTOM = 0, 1, 2

# Local node order is (top, middle1, middle2, bottom1, bottom2).
HOUSE_EDGES = ((3, 4), (3, 1), (4, 2), (1, 2), (1, 0), (2, 0))
HOUSE_ROLES = (TOP, MIDDLE, MIDDLE, BOTTOM, BOTTOM)


def _grid_with_diagonals(rows: int, cols: int):
    idx = lambda r, c: r * cols + c
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append((idx(r, c), idx(r, c + 1)))
            if r + 1 < rows:
                edges.append((idx(r, c), idx(r + 1, c)))
            if r + 1 < rows and c + 1 < cols:
                edges.append((idx(r, c), idx(r + 1, c + 1)))
                edges.append((idx(r, c + 1), idx(r + 1, c)))
    return rows * cols, tuple(edges)


def _wheel(spokes: int):
    rim = [(i, i % spokes + 1) for i in range(1, spokes + 1)]
    return spokes + 1, tuple([(0, i) for i in range(1, spokes + 1)] + rim)


# name -> (node count, local edge list)
MOTIFS = {
    "house": (5, HOUSE_EDGES),
    "tree": (7, ((0, 1), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6))),
    "ladder": (6, ((0, 1), (1, 2), (3, 4), (4, 5), (0, 3), (1, 4), (2, 5))),
    "wheel": _wheel(6),
    "cross_grid": _grid_with_diagonals(3, 3),
    "star": (6, tuple((0, i) for i in range(1, 6))),
}


@dataclass
class MotifGraphConfig:
    T: int = 14
    house_a: int = 2
    house_b: int = 1
    epsilon_max: int = 0
    variant_kinds_train: tuple = ("tree", "ladder", "wheel")
    variant_kinds_val: tuple = ("cross_grid",)
    variant_kinds_test: tuple = ("star",)
    train_end: int = 10
    val_end: int = 11
    feature_dim: int = 8
    perturbation_ratio: float = 1.0
    variant_node_ratio: float = 1.0   # variant nodes / causal nodes, must be <= 1
    seed: int = 0

    def house_count(self, t: int, eps: int = 0) -> int:
        return self.house_a * (t + self.house_b) + eps

    def check(self) -> None:
        if self.T < 1:
            raise GeneratorConfigError("T must be >= 1")
        if not 0 <= self.variant_node_ratio <= 1:
            raise GeneratorConfigError("variant subgraph may not have more nodes than the causal subgraph")
        if self.house_count(1) < 1:
            raise GeneratorConfigError("house count must be positive at t=1")
        if self.epsilon_max < 0 or self.perturbation_ratio < 0:
            raise GeneratorConfigError("epsilon_max and perturbation_ratio must be non-negative")
        for kind in (*self.variant_kinds_train, *self.variant_kinds_val, *self.variant_kinds_test):
            if kind not in MOTIFS or kind == "house":
                raise GeneratorConfigError(f"unknown variant motif {kind!r}")

    def kinds_for(self, t: int) -> tuple:
        if t <= self.train_end:
            return tuple(self.variant_kinds_train)
        if t <= self.val_end:
            return tuple(self.variant_kinds_val)
        return tuple(self.variant_kinds_test)


@dataclass(eq=False)
class MotifDataset:
    graph: DynamicGraph
    ground_truth: dict      # t -> (6 * N_h, 2) canonical house edges
    houses: dict            # t -> list of (top, m1, m2, b1, b2)
    variant_kinds: dict     # t -> motif name
    perturbation: dict      # t -> canonical perturbation edges
    config: MotifGraphConfig

    def split(self) -> SplitSpec:
        return SplitSpec(self.config.train_end, self.config.val_end, self.graph.T)


def _random_non_edges(rng, nodes: np.ndarray, existing: set, count: int) -> list:
    n = len(nodes)
    available = n * (n - 1) // 2 - len(existing)
    if count > available:
        raise GeneratorConfigError(f"cannot add {count} perturbation edges, only {available} non-edges")
    out = set()
    while len(out) < count:
        i, j = rng.integers(0, n, size=2)
        if i == j:
            continue
        u, v = int(nodes[i]), int(nodes[j])
        pair = (u, v) if u < v else (v, u)
        if pair in existing or pair in out:
            continue
        out.add(pair)
    return sorted(out)


def generate_temporal_motif(config: MotifGraphConfig) -> MotifDataset:
    config.check()
    max_houses = config.house_count(config.T, config.epsilon_max)
    variant_base = 5 * max_houses

    snapshots, ground_truth, houses_by_t, kinds, perturb = [], {}, {}, {}, {}
    for t in range(1, config.T + 1):
        rng = np.random.default_rng([config.seed, t])
        eps = int(rng.integers(0, config.epsilon_max + 1)) if config.epsilon_max else 0
        n_houses = config.house_count(t, eps)

        node_ids, labels, edges, houses = [], [], [], []
        for k in range(n_houses):
            base = 5 * k
            nodes = tuple(base + i for i in range(5))
            houses.append(nodes)
            node_ids.extend(nodes)
            labels.extend(HOUSE_ROLES)
            edges.extend((base + a, base + b) for a, b in HOUSE_EDGES)
        causal = canonical_edges(edges)

        kind = str(rng.choice(config.kinds_for(t)))
        size, motif_edges = MOTIFS[kind]
        n_variant = int(config.variant_node_ratio * 5 * n_houses) // size
        for m in range(n_variant):
            base = variant_base + m * size
            node_ids.extend(range(base, base + size))
            labels.extend([-1] * size)
            edges.extend((base + a, base + b) for a, b in motif_edges)

        existing = {(min(u, v), max(u, v)) for u, v in edges}
        n_perturb = int(round(config.perturbation_ratio * len(causal)))
        noise = _random_non_edges(rng, np.asarray(node_ids), existing, n_perturb)
        edges.extend(noise)

        features = rng.standard_normal((len(node_ids), config.feature_dim))
        snapshots.append(Snapshot(t, node_ids, edges, features, labels))
        ground_truth[t] = causal
        houses_by_t[t] = houses
        kinds[t] = kind
        perturb[t] = canonical_edges(noise)

    graph = check(DynamicGraph(tuple(snapshots), config.feature_dim, 3))
    return MotifDataset(graph, ground_truth, houses_by_t, kinds, perturb, config)


def count_house_motifs(edge_set: Iterable[Sequence[int]], node_set: Optional[Iterable[int]] = None):
    """Enumerate every (not necessarily induced) house subgraph.

    Each copy is reported once as (top, middle1, middle2, bottom1, bottom2)
    with middle1 < middle2, which removes the mirror automorphism.
    """
    adj: dict[int, set[int]] = {}
    allowed = None if node_set is None else {int(n) for n in node_set}
    for u, v in edge_set:
        u, v = int(u), int(v)
        if u == v or (allowed is not None and (u not in allowed or v not in allowed)):
            continue
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    found = []
    for top in sorted(adj):
        for m1, m2 in combinations(sorted(adj[top]), 2):
            if m2 not in adj[m1]:
                continue
            for b1 in adj[m1]:
                if b1 in (top, m2):
                    continue
                for b2 in adj[m2]:
                    if b2 in (top, m1, b1):
                        continue
                    if b2 in adj[b1]:
                        found.append((top, m1, m2, b1, b2))
    return len(found), found


def house_edges(house: Sequence[int]) -> list:
    return [tuple(sorted((int(house[a]), int(house[b])))) for a, b in HOUSE_EDGES]


def motif_recall(causal_edges, ground_truth_houses: Sequence[Sequence[int]]) -> float:
    """Fraction of ground-truth houses whose six edges all lie in ``causal_edges``.

    ``causal_edges`` may be a SubgraphSplit or any iterable of node pairs.
    """
    if hasattr(causal_edges, "causal_set"):
        chosen = causal_edges.causal_set()
    else:
        chosen = {tuple(sorted((int(u), int(v)))) for u, v in causal_edges}
    if not ground_truth_houses:
        raise ValueError("no ground-truth houses")
    hits = sum(all(e in chosen for e in house_edges(h)) for h in ground_truth_houses)
    return hits / len(ground_truth_houses)


def save_ground_truth(dataset: MotifDataset, path) -> None:
    root = Path(path)
    for t, edges in dataset.ground_truth.items():
        (root / f"ground_truth_{t}.edges").write_text("".join(f"{u} {v}\n" for u, v in edges))


def load_ground_truth(path, T: int) -> dict:
    """t -> list of houses recovered from ``ground_truth_<t>.edges``.

    Planted houses are vertex-disjoint, so enumerating houses on the ground
    truth edges alone recovers them exactly.
    """
    root = Path(path)
    out = {}
    for t in range(1, T + 1):
        f = root / f"ground_truth_{t}.edges"
        if not f.exists():
            raise FileNotFoundError(f"missing ground truth file: {f}")
        pairs = [tuple(int(x) for x in line.split()) for line in f.read_text().splitlines() if line.strip()]
        _, houses = count_house_motifs(pairs)
        out[t] = houses
    return out


# ---------------------------------------------------------------------------
# shifted-feature link prediction


@dataclass
class CollabShiftConfig:
    p_bar: float = 0.4           # shift level on training snapshots
    p_bar_eval: float = 0.1      # shift level from train_end on
    sigma_amp: float = 0.0
    spurious_dim: int = 32
    train_end: int = 10
    steps: int = 200
    lr: float = 1e-2
    seed: int = 0

    def p(self, t: int) -> float:
        base = self.p_bar if t < self.train_end else self.p_bar_eval
        return float(np.clip(base + self.sigma_amp * np.cos(t), 0.0, 1.0))


def shift_probability(p_bar: float, sigma_amp: float, t: int) -> float:
    return float(np.clip(p_bar + sigma_amp * np.cos(t), 0.0, 1.0))


def random_dynamic_graph(num_nodes: int = 500, T: int = 16, feature_dim: int = 32, communities: int = 5,
                         avg_degree: float = 6.0, intra_fraction: float = 0.8, persistence: float = 0.6,
                         feature_noise: float = 1.0, seed: int = 0) -> DynamicGraph:
    """Community-structured dynamic graph with persistent edges and informative features."""
    rng = np.random.default_rng(seed)
    comm = rng.integers(0, communities, size=num_nodes)
    centroids = rng.standard_normal((communities, feature_dim))
    members = [np.flatnonzero(comm == c) for c in range(communities)]
    target = int(num_nodes * avg_degree / 2)

    def new_edge():
        u = int(rng.integers(num_nodes))
        if rng.random() < intra_fraction:
            pool = members[comm[u]]
            v = int(pool[rng.integers(len(pool))])
        else:
            v = int(rng.integers(num_nodes))
        return (u, v) if u < v else (v, u)

    ids = np.arange(num_nodes)
    prev: set = set()
    snapshots = []
    for t in range(1, T + 1):
        edges = {e for e in sorted(prev) if rng.random() < persistence}
        while len(edges) < target:
            e = new_edge()
            if e[0] != e[1]:
                edges.add(e)
        feats = centroids[comm] + feature_noise * rng.standard_normal((num_nodes, feature_dim))
        snapshots.append(Snapshot(t, ids, sorted(edges), feats))
        prev = edges
    return check(DynamicGraph(tuple(snapshots), feature_dim, None))


def _fit_spurious(n: int, pairs: np.ndarray, dim: int, steps: int, lr: float, seed: int) -> np.ndarray:
    """Embeddings whose inner products reconstruct the sampled link set under cross-entropy."""
    gen = torch.Generator().manual_seed(seed)
    x = (0.1 * torch.randn(n, dim, generator=gen, dtype=torch.float64)).requires_grad_(True)
    target = torch.zeros(n, n, dtype=torch.float64)
    if len(pairs):
        p = torch.as_tensor(pairs)
        target[p[:, 0], p[:, 1]] = 1.0
        target[p[:, 1], p[:, 0]] = 1.0
    off_diag = ~torch.eye(n, dtype=torch.bool)
    n_pos = float(target[off_diag].sum())
    pos_weight = torch.tensor((off_diag.sum().item() - n_pos) / max(n_pos, 1.0), dtype=torch.float64)
    opt = torch.optim.Adam([x], lr=lr)
    for _ in range(steps):
        opt.zero_grad()
        logits = x @ x.t()
        loss = torch.nn.functional.binary_cross_entropy_with_logits(
            logits[off_diag], target[off_diag], pos_weight=pos_weight)
        loss.backward()
        opt.step()
    return x.detach().numpy()


def sample_shift_links(snapshot_next: Snapshot, nodes: np.ndarray, p: float, rng) -> np.ndarray:
    """p|E| true links of the next snapshot plus (1-p)|E| non-links, as local index pairs."""
    index = {int(n): i for i, n in enumerate(nodes)}
    true = np.array([(index[u], index[v]) for u, v in snapshot_next.edges
                     if u in index and v in index], dtype=np.int64).reshape(-1, 2)
    m = len(true)
    n_pos = int(round(p * m))
    n_neg = m - n_pos
    pos = true[rng.choice(m, size=n_pos, replace=False)] if n_pos else np.zeros((0, 2), dtype=np.int64)
    existing = {(min(a, b), max(a, b)) for a, b in true.tolist()}
    neg = set()
    n = len(nodes)
    while len(neg) < n_neg:
        a, b = (int(x) for x in rng.integers(0, n, size=2))
        if a == b:
            continue
        pair = (min(a, b), max(a, b))
        if pair in existing or pair in neg:
            continue
        neg.add(pair)
    neg_arr = np.array(sorted(neg), dtype=np.int64).reshape(-1, 2)
    return np.concatenate([pos, neg_arr])


def generate_synthetic_collab(base: DynamicGraph, config: CollabShiftConfig) -> DynamicGraph:
    """Append spurious features correlated with next-step links by an amount p(t).

    The last base snapshot has no successor, so the output has T - 1 snapshots.
    """
    snapshots = []
    for t in range(1, base.T):
        snap, nxt = base[t], base[t + 1]
        rng = np.random.default_rng([config.seed, t])
        pairs = sample_shift_links(nxt, snap.node_ids, config.p(t), rng)
        spurious = _fit_spurious(snap.num_nodes, pairs, config.spurious_dim, config.steps, config.lr,
                                 seed=int(rng.integers(2 ** 31)))
        feats = np.concatenate([snap.features, spurious], axis=1)
        snapshots.append(Snapshot(t, snap.node_ids, snap.edges, feats, snap.labels))
    return check(DynamicGraph(tuple(snapshots), base.feature_dim + config.spurious_dim, base.num_classes))
