"""Dynamic causal subgraph generator: edge scoring and top-r causal/variant split."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .encoders import ConfigurationError
from .graph import Snapshot
from .layers import GCNLayer


class DegenerateInputError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EdgeScores:
    """Scores in (0, 1) aligned with ``snapshot.edges`` (canonical order)."""

    timestamp: int
    edges: np.ndarray
    scores: torch.Tensor

    def as_dict(self) -> dict[tuple[int, int], float]:
        vals = self.scores.detach().cpu().numpy()
        return {(int(u), int(v)): float(s) for (u, v), s in zip(self.edges, vals)}


@dataclass(frozen=True, eq=False)
class SubgraphSplit:
    causal_index: np.ndarray   # positions into snapshot.edges, in selection order
    variant_index: np.ndarray  # positions into snapshot.edges, ascending
    ratio: float
    scores: EdgeScores

    @property
    def causal_edges(self) -> np.ndarray:
        return self.scores.edges[np.sort(self.causal_index)]

    @property
    def variant_edges(self) -> np.ndarray:
        return self.scores.edges[self.variant_index]

    def causal_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.causal_edges}

    def variant_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.variant_edges}


class EdgeScorer(nn.Module):
    """Two GCN layers over the full snapshot, then a two-layer MLP on endpoint pairs.

    The MLP is applied to both orientations and averaged before the sigmoid,
    so the score of an undirected edge does not depend on endpoint order.
    """

    def __init__(self, in_dim: int, hidden_dim: int):
        super().__init__()
        self.in_dim = in_dim
        self.gcn1 = GCNLayer(in_dim, hidden_dim)
        self.gcn2 = GCNLayer(hidden_dim, hidden_dim)
        self.mlp = nn.Sequential(
            nn.Linear(2 * hidden_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, 1),
        )

    def embed(self, h: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
        if h.shape[-1] != self.in_dim:
            raise ConfigurationError(f"scorer expects width {self.in_dim}, got {h.shape[-1]}")
        return self.gcn2(torch.relu(self.gcn1(h, edges)), edges)

    def forward(self, h: torch.Tensor, edges: torch.Tensor) -> torch.Tensor:
        z = self.embed(h, edges)
        zu, zv = z[edges[:, 0]], z[edges[:, 1]]
        fwd = self.mlp(torch.cat([zu, zv], dim=-1)).squeeze(-1)
        bwd = self.mlp(torch.cat([zv, zu], dim=-1)).squeeze(-1)
        return torch.sigmoid(0.5 * (fwd + bwd))


def score_edges(snapshot: Snapshot, st_input: torch.Tensor, scorer: EdgeScorer) -> EdgeScores:
    if st_input.shape[0] != snapshot.num_nodes:
        raise ConfigurationError(
            f"st_input has {st_input.shape[0]} rows, snapshot {snapshot.timestamp} has {snapshot.num_nodes} nodes"
        )
    edges = torch.as_tensor(snapshot.local_edges(), device=st_input.device)
    return EdgeScores(snapshot.timestamp, snapshot.edges, scorer(st_input, edges))


def causal_count(num_edges: int, r: float) -> int:
    """K = round(|E| * r) (half up), clamped to [1, |E|]."""
    if not 0 < r <= 1:
        raise ValueError(f"causal ratio must lie in (0, 1], got {r}")
    k = int(math.floor(num_edges * r + 0.5))
    return min(max(k, 1), num_edges)


def top_r_indices(scores: torch.Tensor | np.ndarray, r: float) -> tuple[np.ndarray, np.ndarray]:
    """Indices of the top-K scores (ties by lower index) and the ascending complement."""
    s = scores.detach().cpu().numpy() if isinstance(scores, torch.Tensor) else np.asarray(scores)
    n = len(s)
    if n == 0:
        raise DegenerateInputError("cannot split a snapshot without edges")
    k = causal_count(n, r)
    order = np.argsort(-s, kind="stable")
    causal = order[:k]
    variant = np.sort(order[k:])
    return causal, variant


def split_subgraph(snapshot: Snapshot, scores: EdgeScores, r: float) -> SubgraphSplit:
    if snapshot.num_edges == 0:
        raise DegenerateInputError(f"snapshot {snapshot.timestamp} has no edges")
    if len(scores.scores) != snapshot.num_edges:
        raise ValueError("scores do not cover the snapshot's edges")
    causal, variant = top_r_indices(scores.scores, r)
    return SubgraphSplit(causal, variant, r, scores)


def variant_subgraph_view(split: SubgraphSplit, snapshot: Snapshot) -> tuple[np.ndarray, np.ndarray]:
    """Dense (features, adjacency) of the variant subgraph over all snapshot nodes."""
    n = snapshot.num_nodes
    adj = np.zeros((n, n), dtype=np.float64)
    if len(split.variant_index):
        le = snapshot.local_edges()[split.variant_index]
        adj[le[:, 0], le[:, 1]] = 1.0
        adj[le[:, 1], le[:, 0]] = 1.0
    return np.array(snapshot.features), adj


def causal_adjacency(split: SubgraphSplit, snapshot: Snapshot) -> np.ndarray:
    n = snapshot.num_nodes
    adj = np.zeros((n, n), dtype=np.float64)
    le = snapshot.local_edges()[split.causal_index]
    adj[le[:, 0], le[:, 1]] = 1.0
    adj[le[:, 1], le[:, 0]] = 1.0
    return adj
