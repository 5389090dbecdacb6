"""The full model: subgraph generator, causal-aware attention, environment generator, heads."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
from torch import nn

from .attention import SpatialAttention, TemporalAttention
from .encoders import STInputEncoder, TemporalEncoder
from .environment import PosteriorEncoder, PriorEncoder
from .graph import DynamicGraph, Snapshot
from .objective import LINK, NODE, InnerProductClassifier, NodeClassifier, TrainConfig
from .subgraph import DegenerateInputError, EdgeScores, EdgeScorer, SubgraphSplit, top_r_indices


@dataclass(frozen=True, eq=False)
class PreparedSnapshot:
    snapshot: Snapshot
    x: torch.Tensor        # (n, d_in)
    degrees: torch.Tensor  # (n,)
    edges: torch.Tensor    # (E, 2) local indices, canonical order
    gidx: torch.Tensor     # (n,) row of each local node in the global index


@dataclass(frozen=True, eq=False)
class PreparedGraph:
    graph: DynamicGraph
    snaps: tuple
    node_ids: np.ndarray   # global index -> node id
    present: torch.Tensor  # (T, N) bool
    local_of: np.ndarray   # (T, N) local index or -1

    @property
    def N(self) -> int:
        return len(self.node_ids)


def prepare(graph: DynamicGraph, dtype=torch.float64) -> PreparedGraph:
    node_ids = graph.all_node_ids()
    lookup = {int(n): i for i, n in enumerate(node_ids)}
    local_of = np.full((graph.T, len(node_ids)), -1, dtype=np.int64)
    snaps = []
    for snap in graph.snapshots:
        gidx = np.fromiter((lookup[int(n)] for n in snap.node_ids), dtype=np.int64, count=snap.num_nodes)
        local_of[snap.timestamp - 1, gidx] = np.arange(snap.num_nodes)
        snaps.append(PreparedSnapshot(
            snapshot=snap,
            x=torch.as_tensor(np.array(snap.features), dtype=dtype),
            degrees=torch.as_tensor(snap.degrees()),
            edges=torch.as_tensor(snap.local_edges()),
            gidx=torch.as_tensor(gidx),
        ))
    present = torch.as_tensor(local_of >= 0)
    return PreparedGraph(graph, tuple(snaps), node_ids, present, local_of)


@dataclass(eq=False)
class ForwardOutput:
    z: torch.Tensor            # (t_max, N, d) invariant embeddings
    valid: torch.Tensor        # (t_max, N) bool
    spatial: torch.Tensor      # (t_max, N, d) per-snapshot spatial outputs
    gamma: torch.Tensor        # (N, t_max, t_max) temporal weights
    scores: list               # per t: (E,) tensor, or None when the generator is off
    causal_index: list         # per t: np.ndarray of edge positions
    variant_index: list

    def split(self, pg: PreparedGraph, t: int, r: float) -> SubgraphSplit:
        snap = pg.snaps[t - 1].snapshot
        s = self.scores[t - 1]
        if s is None:
            s = torch.ones(snap.num_edges, dtype=self.z.dtype)
        return SubgraphSplit(self.causal_index[t - 1], self.variant_index[t - 1], r,
                             EdgeScores(t, snap.edges, s))


class DyCIL(nn.Module):
    def __init__(self, in_dim: int, config: TrainConfig, num_classes: Optional[int] = None):
        super().__init__()
        self.config = config
        hidden = config.hidden_dim
        env_dim = config.env_dim or hidden
        self.task = config.task
        self.time_encoder = TemporalEncoder(in_dim)
        self.st_input = STInputEncoder(in_dim, hidden, self.time_encoder, config.max_degree)
        self.scorer = EdgeScorer(hidden, hidden)
        self.spatial = SpatialAttention(hidden, hidden, config.attention_layers, config.attention_heads,
                                        config.attention_activation, config.attention_residual)
        self.temporal = TemporalAttention(hidden, in_dim)
        self.posterior = PosteriorEncoder(in_dim, hidden, env_dim)
        self.prior = PriorEncoder(in_dim, hidden, env_dim, self.time_encoder)
        if config.task == NODE:
            if not num_classes:
                raise ValueError("node classification needs num_classes")
            self.classifier = NodeClassifier(hidden, num_classes)
            self.env_classifier = NodeClassifier(env_dim, num_classes)
        else:
            self.classifier = InnerProductClassifier()
            self.env_classifier = InnerProductClassifier(env_dim, hidden)

    def edge_scores(self, ps: PreparedSnapshot):
        """(H_t, alpha_t) for one snapshot."""
        h = self.st_input(ps.x, ps.degrees, float(ps.snapshot.timestamp))
        return h, self.scorer(h, ps.edges)

    def split_snapshot(self, ps: PreparedSnapshot):
        """(H, scores or None, causal positions, variant positions) honoring the ablation flags."""
        cfg = self.config
        n_edges = ps.edges.shape[0]
        if cfg.no_sg:
            h = self.st_input(ps.x, ps.degrees, float(ps.snapshot.timestamp))
            everything = np.arange(n_edges)
            return h, None, everything, everything
        if n_edges == 0:
            raise DegenerateInputError(f"snapshot {ps.snapshot.timestamp} has no edges")
        h, alpha = self.edge_scores(ps)
        causal, variant = top_r_indices(alpha, cfg.r)
        return h, alpha, causal, variant

    def forward(self, pg: PreparedGraph, t_max: Optional[int] = None) -> ForwardOutput:
        t_max = pg.graph.T if t_max is None else t_max
        rows, scores, causal_idx, variant_idx = [], [], [], []
        for ps in pg.snaps[:t_max]:
            h, alpha, causal, variant = self.split_snapshot(ps)
            c = torch.as_tensor(causal, dtype=torch.long)
            if alpha is None or self.config.no_am:
                a = torch.ones(len(causal), dtype=h.dtype)
            else:
                a = alpha[c]
            zs = self.spatial(h, ps.edges[c], a)
            rows.append(zs.new_zeros(pg.N, zs.shape[-1]).index_copy(0, ps.gidx, zs))
            scores.append(alpha)
            causal_idx.append(causal)
            variant_idx.append(variant)
        spatial = torch.stack(rows)
        te = self.time_encoder(torch.arange(1, t_max + 1, dtype=spatial.dtype))
        z, valid, gamma = self.temporal(spatial, pg.present[:t_max], te)
        return ForwardOutput(z, valid, spatial, gamma, scores, causal_idx, variant_idx)

    def environment(self, ps: PreparedSnapshot, variant_index: np.ndarray):
        edges = ps.edges[torch.as_tensor(variant_index, dtype=torch.long)]
        t = ps.snapshot.timestamp
        return self.posterior(ps.x, edges, t), self.prior(ps.x, edges, t)
