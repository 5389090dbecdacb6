"""Causal-aware spatio-temporal attention.

Spatial stage: per snapshot, each node attends over its causal neighbors with
logits (q_u . k_v / sqrt(d')) * alpha_uv. Stacking ``num_layers`` of these gives
the L-hop receptive field. A node without causal neighbors keeps its own value
vector.

Temporal stage: each node attends over its own spatial outputs at the
timestamps t' <= t where it was present, with TE(t') concatenated.
"""
from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from .encoders import TemporalEncoder
from .layers import both_directions, segment_softmax


class SpatialAttentionLayer(nn.Module):
    """One round of alpha-modulated neighbor attention.

    ``heads`` splits the width into independent attention heads. ``activation``
    ("elu") and ``residual`` are optional extras, off by default.
    """

    def __init__(self, in_dim: int, out_dim: int, heads: int = 1, activation: str | None = None,
                 residual: bool = False):
        super().__init__()
        if out_dim % heads:
            raise ValueError(f"width {out_dim} is not divisible by {heads} heads")
        if activation not in (None, "none", "elu", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        self.q = nn.Linear(in_dim, out_dim, bias=False)
        self.k = nn.Linear(in_dim, out_dim, bias=False)
        self.v = nn.Linear(in_dim, out_dim, bias=False)
        self.heads = heads
        self.scale = 1.0 / math.sqrt(out_dim // heads)
        self.activation = None if activation == "none" else activation
        self.skip = None
        if residual:
            self.skip = nn.Identity() if in_dim == out_dim else nn.Linear(in_dim, out_dim, bias=False)

    def attention_weights(self, x, edges, alpha):
        """Returns (dst, src, beta) over both orientations of every edge; beta is (2E,) or (2E, heads)."""
        src, dst = both_directions(edges)
        if src.numel() == 0:
            return dst, src, x.new_zeros(0)
        a = torch.cat([alpha, alpha])
        n, h = x.shape[0], self.heads
        q, k = self.q(x).view(n, h, -1), self.k(x).view(n, h, -1)
        logits = (q[dst] * k[src]).sum(-1) * self.scale * a.unsqueeze(-1)
        beta = torch.stack([segment_softmax(logits[:, i], dst, n) for i in range(h)], dim=-1)
        return dst, src, beta.squeeze(-1) if h == 1 else beta

    def forward(self, x, edges, alpha):
        n, h = x.shape[0], self.heads
        v = self.v(x)
        dst, src, beta = self.attention_weights(x, edges, alpha)
        beta = beta.reshape(-1, h, 1)
        msg = (beta * v[src].view(-1, h, v.shape[-1] // h)).reshape(-1, v.shape[-1])
        agg = torch.zeros_like(v).index_add(0, dst, msg)
        has_nbr = torch.zeros(n, dtype=torch.bool, device=x.device)
        has_nbr[dst] = True
        out = torch.where(has_nbr.unsqueeze(-1), agg, v)
        if self.skip is not None:
            out = out + self.skip(x)
        if self.activation == "elu":
            out = F.elu(out)
        elif self.activation == "relu":
            out = F.relu(out)
        return out


class SpatialAttention(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, num_layers: int = 1, heads: int = 1,
                 activation: str | None = None, residual: bool = False):
        super().__init__()
        dims = [in_dim] + [out_dim] * num_layers
        self.layers = nn.ModuleList(
            SpatialAttentionLayer(a, b, heads, activation, residual) for a, b in zip(dims[:-1], dims[1:])
        )

    def forward(self, x: torch.Tensor, edges: torch.Tensor, alpha: torch.Tensor) -> torch.Tensor:
        for layer in self.layers:
            x = layer(x, edges, alpha)
        return x


class TemporalAttention(nn.Module):
    def __init__(self, dim: int, te_dim: int):
        super().__init__()
        self.q = nn.Linear(dim + te_dim, dim, bias=False)
        self.k = nn.Linear(dim + te_dim, dim, bias=False)
        self.v = nn.Linear(dim + te_dim, dim, bias=False)
        self.scale = 1.0 / math.sqrt(dim)

    def forward(self, spatial: torch.Tensor, present: torch.Tensor, te: torch.Tensor):
        """Attend over history for every (t, node).

        spatial: (T, N, d) spatial outputs, rows for absent nodes are ignored
        present: (T, N) bool
        te:      (T, d_te) encodings of timestamps 1..T

        Returns (z, valid, gamma): z is (T, N, d); valid marks (t, u) with a
        non-empty history; gamma is (N, T, T) with gamma[u, t, t'] the weight.
        The query for (t, u) comes from the latest t* <= t at which u is present.
        """
        T, N, _ = spatial.shape
        s = torch.cat([spatial, te.unsqueeze(1).expand(T, N, te.shape[-1])], dim=-1)
        q, k, v = self.q(s), self.k(s), self.v(s)

        steps = torch.arange(T, device=spatial.device).unsqueeze(1).expand(T, N)
        last = torch.where(present, steps, torch.full_like(steps, -1)).cummax(dim=0).values
        valid = last >= 0
        q_at = q.gather(0, last.clamp(min=0).unsqueeze(-1).expand_as(q))

        # logits[u, t, t']
        logits = torch.einsum("tud,sud->uts", q_at, k) * self.scale
        causal = torch.tril(torch.ones(T, T, dtype=torch.bool, device=spatial.device))
        mask = causal.unsqueeze(0) & present.t().unsqueeze(1)  # key t' must be present
        # rows with no admissible key would give NaN gradients; they are zeroed below
        mask = mask | ~mask.any(-1, keepdim=True)
        logits = logits.masked_fill(~mask, float("-inf"))
        gamma = torch.softmax(logits, dim=-1)
        gamma = torch.where(valid.t().unsqueeze(-1), gamma, torch.zeros_like(gamma))
        z = torch.einsum("uts,sud->tud", gamma, v)
        return z, valid, gamma
