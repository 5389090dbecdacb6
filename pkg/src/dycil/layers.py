"""Sparse message passing on small undirected graphs given as (E, 2) local edge arrays."""
from __future__ import annotations

import torch
from torch import nn


def both_directions(edges: torch.Tensor):
    """(E, 2) undirected edges -> (src, dst) index tensors of length 2E."""
    if edges.numel() == 0:
        empty = torch.zeros(0, dtype=torch.long, device=edges.device)
        return empty, empty
    src = torch.cat([edges[:, 0], edges[:, 1]])
    dst = torch.cat([edges[:, 1], edges[:, 0]])
    return src, dst


def gcn_propagate(x: torch.Tensor, edges: torch.Tensor, weight: torch.Tensor | None = None) -> torch.Tensor:
    """D^-1/2 (A + I) D^-1/2 x with optional per-edge weights on A."""
    n = x.shape[0]
    src, dst = both_directions(edges)
    if weight is None:
        w = torch.ones(src.shape[0], dtype=x.dtype, device=x.device)
    else:
        w = torch.cat([weight, weight])
    deg = torch.ones(n, dtype=x.dtype, device=x.device).index_add(0, dst, w)
    inv_sqrt = deg.rsqrt()
    out = x * (inv_sqrt * inv_sqrt).unsqueeze(-1)  # self-loop term
    if src.numel():
        norm = (w * inv_sqrt[src] * inv_sqrt[dst]).unsqueeze(-1)
        out = out.index_add(0, dst, x[src] * norm)
    return out


class GCNLayer(nn.Module):
    def __init__(self, in_dim: int, out_dim: int, bias: bool = True):
        super().__init__()
        self.linear = nn.Linear(in_dim, out_dim, bias=bias)

    def forward(self, x, edges, weight=None):
        return gcn_propagate(self.linear(x), edges, weight)


def segment_softmax(logits: torch.Tensor, index: torch.Tensor, n: int) -> torch.Tensor:
    """Softmax of ``logits`` within groups given by ``index`` (values in [0, n))."""
    if logits.numel() == 0:
        return logits
    shift = torch.full((n,), float("-inf"), dtype=logits.dtype, device=logits.device)
    shift = shift.scatter_reduce(0, index, logits.detach(), reduce="amax", include_self=True)
    ex = torch.exp(logits - shift[index])
    denom = torch.zeros(n, dtype=logits.dtype, device=logits.device).index_add(0, index, ex)
    return ex / denom[index]
