"""Adaptive environment generator: Gaussian posterior/prior over latent environments."""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .encoders import TemporalEncoder
from .layers import GCNLayer

LOG_STD_MIN, LOG_STD_MAX = -10.0, 10.0


class ContractError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EnvDistribution:
    mean: torch.Tensor  # (n_nodes, d_e)
    std: torch.Tensor   # same shape, > 0
    timestamp: int = 0


@dataclass(frozen=True, eq=False)
class EnvInstance:
    sample: torch.Tensor
    source_timestamp: int
    draw_index: int


def _split_stats(out: torch.Tensor, timestamp: int) -> EnvDistribution:
    mean, log_std = out.chunk(2, dim=-1)
    return EnvDistribution(mean, log_std.clamp(LOG_STD_MIN, LOG_STD_MAX).exp(), timestamp)


class PosteriorEncoder(nn.Module):
    """Two GCN layers on the variant subgraph -> per-node (mean, log std)."""

    def __init__(self, in_dim: int, hidden_dim: int, env_dim: int):
        super().__init__()
        self.gcn1 = GCNLayer(in_dim, hidden_dim)
        self.gcn2 = GCNLayer(hidden_dim, 2 * env_dim)

    def forward(self, x, edges, timestamp: int = 0) -> EnvDistribution:
        h = torch.relu(self.gcn1(x, edges))
        return _split_stats(self.gcn2(h, edges), timestamp)


class PriorEncoder(nn.Module):
    """One GCN layer, concatenated with TE(t), then a two-layer MLP -> (mean, log std)."""

    def __init__(self, in_dim: int, hidden_dim: int, env_dim: int, time_encoder: TemporalEncoder):
        super().__init__()
        self.gcn = GCNLayer(in_dim, hidden_dim)
        self.time_encoder = time_encoder
        self.mlp = nn.Sequential(
            nn.Linear(hidden_dim + time_encoder.dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, 2 * env_dim),
        )

    def forward(self, x, edges, timestamp: int) -> EnvDistribution:
        h = torch.relu(self.gcn(x, edges))
        te = self.time_encoder(float(timestamp)).expand(h.shape[0], -1)
        return _split_stats(self.mlp(torch.cat([h, te], dim=-1)), timestamp)


def kl_divergence(posterior: EnvDistribution, prior: EnvDistribution) -> torch.Tensor:
    """Closed-form KL(q || p) between diagonal Gaussians, summed over nodes and dims."""
    if posterior.mean.shape != prior.mean.shape or posterior.std.shape != prior.std.shape:
        raise ContractError(f"shape mismatch: {tuple(posterior.mean.shape)} vs {tuple(prior.mean.shape)}")
    var_ratio = (posterior.std / prior.std) ** 2
    diff = ((posterior.mean - prior.mean) / prior.std) ** 2
    kl = torch.log(prior.std / posterior.std) + 0.5 * (var_ratio + diff) - 0.5
    return kl.sum()


def reparameterize(dist: EnvDistribution, eps: torch.Tensor) -> torch.Tensor:
    """mean + std * eps, broadcasting a leading draw dimension on ``eps``."""
    return dist.mean + dist.std * eps


def sample_instances(posterior: EnvDistribution, count: int, generator: torch.Generator | None = None):
    if count < 1:
        raise ContractError("count must be >= 1")
    eps = torch.randn((count,) + tuple(posterior.mean.shape), generator=generator,
                      dtype=posterior.mean.dtype, device=posterior.mean.device)
    samples = reparameterize(posterior, eps)
    return [EnvInstance(samples[i], posterior.timestamp, i) for i in range(count)]

