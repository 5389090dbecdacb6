"""Spatial (degree) and temporal encodings feeding the per-node spatio-temporal input."""
from __future__ import annotations

import math

import torch
from torch import nn


class ConfigurationError(ValueError):
    pass


def temporal_encoding(t, frequencies: torch.Tensor) -> torch.Tensor:
    """sqrt(1/d) * [cos(w1 t), sin(w1 t), cos(w2 t), sin(w2 t), ...].

    ``t`` may be a scalar or a 1-D tensor of timestamps; the output has a
    trailing dimension d = 2 * len(frequencies).
    """
    t = torch.as_tensor(t, dtype=frequencies.dtype, device=frequencies.device)
    angles = t.unsqueeze(-1) * frequencies  # (..., d/2)
    d = 2 * frequencies.shape[-1]
    pairs = torch.stack([torch.cos(angles), torch.sin(angles)], dim=-1)
    return pairs.flatten(-2) * math.sqrt(1.0 / d)


class TemporalEncoder(nn.Module):
    """Learnable-frequency time encoding, shared by every module that needs TE(t)."""

    def __init__(self, dim: int):
        super().__init__()
        if dim <= 0 or dim % 2:
            raise ConfigurationError(f"temporal encoding dim must be even and positive, got {dim}")
        self.dim = dim
        i = torch.arange(dim // 2, dtype=torch.get_default_dtype())
        self.frequencies = nn.Parameter(1.0 / 10.0 ** (2.0 * i / dim))

    def forward(self, t) -> torch.Tensor:
        return temporal_encoding(t, self.frequencies)


class DegreeEmbedding(nn.Module):
    """Lookup table over degrees; degrees above ``max_degree`` share the overflow row."""

    def __init__(self, dim: int, max_degree: int = 128):
        super().__init__()
        self.max_degree = max_degree
        self.table = nn.Embedding(max_degree + 2, dim)

    def forward(self, degrees: torch.Tensor) -> torch.Tensor:
        return self.table(degrees.clamp(max=self.max_degree + 1))


class STInputEncoder(nn.Module):
    """H_t^u = W((X_t^u + deg(D_t^u)) + TE(t)).

    The temporal encoding is added element-wise, so it must have the feature
    width. ``combine="concat"`` is reserved for the concatenation reading and
    is not implemented.
    """

    def __init__(self, in_dim: int, out_dim: int, time_encoder: TemporalEncoder,
                 max_degree: int = 128, combine: str = "add"):
        super().__init__()
        if combine == "concat":
            raise NotImplementedError("concatenating TE(t) to the node input is not supported")
        if combine != "add":
            raise ConfigurationError(f"unknown combine mode {combine!r}")
        if time_encoder.dim != in_dim:
            raise ConfigurationError(
                f"temporal encoding width {time_encoder.dim} must equal feature width {in_dim}"
            )
        self.degree = DegreeEmbedding(in_dim, max_degree)
        self.time_encoder = time_encoder
        self.proj = nn.Linear(in_dim, out_dim, bias=False)

    def forward(self, x: torch.Tensor, degrees: torch.Tensor, t) -> torch.Tensor:
        if x.shape[-1] != self.proj.in_features:
            raise ConfigurationError(f"feature width {x.shape[-1]} != {self.proj.in_features}")
        return self.proj(x + self.degree(degrees) + self.time_encoder(t))
