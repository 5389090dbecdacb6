"""Prediction heads, intervention and the three-part training loss."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .environment import ContractError

NODE = "node_classification"
LINK = "link_prediction"
TASKS = (NODE, LINK)


class NumericalFailure(FloatingPointError):
    def __init__(self, component: str, checkpoint: Optional[str] = None):
        msg = f"non-finite {component}"
        if checkpoint:
            msg += f"; last good checkpoint: {checkpoint}"
        super().__init__(msg)
        self.component = component
        self.checkpoint = checkpoint


@dataclass
class TrainConfig:
    task: str = NODE
    r: float = 0.4                     # causal ratio
    lam: float = 1e-3                  # trade-off weight
    interventions_per_timestamp: int = 10
    hidden_dim: int = 32
    env_dim: Optional[int] = None      # defaults to hidden_dim
    attention_layers: int = 1
    attention_heads: int = 1
    attention_activation: str = "none"   # none | elu | relu
    attention_residual: bool = False
    max_degree: int = 128
    lr: float = 2e-3
    weight_decay: float = 0.0
    max_epochs: int = 1000
    patience: int = 50
    seed: int = 0
    negative_seed: int = 12345
    inductive: bool = False
    no_sg: bool = False
    no_am: bool = False
    no_eg: bool = False
    dtype: str = "float64"

    def __post_init__(self):
        self.check()

    def check(self) -> None:
        problems = []
        if self.task not in TASKS:
            problems.append(f"task must be one of {TASKS}")
        if not 0 < self.r <= 1:
            problems.append("r must lie in (0, 1]")
        if self.lam < 0:
            problems.append("lam must be >= 0")
        if self.patience > self.max_epochs:
            problems.append("patience must be <= max_epochs")
        if self.interventions_per_timestamp < 1:
            problems.append("interventions_per_timestamp must be >= 1")
        if self.attention_layers < 1 or self.attention_heads < 1:
            problems.append("attention_layers and attention_heads must be >= 1")
        elif self.hidden_dim % self.attention_heads:
            problems.append("hidden_dim must be divisible by attention_heads")
        if self.attention_activation not in ("none", "elu", "relu"):
            problems.append("attention_activation must be none, elu or relu")
        if self.dtype not in ("float32", "float64"):
            problems.append("dtype must be float32 or float64")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def variant(self) -> str:
        tags = [name for flag, name in ((self.no_sg, "w/o SG"), (self.no_am, "w/o AM"), (self.no_eg, "w/o EG")) if flag]
        return ", ".join(tags) if tags else "DyCIL"

    @property
    def torch_dtype(self):
        return torch.float64 if self.dtype == "float64" else torch.float32


@dataclass
class PredictionPair:
    causal_logits: torch.Tensor
    intervened_logits: torch.Tensor  # (n_instances, *causal_logits.shape)
    target: torch.Tensor


@dataclass
class LossBreakdown:
    loss_inv: torch.Tensor
    loss_do: torch.Tensor
    loss_env: torch.Tensor
    total: torch.Tensor
    lam: float

    def as_floats(self) -> dict:
        return {
            "loss_inv": float(self.loss_inv.detach()),
            "loss_do": float(self.loss_do.detach()),
            "loss_env": float(self.loss_env.detach()),
            "loss_total": float(self.total.detach()),
        }


class NodeClassifier(nn.Module):
    """One linear layer from embedding to class logits."""

    def __init__(self, dim: int, num_classes: int):
        super().__init__()
        self.linear = nn.Linear(dim, num_classes)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.linear(z)


class InnerProductClassifier(nn.Module):
    """Link logit = <z_u, z_v>, optionally after a linear map of both rows."""

    def __init__(self, dim: int | None = None, out_dim: int | None = None):
        super().__init__()
        self.proj = nn.Linear(dim, out_dim) if dim is not None else None

    def forward(self, zu: torch.Tensor, zv: torch.Tensor) -> torch.Tensor:
        if self.proj is not None:
            zu, zv = self.proj(zu), self.proj(zv)
        return (zu * zv).sum(-1)


def causal_prediction(z: torch.Tensor, task: str, classifier: nn.Module, pairs: torch.Tensor | None = None):
    """Node task: classifier(z). Link task: classifier(z[u], z[v]) for each row of ``pairs``."""
    if task == NODE:
        return classifier(z)
    if pairs is None:
        raise ContractError("link prediction needs candidate pairs")
    if pairs.numel() and int(pairs.max()) >= z.shape[0]:
        raise ContractError("candidate pair refers to a node without an embedding")
    return classifier(z[pairs[:, 0]], z[pairs[:, 1]])


def intervened_prediction(causal_logits: torch.Tensor, env_logits: torch.Tensor) -> torch.Tensor:
    """y_do = y_c * sigmoid(y_e); ``env_logits`` may carry a leading instance dimension."""
    k = causal_logits.dim()
    if env_logits.dim() < k or env_logits.shape[env_logits.dim() - k:] != causal_logits.shape:
        raise ContractError(
            f"environment logits {tuple(env_logits.shape)} do not align with {tuple(causal_logits.shape)}"
        )
    return causal_logits * torch.sigmoid(env_logits)


def intervention_loss(per_instance_losses) -> torch.Tensor:
    """Population variance of the task loss across environment instances."""
    if isinstance(per_instance_losses, torch.Tensor):
        losses = per_instance_losses.reshape(-1)
    else:
        if len(per_instance_losses) == 0:
            raise ContractError("need at least one environment instance")
        losses = torch.stack([torch.as_tensor(l) for l in per_instance_losses])
    if losses.numel() == 0:
        raise ContractError("need at least one environment instance")
    return ((losses - losses.mean()) ** 2).mean()


def task_loss(logits: torch.Tensor, target: torch.Tensor, task: str, reduction: str = "mean") -> torch.Tensor:
    """Cross-entropy for node classes, binary cross-entropy for link candidates.

    With a leading instance dimension on ``logits`` and ``reduction="instance"``
    the loss is averaged over targets only, one value per instance.
    """
    if target.numel() == 0:
        raise ContractError("no labeled targets")
    if task == NODE:
        if reduction == "instance":
            n = logits.shape[0]
            per = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), target.repeat(n), reduction="none")
            return per.view(n, -1).mean(-1)
        return F.cross_entropy(logits, target)
    target = target.to(logits.dtype)
    if reduction == "instance":
        per = F.binary_cross_entropy_with_logits(logits, target.expand_as(logits), reduction="none")
        return per.mean(-1)
    return F.binary_cross_entropy_with_logits(logits, target)


def total_loss(loss_inv, loss_do, loss_env, lam: float) -> LossBreakdown:
    parts = {"loss_inv": loss_inv, "loss_do": loss_do, "loss_env": loss_env}
    for name, value in parts.items():
        if not torch.isfinite(torch.as_tensor(value)).all():
            raise NumericalFailure(name)
    loss_inv, loss_do, loss_env = (torch.as_tensor(v) for v in parts.values())
    total = loss_inv + lam * (loss_do + loss_env)
    return LossBreakdown(loss_inv, loss_do, loss_env, total, lam)
