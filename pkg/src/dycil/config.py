"""Flat ``key = value`` configuration files with typed keys.

Lines are ``key = value``; ``#`` starts a comment. Types come from the target
dataclass. Every problem in a file is collected before raising, so one error
lists all offending keys.
"""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

from .datagen import CollabShiftConfig, MotifGraphConfig
from .graph import SplitSpec
from .objective import TrainConfig


class ConfigError(ValueError):
    def __init__(self, problems: dict):
        self.problems = dict(problems)
        detail = "; ".join(f"{k}: {v}" for k, v in self.problems.items())
        super().__init__(f"invalid configuration keys [{', '.join(self.problems)}]: {detail}")

    @property
    def keys(self) -> list:
        return list(self.problems)


@dataclass
class RunConfig:
    """Everything a train/eval/case-study invocation needs besides the model hyperparameters."""

    data: str = ""
    dataset: str = ""
    train_end: Optional[int] = None   # defaults come from the dataset's split.json
    val_end: Optional[int] = None
    test_end: Optional[int] = None
    num_runs: int = 3
    checkpoint_every: int = 0
    device: str = "cpu"
    train: TrainConfig = field(default_factory=TrainConfig)

    def split(self, T: int) -> SplitSpec:
        missing = [k for k in ("train_end", "val_end", "test_end") if getattr(self, k) is None]
        if missing:
            raise ConfigError({k: "not set and no split.json next to the data" for k in missing})
        spec = SplitSpec(self.train_end, self.val_end, self.test_end)
        spec.check(T)
        return spec


@dataclass
class GenerateConfig:
    kind: str = "temporal_motif"      # temporal_motif | synthetic_collab
    motif: MotifGraphConfig = field(default_factory=MotifGraphConfig)
    collab: CollabShiftConfig = field(default_factory=CollabShiftConfig)
    num_nodes: int = 500
    base_T: int = 16
    base_feature_dim: int = 32
    val_end: int = 11


def parse_text(text: str, source: str = "<config>") -> dict:
    out, problems = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems[f"{source}:{lineno}"] = f"expected key = value, got {raw.strip()!r}"
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            problems[f"{source}:{lineno}"] = "empty key"
        elif key in out:
            problems[key] = f"duplicate key (line {lineno})"
        else:
            out[key] = value
    if problems:
        raise ConfigError(problems)
    return out


def read_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError({"--config": f"file not found: {p}"})
    return parse_text(p.read_text(), str(p))


def _coerce(value: Any, tp):
    if not isinstance(value, str):
        return value
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        if value.lower() in ("none", "null", ""):
            return None
        return _coerce(value, inner[0])
    if tp is bool:
        low = value.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if tp is int:
        return int(value)
    if tp is float:
        return float(value)
    if tp is str:
        return value
    if tp is tuple or origin is tuple:
        return tuple(s.strip() for s in value.split(",") if s.strip())
    raise ValueError(f"unsupported type {tp}")


def _fill(cls, values: dict, problems: dict, prefix: str = ""):
    hints = typing.get_type_hints(cls)
    kwargs = {}
    for f in fields(cls):
        key = prefix + f.name
        if key in values:
            try:
                kwargs[f.name] = _coerce(values[key], hints[f.name])
            except (TypeError, ValueError) as exc:
                problems[key] = str(exc)
    return kwargs


def _blame(cls, prefix: str, message: str) -> dict:
    """Map a validation message like "r must ...; lam must ..." back to keys."""
    names = {f.name for f in fields(cls)}
    out = {}
    for part in message.split("; "):
        for word in part.replace(",", " ").split():
            if word in names:
                out[prefix + word] = part
    return out


def build(cls, values: dict, nested: dict | None = None):
    """Instantiate ``cls`` from flat values; ``nested`` maps field name -> (dataclass, key prefix)."""
    nested = nested or {}
    problems: dict = {}
    known = {f.name for f in fields(cls) if f.name not in nested}
    for name, (sub, prefix) in nested.items():
        known |= {prefix + f.name for f in fields(sub)}
    for key in values:
        if key not in known:
            problems[key] = "unknown key"
    kwargs = _fill(cls, {k: v for k, v in values.items() if k in known}, problems)
    for name in nested:
        kwargs.pop(name, None)
    subs = {}
    for name, (sub, prefix) in nested.items():
        sub_kwargs = _fill(sub, values, problems, prefix)
        try:
            obj = sub(**sub_kwargs)
            if hasattr(obj, "check"):
                obj.check()
            subs[name] = obj
        except (TypeError, ValueError) as exc:
            problems.update(_blame(sub, prefix, str(exc)) or {name: str(exc)})
    if problems:
        raise ConfigError(problems)
    return cls(**kwargs, **subs)


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Config file values, then ``overrides`` on top (CLI flags win)."""
    values = read_file(path) if path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = build(RunConfig, values, {"train": (TrainConfig, "")})
    if cfg.data:
        split_file = Path(cfg.data) / "split.json"
        if split_file.exists():
            stored = json.loads(split_file.read_text())
            for key in ("train_end", "val_end", "test_end"):
                if getattr(cfg, key) is None:
                    setattr(cfg, key, stored.get(key))
            if not cfg.dataset:
                cfg.dataset = stored.get("dataset", "")
    return cfg


def load_generate_config(path=None, overrides: dict | None = None) -> GenerateConfig:
    values = read_file(path) if path else {}
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build(GenerateConfig, values, {"motif": (MotifGraphConfig, "motif."),
                                          "collab": (CollabShiftConfig, "collab.")})


def dump(cfg) -> str:
    """Inverse of the parser for flat and one-level nested dataclasses."""
    lines = []

    def emit(obj, prefix):
        for f in fields(obj):
            v = getattr(obj, f.name)
            if dataclasses.is_dataclass(v):
                emit(v, "" if isinstance(v, TrainConfig) else f"{f.name}.")
            elif isinstance(v, tuple):
                lines.append(f"{prefix}{f.name} = {','.join(v)}")
            else:
                lines.append(f"{prefix}{f.name} = {'none' if v is None else v}")

    emit(cfg, "")
    return "\n".join(lines) + "\n"
