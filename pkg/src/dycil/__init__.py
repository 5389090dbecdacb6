"""Causal subgraph discovery with environment intervention on discrete-time dynamic graphs."""
from .graph import DynamicGraph, Snapshot, SplitSpec, load_dynamic_graph, save_dynamic_graph, validate
from .model import DyCIL, prepare
from .objective import LINK, NODE, TrainConfig
from .train import evaluate, train

__all__ = [
    "DynamicGraph", "Snapshot", "SplitSpec", "load_dynamic_graph", "save_dynamic_graph", "validate",
    "DyCIL", "prepare", "LINK", "NODE", "TrainConfig", "evaluate", "train",
]
