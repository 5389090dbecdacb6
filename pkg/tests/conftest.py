import numpy as np
import pytest
import torch

from dycil.graph import DynamicGraph, Snapshot

# lines reported by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _float64():
    prev = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(prev)


def toy_graph(n=6, T=3, d=4, seed=0, classes=3, p=0.5):
    """Small random dynamic graph with labels; every snapshot has at least one edge."""
    rng = np.random.default_rng(seed)
    snaps = []
    for t in range(1, T + 1):
        ids = np.arange(n)
        edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p]
        if not edges:
            edges = [(0, 1)]
        snaps.append(Snapshot(t, ids, edges, rng.standard_normal((n, d)), rng.integers(0, classes, n)))
    return DynamicGraph(tuple(snaps), d, classes)


@pytest.fixture
def small_graph():
    return toy_graph()
