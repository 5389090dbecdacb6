"""Discrete-time dynamic graphs: snapshots, dataset I/O and neighborhood queries.

Dataset directory layout::

    meta.json                   {"T": int, "feature_dim": int, "num_classes": int | null}
    snapshot_<t>.nodes          one node id per line
    snapshot_<t>.edges          "u v" per line
    snapshot_<t>.features.csv   row i = features of the i-th id in snapshot_<t>.nodes
    snapshot_<t>.labels         optional, "u label" per line

Timestamps are 1-based, ids are non-negative integers, edges are undirected.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class GraphError(Exception):
    pass


class GraphLoadError(GraphError):
    pass


class GraphParseError(GraphError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = Path(path)
        self.lineno = lineno


class GraphValidationError(GraphError):
    def __init__(self, violations: Sequence["Violation"]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = "" if len(self.violations) <= 5 else f" (+{len(self.violations) - 5} more)"
        super().__init__(f"invalid dynamic graph: {lines}{more}")


@dataclass(frozen=True)
class Violation:
    snapshot: int  # timestamp t, 0 for graph-level problems
    kind: str
    item: object = None

    def __str__(self):
        where = f"snapshot {self.snapshot}" if self.snapshot else "graph"
        return f"{where}: {self.kind}" + ("" if self.item is None else f" {self.item}")


def canonical_edges(edges: Iterable[Sequence[int]]) -> np.ndarray:
    """Return an (E, 2) int64 array with u < v per row, lexicographically sorted.

    Self-loops and duplicates are *not* removed here; ``validate`` reports them.
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    arr = np.sort(arr, axis=1)
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    return arr[order]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Snapshot:
    """One graph snapshot at timestamp ``t``.

    ``labels`` is aligned with ``node_ids``; -1 marks an unlabeled node.
    """

    timestamp: int
    node_ids: np.ndarray
    edges: np.ndarray
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "node_ids", _frozen(np.asarray(self.node_ids, dtype=np.int64).reshape(-1)))
        object.__setattr__(self, "edges", _frozen(canonical_edges(self.edges)))
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(len(self.node_ids), -1) if len(self.node_ids) else feats.reshape(0, 0)
        object.__setattr__(self, "features", _frozen(feats))
        if self.labels is not None:
            object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int64).reshape(-1)))
        object.__setattr__(self, "_index", {int(n): i for i, n in enumerate(self.node_ids)})

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def local_index(self, node: int) -> int:
        try:
            return self._index[int(node)]
        except KeyError:
            raise KeyError(f"node {node} not in snapshot {self.timestamp}") from None

    def has_node(self, node: int) -> bool:
        return int(node) in self._index

    def local_edges(self) -> np.ndarray:
        """Edges re-indexed into row positions of ``features``."""
        if not len(self.edges):
            return np.zeros((0, 2), dtype=np.int64)
        lookup = np.vectorize(self._index.__getitem__, otypes=[np.int64])
        return lookup(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    def degrees(self) -> np.ndarray:
        """Degree of every node, aligned with ``node_ids``."""
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        if self.num_edges:
            le = self.local_edges()
            np.add.at(deg, le[:, 0], 1)
            np.add.at(deg, le[:, 1], 1)
        return deg

    def label_of(self, node: int) -> int:
        if self.labels is None:
            return -1
        return int(self.labels[self.local_index(node)])


@dataclass(frozen=True, eq=False)
class DynamicGraph:
    snapshots: tuple
    feature_dim: int
    num_classes: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "snapshots", tuple(self.snapshots))

    @property
    def T(self) -> int:
        return len(self.snapshots)

    def __len__(self):
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, t: int) -> Snapshot:
        """1-based access: ``graph[t]`` is the snapshot with timestamp t."""
        if not 1 <= t <= self.T:
            raise IndexError(f"timestamp {t} outside 1..{self.T}")
        return self.snapshots[t - 1]

    def all_node_ids(self) -> np.ndarray:
        if not self.snapshots:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate([s.node_ids for s in self.snapshots]))

    @property
    def global_node_count(self) -> int:
        return len(self.all_node_ids())


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split: train 1..train_end, val ..val_end, test ..test_end."""

    train_end: int
    val_end: int
    test_end: int

    def check(self, T: int) -> None:
        if not (1 <= self.train_end < self.val_end <= self.test_end <= T):
            raise ValueError(
                f"split must satisfy 1 <= train_end < val_end <= test_end <= T, got "
                f"{self.train_end}/{self.val_end}/{self.test_end} with T={T}"
            )

    def phase(self, t: int) -> str:
        if t <= self.train_end:
            return "train"
        if t <= self.val_end:
            return "val"
        if t <= self.test_end:
            return "test"
        return "unused"


def node_degree(snapshot: Snapshot, node: int) -> int:
    idx = snapshot.local_index(node)
    return int(snapshot.degrees()[idx])


def l_hop_neighbors(edge_set: Iterable[Sequence[int]], node: int, L: int) -> set[int]:
    """Nodes within ``L`` hops of ``node`` over ``edge_set``, excluding ``node``."""
    if L < 1:
        raise ValueError("L must be >= 1")
    adj: dict[int, set[int]] = {}
    for u, v in edge_set:
        u, v = int(u), int(v)
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    seen = {int(node)}
    frontier = {int(node)}
    for _ in range(L):
        nxt = set()
        for u in frontier:
            nxt |= adj.get(u, set())
        frontier = nxt - seen
        if not frontier:
            break
        seen |= frontier
    seen.discard(int(node))
    return seen


def validate(graph: DynamicGraph) -> list[Violation]:
    """Enumerate every invariant violation; an empty list means the graph is valid."""
    out: list[Violation] = []
    for i, snap in enumerate(graph.snapshots, start=1):
        if snap.timestamp != i:
            out.append(Violation(i, "timestamp out of order", snap.timestamp))
        ids = snap.node_ids
        if len(np.unique(ids)) != len(ids):
            vals, counts = np.unique(ids, return_counts=True)
            for n in vals[counts > 1]:
                out.append(Violation(i, "duplicate node id", int(n)))
        if (ids < 0).any():
            out.append(Violation(i, "negative node id", int(ids[ids < 0][0])))
        idset = set(int(n) for n in ids)
        prev = None
        for u, v in snap.edges:
            u, v = int(u), int(v)
            if u == v:
                out.append(Violation(i, "self-loop", (u, v)))
            if prev == (u, v):
                out.append(Violation(i, "duplicate edge", (u, v)))
            prev = (u, v)
            for w in (u, v):
                if w not in idset:
                    out.append(Violation(i, "edge endpoint not in node set", (u, v)))
                    break
        feats = snap.features
        if feats.ndim != 2 or feats.shape[0] != len(ids):
            out.append(Violation(i, "feature row count mismatch", (feats.shape, len(ids))))
        elif feats.shape[1] != graph.feature_dim:
            out.append(Violation(i, "feature width mismatch", (feats.shape[1], graph.feature_dim)))
        elif not np.isfinite(feats).all():
            out.append(Violation(i, "non-finite feature"))
        if snap.labels is not None:
            if len(snap.labels) != len(ids):
                out.append(Violation(i, "label count mismatch", (len(snap.labels), len(ids))))
            elif graph.num_classes is not None:
                bad = (snap.labels >= graph.num_classes) | (snap.labels < -1)
                if bad.any():
                    out.append(Violation(i, "label out of range", int(snap.labels[bad][0])))
    return out


def check(graph: DynamicGraph) -> DynamicGraph:
    violations = validate(graph)
    if violations:
        raise GraphValidationError(violations)
    return graph


# ---------------------------------------------------------------------------
# file I/O


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def save_dynamic_graph(graph: DynamicGraph, path) -> Path:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"T": graph.T, "feature_dim": graph.feature_dim, "num_classes": graph.num_classes}
    _atomic_write_text(root / "meta.json", json.dumps(meta) + "\n")
    for snap in graph.snapshots:
        t = snap.timestamp
        _atomic_write_text(root / f"snapshot_{t}.nodes", "".join(f"{n}\n" for n in snap.node_ids))
        _atomic_write_text(root / f"snapshot_{t}.edges", "".join(f"{u} {v}\n" for u, v in snap.edges))
        # repr of a python float round-trips exactly
        rows = (",".join(repr(float(x)) for x in row) for row in snap.features)
        _atomic_write_text(root / f"snapshot_{t}.features.csv", "".join(r + "\n" for r in rows))
        labels_path = root / f"snapshot_{t}.labels"
        if snap.labels is not None:
            lines = (f"{n} {l}\n" for n, l in zip(snap.node_ids, snap.labels) if l >= 0)
            _atomic_write_text(labels_path, "".join(lines))
        elif labels_path.exists():
            labels_path.unlink()
    return root


def _read_lines(path: Path) -> list[str]:
    if not path.exists():
        raise GraphLoadError(f"missing file: {path}")
    with open(path) as fh:
        return fh.read().splitlines()


def _parse_ints(path: Path, lines: list[str], width: int) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != width:
            raise GraphParseError(path, lineno, f"expected {width} integer field(s), got {line!r}")
        try:
            vals = [int(p) for p in parts]
        except ValueError:
            raise GraphParseError(path, lineno, f"non-integer field in {line!r}") from None
        if vals[0] < 0 or (width == 2 and path.suffix == ".edges" and vals[1] < 0):
            raise GraphParseError(path, lineno, "negative node id")
        rows.append(vals)
    return np.asarray(rows, dtype=np.int64).reshape(-1, width)


def load_dynamic_graph(path) -> DynamicGraph:
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise GraphLoadError(f"missing file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text())
        T = int(meta["T"])
        feature_dim = int(meta["feature_dim"])
        num_classes = meta.get("num_classes")
    except (ValueError, KeyError, TypeError) as exc:
        raise GraphParseError(meta_path, 1, f"bad meta.json: {exc}") from None

    snapshots = []
    for t in range(1, T + 1):
        nodes_path = root / f"snapshot_{t}.nodes"
        node_ids = _parse_ints(nodes_path, _read_lines(nodes_path), 1)[:, 0]
        edges_path = root / f"snapshot_{t}.edges"
        edges = _parse_ints(edges_path, _read_lines(edges_path), 2)

        feat_path = root / f"snapshot_{t}.features.csv"
        rows = []
        for lineno, line in enumerate(_read_lines(feat_path), start=1):
            if not line.strip():
                continue
            try:
                rows.append([float(x) for x in line.split(",")])
            except ValueError:
                raise GraphParseError(feat_path, lineno, f"non-numeric feature in {line!r}") from None
            if len(rows[-1]) != feature_dim:
                raise GraphParseError(feat_path, lineno, f"expected {feature_dim} columns, got {len(rows[-1])}")
        features = np.asarray(rows, dtype=np.float64).reshape(len(rows), feature_dim)

        labels = None
        labels_path = root / f"snapshot_{t}.labels"
        if labels_path.exists():
            pairs = _parse_ints(labels_path, _read_lines(labels_path), 2)
            index = {int(n): i for i, n in enumerate(node_ids)}
            labels = np.full(len(node_ids), -1, dtype=np.int64)
            for row, (n, lab) in enumerate(pairs, start=1):
                if int(n) not in index:
                    raise GraphParseError(labels_path, row, f"label for unknown node {n}")
                labels[index[int(n)]] = lab
        snapshots.append(Snapshot(t, node_ids, edges, features, labels))

    return check(DynamicGraph(tuple(snapshots), feature_dim, num_classes))
