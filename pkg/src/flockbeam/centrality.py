"""Closeness, socio-centric betweenness and Everett's egocentric betweenness."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .graph import MixedGraph, hop_matrix

KINDS = ("closeness", "sociocentric", "egocentric")


@dataclass(frozen=True)
class CentralityScores:
    values: dict[int, float]
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown centrality kind {self.kind!r}")

    def __getitem__(self, v: int) -> float:
        return self.values[v]

    def argmax(self) -> list[int]:
        """All nodes attaining the maximum score, ascending."""
        if not self.values:
            return []
        top = max(self.values.values())
        return sorted(v for v, s in self.values.items() if s == top)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "value"])
        for v in sorted(self.values):
            w.writerow([v, repr(self.values[v])])
        return buf.getvalue()


def closeness(g: MixedGraph, scope: Iterable[int] | None = None) -> CentralityScores:
    """``1 / sum of hops`` to the other scope nodes, inside the induced subgraph.

    A node that cannot reach every other scope node scores 0, as does every
    node of a scope smaller than two.
    """
    nodes = list(range(g.n)) if scope is None else sorted(set(int(v) for v in scope))
    if len(nodes) < 2:
        return CentralityScores({v: 0.0 for v in nodes}, "closeness")
    sub, ids = g.subgraph(nodes)
    d = hop_matrix(sub)
    values = {}
    for i, v in enumerate(ids):
        row = np.delete(d[i], i)
        values[int(v)] = 0.0 if (row < 0).any() else 1.0 / float(row.sum())
    return CentralityScores(values, "closeness")


def sociocentric_betweenness(g: MixedGraph) -> CentralityScores:
    """Sum over ordered pairs ``(s, t)`` of the share of shortest ``s -> t`` paths through ``v``.

    Computed with Brandes' accumulation on the directed traversal relation and
    left unnormalised.
    """
    indptr, indices = g.out_csr()
    bc = _kernels.brandes(indptr, indices)
    return CentralityScores({v: float(bc[v]) for v in range(g.n)}, "sociocentric")


def ego_adjacency(g: MixedGraph, v: int) -> tuple[np.ndarray, np.ndarray]:
    """Adjacency matrix of the undirected ego network of ``v`` (``v`` first)."""
    indptr, indices = g.undirected_csr()
    nbrs = indices[indptr[v]:indptr[v + 1]]
    members = np.concatenate([[v], nbrs]).astype(np.int64)
    pos = {int(u): i for i, u in enumerate(members)}
    a = np.zeros((members.size, members.size), dtype=np.int64)
    for i, u in enumerate(members):
        for w in indices[indptr[u]:indptr[u + 1]]:
            j = pos.get(int(w))
            if j is not None:
                a[i, j] = 1
    return a, members


def egocentric_betweenness(g: MixedGraph, v: int) -> float:
    """Sum of ``1/(A^2)[i,j]`` over non-adjacent ego pairs ``i < j`` joined by a 2-path."""
    if not 0 <= v < g.n:
        raise IndexError(f"node {v} not in graph")
    a, _ = ego_adjacency(g, v)
    if a.shape[0] < 3:
        return 0.0
    a2 = a @ a
    iu = np.triu_indices(a.shape[0], k=1)
    sel = (a[iu] == 0) & (a2[iu] > 0)
    return float((1.0 / a2[iu][sel]).sum())
