"""Mixed omnidirectional/directional graphs and their global structure metrics.

A :class:`MixedGraph` carries two edge kinds over the same node set:

* omni edges, symmetric, traversable both ways;
* beam edges, directed ``u -> v``, traversable one way.

Metrics follow the conventions used throughout the simulator: hop counts are
unweighted, path lengths are averaged over ordered reachable pairs, and the
clustering coefficient is taken on the underlying undirected graph.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels

UNREACHABLE = -1


class UnreachableError(ValueError):
    """Raised when a metric needs at least one reachable pair and none exists."""


def _pairs(edges, n: int) -> np.ndarray:
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if arr.min() < 0 or arr.max() >= n:
        raise ValueError("edge endpoint out of range")
    if np.any(arr[:, 0] == arr[:, 1]):
        raise ValueError("self-loops are not allowed")
    return arr


def _csr(src: np.ndarray, dst: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    if src.size:
        key = np.unique(src * n + dst)
        src, dst = key // n, key % n
    indptr = np.zeros(n + 1, dtype=np.int32)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return indptr, dst.astype(np.int32)


class MixedGraph:
    """Immutable graph with symmetric omni edges and directed beam edges."""

    __slots__ = ("n", "_omni", "_beam", "positions", "_out", "_und")

    def __init__(self, n: int, omni_edges=(), beam_edges=(), positions=None):
        if n < 0:
            raise ValueError("node count must be non-negative")
        self.n = int(n)
        omni = _pairs(omni_edges, self.n)
        omni = np.sort(omni, axis=1)
        if omni.size:
            omni = np.unique(omni, axis=0)
        beam = _pairs(beam_edges, self.n)
        if beam.size:
            beam = np.unique(beam, axis=0)
        self._omni = omni
        self._beam = beam
        self.positions = None if positions is None else np.asarray(positions, dtype=float)
        self._out = None
        self._und = None

    # -- edge views ---------------------------------------------------------
    @property
    def node_count(self) -> int:
        return self.n

    @property
    def omni_edges(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self._omni}

    @property
    def beam_edges(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self._beam}

    @property
    def omni_array(self) -> np.ndarray:
        return self._omni

    @property
    def beam_array(self) -> np.ndarray:
        return self._beam

    def out_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR of the directed traversal relation (omni both ways, beams one way)."""
        if self._out is None:
            o, b = self._omni, self._beam
            src = np.concatenate([o[:, 0], o[:, 1], b[:, 0]])
            dst = np.concatenate([o[:, 1], o[:, 0], b[:, 1]])
            self._out = _csr(src, dst, self.n)
        return self._out

    def undirected_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR of the underlying undirected graph (any edge counts as a link)."""
        if self._und is None:
            e = np.concatenate([self._omni, self._beam])
            src = np.concatenate([e[:, 0], e[:, 1]])
            dst = np.concatenate([e[:, 1], e[:, 0]])
            self._und = _csr(src, dst, self.n)
        return self._und

    def out_neighbors(self, u: int) -> np.ndarray:
        indptr, indices = self.out_csr()
        return indices[indptr[u]:indptr[u + 1]]

    def omni_neighbors(self, u: int) -> np.ndarray:
        o = self._omni
        return np.sort(np.concatenate([o[o[:, 0] == u, 1], o[o[:, 1] == u, 0]]))

    def omni_degree(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=np.int64)
        np.add.at(deg, self._omni.ravel(), 1)
        return deg

    def has_step(self, u: int, v: int) -> bool:
        return bool(np.any(self.out_neighbors(u) == v))

    # -- derived graphs -----------------------------------------------------
    def subgraph(self, nodes: Sequence[int]) -> tuple["MixedGraph", np.ndarray]:
        """Induced subgraph, relabelled densely in the order given.

        Returns the subgraph and the array mapping new ids to old ids.
        """
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(nodes.size)

        def keep(e):
            if not e.size:
                return e
            m = (remap[e[:, 0]] >= 0) & (remap[e[:, 1]] >= 0)
            return remap[e[m]]

        pos = None if self.positions is None else self.positions[nodes]
        return MixedGraph(nodes.size, keep(self._omni), keep(self._beam), pos), nodes

    def redirect(self, p: int, targets: Iterable[int]) -> "MixedGraph":
        """Make ``p`` transmit only to ``targets`` while keeping everything it receives.

        Omni edges ``{p, w}`` become beam edges ``w -> p``; existing ``p -> *``
        beam edges are dropped and replaced by ``p -> t`` for each target.
        """
        o, b = self._omni, self._beam
        touch = (o[:, 0] == p) | (o[:, 1] == p)
        nbrs = np.where(o[touch, 0] == p, o[touch, 1], o[touch, 0])
        kept_beam = b[b[:, 0] != p]
        t = np.array(sorted(set(int(x) for x in targets) - {p}), dtype=np.int64)
        new_beam = np.concatenate([
            kept_beam,
            np.column_stack([nbrs, np.full(nbrs.size, p)]),
            np.column_stack([np.full(t.size, p), t]),
        ])
        return MixedGraph(self.n, o[~touch], new_beam, self.positions)

    def __eq__(self, other):
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self._omni, other._omni)
                and np.array_equal(self._beam, other._beam))

    def __repr__(self):
        return f"MixedGraph(n={self.n}, omni={len(self._omni)}, beam={len(self._beam)})"

    # -- serialisation ------------------------------------------------------
    def to_edgelist(self) -> str:
        lines = [f"N {self.n}"]
        lines += [f"O {u} {v}" for u, v in self._omni]
        lines += [f"B {u} {v}" for u, v in self._beam]
        return "\n".join(lines) + "\n"

    def write_edgelist(self, path) -> None:
        Path(path).write_text(self.to_edgelist())

    @classmethod
    def from_edgelist(cls, text: str, positions=None) -> "MixedGraph":
        n = None
        omni, beam = [], []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "N" and len(parts) == 2:
                n = int(parts[1])
            elif tag in ("O", "B") and len(parts) == 3:
                (omni if tag == "O" else beam).append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"line {lineno}: cannot parse {raw!r}")
        if n is None:
            raise ValueError("missing 'N <node_count>' header")
        return cls(n, omni, beam, positions)

    @classmethod
    def read_edgelist(cls, path, positions=None) -> "MixedGraph":
        return cls.from_edgelist(Path(path).read_text(), positions)


# -- metrics ----------------------------------------------------------------

def shortest_hops(g: MixedGraph, source: int, limit: int = -1) -> np.ndarray:
    """Directed BFS hop counts from ``source``; ``UNREACHABLE`` (-1) where no path exists."""
    if not 0 <= source < g.n:
        raise IndexError(f"source {source} not in graph of {g.n} nodes")
    indptr, indices = g.out_csr()
    return _kernels.bfs_hops(indptr, indices, int(source), int(limit))


def hop_matrix(g: MixedGraph) -> np.ndarray:
    indptr, indices = g.out_csr()
    return _kernels.all_pairs_hops(indptr, indices)


def average_path_length(g: MixedGraph) -> tuple[float, int]:
    """Mean hop count over ordered reachable pairs ``u != v``.

    Returns ``(apl, reachable_pairs)``. Unreachable pairs are left out of both
    the sum and the count; a graph without any reachable pair raises
    :class:`UnreachableError`.
    """
    if g.n < 2:
        raise UnreachableError("APL needs at least two nodes")
    d = hop_matrix(g)
    mask = d > 0
    count = int(mask.sum())
    if count == 0:
        raise UnreachableError("no reachable pair")
    return float(d[mask].sum(dtype=np.int64)) / count, count


def clustering_coefficient(g: MixedGraph, per_node: bool = False):
    """Mean local clustering on the underlying undirected graph.

    Nodes with fewer than two neighbours contribute zero.
    """
    if g.n == 0:
        raise ValueError("empty graph")
    indptr, indices = g.undirected_csr()
    a = csr_matrix((np.ones(indices.size), indices, indptr), shape=(g.n, g.n))
    k = np.diff(indptr).astype(float)
    links = np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        cc = np.where(k >= 2, links / (k * (k - 1) / 2.0), 0.0)
    return cc if per_node else float(cc.mean())


def _labels(g: MixedGraph, connection: str) -> np.ndarray:
    indptr, indices = g.out_csr()
    a = csr_matrix((np.ones(indices.size), indices, indptr), shape=(g.n, g.n))
    return connected_components(a, directed=True, connection=connection)[1]


def _groups(labels: np.ndarray) -> list[list[int]]:
    groups: dict[int, list[int]] = {}
    for v, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(v)
    return sorted(groups.values(), key=lambda c: c[0])


def weak_components(g: MixedGraph) -> list[list[int]]:
    """Components of the underlying undirected graph, each sorted, ordered by min id."""
    if g.n == 0:
        return []
    return _groups(_labels(g, "weak"))


def strong_components(g: MixedGraph) -> list[list[int]]:
    if g.n == 0:
        return []
    return _groups(_labels(g, "strong"))


def _largest(components: list[list[int]]) -> set[int]:
    # components are ordered by min id, so max() keeps the smallest-min-id among ties
    return set(max(components, key=len)) if components else set()


def largest_weak_component(g: MixedGraph) -> set[int]:
    return _largest(weak_components(g))


def gscc(g: MixedGraph) -> set[int]:
    """Largest strongly connected component; ties go to the smallest minimum id."""
    if g.n < 1:
        raise ValueError("empty graph")
    return _largest(strong_components(g))


def gin(g: MixedGraph, core: set[int] | None = None) -> set[int]:
    """Nodes with a directed path into the GSCC, the GSCC included."""
    core = gscc(g) if core is None else core
    o, b = g.omni_array, g.beam_array
    # reverse traversal: step v -> u for every u -> v
    src = np.concatenate([o[:, 1], o[:, 0], b[:, 1]])
    dst = np.concatenate([o[:, 0], o[:, 1], b[:, 0]])
    indptr, indices = _csr(src, dst, g.n)
    seen = np.zeros(g.n, dtype=bool)
    for c in core:
        if not seen[c]:
            seen |= _kernels.bfs_hops(indptr, indices, int(c), -1) >= 0
    return set(np.flatnonzero(seen).tolist())
