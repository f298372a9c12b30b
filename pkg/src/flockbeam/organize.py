"""Round-synchronous region formation, coordinate consensus and centroid election.

Everything here runs on the omnidirectional graph. Protocol steps only ever
combine a node's own value with values received from its direct neighbours in
the previous round; :class:`RoundEngine` is the single place where such an
exchange happens.
"""
from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix, diags, identity

from . import _kernels
from .centrality import egocentric_betweenness
from .graph import MixedGraph

_INF = np.int64(2**62)


class Role(enum.Flag):
    STANDARD = 0
    CENTROID = enum.auto()
    PERIPHERAL = enum.auto()

    def label(self) -> str:
        if not self:
            return "standard"
        return "+".join(r.name.lower() for r in (Role.CENTROID, Role.PERIPHERAL) if r in self)

    @classmethod
    def parse(cls, text: str) -> "Role":
        role = cls.STANDARD
        if text != "standard":
            for part in text.split("+"):
                role |= cls[part.upper()]
        return role


class RoundEngine:
    """Synchronous message exchange over the omni links of a graph.

    ``exchange_min`` is one round: every node receives the values of its
    neighbours from the previous round and keeps their minimum.
    """

    def __init__(self, g: MixedGraph):
        self.indptr, self.indices = g.undirected_csr()
        self.n = g.n
        self.round = 0

    def exchange_min(self, values: np.ndarray) -> np.ndarray:
        self.round += 1
        return _kernels.neighbor_min(self.indptr, self.indices, values, _INF)

    def relax(self, values: np.ndarray, step: int) -> np.ndarray:
        """One round of ``value = min(own, best neighbour + step)``."""
        nb = self.exchange_min(values)
        return np.minimum(values, np.where(nb < _INF, nb + step, _INF))


@dataclass(frozen=True, eq=False)
class RegionState:
    head: np.ndarray
    hop: np.ndarray
    head_degree: np.ndarray
    roles: tuple[Role, ...] = ()

    def __post_init__(self):
        if not self.roles:
            object.__setattr__(self, "roles", (Role.STANDARD,) * len(self.head))

    def __len__(self):
        return len(self.head)

    def __eq__(self, other):
        if not isinstance(other, RegionState):
            return NotImplemented
        return (np.array_equal(self.head, other.head) and np.array_equal(self.hop, other.hop)
                and np.array_equal(self.head_degree, other.head_degree) and self.roles == other.roles)

    @property
    def region_id(self) -> np.ndarray:
        return self.head

    def regions(self) -> dict[int, list[int]]:
        """Partition of the nodes keyed by region id, members ascending."""
        out: dict[int, list[int]] = {}
        for v, h in enumerate(self.head):
            out.setdefault(int(h), []).append(v)
        return dict(sorted(out.items()))

    def heads(self) -> list[int]:
        return sorted(set(int(h) for h in self.head))

    def with_roles(self, centroids: Sequence[int], peripherals: Sequence[int]) -> "RegionState":
        roles = [Role.STANDARD] * len(self)
        for c in centroids:
            roles[c] |= Role.CENTROID
        for p in peripherals:
            roles[p] |= Role.PERIPHERAL
        return replace(self, roles=tuple(roles))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "head", "hop", "role"])
        for v in range(len(self)):
            w.writerow([v, int(self.head[v]), int(self.hop[v]), self.roles[v].label()])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, g: MixedGraph | None = None) -> "RegionState":
        rows = list(csv.DictReader(io.StringIO(text)))
        head = np.array([int(r["head"]) for r in rows], dtype=np.int64)
        hop = np.array([int(r["hop"]) for r in rows], dtype=np.int64)
        deg = g.omni_degree()[head] if g is not None else np.zeros_like(head)
        return cls(head, hop, deg, tuple(Role.parse(r["role"]) for r in rows))


def regions(rs: RegionState) -> list[list[int]]:
    return list(rs.regions().values())


def priority_order(g: MixedGraph, seed: int | None = None, random_tiebreak: bool = False) -> np.ndarray:
    """Node ids from strongest to weakest: higher degree first, then lower id
    (or a seeded random order among equal degrees)."""
    deg = g.omni_degree()
    if random_tiebreak:
        tie = np.random.default_rng(seed).permutation(g.n)
    else:
        tie = np.arange(g.n)
    return np.lexsort((tie, -deg))


def lateral_inhibition(g: MixedGraph, gradient: int, seed: int | None = None, *,
                       random_tiebreak: bool = False, strict_guard: bool = False,
                       trace: list[str] | None = None) -> RegionState:
    """Elect spaced heads and grow a region of radius ``gradient`` around each.

    Heads are chosen in phases. In each phase every still-undecided node
    floods its priority ``radius`` hops; a node that hears nothing stronger
    from another undecided node becomes a head, and a second ``radius``-hop
    wave marks everything it reaches as inhibited. Once no node is
    undecided, a hop-count gradient from the heads assigns every node to its
    nearest head (stronger head on equal distance).

    ``radius`` is ``gradient``; with ``strict_guard`` it is ``gradient - 1``.
    """
    if gradient < 1:
        raise ValueError("gradient must be at least 1")
    if len(g.beam_array):
        raise ValueError("region formation runs on the omnidirectional graph only")
    n = g.n
    deg = g.omni_degree()
    order = priority_order(g, seed, random_tiebreak)
    prio = np.empty(n, dtype=np.int64)
    prio[order] = np.arange(n)
    radius = gradient - 1 if strict_guard else gradient

    base = np.int64(radius + 2)
    scale = np.int64(max(n, 1))
    engine = RoundEngine(g)

    def log(keys, unit):
        if trace is None:
            return
        for v in np.flatnonzero(keys < _INF):
            h = order[keys[v] // unit]
            trace.append(f"{engine.round},{v},{h},{keys[v] % unit},{deg[h]}")

    undecided = np.ones(n, dtype=bool)
    is_head = np.zeros(n, dtype=bool)
    while undecided.any():
        # key = priority rank * base + hops travelled; smaller is stronger
        key = np.where(undecided, prio * base, _INF)
        for _ in range(radius):
            key = engine.relax(key, 1)
            log(key, base)
        new = undecided & (key // base == prio)
        is_head |= new
        claim = np.where(new, np.int64(0), _INF)
        for _ in range(radius):
            claim = engine.relax(claim, 1)
        undecided &= claim == _INF

    key = np.where(is_head, prio, _INF)
    while True:
        nxt = engine.relax(key, int(scale))
        if np.array_equal(nxt, key):
            break
        key = nxt
        log(key, scale)
    head = order[key % scale].astype(np.int64)
    hop = (key // scale).astype(np.int64)
    return RegionState(head, hop, deg[head])


# -- consensus ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConsensusState:
    """Virtual-coordinate averaging outcome for one region (rows follow ``nodes``)."""

    nodes: np.ndarray
    initial: np.ndarray
    estimate: np.ndarray
    converged: bool
    rounds: int

    def spread(self) -> float:
        """Largest coordinate difference between any two estimates."""
        if len(self.nodes) < 2:
            return 0.0
        return float((self.estimate.max(axis=0) - self.estimate.min(axis=0)).max())


def initial_coordinates(n: int, seed) -> np.ndarray:
    """Per-node virtual coordinates drawn uniformly from the unit square."""
    return np.random.default_rng(seed).random((n, 2))


def _averaging_operator(g: MixedGraph, label: np.ndarray):
    o = g.omni_array
    keep = label[o[:, 0]] == label[o[:, 1]]
    e = o[keep]
    a = csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                   shape=(g.n, g.n))
    a = a + identity(g.n, format="csr")
    return diags(1.0 / np.asarray(a.sum(axis=1)).ravel()) @ a


def _run_consensus(g, label, x0, tol, limits):
    """Batched closed-neighbourhood averaging; each label freezes on its own."""
    k = int(label.max()) + 1 if label.size else 0
    sizes = np.bincount(label, minlength=k)
    w = _averaging_operator(g, label)
    x = x0.copy()
    rounds = np.zeros(k, dtype=np.int64)
    converged = sizes == 1
    active = ~converged & (limits > 0)
    t = 0
    while active.any():
        t += 1
        nxt = w @ x
        node_active = active[label]
        change = np.abs(nxt - x).max(axis=1)
        change[~node_active] = 0.0
        x[node_active] = nxt[node_active]
        worst = np.zeros(k)
        np.maximum.at(worst, label, change)
        rounds[active] = t
        done = active & (worst <= tol)
        converged |= done
        active &= ~done & (limits > t)
    return x, converged, rounds


def centroid_consensus(region: Sequence[int], g: MixedGraph, seed, tol: float = 1e-9,
                       max_rounds: int | None = None, initial: np.ndarray | None = None) -> ConsensusState:
    nodes = np.array(sorted(int(v) for v in region), dtype=np.int64)
    return consensus_all(g, {int(nodes[0]): nodes}, seed, tol, max_rounds, initial)[int(nodes[0])]


def consensus_all(g: MixedGraph, parts: Mapping[int, Sequence[int]], seed, tol: float = 1e-9,
                  max_rounds: int | None = None,
                  initial: np.ndarray | None = None) -> dict[int, ConsensusState]:
    """Run the averaging in every region at once.

    Initial coordinates are drawn for the whole graph from ``seed`` (unless
    ``initial`` supplies them) and then sliced, so a region's result does not
    depend on which other regions run alongside it. ``max_rounds`` defaults to
    ten times the region size.
    """
    init = initial_coordinates(g.n, seed) if initial is None else np.asarray(initial, dtype=float)
    keys = list(parts)
    label = np.full(g.n, -1, dtype=np.int64)
    for i, key in enumerate(keys):
        label[np.asarray(parts[key], dtype=np.int64)] = i
    members = np.flatnonzero(label >= 0)
    sub, ids = g.subgraph(members)
    sub_label = label[ids]
    sizes = np.bincount(sub_label, minlength=len(keys))
    limits = 10 * sizes if max_rounds is None else np.full(len(keys), max_rounds)
    x, conv, rounds = _run_consensus(sub, sub_label, init[ids], tol, limits)
    out = {}
    for i, key in enumerate(keys):
        rows = np.flatnonzero(sub_label == i)
        out[key] = ConsensusState(ids[rows], init[ids[rows]], x[rows], bool(conv[i]), int(rounds[i]))
    return out


def elect_centroid(region: Sequence[int], cs: ConsensusState, eps: float, g: MixedGraph) -> int:
    """Pick the region's centroid from its consensus outcome.

    Candidates are nodes whose initial coordinates lie in the ``eps`` box
    around their final estimate. The candidate with the largest omni degree
    plus egocentric betweenness (inside the region) wins, lower id on ties.
    Without candidates, the node whose initial coordinates are nearest the
    mean estimate wins.
    """
    nodes = np.asarray(cs.nodes)
    if sorted(int(v) for v in region) != nodes.tolist():
        raise ValueError("consensus state does not match the region")
    if nodes.size == 1:
        return int(nodes[0])
    near = np.abs(cs.initial - cs.estimate).max(axis=1) <= eps
    if near.any():
        sub, _ = g.subgraph(nodes)
        deg = g.omni_degree()
        best, best_score = -1, -np.inf
        for i in np.flatnonzero(near):
            score = deg[nodes[i]] + egocentric_betweenness(sub, int(i))
            if score > best_score:
                best, best_score = int(nodes[i]), score
        return best
    target = cs.estimate.mean(axis=0)
    dist = np.hypot(*(cs.initial - target).T)
    return int(nodes[np.argmin(dist)])


# -- centroid broadcast -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CentroidTable:
    """Hop counts from every centroid to every node, exposed up to ``g_max``."""

    centroids: np.ndarray
    hops: np.ndarray
    g_max: int
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index.update({int(c): i for i, c in enumerate(self.centroids)})

    def __eq__(self, other):
        if not isinstance(other, CentroidTable):
            return NotImplemented
        return (self.g_max == other.g_max and np.array_equal(self.centroids, other.centroids)
                and np.array_equal(self.hops, other.hops))

    def hops_from(self, c: int) -> np.ndarray:
        return self.hops[self._index[c]]

    def rc(self, v: int) -> dict[int, int]:
        col = self.hops[:, v]
        ok = (col >= 0) & (col <= self.g_max)
        return {int(c): int(h) for c, h in zip(self.centroids[ok], col[ok])}

    def entries(self) -> list[dict[int, int]]:
        return [self.rc(v) for v in range(self.hops.shape[1])]


def broadcast_centroids(g: MixedGraph, rs: RegionState, centroid_of: Mapping[int, int],
                        g_max: int) -> tuple[CentroidTable, RegionState]:
    """Flood each centroid's identity and rebase the region state on centroids.

    ``centroid_of`` maps a region id to its elected centroid. Returns the RC
    table and a region state whose head is the centroid and whose hop is the
    omni hop count to it.
    """
    cents = np.array(sorted(set(int(c) for c in centroid_of.values())), dtype=np.int32)
    indptr, indices = g.undirected_csr()
    hops = _kernels.multi_bfs(indptr, indices, cents, -1)
    table = CentroidTable(cents, hops, int(g_max))
    head = np.array([centroid_of[int(h)] for h in rs.head], dtype=np.int64)
    hop = np.array([table.hops_from(int(c))[v] for v, c in enumerate(head)], dtype=np.int64)
    return table, RegionState(head, hop, g.omni_degree()[head], rs.roles)
