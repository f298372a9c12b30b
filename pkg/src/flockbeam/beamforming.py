"""Flocking-rule beamforming for peripheral nodes.

Alignment picks who may beam (peripheral nodes), Separation keeps adjacent
peripherals from pointing the same way, and Cohesion points each beam at a
centroid that the sweep shows to be new or far away.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .antenna import (ANGLE_TOL, AntennaConfig, Beam, angle_between, boresights, make_beam,
                      polar, sector_coverage)
from .graph import MixedGraph
from .organize import CentroidTable, RegionState

REASONS = ("new_centroid", "farthest_known", "too_close", "no_candidate")


def identify_peripherals(rs: RegionState, g: MixedGraph) -> list[int]:
    """Nodes with no region-internal neighbour strictly farther from the centroid.

    Expects ``rs.hop`` to hold hop counts to the region centroid.
    """
    o = g.omni_array
    inner = o[rs.head[o[:, 0]] == rs.head[o[:, 1]]]
    blocked = np.zeros(len(rs), dtype=bool)
    u, v = inner[:, 0], inner[:, 1]
    blocked[u[rs.hop[v] > rs.hop[u]]] = True
    blocked[v[rs.hop[u] > rs.hop[v]]] = True
    return np.flatnonzero(~blocked).tolist()


@dataclass(frozen=True)
class BeamDecision:
    node: int
    reason: str
    m: int
    beam: Beam | None = None
    target: int | None = None
    target_prior_hops: int | None = None

    def __post_init__(self):
        if self.reason not in REASONS:
            raise ValueError(f"unknown reason {self.reason!r}")

    @property
    def outcome(self) -> str:
        return "remain_omni" if self.beam is None else "beam"

    def row(self) -> list:
        opt = lambda x: "" if x is None else x
        bore = "" if self.beam is None else repr(self.beam.boresight)
        return [self.node, self.outcome, self.reason, self.m, bore,
                opt(self.target), opt(self.target_prior_hops)]


DECISION_HEADER = ["node", "outcome", "reason", "m", "boresight_rad", "target", "target_prior_hops"]


def decisions_to_csv(decisions: Iterable[BeamDecision]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DECISION_HEADER)
    for d in decisions:
        w.writerow(d.row())
    return buf.getvalue()


def forbidden_sectors(m: int, taken: Iterable[float]) -> set[int]:
    """Sector indices whose boresight lies within half a sector width of a taken one."""
    centres = boresights(m)
    half = np.pi / (m * m)
    out: set[int] = set()
    for b in taken:
        out.update(np.flatnonzero(angle_between(centres, b) <= half + ANGLE_TOL).tolist())
    return out


@dataclass
class SweepResult:
    """Best hop count per reachable centroid and the first sector achieving it."""

    best: dict[int, tuple[int, int]] = field(default_factory=dict)
    covered: dict[int, np.ndarray] = field(default_factory=dict)
    swept: list[int] = field(default_factory=list)

    def hops(self) -> dict[int, int]:
        return {c: h for c, (h, _) in self.best.items()}


class _OutLists:
    """Out-adjacency whose per-node lists can be swapped without rebuilding."""

    def __init__(self, g: MixedGraph):
        indptr, indices = g.out_csr()
        self.starts = indptr[:-1].astype(np.int64)
        self.ends = indptr[1:].astype(np.int64)
        self.buf = indices.astype(np.int32)
        self.used = self.buf.size

    def replace(self, u: int, targets: np.ndarray) -> None:
        need = self.used + targets.size
        if need > self.buf.size:
            grown = np.empty(max(need, 2 * self.buf.size), dtype=np.int32)
            grown[:self.used] = self.buf[:self.used]
            self.buf = grown
        self.buf[self.used:need] = targets
        self.starts[u], self.ends[u] = self.used, need
        self.used = need


def _sweep(p: int, m: int, adj: _OutLists, rc: CentroidTable, forbidden: set[int],
           dist: np.ndarray, bearing: np.ndarray, cfg: AntennaConfig) -> SweepResult:
    sectors = np.array([k for k in range(m * m) if k not in forbidden], dtype=np.int64)
    res = SweepResult(swept=sectors.tolist())
    if not sectors.size:
        return res
    ptr, idx = sector_coverage(dist, bearing, m, sectors, cfg)
    for i, k in enumerate(sectors):
        res.covered[int(k)] = idx[ptr[i]:ptr[i + 1]]
    targets = rc.centroids.astype(np.int32)
    hops = _kernels.sweep_hops(adj.starts, adj.ends, adj.buf, p, ptr, idx, rc.g_max, targets)
    h = np.where(hops >= 0, hops, np.iinfo(np.int32).max)
    best = h.argmin(axis=0)
    for j in np.flatnonzero(hops.max(axis=0) >= 0):
        c = int(targets[j])
        if c != p:
            res.best[c] = (int(h[best[j], j]), int(sectors[best[j]]))
    return res


def sweep_sectors(p: int, m: int, g: MixedGraph, rc: CentroidTable, forbidden: Iterable[int],
                  positions: np.ndarray, cfg: AntennaConfig) -> SweepResult:
    """Try every allowed sector of an ``m``-element beam from ``p``.

    For each sector, ``p``'s out-links are replaced by the covered nodes and a
    hop-limited BFS (``rc.g_max``) runs on ``g``; the centroids it reaches
    are recorded with their smallest hop count and the lowest sector index
    achieving it. ``forbidden`` holds sector indices to skip.
    """
    dist, bearing = polar(positions[p], positions)
    return _sweep(p, m, _OutLists(g), rc, set(forbidden), dist, bearing, cfg)


def choose_target(p: int, rc: Mapping[int, int], rc_star: Mapping[int, int], own_centroid: int,
                  rng: np.random.Generator) -> tuple[int | None, str]:
    """Return ``(target, reason)``; ``target`` is None when ``p`` stays omnidirectional."""
    new = sorted(set(rc_star) - set(rc))
    if new:
        pool = [c for c in new if c != own_centroid] or new
        return pool[int(rng.integers(len(pool)))], "new_centroid"
    known = [c for c in rc_star if c in rc]
    if not known:
        return None, "no_candidate"
    target = min(known, key=lambda c: (-rc[c], c))
    if rc[target] <= 1:
        return None, "too_close"
    return target, "farthest_known"


def apply_beams(g: MixedGraph, covered: Mapping[int, Iterable[int]]) -> MixedGraph:
    """Graph after every ``p`` in ``covered`` transmits only to its covered nodes.

    Equivalent to calling :meth:`MixedGraph.redirect` once per entry in any
    order.
    """
    if not covered:
        return g
    on = np.zeros(g.n, dtype=bool)
    on[list(covered)] = True
    o, b = g.omni_array, g.beam_array
    a, z = on[o[:, 0]], on[o[:, 1]]
    keep = o[~a & ~z]
    into = np.concatenate([o[a & ~z][:, ::-1], o[z & ~a]])
    new = [np.column_stack([np.full(len(t), p), np.asarray(t, dtype=np.int64)])
           for p, t in covered.items()]
    beams = np.concatenate([b[~on[b[:, 0]]], into, *new]) if new else b
    return MixedGraph(g.n, keep, beams, g.positions)


@dataclass
class BeamOutcome:
    graph: MixedGraph
    decisions: list[BeamDecision]
    acks: list[tuple[int, int]]

    @property
    def beams(self) -> list[Beam]:
        return [d.beam for d in self.decisions if d.beam is not None]


def commit_beams(g: MixedGraph, rs: RegionState, table: CentroidTable, cfg: AntennaConfig, seed,
                 peripherals: Iterable[int] | None = None, positions: np.ndarray | None = None) -> BeamOutcome:
    """Let each peripheral node, in ascending id, sweep, choose and commit a beam.

    Sweeps see every beam committed before them. A node may not reuse the
    boresight of an omni neighbour that has already committed. When a beam
    covers its target centroid directly, the centroid's one-off
    acknowledgement is logged as ``(centroid, node)`` in ``acks``.
    """
    positions = g.positions if positions is None else np.asarray(positions, dtype=float)
    if positions is None:
        raise ValueError("beamforming needs node positions")
    if peripherals is None:
        peripherals = identify_peripherals(rs, g)
    rng = np.random.default_rng(seed)
    indptr, indices = g.undirected_csr()
    adj = _OutLists(g)
    committed: dict[int, float] = {}
    covered_by: dict[int, np.ndarray] = {}
    decisions, acks = [], []
    for p in sorted(int(v) for v in peripherals):
        m = int(rng.integers(2, cfg.M + 1))
        taken = [committed[w] for w in indices[indptr[p]:indptr[p + 1]].tolist() if w in committed]
        dist, bearing = polar(positions[p], positions)
        res = _sweep(p, m, adj, table, forbidden_sectors(m, taken), dist, bearing, cfg)
        rc = table.rc(p)
        target, reason = choose_target(p, rc, res.hops(), int(rs.head[p]), rng)
        if target is None:
            decisions.append(BeamDecision(p, reason, m))
            continue
        prior = rc.get(target)
        k = res.best[target][1]
        beam = make_beam(p, m, k, cfg, target)
        cov = res.covered[k]
        adj.replace(p, cov)
        covered_by[p] = cov
        committed[p] = beam.boresight
        decisions.append(BeamDecision(p, reason, m, beam, target, prior))
        if target in cov and (prior is None or prior > 1):
            acks.append((target, p))
    return BeamOutcome(apply_beams(g, covered_by), decisions, acks)
