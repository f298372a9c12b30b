"""Node placement, Bettstetter thinning and the omnidirectional unit-disk graph."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gammaincc

from .graph import MixedGraph


@dataclass(frozen=True)
class ThinningParams:
    r_b: float
    l_min: int

    def __post_init__(self):
        if not self.r_b > 0:
            raise ValueError("r_b must be positive")
        if self.l_min < 0:
            raise ValueError("l_min must be non-negative")


@dataclass(frozen=True, eq=False)
class Placement:
    """Node positions in a square of side ``area_side``; node id = row index.

    ``origin`` maps each row back to its index in the placement it was thinned
    from (identity for a fresh placement).
    """

    xy: np.ndarray
    area_side: float
    rng_seed: int | None = None
    origin: np.ndarray = field(default=None)

    def __post_init__(self):
        xy = np.asarray(self.xy, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "xy", xy)
        if self.origin is None:
            object.__setattr__(self, "origin", np.arange(len(xy)))
        if xy.size and (xy.min() < 0 or xy.max() > self.area_side):
            raise ValueError("coordinates outside [0, area_side]^2")

    def __len__(self):
        return len(self.xy)

    def __eq__(self, other):
        if not isinstance(other, Placement):
            return NotImplemented
        return self.area_side == other.area_side and np.array_equal(self.xy, other.xy)

    @property
    def nodes(self) -> list[tuple[int, float, float]]:
        return [(i, float(x), float(y)) for i, (x, y) in enumerate(self.xy)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "x", "y"])
        for i, (x, y) in enumerate(self.xy):
            w.writerow([i, repr(float(x)), repr(float(y))])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, area_side: float) -> "Placement":
        rows = list(csv.DictReader(io.StringIO(text)))
        ids = [int(r["id"]) for r in rows]
        if ids != list(range(len(rows))):
            raise ValueError("node ids must be dense, zero-based and in order")
        xy = np.array([[float(r["x"]), float(r["y"])] for r in rows]).reshape(-1, 2)
        return cls(xy, area_side)


def node_count(density: float, area_side: float) -> int:
    if not density > 0:
        raise ValueError("density must be positive")
    return int(math.floor(density * area_side * area_side + 0.5))


def place_uniform(density: float, area_side: float, seed: int) -> Placement:
    """Draw ``round(density * area_side**2)`` nodes uniformly in the square."""
    n = node_count(density, area_side)
    if n < 1:
        raise ValueError(f"density {density} over side {area_side} gives no nodes")
    rng = np.random.default_rng(seed)
    return Placement(rng.uniform(0.0, area_side, size=(n, 2)), area_side, seed)


def neighbor_counts(xy: np.ndarray, radius: float) -> np.ndarray:
    """Number of other points within closed distance ``radius`` of each point."""
    if len(xy) == 0:
        return np.zeros(0, dtype=np.int64)
    tree = cKDTree(xy)
    return tree.query_ball_point(xy, radius, return_length=True) - 1


def thin(p: Placement, params: ThinningParams) -> Placement:
    """Keep the nodes with at least ``l_min`` others within ``r_b``; one simultaneous pass."""
    keep = neighbor_counts(p.xy, params.r_b) >= params.l_min
    return Placement(p.xy[keep], p.area_side, p.rng_seed, p.origin[keep])


def expected_survivors(density: float, area: float, r_b: float, order: float | None = None) -> float:
    """Expected node count left by thinning, ``rho*A*(1 - Gamma(s, rho*pi*r_b^2)/(s-1)!)``.

    ``s`` is ``r_b`` unless ``order`` is given. The ratio of the upper incomplete
    gamma function to the factorial is evaluated as the regularised function,
    so large ``s`` does not overflow. Diagnostic only; the pipeline never calls it.
    """
    if not (density > 0 and area > 0 and r_b > 0):
        raise ValueError("density, area and r_b must be positive")
    s = r_b if order is None else order
    mean_nbrs = density * r_b * r_b * math.pi
    q = float(gammaincc(s, mean_nbrs))
    total = density * area
    if not (math.isfinite(q) and math.isfinite(total)):
        raise OverflowError("expected survivor count is not finite")
    return total * (1.0 - q)


def build_omni_graph(p: Placement, r: float) -> MixedGraph:
    """Unit-disk graph: symmetric edge iff ``0 < dist <= r``."""
    if not r > 0:
        raise ValueError("r must be positive")
    if len(p) < 2:
        return MixedGraph(len(p), positions=p.xy)
    pairs = cKDTree(p.xy).query_pairs(r, output_type="ndarray")
    if pairs.size:
        d = np.hypot(*(p.xy[pairs[:, 0]] - p.xy[pairs[:, 1]]).T)
        pairs = pairs[d > 0]
    return MixedGraph(len(p), pairs, positions=p.xy)
