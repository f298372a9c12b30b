"""Antenna geometry: idealised sector beams and a uniform linear array."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import j0

SPEED_OF_LIGHT = 299_792_458.0
MODELS = ("sector", "ula")
# slack for closed-boundary comparisons done in floating point
ANGLE_TOL = 1e-9
RANGE_TOL = 1e-9


@dataclass(frozen=True)
class AntennaConfig:
    model: str = "sector"
    M: int = 6
    r: float = 30.0
    carrier_frequency: float = 2.4e9
    element_spacing: float | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown antenna model {self.model!r}")
        if self.M < 2:
            raise ValueError("beamforming needs M >= 2")
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not self.carrier_frequency > 0:
            raise ValueError("carrier frequency must be positive")
        if self.element_spacing is None:
            object.__setattr__(self, "element_spacing", self.wavelength / 2)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def spacing_ratio(self) -> float:
        return self.element_spacing / self.wavelength


@dataclass(frozen=True)
class Beam:
    owner: int
    m: int
    boresight: float
    length: float
    width: float
    target: int | None = None

    @property
    def sector(self) -> int:
        return int(round(self.boresight / self.width - 0.5))


def sector_beam(m: int, r: float) -> tuple[float, float]:
    """Beam length ``m*r`` and width ``2*pi/m**2``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return m * r, 2 * math.pi / (m * m)


def boresights(m: int) -> np.ndarray:
    """Centres of the ``m**2`` equal sectors, in ``[0, 2*pi)``."""
    k = m * m
    return (np.arange(k) + 0.5) * (2 * math.pi / k)


def angle_between(a, b):
    """Absolute angular difference folded into ``[0, pi]``."""
    d = np.mod(np.asarray(a) - np.asarray(b), 2 * math.pi)
    return np.minimum(d, 2 * math.pi - d)


def _ula_mean_power(m: int, spacing_ratio: float) -> float:
    kd = 2 * math.pi * spacing_ratio
    n = np.arange(1, m)
    return (m + 2 * float(np.sum((m - n) * j0(n * kd)))) / (m * m)


def array_factor(m: int, offset, spacing_ratio: float = 0.5) -> np.ndarray:
    """Normalised power array factor of a broadside ``m``-element line array.

    ``offset`` is measured from broadside, so the phase step between elements is
    ``2*pi*(d/lambda)*sin(offset)``. The peak value is 1.
    """
    psi = 2 * math.pi * spacing_ratio * np.sin(np.asarray(offset, dtype=float))
    half = psi / 2
    den = m * np.sin(half)
    small = np.abs(den) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        af = np.where(small, 1.0, np.sin(m * half) / np.where(small, 1.0, den))
    return af * af


def ula_gain(m: int, offset, spacing_ratio: float = 0.5):
    """Power gain relative to an isotropic radiator, averaging to 1 over the circle."""
    if m < 2:
        raise ValueError("a line array needs m >= 2")
    g = array_factor(m, offset, spacing_ratio) / _ula_mean_power(m, spacing_ratio)
    return float(g) if np.ndim(g) == 0 else g


def ula_peak_gain(m: int, spacing_ratio: float = 0.5) -> float:
    return 1.0 / _ula_mean_power(m, spacing_ratio)


def make_beam(owner: int, m: int, sector: int, cfg: AntennaConfig, target: int | None = None) -> Beam:
    length, width = sector_beam(m, cfg.r)
    if cfg.model == "ula":
        length = cfg.r * math.sqrt(ula_peak_gain(m, cfg.spacing_ratio))
    return Beam(owner, m, float((sector + 0.5) * width), float(length), float(width), target)


def polar(origin, points) -> tuple[np.ndarray, np.ndarray]:
    """Distances and bearings in ``[0, 2*pi)`` from ``origin`` to each point."""
    d = np.asarray(points, dtype=float).reshape(-1, 2) - np.asarray(origin, dtype=float)
    return np.hypot(d[:, 0], d[:, 1]), np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * math.pi)


def covered_mask(dist: np.ndarray, bearing: np.ndarray, beam: Beam, cfg: AntennaConfig) -> np.ndarray:
    off = angle_between(bearing, beam.boresight)
    if cfg.model == "sector":
        mask = (dist <= beam.m * cfg.r + RANGE_TOL) & (off <= beam.width / 2 + ANGLE_TOL)
    else:
        reach = cfg.r * np.sqrt(ula_gain(beam.m, off, cfg.spacing_ratio))
        mask = dist <= reach + RANGE_TOL
    return mask & (dist > 0)


def coverage(origin, beam: Beam, cfg: AntennaConfig, targets) -> np.ndarray:
    """Indices of ``targets`` inside the beam (boundaries closed, the origin itself excluded)."""
    dist, bearing = polar(origin, targets)
    return np.flatnonzero(covered_mask(dist, bearing, beam, cfg))


def max_reach(m: int, cfg: AntennaConfig) -> float:
    """Longest distance any beam of ``m`` elements can cover."""
    if cfg.model == "sector":
        return m * cfg.r
    return cfg.r * math.sqrt(ula_peak_gain(m, cfg.spacing_ratio))


def sector_coverage(dist: np.ndarray, bearing: np.ndarray, m: int, sectors: np.ndarray,
                    cfg: AntennaConfig) -> tuple[np.ndarray, np.ndarray]:
    """Covered node sets for several sectors at once, as ``(ptr, idx)`` segments.

    Uses the same closed-boundary rule as :func:`covered_mask`.
    """
    cand = np.flatnonzero((dist > 0) & (dist <= max_reach(m, cfg) + RANGE_TOL))
    width = 2 * math.pi / (m * m)
    centres = (np.asarray(sectors, dtype=float) + 0.5) * width
    off = angle_between(bearing[cand][None, :], centres[:, None])
    d = dist[cand][None, :]
    if cfg.model == "sector":
        hit = (d <= m * cfg.r + RANGE_TOL) & (off <= width / 2 + ANGLE_TOL)
    else:
        hit = d <= cfg.r * np.sqrt(ula_gain(m, off, cfg.spacing_ratio)) + RANGE_TOL
    rows, cols = np.nonzero(hit)
    ptr = np.zeros(len(centres) + 1, dtype=np.int64)
    np.add.at(ptr, rows + 1, 1)
    return np.cumsum(ptr), cand[cols].astype(np.int32)
