"""Experiment configuration, the end-to-end pipeline, replication and aggregation."""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import math
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from . import graph as gc
from .antenna import AntennaConfig
from .beamforming import commit_beams, decisions_to_csv, identify_peripherals
from .centrality import sociocentric_betweenness
from .graph import MixedGraph, UnreachableError
from .organize import (RegionState, broadcast_centroids, consensus_all, elect_centroid,
                       lateral_inhibition)
from .topology import (Placement, ThinningParams, build_omni_graph, expected_survivors,
                       place_uniform, thin)

log = logging.getLogger(__name__)

RECORD_HEADER = [
    "density", "gradient", "model", "replicate", "seed", "n_nodes", "apl_omni", "apl_dir",
    "cc_omni", "cc_dir", "components_omni", "components_dir", "giant_omni_frac", "gscc_frac",
    "gin_frac", "n_peripheral", "n_centroid", "cbw_hop0", "cbw_hop1", "cbw_hop2", "cbw_hop3",
    "cbw_hop4plus",
]
SUMMARY_METRICS = [
    "n_nodes", "apl_omni", "apl_dir", "cc_omni", "cc_dir", "components_omni", "components_dir",
    "giant_omni_frac", "gscc_frac", "gin_frac", "n_peripheral", "n_centroid", "norm_apl", "norm_cc",
]


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    area_side: float = 500.0
    density_list: tuple[float, ...] = (1e-3, 1.5e-3, 2e-3, 2.5e-3)
    r: float = 30.0
    r_b: float = 30.0
    l_min: int = 5
    gradient_list: tuple[int, ...] = tuple(range(3, 11))
    g_max: int | None = None
    M: int = 6
    eps: float = 0.05
    model: str = "sector"
    replicates: int = 50
    base_seed: int = 0
    tol: float = 1e-9
    max_rounds: int | None = None
    strict_guard: bool = False
    random_tiebreak: bool = False

    def __post_init__(self):
        object.__setattr__(self, "density_list", tuple(float(d) for d in self.density_list))
        object.__setattr__(self, "gradient_list", tuple(int(g) for g in self.gradient_list))
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not self.density_list or any(d <= 0 for d in self.density_list):
            raise ConfigError("densities must be positive")
        if not self.gradient_list or any(g < 1 for g in self.gradient_list):
            raise ConfigError("gradients must be at least 1")
        if self.g_max is not None and self.g_max <= max(self.gradient_list):
            raise ConfigError("g_max must exceed every gradient")
        if self.max_rounds is not None and self.max_rounds < 0:
            raise ConfigError("max_rounds must be non-negative")
        try:
            self.antenna()
            ThinningParams(self.r_b, self.l_min)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def g_max_for(self, gradient: int) -> int:
        return 3 * gradient if self.g_max is None else self.g_max

    def antenna(self, model: str | None = None) -> AntennaConfig:
        return AntennaConfig(model or self.model, self.M, self.r)

    @property
    def thinning(self) -> ThinningParams:
        return ThinningParams(self.r_b, self.l_min)


def _convert(name: str, kind, raw: str):
    if raw == "auto" and name in ("g_max", "max_rounds"):
        return None
    if name == "density_list":
        return tuple(float(x) for x in raw.split(","))
    if name == "gradient_list":
        out = []
        for part in raw.split(","):
            lo, sep, hi = part.strip().partition("..")
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        return tuple(out)
    if kind == "bool":
        if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(raw)
        return raw.lower() in ("true", "1", "yes")
    if kind in ("int", "int | None"):
        return int(raw)
    if kind == "str":
        return raw
    return float(raw)


def parse_config(text: str) -> ExperimentConfig:
    """Read ``key = value`` lines; ``#`` starts a comment. Lists are comma separated."""
    kinds = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, kinds[key], val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from None
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


# -- records ----------------------------------------------------------------------

@dataclass
class MetricsRecord:
    density: float
    gradient: int
    model: str
    replicate: int
    seed: int
    n_nodes: int
    apl_omni: float = math.nan
    apl_dir: float = math.nan
    cc_omni: float = math.nan
    cc_dir: float = math.nan
    components_omni: int = 0
    components_dir: int = 0
    giant_omni_frac: float = 0.0
    gscc_frac: float = 0.0
    gin_frac: float = 0.0
    n_peripheral: int = 0
    n_centroid: int = 0
    cbw_hist: dict[int, int] = field(default_factory=dict)
    n_beams: int = 0
    n_acks: int = 0
    n_unconverged: int = 0
    gin_contains_gscc: bool = True

    def check(self) -> "MetricsRecord":
        problems = []
        for name in ("giant_omni_frac", "gscc_frac", "gin_frac"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name}={getattr(self, name)} outside [0, 1]")
        if self.gscc_frac > self.gin_frac or not self.gin_contains_gscc:
            problems.append("GSCC not contained in GIN")
        for name in ("cc_omni", "cc_dir"):
            v = getattr(self, name)
            if not math.isnan(v) and not 0.0 <= v <= 1.0:
                problems.append(f"{name}={v} outside [0, 1]")
        if problems:
            raise InvariantViolation(f"seed {self.seed}: " + "; ".join(problems))
        return self

    @property
    def key(self):
        return (self.density, self.gradient, self.model, self.replicate)

    def cbw_bins(self) -> list[int]:
        bins = [self.cbw_hist.get(h, 0) for h in range(4)]
        bins.append(sum(c for h, c in self.cbw_hist.items() if h >= 4))
        return bins

    def row(self) -> list[str]:
        def fmt(v):
            return repr(float(v)) if isinstance(v, float) else str(v)
        vals = [getattr(self, k) for k in RECORD_HEADER[:17]] + self.cbw_bins()
        return [fmt(v) for v in vals]

    @property
    def norm_apl(self) -> float:
        return self.apl_dir / self.apl_omni if self.apl_omni > 0 else math.nan

    @property
    def norm_cc(self) -> float:
        return self.cc_dir / self.cc_omni if self.cc_omni > 0 else math.nan


def records_to_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_HEADER)
    for rec in sorted(records, key=lambda r: r.key):
        w.writerow(rec.row())
    return buf.getvalue()


# -- pipeline stages --------------------------------------------------------------

@dataclass
class TopologyStage:
    placement: Placement
    omni: MixedGraph
    apl: float
    cc: float
    components: int
    giant_frac: float


@dataclass
class OrganizeStage:
    formed: RegionState
    rs: RegionState
    centroid_of: dict[int, int]
    table: object
    peripherals: list[int]
    cbw_hist: dict[int, int]
    n_unconverged: int
    trace: list[str] | None = None


def _apl(g: MixedGraph) -> float:
    try:
        return gc.average_path_length(g)[0]
    except UnreachableError:
        return math.nan


def topology_stage(placement: Placement, config: ExperimentConfig) -> TopologyStage:
    thinned = thin(placement, config.thinning)
    omni = build_omni_graph(thinned, config.r)
    if omni.n == 0:
        return TopologyStage(thinned, omni, math.nan, math.nan, 0, 0.0)
    comps = gc.weak_components(omni)
    return TopologyStage(thinned, omni, _apl(omni), gc.clustering_coefficient(omni), len(comps),
                         max(map(len, comps)) / omni.n)


def centroid_betweenness_hops(g: MixedGraph, parts: dict[int, list[int]],
                              centroid_of: dict[int, int]) -> dict[int, int]:
    """Histogram of hop distances from each centroid to its region's nearest
    max-betweenness node, measured inside the region. Regions where every
    node has zero betweenness carry no information and are skipped."""
    hist: Counter = Counter()
    for key, members in parts.items():
        if len(members) < 3:
            continue
        sub, ids = g.subgraph(members)
        bc = sociocentric_betweenness(sub)
        if max(bc.values.values()) <= 0:
            continue
        top = bc.argmax()
        c_local = int(np.flatnonzero(ids == centroid_of[key])[0])
        hops = gc.shortest_hops(sub, c_local)
        hist[int(min(hops[t] for t in top))] += 1
    return dict(sorted(hist.items()))


def organize_stage(topo: TopologyStage, config: ExperimentConfig, gradient: int, seed: int,
                   trace: bool = False) -> OrganizeStage:
    g = topo.omni
    lines = [] if trace else None
    formed = lateral_inhibition(g, gradient, [seed, 3], random_tiebreak=config.random_tiebreak,
                                strict_guard=config.strict_guard, trace=lines)
    parts = formed.regions()
    cons = consensus_all(g, parts, [seed, 1], config.tol, config.max_rounds)
    centroid_of = {h: elect_centroid(parts[h], cons[h], config.eps, g) for h in parts}
    table, rs = broadcast_centroids(g, formed, centroid_of, config.g_max_for(gradient))
    peripherals = identify_peripherals(rs, g)
    rs = rs.with_roles(list(centroid_of.values()), peripherals)
    hist = centroid_betweenness_hops(g, parts, centroid_of)
    unconv = sum(not c.converged for c in cons.values())
    return OrganizeStage(formed, rs, centroid_of, table, peripherals, hist, unconv, lines)


def _gin_core(g: MixedGraph) -> tuple[set[int], set[int]]:
    core = gc.gscc(g)
    return core, gc.gin(g, core)


def beam_stage(topo: TopologyStage, org: OrganizeStage, config: ExperimentConfig, model: str,
               seed: int):
    return commit_beams(topo.omni, org.rs, org.table, config.antenna(model), [seed, 2],
                        org.peripherals, topo.placement.xy)


def assemble_record(topo: TopologyStage, org: OrganizeStage | None, outcome, *, density, gradient,
                    model, replicate, seed) -> MetricsRecord:
    n = topo.omni.n
    rec = MetricsRecord(density, gradient, model, replicate, seed, n)
    if n == 0:
        return rec.check()
    d = outcome.graph
    core, inn = _gin_core(d)
    rec.apl_omni, rec.cc_omni = topo.apl, topo.cc
    rec.components_omni, rec.giant_omni_frac = topo.components, topo.giant_frac
    rec.apl_dir = _apl(d)
    rec.cc_dir = gc.clustering_coefficient(d)
    rec.components_dir = len(gc.weak_components(d))
    rec.gscc_frac, rec.gin_frac = len(core) / n, len(inn) / n
    rec.gin_contains_gscc = core <= inn
    rec.n_peripheral = len(org.peripherals)
    rec.n_centroid = len(org.centroid_of)
    rec.cbw_hist = dict(org.cbw_hist)
    rec.n_beams = len(outcome.beams)
    rec.n_acks = len(outcome.acks)
    rec.n_unconverged = org.n_unconverged
    return rec.check()


def run_pipeline(placement: Placement, config: ExperimentConfig, gradient: int, seed: int, *,
                 model: str | None = None, density: float | None = None, replicate: int = 0,
                 keep: dict | None = None) -> MetricsRecord:
    """Thin, organise, beamform and measure one placement.

    ``keep``, when given, receives the intermediate objects (``topology``,
    ``organize``, ``beams``) for inspection.
    """
    model = model or config.model
    if density is None:
        density = len(placement) / placement.area_side ** 2
    topo = topology_stage(placement, config)
    if topo.omni.n == 0:
        return assemble_record(topo, None, None, density=density, gradient=gradient, model=model,
                               replicate=replicate, seed=seed)
    org = organize_stage(topo, config, gradient, seed)
    out = beam_stage(topo, org, config, model, seed)
    if keep is not None:
        keep.update(topology=topo, organize=org, beams=out)
    return assemble_record(topo, org, out, density=density, gradient=gradient, model=model,
                           replicate=replicate, seed=seed)


# -- experiments ------------------------------------------------------------------

def _dump(dump_dir: Path, stem: str, name: str, text: str) -> None:
    try:
        dump_dir.mkdir(parents=True, exist_ok=True)
        (dump_dir / f"{stem}.{name}").write_text(text)
    except OSError as exc:
        log.error("could not write %s.%s: %s", stem, name, exc)


def _replicate(args) -> list[MetricsRecord]:
    config, density, replicate, models, dump_dir = args
    seed = config.base_seed + replicate
    placement = place_uniform(density, config.area_side, seed)
    topo = topology_stage(placement, config)
    out = []
    for gradient in config.gradient_list:
        if topo.omni.n == 0:
            out += [assemble_record(topo, None, None, density=density, gradient=gradient, model=m,
                                    replicate=replicate, seed=seed) for m in models]
            continue
        org = organize_stage(topo, config, gradient, seed, trace=dump_dir is not None)
        stem = f"d{density:g}_g{gradient}_s{seed}"
        if dump_dir is not None:
            _dump(dump_dir, stem, "regions.csv", org.rs.to_csv())
            _dump(dump_dir, stem, "trace.txt", "round,node,head,hop,head_degree\n"
                  + "\n".join(org.trace) + "\n")
        for m in models:
            res = beam_stage(topo, org, config, m, seed)
            if dump_dir is not None:
                _dump(dump_dir, f"{stem}_{m}", "edges", res.graph.to_edgelist())
                _dump(dump_dir, f"{stem}_{m}", "beams.csv", decisions_to_csv(res.decisions))
            out.append(assemble_record(topo, org, res, density=density, gradient=gradient, model=m,
                                       replicate=replicate, seed=seed))
    return out


def run_experiment(config: ExperimentConfig, models: Sequence[str] | None = None, *,
                   jobs: int = 1, dump_dir=None, order: Sequence[int] | None = None) -> list[MetricsRecord]:
    """Every density x gradient x replicate (x model) cell; replicate ``k`` uses seed ``base_seed + k``.

    Records come back sorted by key regardless of ``order`` (the replicate
    execution order) or ``jobs``.
    """
    models = tuple(models or (config.model,))
    reps = list(range(config.replicates)) if order is None else list(order)
    dump = None if dump_dir is None else Path(dump_dir)
    tasks = [(config, d, k, models, dump) for d in config.density_list for k in reps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replicate, tasks))
    else:
        chunks = [_replicate(t) for t in tasks]
    return sorted((r for c in chunks for r in c), key=lambda r: r.key)


# -- aggregation ------------------------------------------------------------------

def mean_ci(values: Sequence[float], level: float = 0.95) -> tuple[float, float, int]:
    """Mean and Student-t half-width over the finite values."""
    x = np.asarray([v for v in values if not math.isnan(v)], dtype=float)
    if x.size == 0:
        return math.nan, math.nan, 0
    if x.size == 1:
        return float(x[0]), math.nan, 1
    sd = float(x.std(ddof=1))
    half = float(stats.t.ppf(0.5 + level / 2, x.size - 1)) * sd / math.sqrt(x.size)
    return float(x.mean()), half, int(x.size)


def pooled_hist(records: Iterable[MetricsRecord]) -> Counter:
    total: Counter = Counter()
    for r in records:
        total.update(r.cbw_hist)
    return total


def within_fraction(hist: Counter, k: int) -> float:
    n = sum(hist.values())
    return sum(c for h, c in hist.items() if h <= k) / n if n else math.nan


def summarize(records: Sequence[MetricsRecord]) -> list[dict]:
    if not records:
        raise ValueError("nothing to summarise")
    groups = defaultdict(list)
    for r in records:
        groups[(r.density, r.gradient, r.model)].append(r)
    rows = []
    for (density, gradient, model), recs in sorted(groups.items()):
        row = {"density": density, "gradient": gradient, "model": model, "n": len(recs)}
        for name in SUMMARY_METRICS:
            mean, half, _ = mean_ci([float(getattr(r, name)) for r in recs])
            row[f"{name}_mean"], row[f"{name}_ci95"] = mean, half
        hist = pooled_hist(recs)
        row["cbw_regions"] = sum(hist.values())
        row["cbw_within1"] = within_fraction(hist, 1)
        row["cbw_within4"] = within_fraction(hist, 4)
        rows.append(row)
    return rows


def summary_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def write_outputs(records: Sequence[MetricsRecord], out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(records_to_csv(records))
    if records:
        (out / "summary.csv").write_text(summary_to_csv(summarize(records)))


# -- analytical diagnostics -------------------------------------------------------

def thinning_report(density: float, config: ExperimentConfig, seeds: Iterable[int]) -> dict:
    """Empirical thinning survival next to the closed-form estimate (as printed and with ``l_min``)."""
    counts = [len(thin(place_uniform(density, config.area_side, s), config.thinning)) for s in seeds]
    area = config.area_side ** 2
    return {
        "empirical_mean": float(np.mean(counts)),
        "formula": expected_survivors(density, area, config.r_b),
        "formula_l_min": expected_survivors(density, area, config.r_b, order=config.l_min),
    }


def region_count_bounds(n_nodes: int, density: float, gradient: int, r: float) -> tuple[float, float]:
    base = n_nodes / (density * gradient ** 2 * r ** 2)
    return base / math.pi, base / math.sqrt(3)


def peripheral_count_bounds(n_nodes: int, gradient: int) -> tuple[float, float]:
    base = n_nodes * (2 * gradient + 1) / gradient ** 2
    return base, base * math.pi / math.sqrt(3)
