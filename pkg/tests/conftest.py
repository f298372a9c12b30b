import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from flockbeam.graph import MixedGraph  # noqa: E402
from flockbeam.organize import (broadcast_centroids, consensus_all, elect_centroid,  # noqa: E402
                                lateral_inhibition)
from flockbeam.topology import Placement, build_omni_graph  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@st.composite
def mixed_graphs(draw, min_n=1, max_n=10, p_omni=0.3, p_beam=0.15):
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    omni = [e for e in pairs if draw(st.floats(0, 1)) < p_omni]
    arcs = [(u, v) for u in range(n) for v in range(n) if u != v]
    beam = [e for e in arcs if draw(st.floats(0, 1)) < p_beam]
    return MixedGraph(n, omni, beam)


def random_geometric(seed, n, side, r=30.0):
    xy = np.random.default_rng(seed).uniform(0, side, (n, 2))
    return build_omni_graph(Placement(xy, side), r)


@st.composite
def geometric_graphs(draw, min_n=1, max_n=60):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    side = draw(st.floats(20, 200))
    return random_geometric(seed, n, side)


def organise(g, gradient, seed=0, g_max=None, eps=0.05):
    """Regions, centroids and the RC table, wired the way the harness does it."""
    formed = lateral_inhibition(g, gradient, [seed, 3])
    parts = formed.regions()
    cons = consensus_all(g, parts, [seed, 1])
    centroid_of = {h: elect_centroid(parts[h], cons[h], eps, g) for h in parts}
    table, rs = broadcast_centroids(g, formed, centroid_of, g_max or 3 * gradient)
    return rs, table, centroid_of


def random_mixed(rng, n, p_omni=0.3, p_beam=0.15):
    omni = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < p_omni]
    beam = [(u, v) for u in range(n) for v in range(n) if u != v and rng.random() < p_beam]
    return MixedGraph(n, omni, beam)


def arcs(g: MixedGraph):
    out = set(g.beam_edges)
    for u, v in g.omni_edges:
        out |= {(u, v), (v, u)}
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
