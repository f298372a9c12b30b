import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import invariants
import oracles
from conftest import arcs, geometric_graphs, organise, random_geometric
from flockbeam.antenna import AntennaConfig, coverage, make_beam
from flockbeam.beamforming import (BeamDecision, apply_beams, choose_target, commit_beams,
                                   decisions_to_csv, forbidden_sectors, identify_peripherals,
                                   sweep_sectors)
from flockbeam.graph import MixedGraph, weak_components
from flockbeam.organize import CentroidTable, RegionState, broadcast_centroids
from flockbeam.topology import Placement, build_omni_graph

SECTOR = AntennaConfig()


def state(head, hop):
    return RegionState(np.asarray(head), np.asarray(hop), np.ones(len(head), int))


# -- peripherals ------------------------------------------------------------------

def test_isolated_node_is_peripheral():
    assert identify_peripherals(state([0], [0]), MixedGraph(1)) == [0]


def test_path_with_middle_centroid():
    g = MixedGraph(5, [(i, i + 1) for i in range(4)])
    assert identify_peripherals(state([2] * 5, [2, 1, 0, 1, 2]), g) == [0, 4]


def test_equal_hop_neighbours_both_peripheral():
    # nodes 3 and 4 are neighbours at the same distance from centroid 0
    g = MixedGraph(5, [(0, 1), (1, 2), (2, 3), (2, 4), (3, 4)])
    rs = state([0] * 5, [0, 1, 2, 3, 3])
    assert identify_peripherals(rs, g) == [3, 4]


def test_other_region_neighbours_ignored():
    g = MixedGraph(4, [(0, 1), (1, 2), (2, 3)])
    rs = state([0, 0, 3, 3], [0, 1, 1, 0])
    assert identify_peripherals(rs, g) == [1, 2]


@given(geometric_graphs(max_n=50), st.integers(1, 4))
def test_peripheral_definition(g, gradient):
    rs, _, _ = organise(g, gradient)
    invariants.peripheral_condition(g, rs, identify_peripherals(rs, g))


# -- separation -------------------------------------------------------------------

def test_forbidden_same_m():
    b = make_beam(0, 3, 4, SECTOR).boresight
    assert forbidden_sectors(3, [b]) == {4}


def test_forbidden_across_granularities():
    coarse = make_beam(0, 2, 0, SECTOR).boresight  # pi/4
    fine = forbidden_sectors(4, [coarse])
    width = 2 * math.pi / 16
    assert fine == {k for k in range(16) if abs((k + 0.5) * width - coarse) <= width / 2 + 1e-9}
    assert fine == {1, 2}


def test_forbidden_empty():
    assert forbidden_sectors(5, []) == set()


# -- sweep ------------------------------------------------------------------------

def brute_sweep(p, m, g, table, forbidden, xy, cfg):
    best = {}
    for k in range(m * m):
        if k in forbidden:
            continue
        cov = coverage(xy[p], make_beam(p, m, k, cfg), cfg, xy)
        h = g.redirect(p, cov.tolist())
        hops = oracles.hops_from(g.n, arcs(h), p, table.g_max)
        for c in table.centroids.tolist():
            if c != p and hops[c] is not None and (c not in best or hops[c] < best[c][0]):
                best[c] = (hops[c], k)
    return best


def test_sweep_empty_neighbourhood():
    g = MixedGraph(2, positions=np.array([[0.0, 0.0], [400.0, 400.0]]))
    table = CentroidTable(np.array([1]), np.array([[-1, 0]]), 6)
    assert sweep_sectors(0, 3, g, table, set(), g.positions, SECTOR).best == {}


def test_sweep_direct_hit():
    xy = np.array([[0.0, 0.0], [50.0, 1.0]])
    g = MixedGraph(2, positions=xy)
    table = CentroidTable(np.array([1]), np.array([[-1, 0]]), 6)
    res = sweep_sectors(0, 2, g, table, set(), xy, SECTOR)
    assert res.best == {1: (1, 0)}
    assert res.swept == [0, 1, 2, 3]


def test_sweep_all_forbidden():
    xy = np.array([[0.0, 0.0], [50.0, 1.0]])
    table = CentroidTable(np.array([1]), np.array([[-1, 0]]), 6)
    res = sweep_sectors(0, 2, MixedGraph(2, positions=xy), table, {0, 1, 2, 3}, xy, SECTOR)
    assert res.best == {} and res.swept == []


@pytest.mark.parametrize("model", ["sector", "ula"])
@pytest.mark.parametrize("seed", range(8))
def test_sweep_matches_bruteforce_15_nodes(model, seed):
    cfg = AntennaConfig(model=model)
    g = random_geometric(seed, 15, 90)
    rs, table, _ = organise(g, 2, seed)
    rng = np.random.default_rng(seed)
    for p in identify_peripherals(rs, g):
        m = int(rng.integers(2, 7))
        forbidden = set(rng.choice(m * m, size=m, replace=False).tolist())
        got = sweep_sectors(p, m, g, table, forbidden, g.positions, cfg)
        assert got.best == brute_sweep(p, m, g, table, forbidden, g.positions, cfg)


# -- target choice -----------------------------------------------------------------

def test_choose_new_centroid_is_seeded_uniform():
    picks = {choose_target(0, {9: 2}, {5: 3, 7: 4, 9: 2}, 9, np.random.default_rng(s))
             for s in range(40)}
    assert picks == {(5, "new_centroid"), (7, "new_centroid")}
    one = choose_target(0, {}, {5: 3, 7: 4}, 9, np.random.default_rng(3))
    assert one == choose_target(0, {}, {5: 3, 7: 4}, 9, np.random.default_rng(3))


def test_choose_prefers_other_regions():
    for s in range(20):
        assert choose_target(0, {}, {3: 1, 5: 2}, 3, np.random.default_rng(s)) == (5, "new_centroid")
    assert choose_target(0, {}, {3: 1}, 3, np.random.default_rng(0)) == (3, "new_centroid")


def test_choose_farthest_known():
    rng = np.random.default_rng(0)
    assert choose_target(0, {1: 2, 2: 5}, {1: 1, 2: 3}, 1, rng) == (2, "farthest_known")
    assert choose_target(0, {1: 4, 2: 4}, {1: 1, 2: 3}, 1, rng) == (1, "farthest_known")


def test_choose_too_close_and_nothing():
    rng = np.random.default_rng(0)
    assert choose_target(0, {1: 1}, {1: 1}, 1, rng) == (None, "too_close")
    assert choose_target(0, {1: 1}, {}, 1, rng) == (None, "no_candidate")


def test_decision_validation_and_csv():
    with pytest.raises(ValueError):
        BeamDecision(0, "bored", 2)
    beam = make_beam(4, 2, 1, SECTOR, target=7)
    text = decisions_to_csv([BeamDecision(3, "too_close", 2),
                             BeamDecision(4, "new_centroid", 2, beam, 7, None)])
    assert text.splitlines() == [
        "node,outcome,reason,m,boresight_rad,target,target_prior_hops",
        "3,remain_omni,too_close,2,,,",
        f"4,beam,new_centroid,2,{beam.boresight!r},7,",
    ]


# -- commitment -------------------------------------------------------------------

def test_apply_beams_equals_sequential_redirect(rng):
    for seed in range(10):
        g = random_geometric(seed, 20, 80)
        chosen = rng.choice(g.n, size=5, replace=False).tolist()
        cov = {p: rng.choice(g.n, size=3, replace=False).tolist() for p in chosen}
        cov = {p: [t for t in ts if t != p] for p, ts in cov.items()}
        seq = g
        for p in rng.permutation(chosen).tolist():
            seq = seq.redirect(p, cov[p])
        assert apply_beams(g, cov) == seq


def test_no_peripherals_leaves_graph():
    g = random_geometric(1, 12, 60)
    rs, table, _ = organise(g, 2)
    out = commit_beams(g, rs, table, SECTOR, 0, peripherals=[])
    assert out.graph == g and out.decisions == [] and out.acks == []
    empty = MixedGraph(0, positions=np.zeros((0, 2)))
    rs0, t0, _ = organise(empty, 2)
    assert commit_beams(empty, rs0, t0, SECTOR, 0).graph == empty


def test_clique_drops_every_beam():
    ang = np.linspace(0, 2 * math.pi, 6, endpoint=False)
    xy = 50 + 5 * np.column_stack([np.cos(ang), np.sin(ang)])
    g = MixedGraph(6, [(u, v) for u in range(6) for v in range(u + 1, 6)], positions=xy)
    rs, table, centroid_of = organise(g, 3)
    out = commit_beams(g, rs, table, SECTOR, 0)
    assert len(centroid_of) == 1
    assert out.graph == g and out.beams == []
    assert {d.reason for d in out.decisions} == {"too_close"}


def test_adjacent_peripherals_get_distinct_boresights():
    # a tight row of nodes all at the same hop from a shared centroid
    xy = np.array([[100.0, 100.0]] + [[100.0 + 20 * math.cos(a), 100.0 + 20 * math.sin(a)]
                                      for a in np.linspace(0, 0.6, 5)] + [[160.0, 106.0]])
    g = MixedGraph(7, [(0, i) for i in range(1, 6)] + [(i, i + 1) for i in range(1, 5)], positions=xy)
    rs = state([0] * 6 + [6], [0, 1, 1, 1, 1, 1, 0])
    table, rs = broadcast_centroids(g, rs, {0: 0, 6: 6}, 9)
    out = commit_beams(g, rs, table, AntennaConfig(M=2), 0)
    owners = [b.owner for b in out.beams]
    assert len(owners) >= 2
    invariants.separation(g, out)


def test_two_clusters_joined_by_beam():
    rng = np.random.default_rng(5)
    a = 100 + rng.uniform(-4, 4, (7, 2))
    b = a + [55.0, 0.0]
    xy = np.vstack([a, b])
    g = build_omni_graph(Placement(xy, 300), 30.0)
    assert len(weak_components(g)) == 2
    rs, table, _ = organise(g, 3)
    out = commit_beams(g, rs, table, SECTOR, 0)
    assert len(weak_components(out.graph)) == 1
    assert any(d.reason == "new_centroid" for d in out.decisions)


def test_acks_logged_for_direct_far_hits():
    xy = np.array([[0.0, 0.0], [50.0, 1.0]])
    g = MixedGraph(2, positions=xy)
    rs = state([0, 1], [0, 0])
    table, rs = broadcast_centroids(g, rs, {0: 0, 1: 1}, 6)
    out = commit_beams(g, rs, table, AntennaConfig(M=2), 0)
    # each lone node sees the other as a new centroid one beam away
    assert out.acks == [(1, 0), (0, 1)]
    assert out.graph.beam_edges == {(0, 1), (1, 0)}
    assert [d.reason for d in out.decisions] == ["new_centroid", "new_centroid"]


def test_commit_is_seed_deterministic():
    g = random_geometric(11, 60, 150)
    rs, table, _ = organise(g, 3)
    a = commit_beams(g, rs, table, SECTOR, [11, 2])
    b = commit_beams(g, rs, table, SECTOR, [11, 2])
    assert a.graph == b.graph and a.decisions == b.decisions


@given(geometric_graphs(min_n=2, max_n=60), st.integers(1, 4), st.sampled_from(["sector", "ula"]))
def test_commit_invariants(g, gradient, model):
    cfg = AntennaConfig(model=model)
    rs, table, _ = organise(g, gradient)
    out = commit_beams(g, rs, table, cfg, 0)
    assert [d.node for d in out.decisions] == identify_peripherals(rs, g)
    invariants.beam_shapes(out, cfg)
    invariants.separation(g, out)
    invariants.reception_kept(g, out)
    invariants.gscc_in_gin(out.graph)
    for d in out.decisions:
        assert (d.beam is None) == (d.outcome == "remain_omni")
        if d.beam is not None:
            assert d.target_prior_hops is None or d.target_prior_hops >= 2
