import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from flockbeam.graph import largest_weak_component
from flockbeam.topology import (Placement, ThinningParams, build_omni_graph, expected_survivors,
                                neighbor_counts, node_count, place_uniform, thin)


def test_full_density_gives_625_nodes():
    assert len(place_uniform(2.5e-3, 500, 1)) == 625


def test_minimal_density_gives_one_node():
    p = place_uniform(4e-6, 500, 3)
    assert len(p) == 1
    assert 0 <= p.xy.min() and p.xy.max() <= 500


def test_zero_nodes_rejected():
    with pytest.raises(ValueError):
        place_uniform(1e-7, 500, 0)
    with pytest.raises(ValueError):
        node_count(0, 500)


def test_same_seed_same_coordinates():
    a, b = place_uniform(1e-3, 500, 99), place_uniform(1e-3, 500, 99)
    assert np.array_equal(a.xy, b.xy)
    assert not np.array_equal(a.xy, place_uniform(1e-3, 500, 100).xy)


def test_round_to_nearest_count():
    assert node_count(1.5e-3, 500) == 375
    assert node_count(2e-6, 500) == 1  # 0.5 rounds up


def test_placement_rejects_out_of_area():
    with pytest.raises(ValueError):
        Placement(np.array([[1.0, 501.0]]), 500)


def test_thinning_params_validated():
    with pytest.raises(ValueError):
        ThinningParams(0, 5)
    with pytest.raises(ValueError):
        ThinningParams(30, -1)


def test_isolated_node_thinned_away():
    p = Placement(np.array([[10.0, 10.0]]), 100)
    assert len(thin(p, ThinningParams(30, 5))) == 0


def test_six_close_nodes_survive():
    xy = np.array([[50 + math.cos(a), 50 + math.sin(a)] for a in np.linspace(0, 5, 6)])
    p = Placement(xy, 100)
    assert len(thin(p, ThinningParams(30, 5))) == 6


def test_thinning_matches_bruteforce_over_100_seeds():
    params = ThinningParams(30, 5)
    counts = []
    for seed in range(100):
        p = place_uniform(1000 / 500**2, 500, seed)
        d = np.hypot(*(p.xy[:, None, :] - p.xy[None, :, :]).transpose(2, 0, 1))
        keep = ((d <= 30).sum(axis=1) - 1) >= 5
        t = thin(p, params)
        assert np.array_equal(t.xy, p.xy[keep])
        assert np.array_equal(t.origin, np.flatnonzero(keep))
        counts.append(len(t))
    mean, sd = np.mean(counts), np.std(counts)
    assert all(abs(c - mean) <= 5 * sd for c in counts)


@given(st.lists(st.tuples(st.floats(0, 60), st.floats(0, 60)), max_size=25),
       st.floats(1, 30))
def test_neighbor_counts_match_oracle(points, radius):
    xy = np.array(points, dtype=float).reshape(-1, 2)
    assert neighbor_counts(xy, radius).tolist() == oracles.neighbour_counts(points, radius)


@given(st.integers(0, 10_000), st.integers(0, 8))
def test_survival_monotone_in_l_min(seed, l_min):
    p = place_uniform(1.5e-3, 300, seed)
    a = len(thin(p, ThinningParams(30, l_min)))
    b = len(thin(p, ThinningParams(30, l_min + 1)))
    assert b <= a


def test_single_pass_semantics():
    # chain where a second pass would remove more nodes
    xy = np.array([[10.0 * i, 0.0] for i in range(6)])
    p = Placement(xy, 100)
    once = thin(p, ThinningParams(10, 2))
    assert once.origin.tolist() == [1, 2, 3, 4]
    twice = thin(once, ThinningParams(10, 2))
    assert twice.origin.tolist() == [2, 3]


def test_placement_csv_roundtrip():
    p = place_uniform(2e-4, 500, 5)
    text = p.to_csv()
    assert text.splitlines()[0] == "id,x,y"
    q = Placement.from_csv(text, 500)
    assert q == p


def test_expected_survivors_gamma_limit():
    # huge mean neighbour count drives the incomplete-gamma ratio to 0
    assert expected_survivors(1.0, 100.0, 3.0) == pytest.approx(100.0)


def test_expected_survivors_matches_high_precision():
    rho, area, rb = 2.5e-3, 250_000.0, 30.0
    mpmath.mp.dps = 50
    s = mpmath.mpf(rb)
    a = mpmath.mpf(rho) * s**2 * mpmath.pi
    ref = mpmath.mpf(rho) * area * (1 - mpmath.gammainc(s, a) / mpmath.factorial(s - 1))
    assert expected_survivors(rho, area, rb) == pytest.approx(float(ref), rel=1e-9, abs=1e-12)


def test_expected_survivors_order_variant():
    rho, area = 2.5e-3, 250_000.0
    mean = rho * 900 * math.pi
    poisson_tail = 1 - sum(math.exp(-mean) * mean**k / math.factorial(k) for k in range(5))
    assert expected_survivors(rho, area, 30, order=5) == pytest.approx(rho * area * poisson_tail)


def test_expected_survivors_rejects_bad_input():
    with pytest.raises(ValueError):
        expected_survivors(0, 1, 1)


def test_omni_edge_at_exact_range():
    p = Placement(np.array([[0.0, 0.0], [30.0, 0.0], [0.0, 30.0 + 1e-9]]), 100)
    g = build_omni_graph(p, 30.0)
    assert g.omni_edges == {(0, 1)}
    assert not g.beam_edges


def test_coincident_points_not_linked():
    p = Placement(np.array([[5.0, 5.0], [5.0, 5.0]]), 10)
    assert build_omni_graph(p, 1.0).omni_edges == set()


@given(st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100)), max_size=30), st.floats(1, 40))
def test_omni_graph_matches_oracle(points, r):
    xy = np.array(points, dtype=float).reshape(-1, 2)
    g = build_omni_graph(Placement(xy, 100), r)
    assert g.omni_edges == oracles.unit_disk_edges(points, r)


def test_omni_giant_component_near_percolation():
    # the omni giant component at this density sits well below full connectivity
    fracs = []
    for seed in range(20):
        t = thin(place_uniform(2e-3, 500, seed), ThinningParams(30, 5))
        g = build_omni_graph(t, 30)
        fracs.append(len(largest_weak_component(g)) / g.n)
    assert 0.25 <= np.mean(fracs) <= 0.6
