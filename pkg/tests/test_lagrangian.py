import math

import numpy as np
import pytest

from netalloc.graph import BoxSet, ConvergenceError, NetworkGraph
from netalloc.lagrangian import (box_quadratic_argmin, dual_value, gradient_bound,
                                 minimize_lagrangian, minimize_lagrangian_batch,
                                 stochastic_dual_gradient)
from netalloc.rng import stream
from netalloc.scenario import ScenarioConfig, build_geo_load_balancing

from _support import plain_sample

CHAIN = NetworkGraph.from_edges([(1, 2), (2, None)], 2)


def test_closed_form_hand_values():
    # edge 1->2: coeff 0.2, multiplier gap 10 - 2 = 8, interior argmin 8/0.4 = 20
    # edge 2->sink: coeff 12, gap 2, argmin 1/12
    s = plain_sample([0.2, 12.0], [0.0, 0.0])
    box = BoxSet(np.array([30.0, 5.0]))
    x = minimize_lagrangian(np.array([10.0, 2.0]), s, CHAIN, box)
    assert x[0] == 20.0
    assert x[1] == 2.0 / 24.0
    # tighter box clamps the first edge at its cap
    x = minimize_lagrangian(np.array([10.0, 2.0]), s, CHAIN, BoxSet(np.array([15.0, 5.0])))
    assert x[0] == 15.0
    # negative gap clamps at zero, negative multipliers pass through as-is
    x = minimize_lagrangian(np.array([-3.0, 2.0]), s, CHAIN, box)
    assert x[0] == 0.0 and x[1] == 2.0 / 24.0


def test_closed_form_against_grid_search():
    # brute force each separable edge objective a x^2 - d x on a fine grid
    s = plain_sample([0.7, 3.0], [1.0, 0.0])
    box = BoxSet(np.array([6.0, 4.0]))
    lam = np.array([5.0, 1.25])
    x = minimize_lagrangian(lam, s, CHAIN, box)
    d = [5.0 - 1.25, 1.25]
    for e in range(2):
        grid = np.linspace(0.0, box.upper[e], 240_001)
        vals = s.edge_coeff[e] * grid**2 - d[e] * grid
        assert abs(x[e] - grid[np.argmin(vals)]) <= 5e-5


def test_minimizer_marks_kkt_conditions():
    sc = build_geo_load_balancing(ScenarioConfig(mapping_nodes=3, data_centers=2,
                                                 scenario_seed=2))
    rng = stream(3, 0, "probe")
    s = sc.sample_state(rng)
    lam = 50.0 * rng.standard_normal(sc.node_count)
    x = minimize_lagrangian(lam, s, sc.graph, sc.box)
    diff = sc.graph.multiplier_differences(lam)
    slope = 2.0 * s.edge_coeff * x - diff
    for e in range(sc.edge_count):
        if 0.0 < x[e] < sc.box.upper[e]:
            assert abs(slope[e]) <= 1e-9
        elif x[e] == 0.0:
            assert slope[e] >= -1e-9
        else:
            assert slope[e] <= 1e-9


def test_projected_gradient_agrees_with_closed_form():
    sc = build_geo_load_balancing(ScenarioConfig(mapping_nodes=4, data_centers=3,
                                                 scenario_seed=5))
    rng = stream(4, 0, "probe")
    for _ in range(10):
        s = sc.sample_state(rng)
        lam = 10.0 ** rng.uniform(0, 3) * rng.standard_normal(sc.node_count)
        xc = minimize_lagrangian(lam, s, sc.graph, sc.box)
        xp = minimize_lagrangian(lam, s, sc.graph, sc.box, method="projected_gradient")
        assert np.abs(xc - xp).max() <= 1e-8


def test_projected_gradient_reports_iteration_cap():
    s = plain_sample([0.2, 12.0], [0.0, 0.0])
    with pytest.raises(ConvergenceError, match="projected gradient"):
        minimize_lagrangian(np.array([10.0, 2.0]), s, CHAIN, BoxSet(np.array([30.0, 5.0])),
                            method="projected_gradient", max_iter=3)


def test_minimizer_input_validation():
    s = plain_sample([0.2, 12.0], [0.0, 0.0])
    box = BoxSet(np.array([30.0, 5.0]))
    with pytest.raises(ValueError, match="multiplier has shape"):
        minimize_lagrangian(np.zeros(3), s, CHAIN, box)
    with pytest.raises(ValueError, match="unknown method"):
        minimize_lagrangian(np.zeros(2), s, CHAIN, box, method="newton")
    bad = plain_sample([0.2, 0.0], [0.0, 0.0])
    with pytest.raises(ValueError, match="positive"):
        minimize_lagrangian(np.zeros(2), bad, CHAIN, box)


def test_slot_bounds_override_static_box():
    s = plain_sample([0.2, 12.0], [0.0, 0.0], upper=[4.0, 5.0])
    x = minimize_lagrangian(np.array([100.0, 0.0]), s, CHAIN, BoxSet(np.array([30.0, 5.0])))
    assert x[0] == 4.0


def test_batch_paths_match_scalar_paths():
    sc = build_geo_load_balancing(ScenarioConfig(mapping_nodes=3, data_centers=3,
                                                 scenario_seed=6))
    rng = stream(8, 0, "probe")
    samples = sc.sample_batch(rng, 32)
    lams = 10.0 ** rng.uniform(0, 3, (32, 1)) * rng.standard_normal((32, sc.node_count))
    xc = minimize_lagrangian_batch(lams, samples, sc.graph, sc.box)
    for i in range(32):
        assert np.array_equal(xc[i], minimize_lagrangian(lams[i], samples[i], sc.graph, sc.box))
    xp = minimize_lagrangian_batch(lams, samples, sc.graph, sc.box,
                                   method="projected_gradient")
    assert np.abs(xc - xp).max() <= 1e-8

    with pytest.raises(ValueError, match="batch has shape"):
        minimize_lagrangian_batch(lams[:, :2], samples, sc.graph, sc.box)
    with pytest.raises(ValueError, match="samples"):
        minimize_lagrangian_batch(lams[:5], samples, sc.graph, sc.box)


def test_dual_gradient_matches_finite_differences():
    sc = build_geo_load_balancing(ScenarioConfig(mapping_nodes=3, data_centers=2,
                                                 scenario_seed=2))
    rng = stream(5, 0, "probe")
    delta = 1e-5
    for _ in range(12):
        s = sc.sample_state(rng)
        lam = 40.0 * rng.random(sc.node_count) + 1.0
        g = stochastic_dual_gradient(lam, s, sc.graph, sc.box)
        for i in range(sc.node_count):
            e = np.zeros(sc.node_count)
            e[i] = delta
            fd = (dual_value(lam + e, s, sc.graph, sc.box)
                  - dual_value(lam - e, s, sc.graph, sc.box)) / (2 * delta)
            assert abs(fd - g[i]) <= 1e-4 * max(1.0, abs(g[i]))


def test_dual_value_on_the_chain_is_exact():
    # D(lam) = min_x 0.5 x0^2 + 2 x1^2 + lam . (Ax + c) with c = (3, 0):
    # x0 = (l0 - l1) / 1, x1 = l1 / 4 when interior, so
    # D = 3 l0 - (l0 - l1)^2 / 2 - ... evaluate symbolically at (2, 1)
    s = plain_sample([0.5, 2.0], [3.0, 0.0])
    box = BoxSet(np.array([100.0, 100.0]))
    lam = np.array([2.0, 1.0])
    x0, x1 = 1.0, 0.25
    by_hand = (0.5 * x0**2 + 2.0 * x1**2
               + lam[0] * (3.0 - x0) + lam[1] * (x0 - x1))
    assert dual_value(lam, s, CHAIN, box) == pytest.approx(by_hand, abs=1e-12)
    # concavity along a segment
    lam2 = np.array([6.0, 5.0])
    mid = 0.5 * (lam + lam2)
    assert dual_value(mid, s, CHAIN, box) >= 0.5 * (dual_value(lam, s, CHAIN, box)
                                                    + dual_value(lam2, s, CHAIN, box)) - 1e-12


def test_gradient_bound_hand_case_and_corners():
    box = BoxSet(np.array([1.0, 1.0]))
    arrival_upper = np.array([1.0, 0.0])
    m = gradient_bound(CHAIN, box, arrival_upper)
    assert m == math.sqrt(2.0)
    # enumerate every corner of the flow box and arrival box
    worst = 0.0
    for x0 in (0.0, 1.0):
        for x1 in (0.0, 1.0):
            for c0 in (0.0, 1.0):
                g = CHAIN.divergence(np.array([x0, x1]), np.array([c0, 0.0]))
                worst = max(worst, float(np.linalg.norm(g)))
    assert worst <= m
    assert worst == m            # the bound is tight here


def test_gradient_bound_validation():
    box = BoxSet(np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match="arrival_upper has shape"):
        gradient_bound(CHAIN, box, np.array([1.0]))
    with pytest.raises(ValueError, match="nonnegative"):
        gradient_bound(CHAIN, box, np.array([-1.0, 0.0]))
    with pytest.raises(ValueError, match="finite"):
        gradient_bound(CHAIN, box, np.array([np.inf, 0.0]))


def test_box_quadratic_argmin_broadcasts():
    d = np.array([[2.0, -1.0], [8.0, 4.0]])
    a = np.array([1.0, 2.0])
    u = np.array([3.0, 0.5])
    x = box_quadratic_argmin(d, a, u)
    assert np.array_equal(x, [[1.0, 0.0], [3.0, 0.5]])
