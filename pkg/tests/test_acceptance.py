"""Acceptance suite: every release gate in one place.

Each test prints a single PASS/FAIL line with the measured numbers (run with
-s to see them all) and then asserts.  The heavy Monte Carlo cells come from
session fixtures in conftest.py, so criteria sharing a cell pay for it once.
"""
import time

import numpy as np

from netalloc.controllers import (gamma_recursion_residual, lasdg_init, lasdg_step,
                                  theta_default)
from netalloc.distributed import run_distributed
from netalloc.harness import SimulationConfig, run_simulation
from netalloc.lagrangian import (dual_value, gradient_bound,
                                 minimize_lagrangian_batch, stochastic_dual_gradient)
from netalloc.oracle import (FiniteSupportDistribution, empirical_convergence_probe,
                             exact_expected_gradient, verify_structural_constants)
from netalloc.rng import stream
from netalloc.scenario import ScenarioConfig, build_geo_load_balancing

from _support import centralized_lasdg


def check(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def test_01_minimizer_equivalence(default_scenario):
    sc = default_scenario
    t0 = time.perf_counter()
    gen = stream(2024, 0, "probe")
    n = 1000
    lams = 10.0 ** gen.uniform(0.0, 3.5, size=(n, 1)) * gen.standard_normal((n, sc.node_count))
    samples = sc.sample_batch(gen, n)
    closed = minimize_lagrangian_batch(lams, samples, sc.graph, sc.box)
    iterative = minimize_lagrangian_batch(lams, samples, sc.graph, sc.box,
                                          method="projected_gradient")
    dev = float(np.abs(closed - iterative).max())
    dt = time.perf_counter() - t0
    check("closed form vs projected gradient", dev <= 1e-8 and dt < 10.0,
          f"max deviation {dev:.3e} over {n} draws in {dt:.1f}s")


def test_02_multiplier_queue_identity(default_scenario):
    cfg = SimulationConfig(algo="sdg", mu=0.25, horizon=10_000, realizations=1,
                           base_seed=0, snapshot_stride=1, record_node_queues=True)
    tr = run_simulation(default_scenario, cfg)
    dev = float(np.abs(tr.snapshots["multiplier"] - 0.25 * tr.node_queues).max())
    check("multiplier equals scaled queue", dev == 0.0,
          f"max |lam - mu q| = {dev!r} over {cfg.horizon} slots")


def test_03_distributed_centralized_equality():
    mu = 0.2
    worst = "bit-identical"
    ok = True
    for size in (2, 10):
        sc = build_geo_load_balancing(ScenarioConfig(mapping_nodes=size,
                                                     data_centers=size,
                                                     scenario_seed=1))
        theta = np.full(sc.node_count, theta_default(mu))
        for seed in range(5):
            samples = sc.sample_batch(stream(seed, 0, "state"), 1000)
            run = run_distributed(sc, samples, mu, theta)
            queues, emps, gammas, allocs = centralized_lasdg(sc, samples, mu, theta)
            same = (np.array_equal(run.queues, queues)
                    and np.array_equal(run.lam_emp, emps)
                    and np.array_equal(run.gammas, gammas)
                    and np.array_equal(run.allocations, allocs))
            if not same:
                ok = False
                worst = f"mismatch at size {size}, seed {seed}"
    check("message passing vs single process", ok,
          f"{worst} (2 sizes x 5 seeds x 1000 slots)")


def test_04_gradient_correctness(default_scenario):
    sc = default_scenario
    gen = stream(4242, 0, "probe")
    n = 200
    lams = 10.0 ** gen.uniform(0.0, 3.0, size=(n, 1)) * np.abs(gen.standard_normal((n, sc.node_count)))
    samples = sc.sample_batch(gen, n)
    delta = 1e-5
    worst = 0.0
    for lam, s in zip(lams, samples):
        g = stochastic_dual_gradient(lam, s, sc.graph, sc.box)
        fd = np.empty_like(g)
        for i in range(len(lam)):
            probe = lam.copy()
            probe[i] = lam[i] + delta
            up = dual_value(probe, s, sc.graph, sc.box)
            probe[i] = lam[i] - delta
            down = dual_value(probe, s, sc.graph, sc.box)
            fd[i] = (up - down) / (2.0 * delta)
        rel = float(np.abs(fd - g).max()) / max(1.0, float(np.abs(g).max()))
        worst = max(worst, rel)

    atoms = sc.sample_batch(stream(7, 0, "oracle"), 4)
    probs = np.array([0.1, 0.2, 0.3, 0.4])
    dist = FiniteSupportDistribution.from_atoms(atoms, probs=probs, box=sc.box)
    lam = 10.0 ** gen.uniform(2.0, 3.0) * np.abs(gen.standard_normal(sc.node_count))
    exact = exact_expected_gradient(lam, dist, sc.graph, sc.box)
    rng = np.random.default_rng(2026)
    picks = rng.choice(4, size=4000, p=probs)
    draws = np.stack([stochastic_dual_gradient(lam, atoms[i], sc.graph, sc.box)
                      for i in picks])
    sigma = draws.std(axis=0, ddof=1) / np.sqrt(len(picks))
    inside = bool((np.abs(draws.mean(axis=0) - exact) <= 3.0 * sigma + 1e-12).all())
    check("finite differences and Monte Carlo mean", worst <= 1e-4 and inside,
          f"worst FD relative error {worst:.3e} on {n} points; "
          f"ensemble mean within 3 sigma: {inside}")


def test_05_kkt_at_optimum(discretized):
    report, _, seconds = discretized
    ok = (report.comp_slackness <= 1e-6 and report.constraint_residual <= 1e-6
          and seconds < 60.0)
    check("KKT residuals on 64-atom instance", ok,
          f"complementary slackness {report.comp_slackness:.3e}, "
          f"constraint residual {report.constraint_residual:.3e}, {seconds:.1f}s")


def test_06_empirical_dual_convergence(lasdg_main, reference, default_scenario):
    _, trajectories = lasdg_main
    report, dist = reference
    sc = default_scenario
    checkpoints = [100, 300, 1000, 3000, 10_000]
    trajs = {t: [tr.snapshots["multiplier"][t // 100 - 1][:sc.node_count]
                 for tr in trajectories] for t in checkpoints}
    probe = empirical_convergence_probe(trajs, checkpoints, dist, sc.graph, sc.box,
                                        report.lam_star)
    factor = float(probe.mean_gaps[0] / probe.mean_gaps[-1])
    ok = factor >= 5.0 and probe.exponent <= -0.35
    check("empirical multiplier convergence", ok,
          f"gap shrink factor {factor:.1f} from t=1e2 to t=1e4, "
          f"fitted exponent {probe.exponent:.3f}")


def test_07_queue_cost_tradeoff(sdg_cells, reference):
    records, seconds = sdg_cells
    psi = reference[0].dual_optimum
    ratio = records[0.1].steady_queue / records[0.2].steady_queue
    gaps = {mu: rec.steady_cost - psi for mu, rec in records.items()}
    hw = {mu: rec.steady_cost_halfwidth for mu, rec in records.items()}
    monotone = (gaps[0.05] <= gaps[0.1] + hw[0.05] + hw[0.1]
                and gaps[0.1] <= gaps[0.2] + hw[0.1] + hw[0.2])
    ok = 1.5 <= ratio <= 2.7 and monotone and seconds < 600.0
    check("queue and cost scaling in mu", ok,
          f"queue ratio mu=0.1/0.2 = {ratio:.2f}; cost gaps "
          f"{gaps[0.05]:.0f} <= {gaps[0.1]:.0f} <= {gaps[0.2]:.0f} "
          f"(halfwidths {hw[0.05]:.0f}/{hw[0.1]:.0f}/{hw[0.2]:.0f}); {seconds:.0f}s")


def test_08_delay_advantage(lasdg_main, sdg_cells, hb_cells):
    q_la = lasdg_main[0].steady_queue
    q_sdg = sdg_cells[0][0.2].steady_queue
    q_hb = hb_cells[0.5].steady_queue
    ok = q_la <= 0.15 * q_sdg and q_la <= 0.40 * q_hb
    check("learning controller delay advantage", ok,
          f"steady queues {q_la:.0f} vs {q_sdg:.0f} ({q_la / q_sdg:.1%}) "
          f"and vs momentum {q_hb:.0f} ({q_la / q_hb:.1%})")


def test_09_cost_parity(lasdg_main, sdg_cells, hb_cells):
    trio = {"la_sdg": lasdg_main[0].steady_cost,
            "sdg": sdg_cells[0][0.2].steady_cost,
            "heavy_ball(0.5)": hb_cells[0.5].steady_cost}
    spread = max(trio.values()) / min(trio.values()) - 1.0
    hot = hb_cells[0.99].steady_cost
    excess = hot / max(trio.values()) - 1.0
    ok = spread <= 0.02 and excess > 0.02
    check("steady-state cost parity", ok,
          f"trio spread {spread:.2%}; beta=0.99 exceeds by {excess:.2%}")


def test_10_queue_anchoring(lasdg_main, lasdg_mu01):
    queues = {0.2: lasdg_main[0].steady_queue, 0.1: lasdg_mu01.steady_queue}
    anchors = {mu: 20 * theta_default(mu) / mu for mu in (0.1, 0.2)}
    in_band = all(abs(queues[mu] - anchors[mu]) <= 0.5 * anchors[mu]
                  for mu in (0.1, 0.2))
    ratio = queues[0.1] / queues[0.2]
    ok = in_band and ratio < 2.0
    check("queue anchored to I theta / mu", ok,
          f"queues {queues[0.1]:.0f}/{queues[0.2]:.0f} vs anchors "
          f"{anchors[0.1]:.0f}/{anchors[0.2]:.0f} (band ok: {in_band}); "
          f"mu ratio {ratio:.2f}")


def test_11_effective_multiplier_recursion(default_scenario):
    sc = default_scenario
    m = gradient_bound(sc.graph, sc.box, sc.arrival_upper)
    state = lasdg_init(sc.graph, 0.2, grad_norm_bound=m)
    gen = stream(0, 0, "state")
    horizon = 200_000
    worst = 0.0
    done = 0
    while done < horizon:
        for sample in sc.sample_batch(gen, min(4096, horizon - done)):
            nxt, _ = lasdg_step(state, sample, sc.graph, sc.box)
            worst = max(worst, gamma_recursion_residual([state, nxt]))
            state = nxt
            done += 1
    check("effective-multiplier recursion residual", worst <= 1e-10,
          f"max residual {worst:.3e} over {horizon} slots")


def test_12_structural_constants(discretized, default_scenario):
    report, dist, _ = discretized
    sc = default_scenario
    struct = verify_structural_constants(dist, sc.graph, sc.box, report.lam_star,
                                         seed=0, pairs=200)
    ok = (struct.max_lipschitz_ratio <= struct.smoothness_bound + 1e-8
          and struct.quadratic_growth > 0.0)
    check("smoothness bound and quadratic growth", ok,
          f"worst Lipschitz ratio {struct.max_lipschitz_ratio:.3f} vs bound "
          f"{struct.smoothness_bound:.3f}; fitted growth {struct.quadratic_growth:.3e}")
