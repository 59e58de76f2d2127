"""Built-in invariant suites behind the `validate` subcommand.

Small, fast spot checks of the package's structural contracts on a reduced
instance: algebraic identities, oracle cross-checks, bit-equality of the
message-passing path, and file-format round-trips.  Each suite returns a
CheckResult; the CLI prints one line per suite and signals failure through
its exit code.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, replace

import numpy as np

from . import controllers as ctl
from .distributed import run_distributed
from .graph import load_network, queue_update, save_network, spectral_radius_ata, validate_incidence
from .harness import SimulationConfig, emit_config, emit_trajectory_csv, parse_config, \
    parse_trajectory_csv, run_simulation
from .lagrangian import dual_value, minimize_lagrangian, stochastic_dual_gradient
from .rng import stream
from .scenario import ScenarioConfig, build_geo_load_balancing


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str


def _small_cfg() -> SimulationConfig:
    return SimulationConfig(
        scenario=ScenarioConfig(mapping_nodes=3, data_centers=2, scenario_seed=7),
        horizon=400, realizations=1, base_seed=11,
    )


def _random_multiplier(rng, n, scale=60.0):
    return scale * rng.random(n)


def check_incidence(cfg) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    a = scenario.graph.incidence
    try:
        validate_incidence(a)
    except ValueError as exc:
        return CheckResult("incidence-structure", False, str(exc))
    sums = a.sum(axis=0)
    ok = bool(np.isin(sums, (0.0, -1.0)).all())
    return CheckResult("incidence-structure", ok,
                       f"column sums in {{0,-1}}: {ok}, rho(A^T A) = {spectral_radius_ata(scenario.graph):.6g}")


def check_minimizer_agreement(cfg, points=40, tol=1e-8) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    rng = stream(cfg.base_seed, 0, "probe")
    worst = 0.0
    for _ in range(points):
        sample = scenario.sample_state(rng)
        lam = _random_multiplier(rng, scenario.node_count)
        xa = minimize_lagrangian(lam, sample, scenario.graph, scenario.box)
        xb = minimize_lagrangian(lam, sample, scenario.graph, scenario.box,
                                 method="projected_gradient")
        worst = max(worst, float(np.max(np.abs(xa - xb))))
    return CheckResult("minimizer-agreement", worst <= tol,
                       f"max closed-vs-iterative deviation {worst:.3e} (tol {tol:g})")


def check_dual_gradient(cfg, points=15, delta=1e-5, tol=1e-4) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    rng = stream(cfg.base_seed, 1, "probe")
    worst = 0.0
    for _ in range(points):
        sample = scenario.sample_state(rng)
        lam = _random_multiplier(rng, scenario.node_count)
        u = rng.standard_normal(scenario.node_count)
        u /= np.linalg.norm(u)
        g = stochastic_dual_gradient(lam, sample, scenario.graph, scenario.box)
        fd = (dual_value(lam + delta * u, sample, scenario.graph, scenario.box)
              - dual_value(lam - delta * u, sample, scenario.graph, scenario.box)) / (2 * delta)
        worst = max(worst, abs(fd - float(u @ g)) / max(1.0, abs(float(u @ g))))
    return CheckResult("dual-gradient", worst <= tol,
                       f"max relative finite-difference error {worst:.3e} (tol {tol:g})")


def check_multiplier_queue_identity(cfg) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    gen = stream(cfg.base_seed, 0, "state")
    mu = 0.25  # power of two: scaling commutes with rounding, identity is exact
    state = ctl.sdg_init(scenario.graph, mu)
    q = np.zeros(scenario.node_count)
    worst = 0.0
    for sample in scenario.sample_batch(gen, cfg.horizon):
        state, x = ctl.sdg_step(state, sample, scenario.graph, scenario.box)
        q = queue_update(q, x, sample.arrivals, scenario.graph)
        worst = max(worst, float(np.max(np.abs(state.lam - mu * q))))
    return CheckResult("multiplier-queue-identity", worst == 0.0,
                       f"max |lam - mu q| = {worst!r} over {cfg.horizon} slots")


def check_momentum_reduction(cfg) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    sdg = ctl.sdg_init(scenario.graph, 0.2)
    hb = ctl.heavy_ball_init(scenario.graph, 0.2, 0.0)
    gen = stream(cfg.base_seed, 2, "state")
    for sample in scenario.sample_batch(gen, 300):
        sdg, xa = ctl.sdg_step(sdg, sample, scenario.graph, scenario.box)
        hb, xb = ctl.heavy_ball_step(hb, sample, scenario.graph, scenario.box)
        if not (np.array_equal(sdg.lam, hb.lam) and np.array_equal(xa, xb)):
            return CheckResult("momentum-zero-reduction", False,
                               "beta=0 trajectory diverged from plain recursion")
    return CheckResult("momentum-zero-reduction", True, "beta=0 identical over 300 slots")


def check_effective_recursion(cfg, tol=1e-10) -> CheckResult:
    traj = run_simulation(build_geo_load_balancing(cfg.scenario),
                          replace(cfg, algo="la_sdg"), collect_states=True)
    residual = ctl.gamma_recursion_residual(traj.final_state)
    return CheckResult("effective-multiplier-recursion", residual <= tol,
                       f"max projection-free residual {residual:.3e} (tol {tol:g})")


def check_distributed_equality(cfg) -> CheckResult:
    scen_cfg = replace(cfg.scenario, mapping_nodes=2, data_centers=2)
    scenario = build_geo_load_balancing(scen_cfg)
    samples = scenario.sample_batch(stream(cfg.base_seed, 3, "state"), 200)
    mu, scale = 0.2, 10.0
    theta = np.full(scenario.node_count, ctl.theta_default(mu, scale))
    run = run_distributed(scenario, samples, mu, theta)
    state = ctl.lasdg_init(scenario.graph, mu, theta=theta)
    for t, sample in enumerate(samples):
        state, x = ctl.lasdg_step(state, sample, scenario.graph, scenario.box)
        if not (np.array_equal(run.allocations[t], x)
                and np.array_equal(run.queues[t + 1], state.queue)
                and np.array_equal(run.lam_emp[t + 1], state.lam_emp)):
            return CheckResult("distributed-equality", False, f"first divergence at slot {t + 1}")
    return CheckResult("distributed-equality", True,
                       "message-passing run bit-identical over 200 slots (2x2)")


def check_file_round_trips(cfg) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    with tempfile.TemporaryDirectory() as tmp:
        net = os.path.join(tmp, "net.txt")
        save_network(scenario.graph, scenario.box, net)
        graph2, box2 = load_network(net)
        if graph2.edges != scenario.graph.edges or not np.array_equal(box2.upper, scenario.box.upper):
            return CheckResult("file-round-trips", False, "network file round-trip changed data")
        conf = os.path.join(tmp, "run.cfg")
        emit_config(cfg, conf)
        if parse_config(conf) != cfg:
            return CheckResult("file-round-trips", False, "config round-trip changed data")
        traj = run_simulation(scenario, replace(cfg, horizon=5), 0)
        csv_path = os.path.join(tmp, "traj.csv")
        emit_trajectory_csv([traj], csv_path)
        rows = parse_trajectory_csv(csv_path)
        if len(rows) != 5 or rows[3]["inst_cost"] != float(traj.inst_cost[3]):
            return CheckResult("file-round-trips", False, "trajectory CSV round-trip changed data")
    return CheckResult("file-round-trips", True, "network, config, trajectory files round-trip")


def check_slater(cfg) -> CheckResult:
    scenario = build_geo_load_balancing(cfg.scenario)
    try:
        zeta, policy = scenario.slater_certificate()
    except ValueError as exc:
        return CheckResult("expected-slack-certificate", False, str(exc))
    sc = cfg.scenario
    mean_arrivals = np.concatenate((
        np.full(sc.mapping_nodes, 0.5 * (sc.arrival_min + sc.arrival_max)),
        np.zeros(sc.data_centers)))
    drift = scenario.graph.divergence(policy, mean_arrivals)
    in_box = (policy >= 0).all() and (policy <= scenario.box.upper + 1e-12).all()
    ok = zeta > 0 and in_box and drift.max() <= -zeta + 1e-9
    return CheckResult("expected-slack-certificate", ok,
                       f"certified slack {zeta:.6g}, worst expected drift {drift.max():.6g}")


ALL_CHECKS = (
    check_incidence,
    check_minimizer_agreement,
    check_dual_gradient,
    check_multiplier_queue_identity,
    check_momentum_reduction,
    check_effective_recursion,
    check_distributed_equality,
    check_file_round_trips,
    check_slater,
)


def run_validation(cfg: SimulationConfig | None = None) -> list[CheckResult]:
    cfg = cfg or _small_cfg()
    return [chk(cfg) for chk in ALL_CHECKS]
