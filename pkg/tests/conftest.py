"""Session fixtures for the acceptance suite.

The heavy objects (reference dual solution, full-horizon Monte Carlo cells)
are built once per session and shared by every criterion that needs them.
All cells use base_seed 0, so algorithms see common state streams and are
comparable path by path.
"""
import time

import pytest

from netalloc.harness import SimulationConfig, monte_carlo
from netalloc.oracle import (FiniteSupportDistribution, reference_dual_solution,
                             solve_ensemble_dual)
from netalloc.rng import stream
from netalloc.scenario import ScenarioConfig, build_geo_load_balancing

HORIZON = 200_000
REALIZATIONS = 20


@pytest.fixture(scope="session")
def default_scenario():
    return build_geo_load_balancing(ScenarioConfig())


@pytest.fixture(scope="session")
def reference(default_scenario):
    """(OracleReport, FiniteSupportDistribution) for the operational optimum."""
    return reference_dual_solution(default_scenario)


@pytest.fixture(scope="session")
def discretized(default_scenario):
    """64-atom coarse discretization: (OracleReport, distribution, solve seconds)."""
    sc = default_scenario
    atoms = sc.sample_batch(stream(64, 0, "oracle"), 64)
    dist = FiniteSupportDistribution.from_atoms(atoms, box=sc.box)
    t0 = time.perf_counter()
    report = solve_ensemble_dual(dist, sc.graph, sc.box, tol=1e-9)
    return report, dist, time.perf_counter() - t0


def _cell(scenario, keep=False, **kw):
    kw.setdefault("horizon", HORIZON)
    kw.setdefault("realizations", REALIZATIONS)
    kw.setdefault("base_seed", 0)
    return monte_carlo(SimulationConfig(**kw), scenario, keep_trajectories=keep)


@pytest.fixture(scope="session")
def sdg_cells(default_scenario):
    """mu -> SummaryRecord for the plain controller, plus total wall time."""
    t0 = time.perf_counter()
    records = {mu: _cell(default_scenario, algo="sdg", mu=mu)[0]
               for mu in (0.05, 0.1, 0.2)}
    return records, time.perf_counter() - t0


@pytest.fixture(scope="session")
def lasdg_main(default_scenario):
    """Learning controller at defaults, with multiplier snapshots kept."""
    return _cell(default_scenario, keep=True, algo="la_sdg", mu=0.2,
                 snapshot_stride=100)


@pytest.fixture(scope="session")
def lasdg_mu01(default_scenario):
    return _cell(default_scenario, algo="la_sdg", mu=0.1)[0]


@pytest.fixture(scope="session")
def hb_cells(default_scenario):
    """beta -> SummaryRecord for the momentum controller at mu=0.2."""
    return {beta: _cell(default_scenario, algo="heavy_ball", mu=0.2, beta=beta)[0]
            for beta in (0.5, 0.99)}
