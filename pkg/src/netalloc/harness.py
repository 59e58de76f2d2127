"""Experiment harness: runs, Monte Carlo sweeps, and their file formats.

A run advances one controller over a horizon of sampled slots, tracking the
physical queue (the bare queue recursion driven by the deployed flows) next
to whatever internal state the controller keeps.  Monte Carlo realizations
differ only in their state stream; every algorithm under comparison replays
the same per-realization stream (common random numbers).

Trajectory CSV columns, in this exact order:
    t, algo, realization, inst_cost, avg_cost, total_queue
optionally followed by node_q_1..node_q_I.  Decimal points are always '.',
independent of locale.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import controllers as ctl
from .graph import queue_update
from .rng import stream
from .scenario import GeoScenario, ScenarioConfig, build_geo_load_balancing

ALGORITHMS = ("sdg", "heavy_ball", "la_sdg")


class ConfigError(ValueError):
    """A config file failed validation; message carries path and line number."""


@dataclass(frozen=True)
class SimulationConfig:
    """Everything a run needs beyond the scenario itself."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    algo: str = "la_sdg"
    mu: float = 0.2
    beta: float = 0.5
    theta_scale: float = 100.0
    eta_mode: str = "sqrt_t"
    alpha: float = 1.0
    dual_radius: float = 1.0
    horizon: int = 200_000
    realizations: int = 20
    base_seed: int = 0
    steady_window: float = 0.25
    snapshot_stride: int = 0
    record_node_queues: bool = False
    out_dir: str = "out"
    compare_mus: tuple = ()
    compare_betas: tuple = (0.5,)
    oracle_samples: int = 100_000
    oracle_tol: float = 1e-9
    oracle_seed: int = 1729

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.eta_mode not in ctl.ETA_MODES:
            raise ValueError(f"eta_mode must be one of {ctl.ETA_MODES}")
        if self.horizon < 1 or self.realizations < 1:
            raise ValueError("horizon and realizations must be at least 1")
        if not 0.0 < self.steady_window <= 1.0:
            raise ValueError(f"steady_window must lie in (0, 1], got {self.steady_window}")
        if self.snapshot_stride < 0:
            raise ValueError("snapshot_stride must be nonnegative")


@dataclass
class Trajectory:
    """One realization's per-slot records."""

    algo: str
    realization: int
    t: np.ndarray
    inst_cost: np.ndarray
    avg_cost: np.ndarray
    total_queue: np.ndarray
    node_queues: np.ndarray | None = None     # (T, I) when recorded
    snapshot_t: np.ndarray | None = None
    snapshots: dict | None = None             # name -> (S, I) multiplier dumps
    final_state: object = None


@dataclass(frozen=True)
class SummaryRecord:
    """Steady-state summary of one (algo, hyperparameters) cell."""

    algo: str
    mu: float
    beta: float
    theta_scale: float
    realizations: int
    horizon: int
    steady_cost: float
    steady_cost_halfwidth: float
    steady_queue: float
    steady_queue_halfwidth: float


def _init_controller(cfg: SimulationConfig, scenario: GeoScenario):
    if cfg.algo == "sdg":
        return ctl.sdg_init(scenario.graph, cfg.mu)
    if cfg.algo == "heavy_ball":
        return ctl.heavy_ball_init(scenario.graph, cfg.mu, cfg.beta)
    from .lagrangian import gradient_bound
    m = gradient_bound(scenario.graph, scenario.box, scenario.arrival_upper)
    return ctl.lasdg_init(scenario.graph, cfg.mu, theta_scale=cfg.theta_scale,
                          eta_mode=cfg.eta_mode, alpha=cfg.alpha,
                          dual_radius=cfg.dual_radius, grad_norm_bound=m)


_STEPS = {"sdg": ctl.sdg_step, "heavy_ball": ctl.heavy_ball_step, "la_sdg": ctl.lasdg_step}

_BATCH = 4096  # state-draw window; keeps the stream order identical to slot-by-slot


def run_simulation(scenario: GeoScenario, cfg: SimulationConfig, realization: int = 0,
                   collect_states: bool = False) -> Trajectory:
    """Advance one controller for cfg.horizon slots on one state stream.

    collect_states additionally keeps every controller state (small horizons
    only; used by recursion checks).
    """
    graph, box = scenario.graph, scenario.box
    step_fn = _STEPS[cfg.algo]
    state = _init_controller(cfg, scenario)
    gen = stream(cfg.base_seed, realization, "state")
    horizon = cfg.horizon

    inst = np.empty(horizon)
    qtot = np.empty(horizon)
    node_q = np.empty((horizon, graph.node_count)) if cfg.record_node_queues else None
    snap_t, snaps = [], []
    states = [state] if collect_states else None
    q_phys = np.zeros(graph.node_count)

    # the learning controller's internal queue is the physical queue (same
    # recursion, same flows, same rounding); others need it tracked here
    tracks_queue = cfg.algo == "la_sdg"

    t = 0
    while t < horizon:
        batch = scenario.sample_batch(gen, min(_BATCH, horizon - t))
        for sample in batch:
            state, x = step_fn(state, sample, graph, box)
            q_phys = state.queue if tracks_queue else queue_update(q_phys, x, sample.arrivals, graph)
            inst[t] = sample.edge_coeff @ (x * x) + sample.cost_constant
            qtot[t] = q_phys.sum()
            if node_q is not None:
                node_q[t] = q_phys
            if states is not None:
                states.append(state)
            t += 1
            if cfg.snapshot_stride and t % cfg.snapshot_stride == 0:
                snap_t.append(t)
                if cfg.algo == "la_sdg":
                    snaps.append(np.concatenate((state.lam_emp, state.effective_multiplier())))
                else:
                    snaps.append(state.lam.copy())

    traj = Trajectory(
        algo=cfg.algo,
        realization=realization,
        t=np.arange(1, horizon + 1),
        inst_cost=inst,
        avg_cost=np.cumsum(inst) / np.arange(1, horizon + 1),
        total_queue=qtot,
        node_queues=node_q,
        final_state=state if states is None else states,
    )
    if snap_t:
        traj.snapshot_t = np.array(snap_t)
        traj.snapshots = {"multiplier": np.stack(snaps)}
    return traj


def steady_slice(horizon: int, window: float) -> slice:
    """Final-fraction window over which steady-state statistics are taken."""
    start = min(horizon - 1, int(math.floor(horizon * (1.0 - window))))
    return slice(start, horizon)


def _mean_halfwidth(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return float(values.mean()), 0.0
    half = 1.96 * float(values.std(ddof=1)) / math.sqrt(len(values))
    return float(values.mean()), half


def summarize(trajectories, cfg: SimulationConfig) -> SummaryRecord:
    """Steady-state cell summary over one algorithm's realizations."""
    win = steady_slice(cfg.horizon, cfg.steady_window)
    costs = [float(tr.inst_cost[win].mean()) for tr in trajectories]
    queues = [float(tr.total_queue[win].mean()) for tr in trajectories]
    cost, cost_hw = _mean_halfwidth(costs)
    queue, queue_hw = _mean_halfwidth(queues)
    return SummaryRecord(
        algo=cfg.algo, mu=cfg.mu, beta=cfg.beta, theta_scale=cfg.theta_scale,
        realizations=cfg.realizations, horizon=cfg.horizon,
        steady_cost=cost, steady_cost_halfwidth=cost_hw,
        steady_queue=queue, steady_queue_halfwidth=queue_hw,
    )


def monte_carlo(cfg: SimulationConfig, scenario: GeoScenario | None = None,
                keep_trajectories: bool = False):
    """Run every realization of one cell; returns (SummaryRecord, trajectories).

    Realizations are independent streams; results are accumulated in
    realization-index order, so the summary does not depend on how a caller
    might schedule them.
    """
    scenario = scenario or build_geo_load_balancing(cfg.scenario)
    trajectories = [run_simulation(scenario, cfg, r) for r in range(cfg.realizations)]
    record = summarize(trajectories, cfg)
    return record, (trajectories if keep_trajectories else None)


def compare(cfg: SimulationConfig, scenario: GeoScenario | None = None) -> list[SummaryRecord]:
    """Sweep algorithms (and optional mu/beta grids) under shared streams.

    Every cell replays the same per-realization state streams, so cells are
    directly comparable path by path.
    """
    scenario = scenario or build_geo_load_balancing(cfg.scenario)
    mus = cfg.compare_mus or (cfg.mu,)
    records = []
    for mu in mus:
        for algo in ("sdg", "la_sdg"):
            cell = replace(cfg, algo=algo, mu=mu)
            records.append(monte_carlo(cell, scenario)[0])
        for beta in cfg.compare_betas:
            cell = replace(cfg, algo="heavy_ball", mu=mu, beta=beta)
            records.append(monte_carlo(cell, scenario)[0])
    return records


# ---------------------------------------------------------------------------
# Trajectory CSV
# ---------------------------------------------------------------------------

def emit_trajectory_csv(trajectories, path, node_queues: bool = False) -> None:
    """Write trajectories to CSV with the documented column set."""
    node_cols = []
    if node_queues:
        widths = {tr.node_queues.shape[1] for tr in trajectories if tr.node_queues is not None}
        if not widths:
            raise ValueError("node_queues requested but no trajectory recorded them")
        if len(widths) != 1:
            raise ValueError("trajectories disagree on node count")
        node_cols = [f"node_q_{i + 1}" for i in range(widths.pop())]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "algo", "realization", "inst_cost", "avg_cost", "total_queue"] + node_cols)
        for tr in trajectories:
            if node_cols and tr.node_queues is None:
                raise ValueError(f"trajectory {tr.algo}/{tr.realization} lacks node queues")
            for i in range(len(tr.t)):
                row = [int(tr.t[i]), tr.algo, tr.realization,
                       repr(float(tr.inst_cost[i])), repr(float(tr.avg_cost[i])),
                       repr(float(tr.total_queue[i]))]
                if node_cols:
                    row += [repr(float(v)) for v in tr.node_queues[i]]
                w.writerow(row)


def parse_trajectory_csv(path):
    """Read a trajectory CSV back into plain row dicts.

    Malformed lines are collected and reported together with their line
    numbers; a bad file never yields a silently truncated result.
    """
    rows, problems = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        base = ["t", "algo", "realization", "inst_cost", "avg_cost", "total_queue"]
        if header is None or header[: len(base)] != base:
            raise ValueError(f"{path}: bad header {header!r}")
        extra = header[len(base):]
        if extra != [f"node_q_{i + 1}" for i in range(len(extra))]:
            raise ValueError(f"{path}: bad node queue columns {extra!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                problems.append(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
                continue
            try:
                rec = {"t": int(row[0]), "algo": row[1], "realization": int(row[2]),
                       "inst_cost": float(row[3]), "avg_cost": float(row[4]),
                       "total_queue": float(row[5])}
                if extra:
                    rec["node_q"] = np.array([float(v) for v in row[6:]])
            except ValueError:
                problems.append(f"line {lineno}: non-numeric field in {row!r}")
                continue
            rows.append(rec)
    if problems:
        raise ValueError(f"{path}: {len(problems)} malformed line(s): " + "; ".join(problems))
    return rows


def write_summary_csv(records, path) -> None:
    cols = [f.name for f in dataclasses.fields(SummaryRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for rec in records:
            w.writerow([repr(v) if isinstance(v, float) else v
                        for v in (getattr(rec, c) for c in cols)])


# ---------------------------------------------------------------------------
# Flat key=value config files
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_SIM_KEYS = {f.name: f for f in dataclasses.fields(SimulationConfig) if f.name != "scenario"}


def _parse_value(key: str, text: str, path, lineno: int):
    sample_sim = SimulationConfig()
    current = getattr(sample_sim.scenario, key) if key in _SCENARIO_KEYS else getattr(sample_sim, key)
    try:
        if isinstance(current, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError
            return text.lower() == "true"
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, tuple):
            return tuple(float(v) for v in text.split(",") if v.strip()) if text else ()
        return text
    except ValueError:
        raise ConfigError(f"{path}:{lineno}: bad value {text!r} for key {key!r}") from None


def parse_config(path) -> SimulationConfig:
    """Parse a flat 'key = value' file; '#' starts a comment.

    Unknown keys and duplicate keys are errors, reported with line numbers.
    """
    scen_kwargs, sim_kwargs, seen = {}, {}, {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key in seen:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r} "
                                  f"(first set on line {seen[key]})")
            seen[key] = lineno
            if key in _SCENARIO_KEYS:
                scen_kwargs[key] = _parse_value(key, val, path, lineno)
            elif key in _SIM_KEYS:
                sim_kwargs[key] = _parse_value(key, val, path, lineno)
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    try:
        return SimulationConfig(scenario=ScenarioConfig(**scen_kwargs), **sim_kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def emit_config(cfg: SimulationConfig, path) -> None:
    """Write a config file that parses back to exactly cfg."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ",".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [f"{k} = {fmt(getattr(cfg.scenario, k))}" for k in _SCENARIO_KEYS]
    lines += [f"{k} = {fmt(getattr(cfg, k))}" for k in _SIM_KEYS]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
