"""Ensemble-level dual oracles.

Everything here works on a finite-support state distribution: either a small
hand-built atom list or a sample-average approximation (SAA) of the
continuous scenario.  The ensemble dual

    D(lam) = E[ min_x cost(x; s) + lam . (A x + c(s)) ]

is concave and smooth with gradient E[A x(lam; s) + c(s)], so a projected
gradient ascent with the constant step sigma / rho(A^T A) solves it to
machine-level KKT residuals.  The solver also certifies the structural
constants the per-slot controllers rely on (strong convexity, dual
smoothness, quadratic growth near the maximizer).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import BoxSet, ConvergenceError, NetworkGraph, spectral_radius_ata
from .lagrangian import gradient_bound
from .rng import stream
from .scenario import GeoScenario, StateSample

_CHUNK = 16384  # fixed batch size so reductions happen in one documented order


@dataclass
class FiniteSupportDistribution:
    """Atoms with probabilities, stacked for batch evaluation."""

    atoms: list
    probs: np.ndarray
    coeff: np.ndarray      # (N, E)
    const: np.ndarray      # (N,)
    arrivals: np.ndarray   # (N, I)
    upper: np.ndarray | None  # (N, E) slot-effective bounds, None if static

    @classmethod
    def from_atoms(cls, atoms, probs=None, box: BoxSet | None = None) -> "FiniteSupportDistribution":
        atoms = list(atoms)
        if not atoms:
            raise ValueError("distribution needs at least one atom")
        n = len(atoms)
        if probs is None:
            probs = np.full(n, 1.0 / n)
        else:
            probs = np.asarray(probs, dtype=float)
            if probs.shape != (n,) or (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("probs must be a nonnegative vector summing to 1")
        coeff = np.stack([a.edge_coeff for a in atoms])
        const = np.array([a.cost_constant for a in atoms])
        arrivals = np.stack([a.arrivals for a in atoms])
        upper = None
        if any(a.upper is not None for a in atoms):
            if box is None:
                raise ValueError("atoms carry slot bounds; pass the static box for the rest")
            upper = np.stack([box.upper if a.upper is None else a.upper for a in atoms])
        return cls(atoms, probs, coeff, const, arrivals, upper)

    @property
    def size(self) -> int:
        return len(self.atoms)

    def strong_convexity(self) -> float:
        return 2.0 * float(self.coeff.min())


def saa_distribution(scenario: GeoScenario, count: int, seed: int) -> FiniteSupportDistribution:
    """Sample-average approximation drawn from the dedicated oracle stream."""
    atoms = scenario.sample_batch(stream(seed, 0, "oracle"), count)
    return FiniteSupportDistribution.from_atoms(atoms, box=scenario.box)


def _batch_allocations(lam, dist, graph, box, lo, hi):
    diff = graph.multiplier_differences(np.asarray(lam, dtype=float))
    coeff = dist.coeff[lo:hi]
    ub = box.upper if dist.upper is None else dist.upper[lo:hi]
    return np.minimum(np.maximum(diff / (2.0 * coeff), 0.0), ub)


def exact_expected_gradient(lam, dist: FiniteSupportDistribution, graph: NetworkGraph,
                            box: BoxSet) -> np.ndarray:
    """E[A x(lam) + c] computed atom-exactly, fixed chunk order."""
    total = np.zeros(graph.node_count)
    for lo in range(0, dist.size, _CHUNK):
        hi = min(lo + _CHUNK, dist.size)
        x = _batch_allocations(lam, dist, graph, box, lo, hi)
        g = graph.divergence_batch(x, dist.arrivals[lo:hi])
        total += dist.probs[lo:hi] @ g
    return total


def ensemble_dual_value(lam, dist: FiniteSupportDistribution, graph: NetworkGraph,
                        box: BoxSet) -> float:
    """D(lam) over the ensemble, cost constants included."""
    lam = np.asarray(lam, dtype=float)
    total = 0.0
    for lo in range(0, dist.size, _CHUNK):
        hi = min(lo + _CHUNK, dist.size)
        x = _batch_allocations(lam, dist, graph, box, lo, hi)
        cost = np.einsum("ne,ne->n", dist.coeff[lo:hi], x * x) + dist.const[lo:hi]
        g = graph.divergence_batch(x, dist.arrivals[lo:hi])
        total += float(dist.probs[lo:hi] @ (cost + g @ lam))
    return total


def ensemble_expected_cost(x, dist: FiniteSupportDistribution) -> float:
    """E[cost(x; s)] of one fixed allocation."""
    x = np.asarray(x, dtype=float)
    return float(dist.probs @ (dist.coeff @ (x * x) + dist.const))


@dataclass
class OracleReport:
    """Solution and certificates of one ensemble dual solve."""

    lam_star: np.ndarray
    dual_optimum: float
    constraint_residual: float    # max positive entry of E[A x* + c]
    comp_slackness: float         # |lam* . E[A x* + c]|
    stationarity_residual: float  # max |gradient| over coordinates with lam* > 0
    kkt_residual: float
    iterations: int
    grad_map_norm: float
    clip_events: int
    confine_radius: float
    sample_count: int
    sigma: float
    spectral_radius: float
    dual_smoothness: float        # rho(A^T A) / sigma


def _kkt_numbers(lam, grad):
    feas = float(max(grad.max(), 0.0))
    comp = float(abs(lam @ grad))
    pos = lam > 0
    stat = float(np.max(np.abs(grad[pos]))) if pos.any() else 0.0
    return feas, comp, stat


def _expected_curvature_weights(lam, dist, graph, box):
    # edge e contributes 1/(2 a_e) to the dual curvature exactly when the
    # unconstrained minimizer sits strictly inside (0, ub); clamped edges
    # contribute nothing, so the expected Hessian is A diag(w) A^T
    diff = graph.multiplier_differences(np.asarray(lam, dtype=float))
    w = np.zeros(graph.edge_count)
    for lo in range(0, dist.size, _CHUNK):
        hi = min(lo + _CHUNK, dist.size)
        coeff = dist.coeff[lo:hi]
        ub = box.upper if dist.upper is None else dist.upper[lo:hi]
        raw = diff / (2.0 * coeff)
        interior = (raw > 0.0) & (raw < ub)
        w += dist.probs[lo:hi] @ np.where(interior, 0.5 / coeff, 0.0)
    return w


def _newton_step(lam, grad, dist, graph, box):
    """One active-set Newton step, or None when the system is unusable.

    Within one quadratic piece of the dual the gradient is affine with
    Jacobian -A diag(w) A^T, so solving on the free coordinates jumps to the
    root of the local model.  Callers accept the point only if it measurably
    improves on what they have.
    """
    free = lam > 0
    if not free.any():
        return None
    hess = (graph.incidence * _expected_curvature_weights(lam, dist, graph, box)) @ graph.incidence.T
    try:
        delta = np.linalg.solve(hess[np.ix_(free, free)], grad[free])
    except np.linalg.LinAlgError:
        return None
    cand = lam.copy()
    cand[free] = np.maximum(0.0, cand[free] + delta)
    return cand


_POLISH_EVERY = 50  # Newton attempt cadence inside the ascent loop


def solve_ensemble_dual(dist: FiniteSupportDistribution, graph: NetworkGraph, box: BoxSet,
                        tol: float = 1e-9, max_iter: int = 200_000, lam0=None,
                        confine_radius: float | None = None) -> OracleReport:
    """Projected gradient ascent on the ensemble dual to a KKT point.

    Constant step sigma / rho(A^T A); stops when the gradient-map norm drops
    to ``tol``.  Iterates are clipped to ``confine_radius`` when one is given
    (clipping events are counted and reported); pass None to run unconfined.

    Raises
    ------
    ConvergenceError when the iteration cap is hit first.
    """
    sigma = dist.strong_convexity()
    if sigma <= 0:
        raise ValueError("ensemble cost must be strongly convex on every atom")
    rho = spectral_radius_ata(graph)
    step = sigma / rho
    radius = np.inf if confine_radius is None else float(confine_radius)
    if radius <= 0:
        raise ValueError("confine_radius must be positive")

    lam = np.zeros(graph.node_count) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    clip_events = 0

    def gap_at(l, g):
        return float(np.linalg.norm(np.maximum(0.0, l + step * g) - l)) / step

    for it in range(1, max_iter + 1):
        grad = exact_expected_gradient(lam, dist, graph, box)
        # periodic Newton acceleration: the fixed step contracts slowly on
        # ill-conditioned instances, while one active-set solve jumps to the
        # root of the local quadratic piece once the active set is right.
        # Accepted only when it strictly shrinks the gradient map, so the
        # plain ascent remains the worst case.
        if it % _POLISH_EVERY == 0:
            cand = _newton_step(lam, grad, dist, graph, box)
            if cand is not None and float(np.linalg.norm(cand)) <= radius:
                cand_grad = exact_expected_gradient(cand, dist, graph, box)
                if gap_at(cand, cand_grad) < gap_at(lam, grad):
                    lam, grad = cand, cand_grad
        lam_next = np.maximum(0.0, lam + step * grad)
        nrm = float(np.linalg.norm(lam_next))
        if nrm > radius:
            lam_next *= radius / nrm
            clip_events += 1
        gap = float(np.linalg.norm(lam_next - lam)) / step
        lam = lam_next
        if gap <= tol:
            break
    else:
        raise ConvergenceError(f"dual ascent did not reach gradient-map norm {tol} within "
                               f"{max_iter} iterations (last {gap:.3e})")

    grad = exact_expected_gradient(lam, dist, graph, box)
    feas, comp, stat = _kkt_numbers(lam, grad)
    # final polish: the ascent stalls once lam + step*grad rounds back to
    # lam, a few ulps short of the true root; Newton steps are kept while
    # the measured KKT numbers actually improve.
    for _ in range(3):
        if max(feas, comp, stat) == 0.0:
            break
        cand = _newton_step(lam, grad, dist, graph, box)
        if cand is None or float(np.linalg.norm(cand)) > radius:
            break
        cand_grad = exact_expected_gradient(cand, dist, graph, box)
        cand_nums = _kkt_numbers(cand, cand_grad)
        if max(cand_nums) >= max(feas, comp, stat):
            break
        lam, grad = cand, cand_grad
        feas, comp, stat = cand_nums

    return OracleReport(
        lam_star=lam,
        dual_optimum=ensemble_dual_value(lam, dist, graph, box),
        constraint_residual=feas,
        comp_slackness=comp,
        stationarity_residual=stat,
        kkt_residual=max(feas, comp, stat),
        iterations=it,
        grad_map_norm=gap,
        clip_events=clip_events,
        confine_radius=radius,
        sample_count=dist.size,
        sigma=sigma,
        spectral_radius=rho,
        dual_smoothness=rho / sigma,
    )


def saa_dual_solve(samples, graph: NetworkGraph, box: BoxSet, tol: float = 1e-9,
                   lam0=None, max_iter: int = 200_000) -> OracleReport:
    """Solve the uniformly weighted SAA dual over the given samples."""
    dist = FiniteSupportDistribution.from_atoms(samples, box=box)
    return solve_ensemble_dual(dist, graph, box, tol=tol, lam0=lam0, max_iter=max_iter)


DEFAULT_ORACLE_SEED = 1729
DEFAULT_ORACLE_SAMPLES = 100_000


def reference_dual_solution(scenario: GeoScenario, count: int = DEFAULT_ORACLE_SAMPLES,
                            seed: int = DEFAULT_ORACLE_SEED, tol: float = 1e-9,
                            confine: bool = True):
    """Operational optimum: the N-sample SAA maximizer under a fixed seed.

    Solves a ladder of prefix subsets (1e3, 1e4, ..., N) warm-starting each
    stage at the previous maximizer, which leaves only a short polish at full
    size.  The confinement radius mirrors the compact-set device: 10 x
    (gradient bound) x (a strictly-feasible-policy bound on ||lam*||).

    Returns (OracleReport, FiniteSupportDistribution).
    """
    graph, box = scenario.graph, scenario.box
    dist = saa_distribution(scenario, count, seed)
    radius = None
    if confine:
        zeta, policy = scenario.slater_certificate()
        m = gradient_bound(graph, box, scenario.arrival_upper)
        # ||lam*||_1 <= (E[cost(policy)] - D(0)) / zeta for any strictly
        # feasible policy, so this ball always contains the maximizer
        span = (ensemble_expected_cost(policy, dist)
                - ensemble_dual_value(np.zeros(graph.node_count), dist, graph, box)) / zeta
        radius = 10.0 * m * max(span, 1.0)
    sizes = [s for s in (1000, 10_000) if s < count] + [count]
    lam = None
    report = None
    for s in sizes:
        sub = FiniteSupportDistribution.from_atoms(dist.atoms[:s], box=box)
        stage_tol = tol if s == count else max(tol, 1e-6)
        report = solve_ensemble_dual(sub, graph, box, tol=stage_tol, lam0=lam,
                                     confine_radius=radius)
        lam = report.lam_star
    return report, dist


# ---------------------------------------------------------------------------
# Structural certificates and the learning-rate probe
# ---------------------------------------------------------------------------

@dataclass
class StructuralReport:
    smoothness_bound: float       # rho(A^T A) / sigma
    max_lipschitz_ratio: float    # worst sampled gradient ratio
    smoothness_ok: bool
    quadratic_growth: float       # largest eps with D* - D >= eps/2 ||lam-lam*||^2 on samples
    pl_constant: float            # smallest xi^2 with D* - D <= L_d xi^2 / 2 ||grad||^2
    pairs: int


def verify_structural_constants(dist: FiniteSupportDistribution, graph: NetworkGraph,
                                box: BoxSet, lam_star, seed: int = 0, pairs: int = 200,
                                slack: float = 1e-8) -> StructuralReport:
    """Sample-based check of the dual's smoothness/growth constants.

    Draws nonnegative multipliers around lam_star at mixed scales, confirms
    every gradient difference respects the rho(A^T A)/sigma Lipschitz bound
    (within ``slack``), and fits the quadratic-growth and gradient-domination
    constants observed on the samples.
    """
    lam_star = np.asarray(lam_star, dtype=float)
    sigma = dist.strong_convexity()
    rho = spectral_radius_ata(graph)
    bound = rho / sigma
    d_star = ensemble_dual_value(lam_star, dist, graph, box)
    rng = stream(seed, 0, "probe")
    scale_base = float(np.linalg.norm(lam_star)) + 1.0

    worst_ratio = 0.0
    growth = np.inf
    pl = 0.0
    for k in range(pairs):
        scale = scale_base * 10.0 ** rng.uniform(-3, 0)
        lam_a = np.maximum(0.0, lam_star + scale * rng.standard_normal(lam_star.shape))
        lam_b = np.maximum(0.0, lam_star + scale * rng.standard_normal(lam_star.shape))
        ga = exact_expected_gradient(lam_a, dist, graph, box)
        gb = exact_expected_gradient(lam_b, dist, graph, box)
        dl = float(np.linalg.norm(lam_a - lam_b))
        if dl > 1e-12:
            worst_ratio = max(worst_ratio, float(np.linalg.norm(ga - gb)) / dl)
        da = ensemble_dual_value(lam_a, dist, graph, box)
        dist_sq = float(np.linalg.norm(lam_a - lam_star)) ** 2
        grad_sq = float(ga @ ga)
        gap = d_star - da
        if dist_sq > 1e-12:
            growth = min(growth, 2.0 * gap / dist_sq)
        if grad_sq > 1e-12:
            pl = max(pl, 2.0 * gap / (bound * grad_sq))
    return StructuralReport(
        smoothness_bound=bound,
        max_lipschitz_ratio=worst_ratio,
        smoothness_ok=worst_ratio <= bound + slack,
        quadratic_growth=float(growth),
        pl_constant=float(pl),
        pairs=pairs,
    )


@dataclass
class ProbeReport:
    checkpoints: np.ndarray
    mean_gaps: np.ndarray
    exponent: float
    sqrt_rate_consistent: bool    # fitted decay at least as fast as t^-0.35


def empirical_convergence_probe(emp_trajectories, checkpoints, dist, graph, box,
                                lam_star) -> ProbeReport:
    """Measure how fast learned multipliers climb the ensemble dual.

    ``emp_trajectories`` maps checkpoint t -> list of lam_emp iterates (one
    per realization, the state after slot t).  Reports the mean optimality
    gap D(lam*) - D(lam_emp_t) per checkpoint and the log-log fitted decay
    exponent.
    """
    checkpoints = np.asarray(sorted(checkpoints))
    d_star = ensemble_dual_value(lam_star, dist, graph, box)
    means = []
    for t in checkpoints:
        gaps = [d_star - ensemble_dual_value(lam, dist, graph, box)
                for lam in emp_trajectories[int(t)]]
        means.append(float(np.mean(gaps)))
    means = np.array(means)
    if (means <= 0).any():
        # a non-positive gap means the iterate matched the maximizer; treat as floor
        means = np.maximum(means, 1e-300)
    exponent = float(np.polyfit(np.log10(checkpoints), np.log10(means), 1)[0])
    return ProbeReport(checkpoints=checkpoints, mean_gaps=means, exponent=exponent,
                       sqrt_rate_consistent=exponent <= -0.35)


# ---------------------------------------------------------------------------
# Flat key=value report serialization
# ---------------------------------------------------------------------------

_SCALAR_FIELDS = ("dual_optimum", "constraint_residual", "comp_slackness",
                  "stationarity_residual", "kkt_residual", "grad_map_norm",
                  "confine_radius", "sigma", "spectral_radius", "dual_smoothness")
_INT_FIELDS = ("iterations", "clip_events", "sample_count")


def write_oracle_report(report: OracleReport, path) -> None:
    lines = [f"lam_star = {','.join(repr(float(v)) for v in report.lam_star)}"]
    for name in _SCALAR_FIELDS:
        lines.append(f"{name} = {getattr(report, name)!r}")
    for name in _INT_FIELDS:
        lines.append(f"{name} = {getattr(report, name)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_oracle_report(path) -> OracleReport:
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    try:
        lam = np.array([float(v) for v in values.pop("lam_star").split(",")])
        kwargs = {name: float(values.pop(name)) for name in _SCALAR_FIELDS}
        kwargs.update({name: int(values.pop(name)) for name in _INT_FIELDS})
    except KeyError as exc:
        raise ValueError(f"{path}: missing report field {exc}") from exc
    if values:
        raise ValueError(f"{path}: unknown report fields {sorted(values)}")
    return OracleReport(lam_star=lam, **kwargs)
