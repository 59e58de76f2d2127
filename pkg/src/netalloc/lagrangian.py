"""Per-slot Lagrangian minimization and the stochastic dual view.

For multiplier vector lam the slot Lagrangian is

    L(x, lam) = cost(x) + lam . (A x + c)

with the per-edge quadratic cost from the slot sample.  Because both terms
separate over edges, the minimizer has a closed form per edge; an
independent projected-gradient path is kept alongside it as a slower oracle
that shares no algebra with the closed form.  The dual function
D(lam) = min_x L(x, lam) then has gradient A x(lam) + c.
"""

from __future__ import annotations

import numpy as np

from .graph import BoxSet, ConvergenceError, NetworkGraph
from .scenario import StateSample


def box_quadratic_argmin(diff, coeff, upper):
    """argmin of a*x^2 - d*x over [0, u], elementwise: clamp(d / 2a, 0, u).

    Shared by the centralized vector path and the per-edge scalar path of the
    message-passing solver, so the two agree bit for bit.
    """
    return np.minimum(np.maximum(diff / (2.0 * coeff), 0.0), upper)


def _effective_upper(sample: StateSample, box: BoxSet) -> np.ndarray:
    return box.upper if sample.upper is None else sample.upper


def minimize_lagrangian(lam, sample: StateSample, graph: NetworkGraph, box: BoxSet,
                        method: str = "closed_form", tol: float = 1e-10,
                        max_iter: int = 500_000) -> np.ndarray:
    """Minimize the slot Lagrangian over the box at multiplier ``lam``.

    ``lam`` is used as given; negative entries are legitimate (the deployed
    multiplier of the learning controller can dip below zero).

    method="closed_form" evaluates the per-edge clamp formula.
    method="projected_gradient" runs plain projected gradient with stepsize
    1/L_p (L_p = 2 max coeff) from x=0 until the gradient-map norm falls to
    ``tol``; it exists as an independent check and raises ConvergenceError
    if the cap is hit.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (graph.node_count,):
        raise ValueError(f"multiplier has shape {lam.shape}, expected ({graph.node_count},)")
    coeff = sample.edge_coeff
    if (coeff <= 0).any():
        raise ValueError("every edge cost coefficient must be positive")
    upper = _effective_upper(sample, box)
    diff = graph.multiplier_differences(lam)
    if method == "closed_form":
        return box_quadratic_argmin(diff, coeff, upper)
    if method != "projected_gradient":
        raise ValueError(f"unknown method {method!r}")

    step = 1.0 / (2.0 * float(coeff.max()))
    x = np.zeros(graph.edge_count)
    for _ in range(max_iter):
        grad = 2.0 * coeff * x - diff
        x_next = np.minimum(np.maximum(x - step * grad, 0.0), upper)
        gap = float(np.linalg.norm(x_next - x)) / step
        x = x_next
        if gap <= tol:
            return x
    raise ConvergenceError(f"projected gradient did not reach gradient-map norm {tol} "
                           f"within {max_iter} iterations (last {gap:.3e})")


def minimize_lagrangian_batch(lams, samples, graph: NetworkGraph, box: BoxSet,
                              method: str = "closed_form", tol: float = 1e-10,
                              max_iter: int = 500_000) -> np.ndarray:
    """Solve one slot Lagrangian per row: lams[n] against samples[n].

    Same semantics as minimize_lagrangian, vectorized over draws so that the
    slow projected-gradient oracle stays usable on thousands of points.  The
    iterative path keeps one stepsize per row (1/L_p of that row's sample)
    and stops once every row's gradient-map norm is at or below ``tol``.
    """
    lams = np.asarray(lams, dtype=float)
    if lams.ndim != 2 or lams.shape[1] != graph.node_count:
        raise ValueError(f"multiplier batch has shape {lams.shape}, "
                         f"expected (n, {graph.node_count})")
    if len(samples) != lams.shape[0]:
        raise ValueError(f"{lams.shape[0]} multipliers but {len(samples)} samples")
    coeff = np.stack([s.edge_coeff for s in samples])
    if (coeff <= 0).any():
        raise ValueError("every edge cost coefficient must be positive")
    upper = np.stack([box.upper if s.upper is None else s.upper for s in samples])
    lam_pad = np.concatenate((lams, np.zeros((lams.shape[0], 1))), axis=1)
    diff = lam_pad[:, graph.src_index] - lam_pad[:, graph.dst_index]
    if method == "closed_form":
        return box_quadratic_argmin(diff, coeff, upper)
    if method != "projected_gradient":
        raise ValueError(f"unknown method {method!r}")

    step = 1.0 / (2.0 * coeff.max(axis=1, keepdims=True))
    x = np.zeros_like(diff)
    for _ in range(max_iter):
        grad = 2.0 * coeff * x - diff
        x_next = np.minimum(np.maximum(x - step * grad, 0.0), upper)
        gap = float((np.linalg.norm(x_next - x, axis=1, keepdims=True) / step).max())
        x = x_next
        if gap <= tol:
            return x
    raise ConvergenceError(f"batch projected gradient did not reach gradient-map norm {tol} "
                           f"within {max_iter} iterations (last {gap:.3e})")


def stochastic_dual_gradient(lam, sample: StateSample, graph: NetworkGraph, box: BoxSet) -> np.ndarray:
    """Gradient of the slot dual at lam: A x(lam) + c."""
    x = minimize_lagrangian(lam, sample, graph, box)
    return graph.divergence(x, sample.arrivals)


def dual_value(lam, sample: StateSample, graph: NetworkGraph, box: BoxSet) -> float:
    """Slot dual D(lam) = min_x L(x, lam), x-independent cost constant included."""
    lam = np.asarray(lam, dtype=float)
    x = minimize_lagrangian(lam, sample, graph, box)
    cost = float(sample.edge_coeff @ (x * x)) + sample.cost_constant
    return cost + float(lam @ graph.divergence(x, sample.arrivals))


def gradient_bound(graph: NetworkGraph, box: BoxSet, arrival_upper) -> float:
    """Certified M with ||A x + c|| <= M over the box and 0 <= c <= arrival_upper.

    Interval arithmetic per node: the net inflow of node i lies in
    [-out_capacity_i, arrival_upper_i + in_capacity_i]; M is the Euclidean
    norm of the per-node absolute maxima.
    """
    arrival_upper = np.asarray(arrival_upper, dtype=float)
    if arrival_upper.shape != (graph.node_count,):
        raise ValueError(f"arrival_upper has shape {arrival_upper.shape}, "
                         f"expected ({graph.node_count},)")
    if not np.isfinite(box.upper).all() or not np.isfinite(arrival_upper).all():
        raise ValueError("gradient bound requires finite box and arrival bounds")
    if (arrival_upper < 0).any():
        raise ValueError("arrival upper bounds must be nonnegative")
    ub = box.upper
    in_cap = np.bincount(graph.dst_index, weights=ub, minlength=graph.node_count + 1)[: graph.node_count]
    out_cap = np.bincount(graph.src_index, weights=ub, minlength=graph.node_count)
    per_node = np.maximum(arrival_upper + in_cap, out_cap)
    return float(np.linalg.norm(per_node))
