"""Online dual controllers, one slot at a time.

Three state machines share the same skeleton: solve the slot Lagrangian at
the controller's multiplier, deploy the allocation, push the multiplier
along the realized dual gradient, and project onto the nonnegative orthant.

- sdg:        lam' = [lam + mu g]_+
- heavy_ball: lam' = [lam + mu g + beta (lam - lam_prev)]_+
- la_sdg:     deploys at the effective multiplier gamma = lam_emp + mu q - theta
              (gamma is recomputed each slot, never stored), advances the
              physical queue with the deployed flow, and separately refines
              the empirical multiplier lam_emp with a diminishing step along
              a second, never-deployed allocation's gradient.  Exactly two
              Lagrangian minimizations per slot.

Expression order inside the updates is part of the contract: the queue and
multiplier recursions must round identically to the per-node message-passing
implementation and to the bare queue recursion, so the arithmetic here is
written in the same canonical order those use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import BoxSet, NetworkGraph
from .lagrangian import minimize_lagrangian
from .scenario import StateSample

ETA_MODES = ("sqrt_t", "scaled")


def eta_value(eta_mode: str, t: int, alpha: float = 1.0, dual_radius: float = 1.0,
              grad_norm_bound: float = 1.0) -> float:
    """Diminishing stepsize for slot t (1-based).

    "sqrt_t" gives 1/sqrt(t); "scaled" gives alpha * dual_radius /
    (grad_norm_bound * sqrt(t)).  One shared expression so every caller
    rounds identically.
    """
    if eta_mode == "sqrt_t":
        return 1.0 / math.sqrt(t)
    if eta_mode == "scaled":
        return alpha * dual_radius / (grad_norm_bound * math.sqrt(t))
    raise ValueError(f"eta_mode must be one of {ETA_MODES}")


def theta_default(mu: float, scale: float = 100.0) -> float:
    """Queue-offset magnitude scale * sqrt(mu) * ln(mu)^2 (natural log).

    Requires 0 < mu < 1; the offset is meaningless outside that range.
    """
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu must lie strictly between 0 and 1, got {mu}")
    if scale < 0:
        raise ValueError(f"scale must be nonnegative, got {scale}")
    return scale * math.sqrt(mu) * math.log(mu) ** 2


@dataclass
class SdgState:
    lam: np.ndarray
    mu: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if (np.asarray(self.lam) < 0).any():
            raise ValueError("multiplier must start nonnegative")


def sdg_init(graph: NetworkGraph, mu: float, lam0=None) -> SdgState:
    lam = np.zeros(graph.node_count) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    return SdgState(lam=lam, mu=mu)


def sdg_step(state: SdgState, sample: StateSample, graph: NetworkGraph, box: BoxSet):
    """Advance one slot; returns (new state, deployed allocation)."""
    x = minimize_lagrangian(state.lam, sample, graph, box)
    g = graph.divergence(x, sample.arrivals)
    lam = np.maximum(0.0, state.lam + state.mu * g)
    return SdgState(lam=lam, mu=state.mu), x


@dataclass
class HeavyBallState:
    lam: np.ndarray
    lam_prev: np.ndarray
    mu: float
    beta: float

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")


def heavy_ball_init(graph: NetworkGraph, mu: float, beta: float, lam0=None) -> HeavyBallState:
    lam = np.zeros(graph.node_count) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    # no previous iterate exists at t=1; the momentum term starts at zero
    return HeavyBallState(lam=lam, lam_prev=lam.copy(), mu=mu, beta=beta)


def heavy_ball_step(state: HeavyBallState, sample: StateSample, graph: NetworkGraph, box: BoxSet):
    """One slot of the momentum recursion; projection after the full update."""
    x = minimize_lagrangian(state.lam, sample, graph, box)
    g = graph.divergence(x, sample.arrivals)
    lam = np.maximum(0.0, state.lam + state.mu * g + state.beta * (state.lam - state.lam_prev))
    return HeavyBallState(lam=lam, lam_prev=state.lam, mu=state.mu, beta=state.beta), x


@dataclass
class LaSdgStepInfo:
    """Diagnostics of one transition, for recursion checks and traces."""

    gamma: np.ndarray           # effective multiplier used for the deployed flow
    grad: np.ndarray            # A x(gamma) + c
    virtual_grad: np.ndarray    # A x(lam_emp) + c
    eta: float
    queue_clipped: bool         # queue projection was active this slot
    emp_clipped: bool           # empirical-multiplier projection was active


@dataclass
class LaSdgState:
    lam_emp: np.ndarray
    queue: np.ndarray
    theta: np.ndarray
    mu: float
    t: int
    eta_mode: str = "sqrt_t"
    alpha: float = 1.0
    dual_radius: float = 1.0
    grad_norm_bound: float = 1.0
    last: LaSdgStepInfo | None = None

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError(f"mu must be nonnegative, got {self.mu}")
        if self.t < 1:
            raise ValueError("slot counter starts at 1")
        if self.eta_mode not in ETA_MODES:
            raise ValueError(f"eta_mode must be one of {ETA_MODES}")
        if self.eta_mode == "scaled" and min(self.alpha, self.dual_radius, self.grad_norm_bound) <= 0:
            raise ValueError("scaled stepsize needs positive alpha, dual_radius, grad_norm_bound")
        if (np.asarray(self.queue) < 0).any() or (np.asarray(self.lam_emp) < 0).any():
            raise ValueError("queue and empirical multiplier must start nonnegative")

    def eta(self) -> float:
        """Stepsize for the current slot; positive by construction."""
        return eta_value(self.eta_mode, self.t, self.alpha, self.dual_radius,
                         self.grad_norm_bound)

    def effective_multiplier(self) -> np.ndarray:
        """gamma = lam_emp + mu * queue - theta, computed fresh."""
        return self.lam_emp + self.mu * self.queue - self.theta


def lasdg_init(graph: NetworkGraph, mu: float, theta=None, theta_scale: float = 100.0,
               eta_mode: str = "sqrt_t", alpha: float = 1.0, dual_radius: float = 1.0,
               grad_norm_bound: float = 1.0, lam_emp0=None, queue0=None) -> LaSdgState:
    """Fresh learning controller; theta defaults to the per-node offset rule."""
    n = graph.node_count
    if theta is None:
        theta = np.full(n, theta_default(mu, theta_scale))
    else:
        theta = np.asarray(theta, dtype=float).copy()
        if theta.shape != (n,):
            raise ValueError(f"theta has shape {theta.shape}, expected ({n},)")
    lam_emp = np.zeros(n) if lam_emp0 is None else np.asarray(lam_emp0, dtype=float).copy()
    queue = np.zeros(n) if queue0 is None else np.asarray(queue0, dtype=float).copy()
    return LaSdgState(lam_emp=lam_emp, queue=queue, theta=theta, mu=mu, t=1,
                      eta_mode=eta_mode, alpha=alpha, dual_radius=dual_radius,
                      grad_norm_bound=grad_norm_bound)


def lasdg_step(state: LaSdgState, sample: StateSample, graph: NetworkGraph, box: BoxSet):
    """Advance one slot; returns (new state, deployed allocation).

    The deployed allocation is solved at gamma (which may be negative and is
    passed to the minimizer as-is); the virtual allocation solved at lam_emp
    is never deployed and only steers the empirical multiplier.
    """
    gamma = state.effective_multiplier()
    x = minimize_lagrangian(gamma, sample, graph, box)
    g = graph.divergence(x, sample.arrivals)
    q_raw = state.queue + g
    queue = np.maximum(0.0, q_raw)

    xv = minimize_lagrangian(state.lam_emp, sample, graph, box)
    gv = graph.divergence(xv, sample.arrivals)
    eta = state.eta()
    emp_raw = state.lam_emp + eta * gv
    lam_emp = np.maximum(0.0, emp_raw)

    info = LaSdgStepInfo(gamma=gamma, grad=g, virtual_grad=gv, eta=eta,
                         queue_clipped=bool((q_raw < 0.0).any()),
                         emp_clipped=bool((emp_raw < 0.0).any()))
    new = LaSdgState(lam_emp=lam_emp, queue=queue, theta=state.theta, mu=state.mu,
                     t=state.t + 1, eta_mode=state.eta_mode, alpha=state.alpha,
                     dual_radius=state.dual_radius, grad_norm_bound=state.grad_norm_bound,
                     last=info)
    return new, x


def gamma_recursion_residual(states: list[LaSdgState]) -> float:
    """Largest deviation from the effective-multiplier recursion.

    On slots where neither projection was active, consecutive states must
    satisfy gamma' = gamma + mu * grad + (lam_emp' - lam_emp).  Takes the
    list of states produced by repeated lasdg_step (each carrying its
    transition info) and returns the max infinity-norm residual over the
    projection-free transitions; slots with an active projection are skipped.
    """
    worst = 0.0
    for prev, cur in zip(states, states[1:]):
        info = cur.last
        if info is None or info.queue_clipped or info.emp_clipped:
            continue
        predicted = info.gamma + prev.mu * info.grad + (cur.lam_emp - prev.lam_emp)
        actual = cur.effective_multiplier()
        worst = max(worst, float(np.max(np.abs(actual - predicted))))
    return worst
