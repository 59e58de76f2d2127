"""Geographic load balancing scenario.

J mapping nodes (ids 1..J) receive random workload arrivals and forward them
over mapping links to K data centers (ids J+1..J+K); each data center drains
its queue through a single virtual-sink edge bounded by its service capacity.
Edges are ordered mapping links first, (j,k) with j outermost, then the K
data-center edges.

Per-slot state: data-center energy prices p ~ U[price interval], renewable
supplies e ~ U[renewable interval], workload arrivals c ~ U[arrival interval]
at mapping nodes (zero at data centers).  The slot cost is

    sum_k p_k * (x_dc_k**2 - e_k)  +  sum_jk b_jk * x_jk**2

so every edge carries a strictly convex quadratic: coefficient p_k on
data-center edges, fixed b_jk on mapping links, plus the x-independent
renewable credit -sum_k p_k e_k, which is included in reported costs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import BoxSet, NetworkGraph
from .rng import stream

BANDWIDTH_COST_RULES = ("scaled_inverse", "constant")


@dataclass(frozen=True)
class ScenarioConfig:
    """Static description of a load-balancing instance.

    Intervals are uniform supports; a degenerate [a, a] interval yields the
    constant a.  ``bandwidth_cost_rule``: "scaled_inverse" sets each mapping
    link's cost coefficient to bandwidth_cost_scale / limit, "constant" uses
    bandwidth_cost_value on every link.  With ``per_slot_capacities`` the
    data-center service bounds are redrawn each slot inside the static box;
    otherwise they are drawn once at build time.
    """

    mapping_nodes: int = 10
    data_centers: int = 10
    price_min: float = 10.0
    price_max: float = 30.0
    renewable_min: float = 10.0
    renewable_max: float = 100.0
    arrival_min: float = 10.0
    arrival_max: float = 100.0
    bandwidth_min: float = 100.0
    bandwidth_max: float = 200.0
    capacity_min: float = 100.0
    capacity_max: float = 200.0
    bandwidth_cost_rule: str = "scaled_inverse"
    bandwidth_cost_scale: float = 40.0
    bandwidth_cost_value: float = 1.0
    per_slot_capacities: bool = False
    scenario_seed: int = 0

    def __post_init__(self):
        if self.mapping_nodes < 1 or self.data_centers < 1:
            raise ValueError("need at least one mapping node and one data center")
        for lo_name, hi_name, lo_floor in (
            ("price_min", "price_max", "positive"),
            ("renewable_min", "renewable_max", "nonneg"),
            ("arrival_min", "arrival_max", "nonneg"),
            ("bandwidth_min", "bandwidth_max", "positive"),
            ("capacity_min", "capacity_max", "positive"),
        ):
            lo, hi = getattr(self, lo_name), getattr(self, hi_name)
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError(f"interval [{lo_name}, {hi_name}] = [{lo}, {hi}] is malformed")
            if lo < 0 or (lo_floor == "positive" and lo <= 0):
                raise ValueError(f"{lo_name} = {lo} violates {lo_floor} requirement")
        if self.bandwidth_cost_rule not in BANDWIDTH_COST_RULES:
            raise ValueError(f"bandwidth_cost_rule must be one of {BANDWIDTH_COST_RULES}")
        if self.bandwidth_cost_rule == "scaled_inverse" and self.bandwidth_cost_scale <= 0:
            raise ValueError("bandwidth_cost_scale must be positive")
        if self.bandwidth_cost_rule == "constant" and self.bandwidth_cost_value <= 0:
            raise ValueError("bandwidth_cost_value must be positive")


@dataclass(frozen=True)
class StateSample:
    """One slot's realized state.

    edge_coeff holds the per-edge quadratic coefficients implied by prices
    and bandwidth costs; cost_constant is the renewable credit.  ``upper`` is
    the slot-effective per-edge bound when per-slot capacities are active,
    else None (use the static box).
    """

    prices: np.ndarray
    renewables: np.ndarray
    arrivals: np.ndarray        # full node vector, zeros at data centers
    bandwidth_coeffs: np.ndarray
    edge_coeff: np.ndarray
    cost_constant: float
    slot_capacities: np.ndarray | None = None
    upper: np.ndarray | None = None


class GeoScenario:
    """A built instance: graph, static box, link costs, and samplers."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        j, k = config.mapping_nodes, config.data_centers
        self.mapping_count = j
        self.dc_count = k
        edges = [(m, j + d) for m in range(1, j + 1) for d in range(1, k + 1)]
        edges += [(j + d, None) for d in range(1, k + 1)]
        self.graph = NetworkGraph.from_edges(edges, j + k)

        top = stream(config.scenario_seed, 0, "topology")
        u = top.random(j * k + k)
        self.bandwidth_limits = config.bandwidth_min + (config.bandwidth_max - config.bandwidth_min) * u[: j * k]
        static_caps = config.capacity_min + (config.capacity_max - config.capacity_min) * u[j * k:]
        if config.per_slot_capacities:
            # static box is the outer envelope; slots tighten inside it
            static_caps = np.full(k, config.capacity_max)
        self.static_capacities = static_caps
        self.box = BoxSet(np.concatenate((self.bandwidth_limits, static_caps)))

        if config.bandwidth_cost_rule == "scaled_inverse":
            self.bandwidth_coeffs = config.bandwidth_cost_scale / self.bandwidth_limits
        else:
            self.bandwidth_coeffs = np.full(j * k, config.bandwidth_cost_value)

        # per-slot uniform draw layout: prices, renewables, arrivals[, capacities]
        self._draws = 2 * k + j + (k if config.per_slot_capacities else 0)
        self.arrival_upper = np.concatenate((np.full(j, config.arrival_max), np.zeros(k)))

    @property
    def node_count(self) -> int:
        return self.graph.node_count

    @property
    def edge_count(self) -> int:
        return self.graph.edge_count

    def _sample_from_uniform(self, u: np.ndarray) -> StateSample:
        cfg, j, k = self.config, self.mapping_count, self.dc_count
        prices = cfg.price_min + (cfg.price_max - cfg.price_min) * u[:k]
        renewables = cfg.renewable_min + (cfg.renewable_max - cfg.renewable_min) * u[k: 2 * k]
        arrivals = np.zeros(j + k)
        arrivals[:j] = cfg.arrival_min + (cfg.arrival_max - cfg.arrival_min) * u[2 * k: 2 * k + j]
        slot_caps = None
        upper = None
        if cfg.per_slot_capacities:
            caps = cfg.capacity_min + (cfg.capacity_max - cfg.capacity_min) * u[2 * k + j:]
            slot_caps = np.concatenate((self.bandwidth_limits, caps))
            upper = np.minimum(self.box.upper, slot_caps)
        return StateSample(
            prices=prices,
            renewables=renewables,
            arrivals=arrivals,
            bandwidth_coeffs=self.bandwidth_coeffs,
            edge_coeff=np.concatenate((self.bandwidth_coeffs, prices)),
            cost_constant=-float(prices @ renewables),
            slot_capacities=slot_caps,
            upper=upper,
        )

    def sample_state(self, rng: np.random.Generator) -> StateSample:
        """Draw one slot's state; consumes exactly one block of the stream."""
        return self._sample_from_uniform(rng.random(self._draws))

    def sample_batch(self, rng: np.random.Generator, count: int) -> list[StateSample]:
        """Draw ``count`` consecutive slots.

        Row-major consumption of one (count, draws) uniform block, so the
        sequence is identical to ``count`` calls of sample_state on the same
        stream.
        """
        u = rng.random((count, self._draws))
        return [self._sample_from_uniform(u[i]) for i in range(count)]

    def evaluate_cost(self, x: np.ndarray, sample: StateSample) -> float:
        """Slot cost of allocation x, renewable credit included."""
        if x.shape[-1] != self.edge_count:
            raise ValueError(f"allocation has {x.shape[-1]} edges, scenario has {self.edge_count}")
        return float(sample.edge_coeff @ (x * x) + sample.cost_constant)

    def strong_convexity(self) -> float:
        """Smallest 2*coefficient over every edge and every possible slot."""
        return 2.0 * min(float(self.bandwidth_coeffs.min()), self.config.price_min)

    def smoothness(self) -> float:
        """Largest 2*coefficient over every edge and every possible slot."""
        return 2.0 * max(float(self.bandwidth_coeffs.max()), self.config.price_max)

    def slater_certificate(self) -> tuple[float, np.ndarray]:
        """Certify strict expected feasibility by interval arithmetic.

        Constructs a constant routing policy that spreads each mapping node's
        mean arrival load evenly across its links and drains each data center
        at a fixed rate, then returns the largest uniform slack s with
        E[A x + c] <= -s * 1 under worst-case (interval) bounds, along with
        the policy.  Raises ValueError when no positive slack is certifiable.
        """
        cfg, j, k = self.config, self.mapping_count, self.dc_count
        mean_arrival = 0.5 * (cfg.arrival_min + cfg.arrival_max)
        # mapping row slack: s <= k * min_link_limit - mean_arrival
        s_links = k * float(self.bandwidth_limits.min()) - mean_arrival
        # data-center row with drain cap_lb: inflow j*(mean+s)/k + s <= cap_lb
        cap_lb = cfg.capacity_min if cfg.per_slot_capacities else float(self.static_capacities.min())
        s_caps = (cap_lb - j * mean_arrival / k) / (j / k + 1.0)
        zeta = min(s_links, s_caps)
        if zeta <= 0:
            raise ValueError(f"no positive expected slack certifiable (best {zeta:.6g}); "
                             "arrivals too heavy for configured capacities")
        per_link = (mean_arrival + zeta) / k
        drain = j * per_link + zeta
        policy = np.concatenate((np.full(j * k, per_link), np.full(k, drain)))
        if (policy > self.box.upper + 1e-12).any():
            raise ValueError("certificate policy leaves the static box; capacities inconsistent")
        return float(zeta), policy


def build_geo_load_balancing(config: ScenarioConfig) -> GeoScenario:
    """Construct the scenario, drawing link limits and capacities once."""
    return GeoScenario(config)


def state_stream(config: ScenarioConfig, base_seed: int, realization: int) -> np.random.Generator:
    """Per-realization state stream (common random numbers across algorithms)."""
    return stream(base_seed, realization, "state")


def with_seed(config: ScenarioConfig, scenario_seed: int) -> ScenarioConfig:
    return replace(config, scenario_seed=scenario_seed)
