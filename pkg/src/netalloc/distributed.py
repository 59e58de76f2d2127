"""Per-node implementation of the learning controller over message passing.

Each node keeps only its own queue, empirical multiplier, offset entry, and
the cost data of its outgoing edges.  A slot runs four synchronous phases:

1. multiplier exchange: every node sends its effective and empirical
   multipliers to the sources of its incoming real edges (2 messages per
   real edge),
2. local allocation: every node solves its outgoing edges' scalar
   subproblems twice, once per multiplier (virtual-sink multiplier is 0),
3. flow exchange: every node sends each outgoing real edge's deployed and
   virtual flows to the edge's destination (2 messages per real edge),
4. local update: every node folds received inflows, its own outflows, and
   its arrival into the queue and empirical-multiplier recursions.

Accumulation per node is (arrival + inflow) - outflow with each sum taken in
ascending edge-index order from 0.0, the same canonical order the
centralized controller uses, so a run here is bit-identical to the
centralized one on the same state sequence.  Phases are barriers: a message
that fails to arrive before the phase that needs it is a deadlock and is
reported with its slot and node, never papered over.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .controllers import eta_value
from .graph import BoxSet, NetworkGraph
from .lagrangian import box_quadratic_argmin
from .scenario import GeoScenario, StateSample


class DeadlockError(RuntimeError):
    """A synchronous phase started without one of its required messages."""


@dataclass(frozen=True)
class Message:
    slot: int
    phase: int
    sender: int      # 1-based node id
    receiver: int    # 1-based node id
    kind: str        # multiplier.gamma | multiplier.emp | flow.deployed | flow.virtual
    value: float


@dataclass
class NodeState:
    """What one node is allowed to remember."""

    node: int                  # 0-based id
    queue: float
    lam_emp: float
    theta: float
    in_edges: np.ndarray       # ascending edge ids whose destination is this node
    out_edges: np.ndarray      # ascending edge ids leaving this node
    out_dst: np.ndarray        # 0-based destination per out edge, -1 for the sink


@dataclass
class DistributedRun:
    """Per-slot trajectory of the message-passing controller."""

    queues: np.ndarray          # (T+1, I) queue before each slot, then final
    lam_emp: np.ndarray         # (T+1, I)
    gammas: np.ndarray          # (T, I) effective multipliers used each slot
    allocations: np.ndarray     # (T, E) deployed flows
    multiplier_messages: int    # total over the run
    flow_messages: int
    messages: list | None = None  # populated when tracing


def _node_states(graph: NetworkGraph, theta: np.ndarray) -> list[NodeState]:
    nodes = []
    for i in range(graph.node_count):
        nodes.append(NodeState(
            node=i,
            queue=0.0,
            lam_emp=0.0,
            theta=float(theta[i]),
            in_edges=np.flatnonzero(graph.dst_index == i),
            out_edges=np.flatnonzero(graph.src_index == i),
            out_dst=np.array([graph.dst_index[e] if graph.dst_index[e] < graph.node_count else -1
                              for e in np.flatnonzero(graph.src_index == i)], dtype=np.intp),
        ))
    return nodes


def run_distributed(scenario: GeoScenario, samples: list[StateSample], mu: float,
                    theta: np.ndarray, eta_mode: str = "sqrt_t", alpha: float = 1.0,
                    dual_radius: float = 1.0, grad_norm_bound: float = 1.0,
                    trace: bool = False, drop=None) -> DistributedRun:
    """Run the full horizon over the given slot samples.

    ``drop``, test-support only, is a predicate on Message; matching messages
    are lost in transit so the deadlock detector can be exercised.
    """
    graph, box = scenario.graph, scenario.box
    n_nodes, n_edges = graph.node_count, graph.edge_count
    nodes = _node_states(graph, theta)
    horizon = len(samples)

    queues = np.zeros((horizon + 1, n_nodes))
    emps = np.zeros((horizon + 1, n_nodes))
    gammas = np.zeros((horizon, n_nodes))
    allocs = np.zeros((horizon, n_edges))
    n_mult = 0
    n_flow = 0
    traced = [] if trace else None

    def send(box_dict, slot, phase, sender_i, receiver_i, kind, edge, value):
        msg = Message(slot, phase, sender_i + 1, receiver_i + 1, kind, float(value))
        if drop is not None and drop(msg):
            return
        box_dict[(edge, kind)] = value
        if traced is not None:
            traced.append(msg)

    for t1, sample in enumerate(samples):
        slot = t1 + 1
        upper = box.upper if sample.upper is None else sample.upper
        eta = eta_value(eta_mode, slot, alpha, dual_radius, grad_norm_bound)

        # phase 1: multiplier exchange along incoming real edges
        inboxes = [dict() for _ in range(n_nodes)]
        local_gamma = np.empty(n_nodes)
        for nd in nodes:
            gamma_i = (nd.lam_emp + mu * nd.queue) - nd.theta
            local_gamma[nd.node] = gamma_i
            for e in nd.in_edges:
                src = graph.src_index[e]
                send(inboxes[src], slot, 1, nd.node, src, "multiplier.gamma", e, gamma_i)
                send(inboxes[src], slot, 1, nd.node, src, "multiplier.emp", e, nd.lam_emp)
                n_mult += 2

        # phase 2: local allocations for both multipliers
        x_dep = np.empty(n_edges)
        x_vir = np.empty(n_edges)
        for nd in nodes:
            gamma_i = local_gamma[nd.node]
            for e, j in zip(nd.out_edges, nd.out_dst):
                if j < 0:
                    g_j, l_j = 0.0, 0.0
                else:
                    try:
                        g_j = inboxes[nd.node][(e, "multiplier.gamma")]
                        l_j = inboxes[nd.node][(e, "multiplier.emp")]
                    except KeyError as exc:
                        raise DeadlockError(
                            f"slot {slot}: node {nd.node + 1} entered allocation without "
                            f"multiplier message on edge {e} from node {j + 1}") from exc
                x_dep[e] = box_quadratic_argmin(gamma_i - g_j, sample.edge_coeff[e], upper[e])
                x_vir[e] = box_quadratic_argmin(nd.lam_emp - l_j, sample.edge_coeff[e], upper[e])

        # phase 3: flow exchange along outgoing real edges
        flow_in = [dict() for _ in range(n_nodes)]
        for nd in nodes:
            for e, j in zip(nd.out_edges, nd.out_dst):
                if j < 0:
                    continue
                send(flow_in[j], slot, 3, nd.node, j, "flow.deployed", e, x_dep[e])
                send(flow_in[j], slot, 3, nd.node, j, "flow.virtual", e, x_vir[e])
                n_flow += 2

        # phase 4: local queue and empirical-multiplier updates
        for nd in nodes:
            in_dep = 0.0
            in_vir = 0.0
            for e in nd.in_edges:
                try:
                    in_dep += flow_in[nd.node][(e, "flow.deployed")]
                    in_vir += flow_in[nd.node][(e, "flow.virtual")]
                except KeyError as exc:
                    raise DeadlockError(
                        f"slot {slot}: node {nd.node + 1} entered update without flow "
                        f"message on edge {e} from node {graph.src_index[e] + 1}") from exc
            out_dep = 0.0
            out_vir = 0.0
            for e in nd.out_edges:
                out_dep += x_dep[e]
                out_vir += x_vir[e]
            c_i = sample.arrivals[nd.node]
            nd.queue = np.maximum(0.0, nd.queue + ((c_i + in_dep) - out_dep))
            nd.lam_emp = np.maximum(0.0, nd.lam_emp + eta * ((c_i + in_vir) - out_vir))

        gammas[t1] = local_gamma
        allocs[t1] = x_dep
        for nd in nodes:
            queues[t1 + 1, nd.node] = nd.queue
            emps[t1 + 1, nd.node] = nd.lam_emp

    return DistributedRun(queues=queues, lam_emp=emps, gammas=gammas, allocations=allocs,
                          multiplier_messages=n_mult, flow_messages=n_flow, messages=traced)


def write_message_trace(messages, path) -> None:
    """Dump a traced run's messages as CSV (slot, phase, sender, receiver, kind, value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["slot", "phase", "sender", "receiver", "kind", "value"])
        for m in messages:
            w.writerow([m.slot, m.phase, m.sender, m.receiver, m.kind, repr(m.value)])
