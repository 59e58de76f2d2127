"""Directed network model: incidence algebra, queues, and flow box constraints.

Nodes are numbered 1..I.  Every edge leaves exactly one real node; its
destination is either another real node or the virtual sink (``dst=None``),
which absorbs flow and keeps no queue.  Column e of the incidence matrix A
holds -1 at the source row, +1 at the destination row (nothing for the
virtual sink), so A @ x is the net inflow each node sees from flow vector x.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Edge = tuple  # (src, dst) with dst None for the virtual sink


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its iteration cap before its tolerance."""


def build_incidence(edges, node_count: int) -> np.ndarray:
    """Build the dense node-edge incidence matrix.

    Parameters
    ----------
    edges : sequence of (src, dst)
        1-based node ids; dst may be None for the virtual sink.
    node_count : int
        Number of real nodes I.

    Raises
    ------
    ValueError
        On an id outside [1, node_count], a self-loop (one edge cannot mark
        its own source twice), or a node with no outgoing edge.  Malformed
        input fails; it is never silently repaired.
    """
    if node_count < 1:
        raise ValueError(f"node_count must be >= 1, got {node_count}")
    edges = list(edges)
    a = np.zeros((node_count, len(edges)))
    has_out = np.zeros(node_count, dtype=bool)
    for e, (src, dst) in enumerate(edges):
        if not 1 <= src <= node_count:
            raise ValueError(f"edge {e}: source id {src} outside [1, {node_count}]")
        if dst is not None:
            if not 1 <= dst <= node_count:
                raise ValueError(f"edge {e}: destination id {dst} outside [1, {node_count}]")
            if dst == src:
                raise ValueError(f"edge {e}: source {src} equals destination; "
                                 "an edge cannot mark the same node as source twice")
            a[dst - 1, e] = 1.0
        a[src - 1, e] = -1.0
        has_out[src - 1] = True
    if not has_out.all():
        missing = int(np.flatnonzero(~has_out)[0]) + 1
        raise ValueError(f"node {missing} has no outgoing edge")
    return a


def validate_incidence(a: np.ndarray) -> None:
    """Check incidence-matrix structure on an arbitrary matrix.

    Entries must lie in {-1, 0, +1}; every row needs at least one -1 (each
    node can drain); every column needs exactly one -1 and at most one +1.
    Used on deserialized or hand-built matrices; raises ValueError.
    """
    if a.ndim != 2:
        raise ValueError("incidence matrix must be 2-D")
    if not np.isin(a, (-1.0, 0.0, 1.0)).all():
        raise ValueError("incidence entries must be -1, 0, or +1")
    row_has_out = (a == -1.0).any(axis=1)
    if not row_has_out.all():
        raise ValueError(f"node {int(np.flatnonzero(~row_has_out)[0]) + 1} has no outgoing edge")
    src_counts = (a == -1.0).sum(axis=0)
    if (src_counts != 1).any():
        bad = int(np.flatnonzero(src_counts != 1)[0])
        raise ValueError(f"edge {bad} has {int(src_counts[bad])} source markings; expected exactly 1")
    dst_counts = (a == 1.0).sum(axis=0)
    if (dst_counts > 1).any():
        bad = int(np.flatnonzero(dst_counts > 1)[0])
        raise ValueError(f"edge {bad} has {int(dst_counts[bad])} destination markings; expected at most 1")


@dataclass(frozen=True)
class BoxSet:
    """Per-edge flow bounds [0, upper]."""

    upper: np.ndarray

    def __post_init__(self):
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "upper", upper)
        if upper.ndim != 1:
            raise ValueError("upper must be a 1-D per-edge array")
        if not np.isfinite(upper).all() or (upper < 0).any():
            raise ValueError("upper bounds must be finite and nonnegative")


@dataclass(frozen=True)
class NetworkGraph:
    """Immutable directed network with precomputed index structure.

    The canonical per-node flow accumulation is
    ``(arrivals + inflow) - outflow`` with inflow and outflow each summed in
    ascending edge-index order starting from 0.0.  Both the vectorized path
    below and the per-node message-passing path follow this exact order, so
    their floating-point results agree bit for bit.
    """

    node_count: int
    edges: tuple
    incidence: np.ndarray = field(repr=False)
    src_index: np.ndarray = field(repr=False)   # 0-based source row per edge
    dst_index: np.ndarray = field(repr=False)   # 0-based dest row; node_count = virtual sink

    @classmethod
    def from_edges(cls, edges, node_count: int) -> "NetworkGraph":
        edges = tuple((int(s), None if d is None else int(d)) for s, d in edges)
        a = build_incidence(edges, node_count)
        src = np.array([s - 1 for s, _ in edges], dtype=np.intp)
        dst = np.array([node_count if d is None else d - 1 for _, d in edges], dtype=np.intp)
        return cls(node_count, edges, a, src, dst)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def multiplier_differences(self, lam: np.ndarray) -> np.ndarray:
        """Per-edge (lam[src] - lam[dst]) with the virtual sink pinned at 0."""
        lam_pad = np.empty(self.node_count + 1)
        lam_pad[: self.node_count] = lam
        lam_pad[self.node_count] = 0.0
        return lam_pad[self.src_index] - lam_pad[self.dst_index]

    def divergence(self, x: np.ndarray, arrivals: np.ndarray | None = None) -> np.ndarray:
        """Net inflow per node: (arrivals + A_in x) - A_out x, canonical order."""
        inflow = np.bincount(self.dst_index, weights=x, minlength=self.node_count + 1)[: self.node_count]
        outflow = np.bincount(self.src_index, weights=x, minlength=self.node_count)
        if arrivals is None:
            return inflow - outflow
        return (arrivals + inflow) - outflow

    def divergence_batch(self, x: np.ndarray, arrivals: np.ndarray | None = None) -> np.ndarray:
        """A @ x over a batch of flows, shape (..., E) -> (..., I).

        Analysis-grade: uses the dense incidence product, which matches
        ``divergence`` mathematically but not bit for bit.
        """
        g = x @ self.incidence.T
        if arrivals is not None:
            g = g + arrivals
        return g


def queue_update(q: np.ndarray, x: np.ndarray, arrivals: np.ndarray, graph: NetworkGraph) -> np.ndarray:
    """One slot of the queue recursion: [q + A x + arrivals]_+ ."""
    return np.maximum(0.0, q + graph.divergence(x, arrivals))


def spectral_radius_ata(graph: NetworkGraph, tol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest eigenvalue of A^T A by power iteration.

    Starts from the all-ones direction (deterministic) and stops when the
    Rayleigh quotient is stable to relative tolerance ``tol``.

    Raises
    ------
    ConvergenceError
        If the start vector is annihilated by A^T A or the Rayleigh quotient
        has not settled within ``max_iter`` iterations.  Failure is reported,
        never silently truncated.
    """
    a = graph.incidence
    v = np.ones(graph.edge_count) / np.sqrt(graph.edge_count)
    rho_prev = None
    for _ in range(max_iter):
        w = a.T @ (a @ v)
        rho = float(v @ w)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            raise ConvergenceError("power iteration start vector lies in the null space of A^T A")
        v = w / nw
        if rho_prev is not None and abs(rho - rho_prev) <= tol * max(abs(rho), 1e-300):
            return rho
        rho_prev = rho
    raise ConvergenceError(f"power iteration did not converge within {max_iter} iterations "
                           f"(last Rayleigh quotient {rho_prev!r})")


# ---------------------------------------------------------------------------
# Text serialization: "nodes <I>" header, then one edge per line
# "src dst capacity" with the literal token "virtual" for the sink.
# ---------------------------------------------------------------------------

def save_network(graph: NetworkGraph, box: BoxSet, path) -> None:
    if len(box.upper) != graph.edge_count:
        raise ValueError("box has wrong edge count for this graph")
    lines = [f"nodes {graph.node_count}"]
    for (src, dst), ub in zip(graph.edges, box.upper):
        dst_tok = "virtual" if dst is None else str(dst)
        lines.append(f"{src} {dst_tok} {float(ub)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path) -> tuple[NetworkGraph, BoxSet]:
    """Parse the text format written by save_network; round-trips bit-exactly."""
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw) if ln.strip()]
    if not lines or not lines[0][1].startswith("nodes "):
        raise ValueError(f"{path}: expected 'nodes <I>' header on the first line")
    try:
        node_count = int(lines[0][1].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}:1: malformed node count in {lines[0][1]!r}") from exc
    edges, uppers = [], []
    for lineno, ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 'src dst capacity', got {ln!r}")
        try:
            src = int(parts[0])
            dst = None if parts[1] == "virtual" else int(parts[1])
            ub = float(parts[2])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: malformed edge line {ln!r}") from exc
        edges.append((src, dst))
        uppers.append(ub)
    graph = NetworkGraph.from_edges(edges, node_count)
    return graph, BoxSet(np.array(uppers))
