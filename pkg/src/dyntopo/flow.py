"""Minimum-cost routing of one step's client demand over a topology.

The operation cost of satisfying a demand vector on a topology is the
minimum of sum(|f_e| * cost_e) over flows f that

  * are antisymmetric and respect per-edge capacities,
  * never enter a replica (replicas only send),
  * deliver each client exactly its demand,
  * conserve flow at every relay node.

Undirected edges are modeled as two opposed directed arcs; a virtual super
source feeds every replica through zero-cost arcs and a super sink drains
every client. The minimum-cost flow of total demand value is computed by
successive shortest augmenting paths with node potentials, which is exact on
rational inputs. An optional per-node throughput cap is supported by node
splitting.

All functions here are pure and safe to call concurrently.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .topology import Topology

_EPS = 1e-12


class InfeasibleFlowError(RuntimeError):
    """Demand cannot be routed; carries the client ids left short."""

    def __init__(self, message: str, clients: tuple[int, ...] = ()):
        super().__init__(message)
        self.clients = clients


@dataclass(frozen=True)
class DemandVector:
    """Per-client byte demand for one time step.

    ``demands`` maps client node id to requested bytes (>= 0); the key set
    must equal the topology's client set.
    """

    demands: Mapping[int, float]
    t: int = 0

    def validate(self, topology: Topology) -> None:
        if set(self.demands) != set(topology.clients):
            raise ValueError("demand keys must match the topology's client set")
        if any(v < 0 for v in self.demands.values()):
            raise ValueError("demands must be >= 0")

    def total(self) -> float:
        return float(sum(self.demands.values()))


@dataclass(frozen=True)
class FlowAssignment:
    """Antisymmetric edge flow: ``edge_flow[(u, v)]`` (u < v) is the signed
    number of bytes moving from u to v; the reverse direction is implied.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    edge_flow: tuple[float, ...]

    def flow(self, u: int, v: int) -> float:
        key = (min(u, v), max(u, v))
        try:
            i = self.edges.index(key)
        except ValueError:
            return 0.0
        f = self.edge_flow[i]
        return f if u < v else -f

    def node_throughput(self) -> np.ndarray:
        """Per-node bytes handled: half the absolute flow on incident edges."""
        b = np.zeros(self.n)
        for (u, v), f in zip(self.edges, self.edge_flow):
            b[u] += abs(f) / 2.0
            b[v] += abs(f) / 2.0
        return b

    def to_dict(self) -> dict:
        return {"edges": [[u, v, f] for (u, v), f in zip(self.edges, self.edge_flow)]}


@dataclass(frozen=True)
class OperationCost:
    """Total routing cost for one demand vector; infeasible runs carry
    ``total = inf`` and ``feasible = False``."""

    total: float
    feasible: bool


class _ArcNetwork:
    """Directed network for successive-shortest-path min-cost flow."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[float] = []
        self.cost: list[float] = []

    def add_arc(self, u: int, v: int, cap: float, cost: float) -> int:
        idx = len(self.to)
        self.head[u].append(idx)
        self.to.append(v)
        self.cap.append(cap)
        self.cost.append(cost)
        self.head[v].append(idx + 1)
        self.to.append(u)
        self.cap.append(0.0)
        self.cost.append(-cost)
        return idx

    def flow_on(self, arc: int) -> float:
        return self.cap[arc + 1] if arc % 2 == 0 else -self.cap[arc]

    def push(self, source: int, sink: int, target: float) -> float:
        """Push up to ``target`` units at minimum cost; returns amount pushed.

        Dijkstra with potentials; all initial costs are nonnegative so the
        zero potential is valid.
        """
        n = self.n
        pot = [0.0] * n
        pushed = 0.0
        inf = math.inf
        while pushed < target - _EPS:
            dist = [inf] * n
            prev_arc = [-1] * n
            dist[source] = 0.0
            heap = [(0.0, source)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u] + _EPS:
                    continue
                for a in self.head[u]:
                    if self.cap[a] <= _EPS:
                        continue
                    v = self.to[a]
                    nd = d + max(0.0, self.cost[a] + pot[u] - pot[v])
                    if nd < dist[v] - _EPS:
                        dist[v] = nd
                        prev_arc[v] = a
                        heapq.heappush(heap, (nd, v))
            if dist[sink] == inf:
                break
            for v in range(n):
                if dist[v] < inf:
                    pot[v] += dist[v]
            bottleneck = target - pushed
            v = sink
            while v != source:
                a = prev_arc[v]
                bottleneck = min(bottleneck, self.cap[a])
                v = self.to[a ^ 1]
            v = sink
            while v != source:
                a = prev_arc[v]
                self.cap[a] -= bottleneck
                self.cap[a ^ 1] += bottleneck
                v = self.to[a ^ 1]
            pushed += bottleneck
        return pushed


def _build_network(
    t: Topology,
    d: DemandVector,
    node_cap: Mapping[int, float] | None,
) -> tuple[_ArcNetwork, int, int, dict[tuple[int, int], tuple[int, int]], dict[int, int]]:
    """Assemble the arc network.

    Returns (network, source, sink, edge arc ids, client sink arc ids).
    ``edge_arcs[(u, v)]`` holds the arc indices for the u->v and v->u
    directions (-1 when a direction is forbidden because it enters a replica).
    """
    split = node_cap is not None
    n_ids = 2 * t.n if split else t.n
    source, sink = n_ids, n_ids + 1
    net = _ArcNetwork(n_ids + 2)

    def node_in(u: int) -> int:
        return u

    def node_out(u: int) -> int:
        return t.n + u if split else u

    if split:
        total = d.total()
        for u in range(t.n):
            cap_u = node_cap.get(u, math.inf) if node_cap else math.inf
            if u in t.replicas:
                limit = 2.0 * cap_u
            elif u in t.clients:
                limit = cap_u + d.demands[u] / 2.0
            else:
                limit = cap_u
            net.add_arc(node_in(u), node_out(u), min(limit, 2.0 * total), 0.0)

    edge_arcs: dict[tuple[int, int], tuple[int, int]] = {}
    for (u, v), c, b in zip(t.edges, t.edge_cost, t.edge_capacity):
        fwd = bwd = -1
        if u in t.replicas and v in t.replicas:
            pass  # replicas never receive: flow between two replicas is zero
        elif v in t.replicas:
            bwd = net.add_arc(node_out(v), node_in(u), b, c)
        elif u in t.replicas:
            fwd = net.add_arc(node_out(u), node_in(v), b, c)
        else:
            fwd = net.add_arc(node_out(u), node_in(v), b, c)
            bwd = net.add_arc(node_out(v), node_in(u), b, c)
        edge_arcs[(u, v)] = (fwd, bwd)

    total = d.total()
    for p in sorted(t.replicas):
        net.add_arc(source, node_in(p), total, 0.0)
    client_arcs: dict[int, int] = {}
    for c_id in sorted(t.clients):
        demand = d.demands[c_id]
        if demand > 0:
            client_arcs[c_id] = net.add_arc(node_out(c_id), sink, demand, 0.0)
    return net, source, sink, edge_arcs, client_arcs


def min_cost_flow(
    t: Topology,
    d: DemandVector,
    node_cap: Mapping[int, float] | None = None,
) -> FlowAssignment:
    """Cheapest feasible routing of ``d`` over ``t``.

    Args:
        t: Topology to route on.
        d: Per-client demand for this step.
        node_cap: Optional per-node throughput cap (bytes handled per node,
            counting half of each incident edge's absolute flow). Missing
            nodes are uncapped.

    Returns:
        FlowAssignment of net per-edge flows; optimal cost is exact for
        integral inputs and within 1e-6 relative for fractional ones.

    Raises:
        InfeasibleFlowError: some client's demand cannot be met; the error
            names the clients left short.
    """
    d.validate(t)
    total = d.total()
    if total == 0:
        return FlowAssignment(
            n=t.n, edges=t.edges, edge_flow=tuple(0.0 for _ in t.edges)
        )
    net, source, sink, edge_arcs, client_arcs = _build_network(t, d, node_cap)
    pushed = net.push(source, sink, total)
    if pushed < total - max(_EPS, 1e-9 * total):
        short = tuple(
            c for c, arc in sorted(client_arcs.items()) if net.cap[arc] > _EPS
        )
        raise InfeasibleFlowError(
            f"cannot satisfy demand at client(s) {list(short)}: "
            f"routed {pushed:g} of {total:g} bytes",
            clients=short,
        )
    flows = []
    for e in t.edges:
        fwd, bwd = edge_arcs[e]
        f = 0.0
        if fwd >= 0:
            f += net.flow_on(fwd)
        if bwd >= 0:
            f -= net.flow_on(bwd)
        flows.append(f)
    return FlowAssignment(n=t.n, edges=t.edges, edge_flow=tuple(flows))


def operation_cost(
    t: Topology,
    d: DemandVector,
    node_cap: Mapping[int, float] | None = None,
) -> OperationCost:
    """Wrapper over min_cost_flow; infeasibility becomes an inf-cost result."""
    try:
        fa = min_cost_flow(t, d, node_cap)
    except InfeasibleFlowError:
        return OperationCost(total=math.inf, feasible=False)
    total = sum(abs(f) * c for f, c in zip(fa.edge_flow, t.edge_cost))
    return OperationCost(total=float(total), feasible=True)


def flow_skew(fa: FlowAssignment, n: int) -> float:
    """Spread of per-node throughput: max(b_u) minus the mean over all nodes.

    Diagnostic counterpart of the topology skew; 0 when load is perfectly
    balanced.
    """
    b = fa.node_throughput()
    if n == 0:
        return 0.0
    return float(b.max() - b.sum() / n) if len(b) else 0.0
