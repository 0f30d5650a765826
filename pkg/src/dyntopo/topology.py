"""Replica-network topologies: representation, degree-skew scoring,
feasible-set generation, and spanning-tree height.

A topology is an undirected, connected simple graph whose nodes are either
replicas (data sources), clients (data sinks), or plain relays. Every present
edge carries a positive per-byte cost and a positive byte capacity.

The degree-skew score of a graph with ``n`` nodes, maximum degree ``max_deg``
and average degree ``avg_deg`` is::

    skew = 1 - n * (max_deg - avg_deg) / ((n - 1) * (n - 2))

which is 0 for a star (maximally hub-centric) and 1 for any regular graph
such as a cycle. Feasible sets are families of distinct connected graphs
whose skew lies inside a tolerance band around a target value.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class DegenerateGraphError(ValueError):
    """Graph too small for the requested statistic."""


class DisconnectedGraphError(ValueError):
    """Operation requires a connected graph."""


class GenerationError(RuntimeError):
    """Feasible-set generation exhausted its attempt budget."""


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph with per-edge cost/capacity and node roles.

    Attributes:
        n: Number of nodes, identified as 0..n-1.
        edges: Present edges as (u, v) pairs with u < v, sorted
            lexicographically.
        edge_cost: Cost per byte for each edge, aligned with ``edges``.
        edge_capacity: Max bytes per period for each edge, aligned with
            ``edges``.
        replicas: Node ids that serve data (never request it).
        clients: Node ids that request data. Disjoint from ``replicas``;
            remaining nodes are relays.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    edge_cost: tuple[float, ...]
    edge_capacity: tuple[float, ...]
    replicas: frozenset[int]
    clients: frozenset[int]

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        """Adjacency lists, sorted per node."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        """Maps (u, v) with u < v to its position in ``edges``."""
        return {e: i for i, e in enumerate(self.edges)}

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=int)

    def adjacency_matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=int)
        for u, v in self.edges:
            m[u, v] = m[v, u] = 1
        return m

    def cost_of(self, u: int, v: int) -> float:
        return self.edge_cost[self.edge_index[(min(u, v), max(u, v))]]

    def capacity_of(self, u: int, v: int) -> float:
        return self.edge_capacity[self.edge_index[(min(u, v), max(u, v))]]

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    def validate(self) -> None:
        """Check all structural invariants, raising ValueError on violation."""
        if self.n < 2:
            raise ValueError("topology needs at least 2 nodes")
        if not (len(self.edges) == len(self.edge_cost) == len(self.edge_capacity)):
            raise ValueError("edge attribute lengths disagree")
        seen = set()
        for u, v in self.edges:
            if not (0 <= u < v < self.n):
                raise ValueError(f"bad edge ({u}, {v}): need 0 <= u < v < n")
            if (u, v) in seen:
                raise ValueError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        if any(c <= 0 for c in self.edge_cost):
            raise ValueError("edge costs must be positive")
        if any(b <= 0 for b in self.edge_capacity):
            raise ValueError("edge capacities must be positive")
        if self.replicas & self.clients:
            raise ValueError("replica and client sets overlap")
        for s in (self.replicas, self.clients):
            if any(not 0 <= v < self.n for v in s):
                raise ValueError("role node id out of range")
        if not self.is_connected():
            raise DisconnectedGraphError("topology is not connected")

    def to_dict(self) -> dict:
        return {
            "edges": [
                [u, v, c, b]
                for (u, v), c, b in zip(self.edges, self.edge_cost, self.edge_capacity)
            ]
        }


@dataclass(frozen=True)
class SkewFactor:
    """Degree-distribution skew of a graph: 0 is star-like, 1 is regular."""

    rho: float
    max_degree: int
    avg_degree: float


@dataclass(frozen=True)
class FeasibleSetParams:
    """Parameters for random feasible-set generation.

    ``max_degree_bound`` is the largest degree any node may take (one node is
    always raised to it so the bound is attained); ``avg_degree_bound`` is the
    target mean degree. Together with ``n`` these determine the achievable
    skew, which must land within ``rho_tolerance`` of ``target_rho``.

    Node roles are fixed across the whole set: ids ``0..replica_count-1`` are
    replicas, the next ``client_count`` ids are clients, any remainder are
    relays.
    """

    n: int
    max_degree_bound: int
    avg_degree_bound: float
    set_size: int
    cost_range: tuple[float, float]
    capacity_range: tuple[float, float]
    target_rho: float
    rho_tolerance: float = 0.05
    seed: int = 0
    replica_count: int = 1
    client_count: int | None = None
    attempt_budget: int = 100_000

    def validate(self) -> None:
        if self.n < 3:
            raise ValueError("need n >= 3")
        if self.set_size < 2:
            raise ValueError("need set_size >= 2")
        for name, (lo, hi) in (
            ("cost_range", self.cost_range),
            ("capacity_range", self.capacity_range),
        ):
            if not (0 < lo <= hi):
                raise ValueError(f"{name} must satisfy 0 < lo <= hi")
        if not 1 <= math.floor(self.avg_degree_bound):
            raise ValueError("avg_degree_bound must be >= 1")
        if not self.avg_degree_bound <= self.max_degree_bound <= self.n - 1:
            raise ValueError("need avg_degree_bound <= max_degree_bound <= n-1")
        if not 0 <= self.target_rho <= 1:
            raise ValueError("target_rho must be in [0, 1]")
        if self.rho_tolerance < 0:
            raise ValueError("rho_tolerance must be >= 0")
        clients = self.resolved_client_count()
        if self.replica_count < 1 or clients < 1:
            raise ValueError("need at least one replica and one client")
        if self.replica_count + clients > self.n:
            raise ValueError("replica_count + client_count exceeds n")
        if self.attempt_budget < 1:
            raise ValueError("attempt_budget must be >= 1")

    def resolved_client_count(self) -> int:
        if self.client_count is not None:
            return self.client_count
        return self.n - self.replica_count


def compute_skew(t: Topology) -> SkewFactor:
    """Degree-skew score of a topology.

    Raises:
        DegenerateGraphError: fewer than 3 nodes (denominator vanishes).
    """
    if t.n < 3:
        raise DegenerateGraphError("skew undefined for graphs with n < 3")
    deg = t.degrees()
    max_deg = int(deg.max())
    avg_deg = float(deg.mean())
    rho = 1.0 - t.n * (max_deg - avg_deg) / ((t.n - 1) * (t.n - 2))
    return SkewFactor(rho=rho, max_degree=max_deg, avg_degree=avg_deg)


def skew_value(n: int, max_degree: float, avg_degree: float) -> float:
    """Skew score for given degree statistics without building a graph."""
    if n < 3:
        raise DegenerateGraphError("skew undefined for n < 3")
    return 1.0 - n * (max_degree - avg_degree) / ((n - 1) * (n - 2))


def _eccentricities(t: Topology) -> np.ndarray:
    """Per-node eccentricity via BFS; -1 marks unreachable pairs."""
    ecc = np.zeros(t.n, dtype=int)
    for src in range(t.n):
        dist = [-1] * t.n
        dist[src] = 0
        queue = deque([src])
        far = 0
        reached = 1
        while queue:
            u = queue.popleft()
            for v in t.neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    far = max(far, dist[v])
                    reached += 1
                    queue.append(v)
        if reached < t.n:
            raise DisconnectedGraphError("spanning tree height needs a connected graph")
        ecc[src] = far
    return ecc


def spanning_tree_height(t: Topology) -> int:
    """Height of the BFS spanning tree rooted at a graph-center node.

    The root is a node of minimum eccentricity (lowest id on ties), so the
    returned height equals the graph radius.

    Raises:
        DisconnectedGraphError: the graph is not connected.
    """
    ecc = _eccentricities(t)
    return int(ecc.min())


def graph_diameter(t: Topology) -> int:
    return int(_eccentricities(t).max())


# ---------------------------------------------------------------------------
# Feasible-set generation
# ---------------------------------------------------------------------------

def _degree_sequence(
    rng: np.random.Generator, n: int, max_deg: int, avg_deg: float
) -> list[int] | None:
    """Random degree sequence: min degree floor(avg_deg), one node at max_deg.

    Extra degree increments are spread over random nodes until the sum reaches
    round(n * avg_deg) (or the forced minimum, whichever is larger), keeping
    the sum even. Returns None when no valid sequence exists.
    """
    base = math.floor(avg_deg)
    if base < 1 or base > max_deg or max_deg > n - 1:
        return None
    deg = [base] * n
    hub = int(rng.integers(n))
    deg[hub] = max_deg
    total = sum(deg)
    target = int(round(n * avg_deg))
    while total < target or total % 2 == 1:
        open_nodes = [i for i in range(n) if deg[i] < max_deg]
        if not open_nodes:
            return None
        i = open_nodes[int(rng.integers(len(open_nodes)))]
        deg[i] += 1
        total += 1
    return deg


def _havel_hakimi(deg: list[int]) -> set[tuple[int, int]] | None:
    """Deterministic simple-graph realization of a degree sequence."""
    residual = list(deg)
    edges: set[tuple[int, int]] = set()
    nodes = list(range(len(deg)))
    while True:
        nodes.sort(key=lambda i: (-residual[i], i))
        u = nodes[0]
        d = residual[u]
        if d == 0:
            break
        picked = [v for v in nodes[1:] if residual[v] > 0][:d]
        if len(picked) < d:
            return None
        for v in picked:
            edges.add((min(u, v), max(u, v)))
            residual[v] -= 1
        residual[u] = 0
    return edges


def _shuffle_edges(
    rng: np.random.Generator, edges: set[tuple[int, int]], rounds: int
) -> None:
    """Randomize a graph by degree-preserving double-edge swaps in place."""
    edge_list = list(edges)
    m = len(edge_list)
    if m < 2:
        return
    for _ in range(rounds):
        i, j = rng.integers(m), rng.integers(m)
        if i == j:
            continue
        a, b = edge_list[i]
        c, d = edge_list[j]
        if len({a, b, c, d}) < 4:
            continue
        if rng.integers(2):
            p, q = (min(a, c), max(a, c)), (min(b, d), max(b, d))
        else:
            p, q = (min(a, d), max(a, d)), (min(b, c), max(b, c))
        if p in edges or q in edges:
            continue
        edges.discard(edge_list[i])
        edges.discard(edge_list[j])
        edges.add(p)
        edges.add(q)
        edge_list[i], edge_list[j] = p, q


def _components(n: int, edges: set[tuple[int, int]]) -> list[set[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp = {s}
        seen[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.add(v)
                    queue.append(v)
        comps.append(comp)
    return comps


def _connect_components(n: int, edges: set[tuple[int, int]]) -> bool:
    """Merge components with degree-preserving swaps; False if impossible.

    A swap takes a cycle edge (a, b) from one component and any edge (c, d)
    from another and rewires to (a, c), (b, d), which keeps the first
    component connected and attaches both halves of the second.
    """
    while True:
        comps = _components(n, edges)
        if len(comps) <= 1:
            return True
        comp_of = {}
        for k, comp in enumerate(comps):
            for v in comp:
                comp_of[v] = k
        swap = None
        for a, b in sorted(edges):
            # (a, b) must lie on a cycle: a still reaches b when it is removed
            edges.discard((a, b))
            on_cycle = _reachable(edges, a, b)
            edges.add((a, b))
            if not on_cycle:
                continue
            for c, d in sorted(edges):
                if comp_of[c] != comp_of[a]:
                    swap = (a, b, c, d)
                    break
            if swap:
                break
        if swap is None:
            return False
        a, b, c, d = swap
        edges.discard((a, b))
        edges.discard((c, d))
        edges.add((min(a, c), max(a, c)))
        edges.add((min(b, d), max(b, d)))


def _reachable(edges: set[tuple[int, int]], s: int, t: int) -> bool:
    adj: dict[int, list[int]] = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    seen = {s}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        if u == t:
            return True
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return False


def generate_feasible_set(params: FeasibleSetParams) -> list[Topology]:
    """Generate ``set_size`` distinct topologies matching the skew target.

    Rejection sampling: each attempt draws a degree sequence (min degree
    floor(avg bound), maximum exactly the max bound), checks the implied skew
    against the target band, realizes it as a random connected simple graph,
    and rejects duplicates. Edge costs and capacities are drawn uniformly
    from the configured ranges. Fully deterministic for a given seed.

    Raises:
        GenerationError: the per-graph attempt budget ran out; the message
            names the constraint that caused the most rejections.
    """
    params.validate()
    rng = np.random.default_rng(params.seed)
    replicas = frozenset(range(params.replica_count))
    clients = frozenset(
        range(params.replica_count, params.replica_count + params.resolved_client_count())
    )
    accepted: list[Topology] = []
    seen_graphs: set[tuple[tuple[int, int], ...]] = set()
    rejections = {"degree-sequence": 0, "skew-band": 0, "realization": 0,
                  "connectivity": 0, "duplicate": 0}

    while len(accepted) < params.set_size:
        for _ in range(params.attempt_budget):
            deg = _degree_sequence(
                rng, params.n, params.max_degree_bound, params.avg_degree_bound
            )
            if deg is None:
                rejections["degree-sequence"] += 1
                continue
            rho = skew_value(params.n, max(deg), sum(deg) / params.n)
            if abs(rho - params.target_rho) > params.rho_tolerance:
                rejections["skew-band"] += 1
                continue
            edges = _havel_hakimi(deg)
            if edges is None:
                rejections["realization"] += 1
                continue
            _shuffle_edges(rng, edges, rounds=10 * len(edges))
            if not _connect_components(params.n, edges):
                rejections["connectivity"] += 1
                continue
            key = tuple(sorted(edges))
            if key in seen_graphs:
                rejections["duplicate"] += 1
                continue
            seen_graphs.add(key)
            m = len(key)
            costs = rng.uniform(*params.cost_range, size=m)
            caps = rng.uniform(*params.capacity_range, size=m)
            topo = Topology(
                n=params.n,
                edges=key,
                edge_cost=tuple(float(c) for c in costs),
                edge_capacity=tuple(float(b) for b in caps),
                replicas=replicas,
                clients=clients,
            )
            accepted.append(topo)
            break
        else:
            worst = max(rejections, key=rejections.get)
            raise GenerationError(
                f"exhausted {params.attempt_budget} attempts for topology "
                f"{len(accepted) + 1}/{params.set_size}; dominant unsatisfied "
                f"constraint: {worst} ({rejections[worst]} rejections)"
            )
    return accepted


# ---------------------------------------------------------------------------
# Topology-set serialization (one JSON document per set)
# ---------------------------------------------------------------------------
#
# Schema:
#   {
#     "n": <int>,
#     "replicas": [<int>, ...],
#     "clients": [<int>, ...],
#     "topologies": [{"edges": [[u, v, cost, capacity], ...]}, ...]
#   }

def topology_set_to_dict(topologies: list[Topology]) -> dict:
    first = topologies[0]
    for t in topologies:
        if t.n != first.n or t.replicas != first.replicas or t.clients != first.clients:
            raise ValueError("all topologies in a set must share nodes and roles")
    return {
        "n": first.n,
        "replicas": sorted(first.replicas),
        "clients": sorted(first.clients),
        "topologies": [t.to_dict() for t in topologies],
    }


def topology_set_from_dict(doc: dict) -> list[Topology]:
    replicas = frozenset(doc["replicas"])
    clients = frozenset(doc["clients"])
    out = []
    for entry in doc["topologies"]:
        edges = tuple(sorted((int(u), int(v)) for u, v, _, _ in entry["edges"]))
        by_pair = {(min(int(u), int(v)), max(int(u), int(v))): (c, b)
                   for u, v, c, b in entry["edges"]}
        out.append(Topology(
            n=int(doc["n"]),
            edges=edges,
            edge_cost=tuple(by_pair[e][0] for e in edges),
            edge_capacity=tuple(by_pair[e][1] for e in edges),
            replicas=replicas,
            clients=clients,
        ))
    return out


def save_topology_set(path, topologies: list[Topology]) -> None:
    with open(path, "w") as fh:
        json.dump(topology_set_to_dict(topologies), fh, indent=1, sort_keys=True)


def load_topology_set(path) -> list[Topology]:
    with open(path) as fh:
        return topology_set_from_dict(json.load(fh))
