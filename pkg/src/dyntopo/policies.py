"""Online reconfiguration policies and offline baselines.

Six schedulers choose which topology serves each step's demand vector:

  * ``reactive``    - moves whenever another topology beats the current one
    for this step's demand even after paying the transition.
  * ``lazy``        - re-evaluates only every ``delta`` steps, comparing
    window-total costs against transition cost; memoryless beyond the window.
  * ``averaging``   - like lazy but decides on an exponentially weighted
    average of past window means instead of the raw window.
  * ``mts``         - metrical-task-system walker: rounds transition costs up
    to powers of two, fixes a minimum spanning tree over the topology set,
    and advances along a recursive tour of that tree whenever the current
    step's cost covers the rounded distance to the next stop.
  * ``static_best`` - clairvoyant-static: sits in the single topology with
    the lowest total operation cost over the whole sequence.
  * ``offline_opt`` - clairvoyant-dynamic: dynamic program over (step,
    topology), the cost lower bound for every schedule starting at index 0.

Schedules account operation and transition costs separately; their sum is
the quantity every policy tries to keep small. All policies start at
topology index 0 and are deterministic functions of their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .flow import DemandVector, operation_cost
from .reconfig import MetricGraph
from .topology import Topology

POLICY_KINDS = ("reactive", "lazy", "averaging", "mts", "static_best", "offline_opt")


# ---------------------------------------------------------------------------
# Cost bookkeeping
# ---------------------------------------------------------------------------

class CostTable:
    """Memoized per-(topology, demand vector) operation costs.

    Keyed by the demand bytes, so repeated vectors (and window aggregates
    that repeat) are solved once. Evaluation is pure; a precomputed matrix
    can be built column-parallel with identical results.
    """

    def __init__(self, topologies: list[Topology], node_cap=None):
        self.topologies = topologies
        self.client_ids = sorted(topologies[0].clients)
        self.node_cap = node_cap
        self._memo: dict[tuple[int, bytes], float] = {}

    def cost(self, j: int, demand_row: np.ndarray) -> float:
        row = np.ascontiguousarray(demand_row, dtype=float)
        key = (j, row.tobytes())
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        d = DemandVector(demands=dict(zip(self.client_ids, row.tolist())))
        val = operation_cost(self.topologies[j], d, self.node_cap).total
        self._memo[key] = val
        return val

    def costs_row(self, demand_row: np.ndarray) -> np.ndarray:
        return np.array([self.cost(j, demand_row) for j in range(len(self.topologies))])

    def matrix(self, demands: np.ndarray) -> np.ndarray:
        """Full (steps x topologies) cost matrix."""
        return np.vstack([self.costs_row(demands[t]) for t in range(len(demands))])

    def prime_column(self, j: int, demands: np.ndarray, costs: np.ndarray) -> None:
        """Install externally computed costs for topology ``j``."""
        for t in range(len(demands)):
            row = np.ascontiguousarray(demands[t], dtype=float)
            self._memo[(j, row.tobytes())] = float(costs[t])


@dataclass(frozen=True)
class StepRecord:
    """One schedule row: where the step ran and what it cost."""

    t: int
    topology: int
    op_cost: float
    transition_cost: float
    feasible: bool = True
    hops: int = 0


@dataclass
class Schedule:
    """Time-indexed topology choices with cost accounting."""

    policy: str
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def total_operation(self) -> float:
        return sum(s.op_cost for s in self.steps if s.feasible)

    @property
    def total_transition(self) -> float:
        return sum(s.transition_cost for s in self.steps)

    @property
    def total(self) -> float:
        return self.total_operation + self.total_transition

    @property
    def transition_count(self) -> int:
        return sum(1 for s in self.steps if s.hops > 0)

    @property
    def infeasible_steps(self) -> int:
        return sum(1 for s in self.steps if not s.feasible)

    def topology_trace(self) -> list[int]:
        return [s.topology for s in self.steps]


@dataclass(frozen=True)
class PolicyState:
    """Online-policy state between steps."""

    kind: str
    current: int
    averaged_demand: np.ndarray | None = None
    position: int = 0  # index into the traversal walk (mts only)


# ---------------------------------------------------------------------------
# Greedy decision rule (shared by reactive / lazy / averaging)
# ---------------------------------------------------------------------------

def _greedy_choice(current: int, costs: np.ndarray, metric: MetricGraph) -> int:
    """Move to argmin_j(costs[j] + d(current, j)) only if it strictly beats
    costs[current]; ties stay, then lowest index wins."""
    scores = costs + metric.weights[current]
    if not np.isfinite(scores).any():
        return current
    best = float(np.min(scores))
    if scores[current] <= best:
        return current
    return int(np.argmin(scores))


def step_reactive(state: PolicyState, costs: np.ndarray, metric: MetricGraph) -> PolicyState:
    """Per-step greedy move on this step's per-topology costs."""
    return replace(state, current=_greedy_choice(state.current, costs, metric))


def step_lazy(
    state: PolicyState, window_costs: np.ndarray, metric: MetricGraph
) -> PolicyState:
    """Greedy move on window-total costs; called only at period boundaries."""
    return replace(state, current=_greedy_choice(state.current, window_costs, metric))


def step_averaging(
    state: PolicyState,
    window_mean: np.ndarray,
    alpha: float,
    table: CostTable,
    metric: MetricGraph,
) -> PolicyState:
    """Fold the window mean into the running average, then move greedily on
    the averaged demand's costs."""
    prev = state.averaged_demand
    if prev is None:
        prev = np.zeros_like(window_mean)
    averaged = alpha * window_mean + (1.0 - alpha) * prev
    costs = table.costs_row(averaged)
    return replace(
        state,
        current=_greedy_choice(state.current, costs, metric),
        averaged_demand=averaged,
    )


def ema_blend(mu: float, x: float, alpha: float) -> float:
    """Exponential moving average step: alpha * x + (1 - alpha) * mu."""
    return alpha * x + (1.0 - alpha) * mu


# ---------------------------------------------------------------------------
# Task-system machinery: rounding, MST, recursive traversal
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Traversal:
    """Cyclic closed walk over topology indices with per-hop rounded weights.

    ``nodes[i] -> nodes[(i+1) % len]`` is one hop of weight ``weights[i]``,
    always an exact power of two.
    """

    nodes: tuple[int, ...]
    weights: tuple[float, ...]

    @property
    def cycle_weight(self) -> float:
        return float(sum(self.weights))

    def rotated_to(self, start: int) -> "Traversal":
        if not self.nodes or self.nodes[0] == start:
            return self
        i = self.nodes.index(start)
        return Traversal(
            nodes=self.nodes[i:] + self.nodes[:i],
            weights=self.weights[i:] + self.weights[:i],
        )


@dataclass(frozen=True)
class MtsPlan:
    """Everything the task-system walker needs: rounded weights, the spanning
    tree they induce, the tour of that tree, and the walker's start slot."""

    rounded: np.ndarray
    mst_edges: tuple[tuple[int, int, float], ...]
    traversal: Traversal
    start_position: int = 0


def next_power_of_two(w: float) -> float:
    """Smallest power of two >= w (w itself when already a power)."""
    if w <= 0:
        raise ValueError("weight must be positive")
    k = math.ceil(math.log2(w))
    # guard against log2 rounding on exact powers and near-powers
    while 2.0 ** (k - 1) >= w:
        k -= 1
    while 2.0 ** k < w:
        k += 1
    return 2.0 ** k


def _prim_mst(weights: np.ndarray) -> list[tuple[int, int, float]]:
    """Prim's algorithm from node 0; ties broken by lexicographic edge order."""
    n = weights.shape[0]
    in_tree = [False] * n
    in_tree[0] = True
    best_w = weights[0].copy()
    best_from = [0] * n
    edges: list[tuple[int, int, float]] = []
    for _ in range(n - 1):
        pick, pick_key = -1, None
        for v in range(n):
            if in_tree[v]:
                continue
            key = (best_w[v], min(best_from[v], v), max(best_from[v], v))
            if pick_key is None or key < pick_key:
                pick, pick_key = v, key
        u = best_from[pick]
        edges.append((min(u, pick), max(u, pick), float(weights[u, pick])))
        in_tree[pick] = True
        for v in range(n):
            if not in_tree[v] and weights[pick, v] < best_w[v]:
                best_w[v] = weights[pick, v]
                best_from[v] = pick
    return sorted(edges)


def traversal(tree_edges) -> Traversal:
    """Recursive tour of a power-of-two-weighted tree.

    The heaviest edge (u, v) with weight 2^M splits the tree into the side
    holding u (internal maximum 2^M1) and the side holding v (2^M2). The tour
    starts at u, repeats the u-side tour 2^(M-M1) times, crosses to v,
    repeats the v-side tour 2^(M-M2) times, and crosses back. Single edges
    tour as u -> v -> u; an empty tree gives an empty tour. Consequently an
    edge of weight 2^m is crossed exactly 2^(M-m) times in each direction per
    full cycle.
    """
    edges = [(min(u, v), max(u, v), float(w)) for u, v, w in tree_edges]
    for _, _, w in edges:
        if next_power_of_two(w) != w:
            raise ValueError("traversal needs power-of-two edge weights")
    walk = _traverse(edges)
    if not walk:
        return Traversal(nodes=(), weights=())
    lookup = {(u, v): w for u, v, w in edges}
    hop_w = []
    for i, a in enumerate(walk):
        b = walk[(i + 1) % len(walk)]
        hop_w.append(lookup[(min(a, b), max(a, b))])
    return Traversal(nodes=tuple(walk), weights=tuple(hop_w))


def _traverse(edges: list[tuple[int, int, float]]) -> list[int]:
    if not edges:
        return []
    if len(edges) == 1:
        u, v, _ = edges[0]
        return [u, v]
    top = max(edges, key=lambda e: (e[2], -e[0], -e[1]))
    u, v, w = top
    rest = [e for e in edges if e != top]
    side_u = _component_edges(rest, u)
    side_v = [e for e in rest if e not in side_u]
    exp = round(math.log2(w))
    seq = [u]
    if side_u:
        sub_walk = _rotate(_traverse(side_u), u)
        reps = 2 ** (exp - round(math.log2(max(e[2] for e in side_u))))
        for _ in range(reps):
            seq.extend(sub_walk[1:] + [u])
    seq.append(v)
    if side_v:
        sub_walk = _rotate(_traverse(side_v), v)
        reps = 2 ** (exp - round(math.log2(max(e[2] for e in side_v))))
        for _ in range(reps):
            seq.extend(sub_walk[1:] + [v])
    return seq


def _component_edges(edges: list[tuple[int, int, float]], root: int):
    """Edges of the connected component containing ``root``."""
    remaining = list(edges)
    comp = {root}
    out: list[tuple[int, int, float]] = []
    changed = True
    while changed:
        changed = False
        still = []
        for e in remaining:
            if e[0] in comp or e[1] in comp:
                comp.update((e[0], e[1]))
                out.append(e)
                changed = True
            else:
                still.append(e)
        remaining = still
    return out


def _rotate(walk: list[int], start: int) -> list[int]:
    i = walk.index(start)
    return walk[i:] + walk[:i]


def build_mts(metric: MetricGraph, start: int = 0) -> MtsPlan:
    """Round the metric up to powers of two, take its MST, build the tour.

    The tour is rotated so the walker begins at ``start``; movement decisions
    use the rounded weights while schedules charge the true metric.
    """
    n = metric.size
    rounded = np.array(
        [
            [0.0 if i == j else next_power_of_two(metric.weights[i, j]) for j in range(n)]
            for i in range(n)
        ]
    )
    mst = _prim_mst(rounded) if n > 1 else []
    trav = traversal(mst)
    if trav.nodes:
        trav = trav.rotated_to(start)
    return MtsPlan(
        rounded=rounded, mst_edges=tuple(mst), traversal=trav, start_position=0
    )


def step_mts(
    state: PolicyState,
    cost_of,
    plan: MtsPlan,
    metric: MetricGraph,
) -> tuple[PolicyState, float, int]:
    """One task-system step.

    ``cost_of(j)`` is this step's operation cost in topology j. The walker
    takes the current stop's cost and advances along the tour while it still
    covers the rounded distance to the next stop, paying that distance down
    each hop; the demand is then processed at the landing stop. The returned
    transition cost is the true metric summed over the hops taken. An
    infinite cost at the current stop advances exactly one hop.

    Returns:
        (new state, transition cost, hops taken)
    """
    walk = plan.traversal.nodes
    if len(walk) < 2:
        return state, 0.0, 0
    hop_w = plan.traversal.weights
    pos = state.position
    c = cost_of(walk[pos])
    transition = 0.0
    hops = 0
    if math.isinf(c):
        nxt = (pos + 1) % len(walk)
        transition += metric.weights[walk[pos], walk[nxt]]
        pos = nxt
        hops = 1
    else:
        while c >= hop_w[pos]:
            c -= hop_w[pos]
            nxt = (pos + 1) % len(walk)
            transition += metric.weights[walk[pos], walk[nxt]]
            pos = nxt
            hops += 1
    return replace(state, current=walk[pos], position=pos), transition, hops


# ---------------------------------------------------------------------------
# Schedule drivers
# ---------------------------------------------------------------------------

def run_policy(
    kind: str,
    topologies: list[Topology],
    metric: MetricGraph,
    demands: np.ndarray,
    *,
    delta: int = 50,
    alpha: float = 0.5,
    cost_table: CostTable | None = None,
) -> Schedule:
    """Run one policy over a demand sequence and account its schedule.

    Args:
        kind: One of POLICY_KINDS.
        topologies: The feasible set; index 0 is every policy's start state.
        metric: True transition costs between set members.
        demands: (steps x clients) array, columns ordered by client node id.
        delta: Evaluation period for lazy/averaging.
        alpha: Averaging weight for the averaging policy.
        cost_table: Optional shared memoized cost table.

    Returns:
        Schedule with one record per step; records where the occupied
        topology cannot route the demand are flagged infeasible and excluded
        from the operation total.
    """
    if kind not in POLICY_KINDS:
        raise ValueError(f"unknown policy kind {kind!r}")
    if len(demands) == 0:
        raise ValueError("demand sequence must be nonempty")
    if kind == "offline_opt":
        return offline_optimal(topologies, metric, demands, cost_table=cost_table)

    table = cost_table or CostTable(topologies)
    n_steps = len(demands)
    sched = Schedule(policy=kind)

    if kind == "static_best":
        totals = np.zeros(len(topologies))
        for t in range(n_steps):
            totals = totals + table.costs_row(demands[t])
        choice = int(np.argmin(totals))
        for t in range(n_steps):
            op = table.cost(choice, demands[t])
            trans = metric.weights[0, choice] if t == 0 else 0.0
            hops = 1 if (t == 0 and choice != 0) else 0
            sched.steps.append(_record(t, choice, op, trans, hops))
        return sched

    state = PolicyState(kind=kind, current=0)
    plan = None
    if kind == "mts":
        plan = build_mts(metric, start=0)

    for t in range(n_steps):
        prev = state.current
        transition = 0.0
        hops = 0
        if kind == "reactive":
            state = step_reactive(state, table.costs_row(demands[t]), metric)
        elif kind == "lazy" and t > 0 and t % delta == 0:
            window = demands[t - delta:t]
            window_costs = np.zeros(len(topologies))
            for row in window:
                window_costs = window_costs + table.costs_row(row)
            state = step_lazy(state, window_costs, metric)
        elif kind == "averaging" and t > 0 and t % delta == 0:
            window_mean = demands[t - delta:t].mean(axis=0)
            state = step_averaging(state, window_mean, alpha, table, metric)
        elif kind == "mts":
            state, transition, hops = step_mts(
                state, lambda j: table.cost(j, demands[t]), plan, metric
            )
        if kind != "mts" and state.current != prev:
            transition = float(metric.weights[prev, state.current])
            hops = 1
        op = table.cost(state.current, demands[t])
        sched.steps.append(_record(t, state.current, op, transition, hops))
    return sched


def _record(t: int, topo: int, op: float, trans: float, hops: int) -> StepRecord:
    feasible = math.isfinite(op)
    return StepRecord(
        t=t,
        topology=topo,
        op_cost=op if feasible else math.inf,
        transition_cost=float(trans),
        feasible=feasible,
        hops=hops,
    )


def offline_optimal(
    topologies: list[Topology],
    metric: MetricGraph,
    demands: np.ndarray,
    *,
    cost_table: CostTable | None = None,
) -> Schedule:
    """Minimum-cost schedule via dynamic programming over (step, topology).

    dp[t][j] = min_i dp[t-1][i] + d(i, j) + cost_j(demand_t), seeded from
    topology index 0. Ties prefer staying, then the lowest index. Steps where
    no topology can route the demand are flagged and passed through without
    operation cost.
    """
    if len(demands) == 0:
        raise ValueError("demand sequence must be nonempty")
    table = cost_table or CostTable(topologies)
    n = len(topologies)
    n_steps = len(demands)
    cost_rows = [table.costs_row(demands[t]) for t in range(n_steps)]

    dp = np.full(n, math.inf)
    dp[0] = 0.0
    preds: list[np.ndarray] = []
    flagged: list[bool] = []
    for t in range(n_steps):
        row = cost_rows[t]
        if not np.isfinite(row).any():
            preds.append(np.arange(n))
            flagged.append(True)
            continue
        arrive = dp[:, None] + metric.weights  # arrive[i, j]
        best_i = np.argmin(arrive, axis=0)
        best_val = arrive[best_i, np.arange(n)]
        stay_val = arrive[np.arange(n), np.arange(n)]
        stay_wins = stay_val <= best_val
        pred = np.where(stay_wins, np.arange(n), best_i)
        dp = np.where(stay_wins, stay_val, best_val) + row
        preds.append(pred)
        flagged.append(False)

    sched = Schedule(policy="offline_opt")
    j = int(np.argmin(dp))
    choices = [0] * n_steps
    for t in range(n_steps - 1, -1, -1):
        choices[t] = j
        j = int(preds[t][j])
    prev = 0
    for t in range(n_steps):
        cur = choices[t]
        trans = float(metric.weights[prev, cur]) if cur != prev else 0.0
        hops = 1 if cur != prev else 0
        op = math.inf if flagged[t] else float(cost_rows[t][cur])
        sched.steps.append(_record(t, cur, op, trans, hops))
        prev = cur
    return sched


def schedule_to_csv_rows(schedule: Schedule) -> list[str]:
    """Rows for the shared schedules CSV: t,policy,topology_index,op_cost,trans_cost."""
    return [
        f"{s.t},{schedule.policy},{s.topology},{s.op_cost!r},{s.transition_cost!r}"
        for s in schedule.steps
    ]
