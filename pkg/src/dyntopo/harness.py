"""Experiment runner: wires topology sets, workloads, the transition metric,
and the policies together, and writes replayable reports.

Outputs per run (all deterministic for a fixed config):

  * ``manifest.json``   - full config echo plus derived set statistics.
  * ``topologies.json`` - the generated feasible set (documented schema).
  * ``demands.npy``     - the (steps x clients) demand matrix.
  * ``schedules.csv``   - t,policy,topology_index,op_cost,trans_cost rows.
  * ``summary.csv``     - per-policy totals and transition counts.

Per-topology cost evaluation is pure, so the cost matrix can be built with
worker processes; parallel and sequential runs produce identical reports.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import workload as workload_mod
from .flow import DemandVector, operation_cost
from .policies import (
    POLICY_KINDS,
    CostTable,
    Schedule,
    offline_optimal,
    run_policy,
    schedule_to_csv_rows,
)
from .reconfig import MetricGraph, ReconfigModel, build_metric_graph, verify_metric
from .topology import (
    FeasibleSetParams,
    Topology,
    generate_feasible_set,
    skew_value,
    spanning_tree_height,
    topology_set_to_dict,
)
from .workload import DemandMatrix, WorkloadConfig

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Experiment configuration rejected before any run."""


@dataclass(frozen=True)
class ExperimentConfig:
    feasible_set: FeasibleSetParams
    workload: WorkloadConfig
    reconfig_weight: float = 200.0
    delta: int = 50
    alpha: float = 0.5
    policies: tuple[str, ...] = POLICY_KINDS
    seed: int | None = None  # master seed; overrides the sub-seeds when set

    def validate(self) -> None:
        try:
            self.feasible_set.validate()
            self.workload.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.reconfig_weight <= 0:
            raise ConfigError("reconfig_weight must be > 0")
        if self.delta < 1:
            raise ConfigError("delta must be >= 1")
        unknown = [p for p in self.policies if p not in POLICY_KINDS]
        if unknown:
            raise ConfigError(f"unknown policies: {unknown}")
        if self.workload.clients != self.feasible_set.resolved_client_count():
            raise ConfigError(
                "workload.clients must equal the feasible set's client count"
            )

    def with_master_seed(self) -> "ExperimentConfig":
        """Derive sub-seeds from the master seed when one is given."""
        if self.seed is None:
            return self
        return replace(
            self,
            feasible_set=replace(self.feasible_set, seed=self.seed),
            workload=replace(self.workload, seed=self.seed + 1),
        )

    def to_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["policies"] = list(self.policies)
        return doc


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    total: float
    operation: float
    transition: float
    transitions: int
    infeasible_steps: int


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    topologies: list[Topology]
    demand: DemandMatrix
    metric: MetricGraph
    heights: tuple[int, ...]
    schedules: dict[str, Schedule] = field(default_factory=dict)

    def summary(self, policy: str) -> PolicySummary:
        s = self.schedules[policy]
        return PolicySummary(
            policy=policy,
            total=s.total,
            operation=s.total_operation,
            transition=s.total_transition,
            transitions=s.transition_count,
            infeasible_steps=s.infeasible_steps,
        )

    def summaries(self) -> list[PolicySummary]:
        return [self.summary(p) for p in self.schedules]


def _column_costs(args) -> tuple[int, list[float]]:
    """Worker task: operation costs of every demand row on one topology."""
    j, topo, demands, client_ids = args
    out = []
    for t in range(len(demands)):
        d = DemandVector(demands=dict(zip(client_ids, demands[t].tolist())))
        out.append(operation_cost(topo, d).total)
    return j, out


def build_cost_table(
    topologies: list[Topology], demands: np.ndarray, workers: int = 1
) -> CostTable:
    """Cost table primed with the full (steps x topologies) matrix.

    ``workers > 1`` distributes topology columns over processes; results are
    installed by index so the table is identical to the sequential one.
    """
    table = CostTable(topologies)
    if workers <= 1:
        table.matrix(demands)
        return table
    tasks = [
        (j, topologies[j], demands, table.client_ids) for j in range(len(topologies))
    ]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for j, costs in pool.map(_column_costs, tasks):
            table.prime_column(j, demands, np.asarray(costs))
    return table


def run(
    config: ExperimentConfig,
    out_dir: str | None = None,
    *,
    workers: int = 1,
) -> ExperimentReport:
    """Run every requested policy on a freshly generated instance.

    Raises:
        ConfigError: invalid configuration (checked before any work).
    """
    config = config.with_master_seed()
    config.validate()
    logger.info("generating feasible set (n=%d, N=%d)",
                config.feasible_set.n, config.feasible_set.set_size)
    topologies = generate_feasible_set(config.feasible_set)
    heights = tuple(spanning_tree_height(t) for t in topologies)
    model = ReconfigModel(weight=config.reconfig_weight, heights=heights)
    metric = build_metric_graph(model)
    check = verify_metric(metric)
    if not check.passed:
        raise RuntimeError(f"metric axioms violated: {check.detail}")
    demand = workload_mod.generate(config.workload)
    logger.info("priming cost table (%d steps x %d topologies)",
                demand.steps, len(topologies))
    table = build_cost_table(topologies, demand.values, workers=workers)
    report = ExperimentReport(
        config=config,
        topologies=topologies,
        demand=demand,
        metric=metric,
        heights=heights,
    )
    for kind in config.policies:
        logger.info("running policy %s", kind)
        report.schedules[kind] = run_policy(
            kind,
            topologies,
            metric,
            demand.values,
            delta=config.delta,
            alpha=config.alpha,
            cost_table=table,
        )
    if out_dir is not None:
        write_report(report, out_dir)
    return report


def write_report(report: ExperimentReport, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "config": report.config.to_dict(),
        "heights": list(report.heights),
        "edge_counts": [len(t.edges) for t in report.topologies],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    with open(os.path.join(out_dir, "topologies.json"), "w") as fh:
        json.dump(topology_set_to_dict(report.topologies), fh, indent=1, sort_keys=True)
    report.demand.save(os.path.join(out_dir, "demands.npy"))
    with open(os.path.join(out_dir, "schedules.csv"), "w") as fh:
        fh.write("t,policy,topology_index,op_cost,trans_cost\n")
        for policy in report.config.policies:
            for row in schedule_to_csv_rows(report.schedules[policy]):
                fh.write(row + "\n")
    with open(os.path.join(out_dir, "summary.csv"), "w") as fh:
        fh.write("policy,total,operation,transition,transitions,infeasible_steps\n")
        for s in report.summaries():
            fh.write(
                f"{s.policy},{s.total!r},{s.operation!r},{s.transition!r},"
                f"{s.transitions},{s.infeasible_steps}\n"
            )


def schedule_quality(
    report: ExperimentReport,
    window_start: int,
    window_len: int,
    policies: tuple[str, ...] | None = None,
) -> list[dict]:
    """Per-step topology-index traces over a window, for schedule comparison.

    Returns one dict per step: {"t": t, "<policy>": index, ...}. Policies
    default to everything in the report (the offline baseline last, so traces
    read as 'policy vs optimum').

    Raises:
        ValueError: window out of range.
    """
    steps = report.demand.steps
    if window_start < 0 or window_len < 1 or window_start + window_len > steps:
        raise ValueError(
            f"window [{window_start}, {window_start + window_len}) out of range "
            f"for {steps} steps"
        )
    if policies is None:
        named = [p for p in report.schedules if p != "offline_opt"]
        policies = tuple(named + (["offline_opt"] if "offline_opt" in report.schedules else []))
    missing = [p for p in policies if p not in report.schedules]
    if missing:
        raise ValueError(f"policies not in report: {missing}")
    traces = {p: report.schedules[p].topology_trace() for p in policies}
    rows = []
    for t in range(window_start, window_start + window_len):
        row = {"t": t}
        for p in policies:
            row[p] = traces[p][t]
        rows.append(row)
    return rows


def quality_to_csv(rows: list[dict], path) -> None:
    keys = list(rows[0].keys())
    with open(path, "w") as fh:
        fh.write(",".join(keys) + "\n")
        for row in rows:
            fh.write(",".join(str(row[k]) for k in keys) + "\n")


# ---------------------------------------------------------------------------
# Degree-bound sweep
# ---------------------------------------------------------------------------

def sweep_params(base: FeasibleSetParams, bound: int) -> FeasibleSetParams:
    """Scale a feasible-set spec to a new maximum-degree bound.

    The average-degree target scales proportionally (floored at 2.0 so graphs
    stay connectable) and the skew target is recomputed from the new degree
    pair, keeping the base tolerance.
    """
    scale = bound / base.max_degree_bound
    avg = max(2.0, base.avg_degree_bound * scale)
    rho = skew_value(base.n, bound, avg)
    return replace(
        base,
        max_degree_bound=bound,
        avg_degree_bound=avg,
        target_rho=rho,
    )


@dataclass(frozen=True)
class SweepRow:
    bound: int
    seed: int
    policy: str
    operation: float
    transition: float
    total: float


def degree_sweep(
    config: ExperimentConfig,
    bounds: list[int],
    seeds: list[int] | None = None,
    *,
    workers: int = 1,
) -> list[SweepRow]:
    """Re-run the experiment once per degree bound (and seed) and tabulate
    per-policy costs."""
    config.validate()
    if seeds is None:
        seeds = [config.feasible_set.seed]
    rows: list[SweepRow] = []
    for bound in bounds:
        for seed in seeds:
            cfg = replace(
                config,
                feasible_set=sweep_params(config.feasible_set, bound),
                seed=None,
            )
            cfg = replace(
                cfg,
                feasible_set=replace(cfg.feasible_set, seed=seed),
                workload=replace(cfg.workload, seed=seed + 1),
            )
            report = run(cfg, workers=workers)
            for s in report.summaries():
                rows.append(
                    SweepRow(
                        bound=bound,
                        seed=seed,
                        policy=s.policy,
                        operation=s.operation,
                        transition=s.transition,
                        total=s.total,
                    )
                )
    return rows


def sweep_to_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w") as fh:
        fh.write("bound,seed,policy,operation,transition,total\n")
        for r in rows:
            fh.write(
                f"{r.bound},{r.seed},{r.policy},{r.operation!r},"
                f"{r.transition!r},{r.total!r}\n"
            )


def best_policy_totals(rows: list[SweepRow]) -> dict[int, float]:
    """Per bound: the best policy total, averaged over seeds."""
    by_bound_seed: dict[tuple[int, int], float] = {}
    for r in rows:
        key = (r.bound, r.seed)
        by_bound_seed[key] = min(by_bound_seed.get(key, math.inf), r.total)
    out: dict[int, list[float]] = {}
    for (bound, _), best in by_bound_seed.items():
        out.setdefault(bound, []).append(best)
    return {bound: float(np.mean(vals)) for bound, vals in sorted(out.items())}


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def desk_profile(seed: int = 7) -> ExperimentConfig:
    """CI-scale experiment: 20 nodes, 20 topologies, 2000 steps.

    Cost, capacity, and demand scales are chosen so that per-step operation
    costs straddle the rounded transition distances: good topologies cost
    less than one hop, bad ones more, which is the regime where lazy
    evaluation and the task-system walker behave distinctively.
    """
    fs = FeasibleSetParams(
        n=20,
        max_degree_bound=5,
        avg_degree_bound=3.3,
        set_size=20,
        cost_range=(1.0, 1.5),
        capacity_range=(60.0, 100.0),
        target_rho=0.9,
        rho_tolerance=0.05,
        seed=seed,
        replica_count=5,
        client_count=15,
    )
    wl = WorkloadConfig(clients=15, steps=2000, seed=seed + 1)
    return ExperimentConfig(feasible_set=fs, workload=wl, reconfig_weight=200.0, delta=50)


def paper_profile(seed: int = 7, n: int = 50) -> ExperimentConfig:
    """Full-scale experiment: 50 (or 100) nodes, 100 topologies, 20000 steps."""
    if n == 50:
        clients = 40
    elif n == 100:
        clients = 90
    else:
        raise ConfigError("paper profile supports n=50 and n=100")
    fs = FeasibleSetParams(
        n=n,
        max_degree_bound=8,
        avg_degree_bound=3.3,
        set_size=100,
        cost_range=(100.0, 150.0),
        capacity_range=(50.0, 80.0),
        target_rho=0.9,
        rho_tolerance=0.05,
        seed=seed,
        replica_count=10,
        client_count=clients,
    )
    wl = WorkloadConfig(clients=clients, steps=20_000, seed=seed + 1)
    return ExperimentConfig(feasible_set=fs, workload=wl, reconfig_weight=200.0, delta=50)


PROFILES = {
    "desk": desk_profile,
    "paper": paper_profile,
    "paper100": lambda seed=7: paper_profile(seed=seed, n=100),
}


# ---------------------------------------------------------------------------
# Config (de)serialization — documented JSON schema, see README
# ---------------------------------------------------------------------------

def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        fs_doc = dict(doc["feasible_set"])
        wl_doc = dict(doc["workload"])
        for key in ("cost_range", "capacity_range"):
            fs_doc[key] = tuple(fs_doc[key])
        for key in ("burst_magnitude_range", "clamp"):
            if key in wl_doc:
                wl_doc[key] = tuple(wl_doc[key])
        return ExperimentConfig(
            feasible_set=FeasibleSetParams(**fs_doc),
            workload=WorkloadConfig(**wl_doc),
            reconfig_weight=doc.get("reconfig_weight", 200.0),
            delta=doc.get("delta", 50),
            alpha=doc.get("alpha", 0.5),
            policies=tuple(doc.get("policies", POLICY_KINDS)),
            seed=doc.get("seed"),
        )
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad config document: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc)
