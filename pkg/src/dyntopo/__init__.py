"""dyntopo: dynamic topology reconfiguration simulator for replica networks.

Core pieces: topology generation with degree-skew control, min-cost-flow
operation costs, a metric transition-cost model, online reconfiguration
policies with offline baselines, synthetic workloads, and an experiment
harness with a CLI.
"""

from .flow import (
    DemandVector,
    FlowAssignment,
    InfeasibleFlowError,
    OperationCost,
    flow_skew,
    min_cost_flow,
    operation_cost,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    degree_sweep,
    desk_profile,
    paper_profile,
    run,
    schedule_quality,
)
from .policies import (
    POLICY_KINDS,
    CostTable,
    MtsPlan,
    PolicyState,
    Schedule,
    StepRecord,
    Traversal,
    build_mts,
    offline_optimal,
    run_policy,
    step_averaging,
    step_lazy,
    step_mts,
    step_reactive,
    traversal,
)
from .reconfig import (
    DegenerateSetError,
    MetricGraph,
    MetricReport,
    ReconfigModel,
    build_metric_graph,
    reconfig_cost,
    verify_metric,
)
from .topology import (
    DegenerateGraphError,
    DisconnectedGraphError,
    FeasibleSetParams,
    GenerationError,
    SkewFactor,
    Topology,
    compute_skew,
    generate_feasible_set,
    load_topology_set,
    save_topology_set,
    spanning_tree_height,
)
from .workload import DemandMatrix, WorkloadConfig, ema_update, generate

__version__ = "0.1.0"
