"""Event-triggered, feedback-controlled client participation for
consensus-ADMM federated optimization, with random-sampling baselines,
synthetic non-iid partitioning and a metrics harness."""

from .baselines import SamplerSpec, fedadmm_round, fedavg_local, fedprox_local, sample_uniform
from .controller import (
    ClientController,
    ControllerGains,
    filter_update,
    liveness_check,
    participation_identity_residual,
    rate_tracking_constants,
    select_clients,
    threshold_bounds,
    threshold_update,
    trigger,
)
from .data import (
    PartitionSpec,
    SyntheticDataset,
    build_objectives,
    dirichlet_partition,
    generate_synthetic,
    label_shard_partition,
    load_delimited,
    partition_indices,
    quantile_bins,
)
from .engine import (
    ClientState,
    DataSpec,
    RunConfig,
    ServerState,
    StationarityReport,
    aggregate,
    build_problem,
    client_update,
    init_states,
    quadratic_optimum,
    rho_floor,
    run_experiment,
    run_round,
    stationarity_residuals,
    validate_rho,
)
from .errors import ContractViolationError, SolverFailureError, TraceFormatError
from .harness import (
    ExperimentReport,
    RoundTrace,
    emit_trace,
    events_to_target,
    fired_matrix,
    identity_residual_matrix,
    load_trace,
    realized_rate,
    realized_rates,
    report,
    threshold_bound_violations,
    write_report,
)
from .objectives import Objective, ProxProblem, prox_residual, prox_solve

__version__ = "0.1.0"

__all__ = [
    "ClientController",
    "ClientState",
    "ContractViolationError",
    "ControllerGains",
    "DataSpec",
    "ExperimentReport",
    "Objective",
    "PartitionSpec",
    "ProxProblem",
    "RoundTrace",
    "RunConfig",
    "SamplerSpec",
    "ServerState",
    "SolverFailureError",
    "StationarityReport",
    "SyntheticDataset",
    "TraceFormatError",
    "aggregate",
    "build_objectives",
    "build_problem",
    "client_update",
    "dirichlet_partition",
    "emit_trace",
    "events_to_target",
    "fedadmm_round",
    "fedavg_local",
    "fedprox_local",
    "filter_update",
    "fired_matrix",
    "generate_synthetic",
    "identity_residual_matrix",
    "init_states",
    "label_shard_partition",
    "liveness_check",
    "load_delimited",
    "load_trace",
    "participation_identity_residual",
    "partition_indices",
    "prox_residual",
    "prox_solve",
    "quadratic_optimum",
    "quantile_bins",
    "rate_tracking_constants",
    "realized_rate",
    "realized_rates",
    "report",
    "rho_floor",
    "run_experiment",
    "run_round",
    "sample_uniform",
    "select_clients",
    "stationarity_residuals",
    "threshold_bound_violations",
    "threshold_bounds",
    "threshold_update",
    "trigger",
    "validate_rho",
    "write_report",
]
