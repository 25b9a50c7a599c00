"""The federated round loop.

One coordinator owns the server and controller state and advances the
federation one round at a time: select participants, run the selected
clients' dual and primal updates against the current server parameters,
refresh the server's per-client upload cache, and recompute the global
average from the full cache, stale entries included. Clients that do
not participate keep their state frozen. Every reduction runs in fixed
client-index order so identical configurations reproduce bit-identical
trajectories.

Four algorithms share the loop:

* ``fedback``: event-triggered selection driven by the integral
  feedback controller.
* ``fedadmm``: the same cache-based ADMM round with uniformly sampled
  participants.
* ``fedavg`` / ``fedprox``: random sampling with the consensus
  machinery stripped back (no duals; FedAvg also drops the proximal
  coupling) and participant-only averaging on the server.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .baselines import fedavg_local, fedprox_local, sample_uniform
from .controller import (
    ClientController,
    ControllerGains,
    DISTANCE_METRICS,
    _distances,
    filter_update,
    select_clients,
)
from .data import (
    PartitionSpec,
    build_objectives,
    generate_synthetic,
    partition_indices,
    quantile_bins,
)
from .errors import ContractViolationError
from .harness import RoundTrace, TARGET_METRICS
from .objectives import Objective, ProxProblem, prox_solve

ALGORITHMS = ("fedback", "fedadmm", "fedavg", "fedprox")


@dataclass
class ClientState:
    """One client's local iterates and its last upload."""

    theta: np.ndarray
    dual: np.ndarray
    z_prev: np.ndarray


@dataclass
class ServerState:
    """Server parameters plus the per-client upload cache.

    For the cache-based algorithms the invariant ``omega`` ==
    mean(z_cache) holds after every round; FedAvg and FedProx keep no
    cache, so ``z_cache`` stays at its initial value for them.
    ``events_total`` counts participation events across all rounds.
    """

    omega: np.ndarray
    z_cache: np.ndarray
    round_index: int = 0
    events_total: int = 0


class StationarityReport(NamedTuple):
    grad_norm_global: float
    lagrangian: float
    F_theta: float
    f_omega: float


@dataclass
class DataSpec:
    """Synthetic-data settings for a run; see data.generate_synthetic."""

    task: str = "regression"
    n_samples: int = 1000
    n_features: int = 5
    classes: int = 2
    noise: float = 0.05
    seed: int | None = None

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ContractViolationError(f"unknown task: {self.task!r}")


@dataclass
class RunConfig:
    """Everything a run needs.

    ``targets`` and ``delta0`` accept a scalar (shared by all clients)
    or one value per client. ``z0`` accepts a scalar or a d-vector and
    seeds every initial iterate. The random-sampling algorithms draw
    ceil(rate * N) clients per round at the network-average target
    rate. ``enforce_rho_assumption`` makes run_experiment refuse a
    ``rho`` below the stability floor max_i 3 n_i r_i / n.
    """

    n_clients: int
    n_rounds: int
    rho: float
    gains: ControllerGains = field(default_factory=ControllerGains)
    targets: float | list[float] = 0.1
    dim: int | None = None
    epsilon0: float = 1e-3
    seed: int = 0
    algorithm: str = "fedback"
    delta0: float | list[float] = 0.0
    load0: float = 0.0
    z0: float | list[float] = 0.0
    distance_metric: str = "euclidean"
    pin_threshold_zero: bool = False
    enforce_rho_assumption: bool = False
    fedavg_steps: int = 10
    fedavg_lr: float | None = None
    fedprox_mu: float | None = None
    data: DataSpec | None = None
    partition: PartitionSpec | None = None
    partition_bins: int = 10
    target_metric: str | None = None
    target_value: float | None = None

    def validate(self) -> None:
        if self.n_clients < 1:
            raise ContractViolationError("need at least one client")
        if self.n_rounds < 0:
            raise ContractViolationError("round count cannot be negative")
        if self.algorithm not in ALGORITHMS:
            raise ContractViolationError(f"unknown algorithm: {self.algorithm!r}")
        if not self.rho > 0:
            raise ContractViolationError("rho must be positive")
        if not self.epsilon0 > 0:
            raise ContractViolationError("epsilon0 must be positive")
        if self.distance_metric not in DISTANCE_METRICS:
            raise ContractViolationError(f"unknown distance metric: {self.distance_metric!r}")
        targets = self.target_array()
        if np.any(targets < 0) or np.any(targets > 1):
            raise ContractViolationError("target rates must lie in [0, 1]")
        if self.algorithm != "fedback" and not 0.0 < self.sampler_rate <= 1.0:
            raise ContractViolationError("random sampling needs a network rate in (0, 1]")
        if self.fedavg_steps < 1:
            raise ContractViolationError("fedavg needs at least one local step")
        if self.fedavg_lr is not None and not self.fedavg_lr > 0:
            raise ContractViolationError("fedavg learning rate must be positive")
        if self.fedprox_mu is not None and not self.fedprox_mu > 0:
            raise ContractViolationError("fedprox proximal weight must be positive")
        if self.target_metric is not None and self.target_metric not in TARGET_METRICS:
            raise ContractViolationError(f"unknown target metric: {self.target_metric!r}")

    def target_array(self) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(self.targets, dtype=float), (self.n_clients,)
        ).copy()

    def delta0_array(self) -> np.ndarray:
        return np.broadcast_to(
            np.asarray(self.delta0, dtype=float), (self.n_clients,)
        ).copy()

    def z0_vector(self, dim: int) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.z0, dtype=float), (dim,)).copy()

    @property
    def sampler_rate(self) -> float:
        return float(self.target_array().mean())

    def epsilon_at(self, round_index: int) -> float:
        """Primal accuracy for a round: epsilon0 / (k + 1)."""
        return self.epsilon0 / (round_index + 1)

    def to_dict(self) -> dict:
        out = {
            "n_clients": self.n_clients,
            "n_rounds": self.n_rounds,
            "rho": self.rho,
            "gains": {"gain": self.gains.gain, "filter_alpha": self.gains.filter_alpha},
            "targets": self.targets if np.isscalar(self.targets) else list(self.targets),
            "dim": self.dim,
            "epsilon0": self.epsilon0,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "delta0": self.delta0 if np.isscalar(self.delta0) else list(self.delta0),
            "load0": self.load0,
            "z0": self.z0 if np.isscalar(self.z0) else list(self.z0),
            "distance_metric": self.distance_metric,
            "pin_threshold_zero": self.pin_threshold_zero,
            "enforce_rho_assumption": self.enforce_rho_assumption,
            "fedavg_steps": self.fedavg_steps,
            "fedavg_lr": self.fedavg_lr,
            "fedprox_mu": self.fedprox_mu,
            "data": None if self.data is None else dict(self.data.__dict__),
            "partition": None if self.partition is None else dict(self.partition.__dict__),
            "partition_bins": self.partition_bins,
            "target_metric": self.target_metric,
            "target_value": self.target_value,
        }
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ContractViolationError(f"unknown config keys: {sorted(unknown)}")
        if "gains" in raw and raw["gains"] is not None and not isinstance(raw["gains"], ControllerGains):
            raw["gains"] = ControllerGains(**raw["gains"])
        if "data" in raw and raw["data"] is not None and not isinstance(raw["data"], DataSpec):
            raw["data"] = DataSpec(**raw["data"])
        if "partition" in raw and raw["partition"] is not None and not isinstance(raw["partition"], PartitionSpec):
            raw["partition"] = PartitionSpec(**raw["partition"])
        return cls(**raw)


# ---------------------------------------------------------------------------
# core operations


def client_update(
    state: ClientState, obj: Objective, omega, rho: float, eps_k: float
) -> ClientState:
    """One participating client's dual and inexact primal update.

    The dual absorbs the current disagreement, the primal solves the
    proximal subproblem anchored at omega - dual (warm started from
    omega) to accuracy eps_k, and the fresh upload is dual + primal.
    Pure: returns a new state.
    """
    omega = np.asarray(omega, dtype=float)
    dual_new = state.dual + state.theta - omega
    problem = ProxProblem(
        anchor=omega - dual_new, rho=rho, tolerance=eps_k, warm_start=omega.copy()
    )
    theta_new = prox_solve(obj, problem)
    return ClientState(theta=theta_new, dual=dual_new, z_prev=dual_new + theta_new)


def aggregate(z_cache) -> np.ndarray:
    """Arithmetic mean of the cached uploads, in fixed index order."""
    z_cache = np.asarray(z_cache, dtype=float)
    if z_cache.size == 0:
        raise ContractViolationError("cannot aggregate an empty cache")
    return np.mean(z_cache, axis=0)


def rho_floor(objectives: list[Objective]) -> float:
    """Smallest rho satisfying the stability condition max_i 3 n_i r_i / n."""
    if not objectives:
        raise ContractViolationError("need at least one objective")
    n = sum(obj.n_samples for obj in objectives)
    return max(3.0 * obj.n_samples * obj.smoothness_constant() / n for obj in objectives)


def validate_rho(rho: float, objectives: list[Objective]) -> int:
    """1 iff rho clears the per-client stability floor."""
    return int(rho >= rho_floor(objectives))


def stationarity_residuals(
    omega, clients: list[ClientState], objectives: list[Objective], rho: float
) -> StationarityReport:
    """Global optimality diagnostics at the current state.

    Returns the norm of the summed gradients at omega, the global
    augmented Lagrangian, the sum of local losses at the local iterates,
    and the sum of local losses at omega. The last three converge to a
    common value on a convergent run, and the first vanishes.
    """
    omega = np.asarray(omega, dtype=float)
    grad_sum = np.zeros_like(omega)
    lagrangian = 0.0
    f_theta = 0.0
    f_omega = 0.0
    for state, obj in zip(clients, objectives):
        grad_sum += obj.gradient(omega)
        f_omega += obj.loss(omega)
        local = obj.loss(state.theta)
        f_theta += local
        gap = state.theta - omega
        lagrangian += local + float(state.dual @ gap) + 0.5 * rho * float(gap @ gap)
    return StationarityReport(
        grad_norm_global=float(np.linalg.norm(grad_sum)),
        lagrangian=lagrangian,
        F_theta=f_theta,
        f_omega=f_omega,
    )


def quadratic_optimum(objectives: list[Objective]) -> tuple[np.ndarray, float]:
    """Closed-form minimizer and value of the summed quadratic losses."""
    if not objectives:
        raise ContractViolationError("need at least one objective")
    if any(obj.kind != "quadratic" for obj in objectives):
        raise ContractViolationError("closed-form optimum requires quadratic objectives")
    gram = sum(obj._gram for obj in objectives)
    moment = sum(obj._moment for obj in objectives)
    omega_star = np.linalg.solve(gram, moment)
    f_star = sum(obj.loss(omega_star) for obj in objectives)
    return omega_star, float(f_star)


# ---------------------------------------------------------------------------
# setup


def build_problem(cfg: RunConfig):
    """Generate the dataset, partition it and build the local objectives.

    Regression targets are binned into quantile classes before a
    label-based partition so the heterogeneity schemes apply to them.
    Returns (objectives, dataset, per-client index lists).
    """
    if cfg.data is None or cfg.partition is None:
        raise ContractViolationError(
            "config carries no data/partition specs; pass objectives explicitly instead"
        )
    data_seed = cfg.data.seed if cfg.data.seed is not None else cfg.seed
    dataset = generate_synthetic(
        task=cfg.data.task,
        n_samples=cfg.data.n_samples,
        n_features=cfg.data.n_features,
        classes=cfg.data.classes,
        seed=data_seed,
        noise=cfg.data.noise,
    )
    if dataset.task == "classification":
        labels = dataset.targets
    else:
        labels = quantile_bins(dataset.targets, cfg.partition_bins)
    parts = partition_indices(labels, cfg.n_clients, cfg.partition, default_seed=cfg.seed + 1)
    return build_objectives(dataset, parts), dataset, parts


def make_controllers(cfg: RunConfig) -> list[ClientController]:
    targets = cfg.target_array()
    delta0 = cfg.delta0_array()
    return [
        ClientController(target=float(targets[i]), delta0=float(delta0[i]), load0=cfg.load0)
        for i in range(cfg.n_clients)
    ]


def init_states(cfg: RunConfig, objectives: list[Objective]):
    """Fresh server, client, controller and sampler state for a run.

    Every initial iterate and cache entry equals z0 and every dual is
    zero, so the server average starts exactly at z0.
    """
    if len(objectives) != cfg.n_clients:
        raise ContractViolationError(
            f"{len(objectives)} objectives for {cfg.n_clients} clients"
        )
    dims = {obj.dim for obj in objectives}
    if len(dims) != 1:
        raise ContractViolationError("all clients must share one parameter dimension")
    dim = dims.pop()
    if cfg.dim is not None and cfg.dim != dim:
        raise ContractViolationError(f"config dim {cfg.dim} but objectives have dim {dim}")
    z0 = cfg.z0_vector(dim)
    clients = [
        ClientState(theta=z0.copy(), dual=np.zeros(dim), z_prev=z0.copy())
        for _ in range(cfg.n_clients)
    ]
    server = ServerState(omega=z0.copy(), z_cache=np.tile(z0, (cfg.n_clients, 1)))
    controllers = make_controllers(cfg) if cfg.algorithm == "fedback" else None
    rng = np.random.default_rng([cfg.seed, 1]) if cfg.algorithm != "fedback" else None
    return server, clients, controllers, rng


# ---------------------------------------------------------------------------
# the round


def _pinned_selection(server, controllers, cfg) -> set[int]:
    # Threshold pinned at zero: every client fires every round; the load
    # filter keeps tracking but the integral law is bypassed.
    distances = _distances(server.omega, server.z_cache, cfg.distance_metric)
    for i, ctl in enumerate(controllers):
        ctl.delta = 0.0
        ctl.load = filter_update(ctl.load, 1, cfg.gains.filter_alpha)
        ctl.cumulative_events += 1
        ctl.rounds_elapsed += 1
        ctl.rounds_since_event = 0
        dist = float(distances[i])
        ctl.last_distance = dist
        if dist > ctl.max_trigger_distance:
            ctl.max_trigger_distance = dist
    return set(range(len(controllers)))


def run_round(
    server: ServerState,
    clients: list[ClientState],
    controllers: list[ClientController] | None,
    objectives: list[Objective],
    cfg: RunConfig,
    rng: np.random.Generator | None = None,
) -> RoundTrace:
    """Advance the federation by one round and record it.

    Mutates ``server``, ``clients`` and ``controllers`` in place;
    commits happen in client-index order. The returned trace row
    describes the post-round state.
    """
    n_clients = len(clients)
    k = server.round_index
    if k >= cfg.n_rounds:
        raise ContractViolationError(f"round {k} is past the configured horizon {cfg.n_rounds}")
    eps_k = cfg.epsilon_at(k)

    if cfg.algorithm == "fedback":
        if controllers is None:
            raise ContractViolationError("fedback needs controller state")
        if cfg.pin_threshold_zero:
            selected = _pinned_selection(server, controllers, cfg)
        else:
            selected = select_clients(
                controllers, server.omega, server.z_cache, cfg.gains, cfg.distance_metric
            )
    else:
        if rng is None:
            raise ContractViolationError("random-sampling algorithms need a generator")
        selected = sample_uniform(n_clients, cfg.sampler_rate, rng)
    order = sorted(selected)

    if cfg.algorithm in ("fedback", "fedadmm"):
        for i in order:
            updated = client_update(clients[i], objectives[i], server.omega, cfg.rho, eps_k)
            clients[i] = updated
            server.z_cache[i] = updated.z_prev
        server.omega = aggregate(server.z_cache)
        rho_eff = cfg.rho
    elif cfg.algorithm == "fedavg":
        thetas = []
        for i in order:
            if cfg.fedavg_lr is not None:
                lr = cfg.fedavg_lr
            else:
                smooth = objectives[i].smoothness_constant()
                lr = 1.0 / smooth if smooth > 0 else 1.0
            theta_new = fedavg_local(objectives[i], server.omega, cfg.fedavg_steps, lr)
            clients[i] = ClientState(
                theta=theta_new, dual=np.zeros_like(theta_new), z_prev=theta_new.copy()
            )
            thetas.append(theta_new)
        if thetas:
            server.omega = np.mean(np.stack(thetas), axis=0)
        rho_eff = 0.0
    else:  # fedprox
        mu = cfg.fedprox_mu if cfg.fedprox_mu is not None else cfg.rho
        thetas = []
        for i in order:
            theta_new = fedprox_local(objectives[i], server.omega, mu, eps_k)
            clients[i] = ClientState(
                theta=theta_new, dual=np.zeros_like(theta_new), z_prev=theta_new.copy()
            )
            thetas.append(theta_new)
        if thetas:
            server.omega = np.mean(np.stack(thetas), axis=0)
        rho_eff = mu

    server.round_index += 1
    server.events_total += len(order)
    stats = stationarity_residuals(server.omega, clients, objectives, rho_eff)

    fired = np.array([1 if i in selected else 0 for i in range(n_clients)])
    if controllers is not None:
        load = np.array([ctl.load for ctl in controllers])
        delta = np.array([ctl.delta for ctl in controllers])
        distance = np.array([ctl.last_distance for ctl in controllers])
    else:
        # Random-sampling algorithms have no controller state to record.
        load = np.zeros(n_clients)
        delta = np.zeros(n_clients)
        distance = np.zeros(n_clients)

    return RoundTrace(
        round=k,
        selected=tuple(order),
        selected_count=len(order),
        cumulative_events=server.events_total,
        omega_norm=float(np.linalg.norm(server.omega)),
        grad_norm_global=stats.grad_norm_global,
        lagrangian=stats.lagrangian,
        F_theta=stats.F_theta,
        f_omega=stats.f_omega,
        fired=fired,
        load=load,
        delta=delta,
        distance=distance,
    )


def run_experiment(cfg: RunConfig, objectives: list[Objective] | None = None) -> list[RoundTrace]:
    """Run a full configuration from a cold start and return its trace.

    Builds the synthetic federation from the config's data and
    partition specs unless ``objectives`` are injected directly.
    Deterministic: the same config and objectives give a bit-identical
    trace.
    """
    cfg.validate()
    if objectives is None:
        objectives, _, _ = build_problem(cfg)
    if cfg.enforce_rho_assumption and not validate_rho(cfg.rho, objectives):
        raise ContractViolationError(
            f"rho {cfg.rho} is below the stability floor {rho_floor(objectives):.6g}"
        )
    server, clients, controllers, rng = init_states(cfg, objectives)
    return [
        run_round(server, clients, controllers, objectives, cfg, rng)
        for _ in range(cfg.n_rounds)
    ]
