"""Event-triggered participation control.

Each client owns a scalar threshold ``delta`` that gates its
participation: the client fires in a round when the distance between
the current server parameters and the client's last upload reaches
``delta``. A first-order low-pass filter tracks the realized firing
rate as a load estimate ``load``, and an integral control law steers
that rate toward a per-client ``target`` by raising the threshold when
the client talks too often and lowering it otherwise:

    fired   = 1 if distance >= delta else 0
    load'   = (1 - alpha) * load + alpha * fired
    delta'  = delta + gain * (load - target)

Note that the threshold update consumes the load value that entered the
round (before the filter step). Under this indexing the closed loop
telescopes exactly: after T rounds,

    (1/T) sum fired = target + (delta_T - delta_0) / (gain * T)
                             + (load_T - load_0) / (alpha * T),

which is what :func:`participation_identity_residual` checks, and the
realized rate converges to the target at an O(1/T) rate with constants
given by :func:`rate_tracking_constants`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError

DISTANCE_METRICS = ("euclidean", "infinity")


@dataclass
class ControllerGains:
    """Shared control parameters: integral gain and filter constant.

    ``gain`` must be positive; ``filter_alpha`` lies in (0, 1), with
    values near 1 weighting recent rounds most heavily.
    """

    gain: float = 2.0
    filter_alpha: float = 0.9

    def __post_init__(self):
        if not self.gain > 0:
            raise ContractViolationError("control gain must be positive")
        if not 0.0 < self.filter_alpha < 1.0:
            raise ContractViolationError("filter constant must lie in (0, 1)")


@dataclass
class ClientController:
    """Per-client participation state.

    ``delta0`` and ``load0`` record the initial conditions so the exact
    telescoping identity can be evaluated at any later round.
    ``max_trigger_distance`` tracks the largest distance the trigger has
    seen, which serves as the empirical ceiling in threshold-bound and
    rate-constant computations.
    """

    target: float
    delta0: float = 0.0
    load0: float = 0.0
    delta: float = field(init=False)
    load: float = field(init=False)
    cumulative_events: int = field(default=0, init=False)
    rounds_elapsed: int = field(default=0, init=False)
    rounds_since_event: int = field(default=0, init=False)
    max_trigger_distance: float = field(default=0.0, init=False)
    last_distance: float = field(default=float("nan"), init=False)

    def __post_init__(self):
        if not 0.0 <= self.target <= 1.0:
            raise ContractViolationError("target participation rate must lie in [0, 1]")
        if not 0.0 <= self.load0 <= 1.0:
            raise ContractViolationError("initial load must lie in [0, 1]")
        if self.target == 0.0:
            warnings.warn(
                "target rate 0 never lowers a positive threshold; the client can stay "
                "quiet forever",
                stacklevel=2,
            )
        self.delta = float(self.delta0)
        self.load = float(self.load0)


def _distance(omega: np.ndarray, z_prev: np.ndarray, metric: str) -> float:
    if metric == "euclidean":
        return float(np.linalg.norm(omega - z_prev))
    if metric == "infinity":
        return float(np.max(np.abs(omega - z_prev)))
    raise ContractViolationError(f"unknown distance metric: {metric!r}")


def _distances(omega: np.ndarray, z_cache: np.ndarray, metric: str) -> np.ndarray:
    if metric == "euclidean":
        return np.linalg.norm(z_cache - omega, axis=1)
    if metric == "infinity":
        return np.max(np.abs(z_cache - omega), axis=1)
    raise ContractViolationError(f"unknown distance metric: {metric!r}")


def trigger(omega, z_prev, delta: float, metric: str = "euclidean") -> int:
    """Participation test: 1 iff distance(omega, z_prev) >= delta.

    Fires on the exact boundary, so a nonpositive threshold always
    fires. Raises on dimension mismatch.
    """
    omega = np.asarray(omega, dtype=float)
    z_prev = np.asarray(z_prev, dtype=float)
    if omega.shape != z_prev.shape:
        raise ContractViolationError(
            f"server parameters {omega.shape} and cached upload {z_prev.shape} differ"
        )
    return int(_distance(omega, z_prev, metric) >= delta)


def filter_update(load: float, event: int, alpha: float) -> float:
    """One low-pass step: (1 - alpha) * load + alpha * event."""
    return (1.0 - alpha) * load + alpha * event


def threshold_update(delta: float, load: float, target: float, gain: float) -> float:
    """One integral step: delta + gain * (load - target).

    ``load`` is the value entering the round, not the freshly filtered
    one; the exact participation identity depends on this indexing.
    """
    return delta + gain * (load - target)


def select_clients(
    controllers: list[ClientController],
    omega,
    z_prev_cache,
    gains: ControllerGains,
    metric: str = "euclidean",
) -> set[int]:
    """Run one controller round for every client, in index order.

    Evaluates the trigger for each client against the server's cached
    uploads, then commits the filter and threshold updates in place.
    Returns the set of fired client indices. Exactly one coordinator
    must call this per round; commits happen in client-index order so
    repeated runs are bit-identical.
    """
    omega = np.asarray(omega, dtype=float)
    z_cache = np.asarray(z_prev_cache, dtype=float)
    if z_cache.shape != (len(controllers),) + omega.shape:
        raise ContractViolationError(
            f"cache shape {z_cache.shape} does not match {len(controllers)} clients "
            f"of dimension {omega.shape}"
        )
    distances = _distances(omega, z_cache, metric)
    selected: set[int] = set()
    for i, ctl in enumerate(controllers):
        dist = float(distances[i])
        fired = 1 if dist >= ctl.delta else 0
        if fired:
            selected.add(i)
        load_before = ctl.load
        ctl.load = filter_update(load_before, fired, gains.filter_alpha)
        ctl.delta = threshold_update(ctl.delta, load_before, ctl.target, gains.gain)
        ctl.cumulative_events += fired
        ctl.rounds_elapsed += 1
        ctl.rounds_since_event = 0 if fired else ctl.rounds_since_event + 1
        ctl.last_distance = dist
        if dist > ctl.max_trigger_distance:
            ctl.max_trigger_distance = dist
    return selected


def participation_identity_residual(
    controller: ClientController, gains: ControllerGains, rounds: int
) -> float:
    """Deviation from the exact closed-loop telescoping identity.

    After ``rounds`` controller rounds the time-averaged firing rate
    equals target + (delta_T - delta_0)/(gain T) + (load_T - load_0)/(alpha T)
    in real arithmetic; the returned residual is zero up to rounding.
    """
    if rounds <= 0:
        raise ContractViolationError("identity requires at least one completed round")
    if rounds != controller.rounds_elapsed:
        raise ContractViolationError(
            f"controller has completed {controller.rounds_elapsed} rounds, not {rounds}"
        )
    mean_rate = controller.cumulative_events / rounds
    drift = (controller.delta - controller.delta0) / (gains.gain * rounds)
    filtered = (controller.load - controller.load0) / (gains.filter_alpha * rounds)
    return abs(mean_rate - controller.target - drift - filtered)


def threshold_bounds(
    delta0: float, gains: ControllerGains, max_trigger_distance: float
) -> tuple[float, float]:
    """Guaranteed envelope for every threshold the closed loop can visit.

    ``max_trigger_distance`` is the empirical ceiling above which the
    trigger cannot fire on the observed trajectory (a run's largest
    trigger distance).
    """
    if max_trigger_distance < 0:
        raise ContractViolationError("trigger-distance ceiling must be nonnegative")
    k, a = gains.gain, gains.filter_alpha
    lower = min(delta0 - k / a, -k * (1.0 + a) / a)
    upper = max(max_trigger_distance + k * (1.0 + a) / a, delta0 + k / a)
    return lower, upper


def rate_tracking_constants(
    delta0: float, gains: ControllerGains, max_trigger_distance: float
) -> tuple[float, float]:
    """O(1/T) envelope constants for the realized-rate deviation.

    Returns (c_lower, c_upper) such that the signed deviation of the
    time-averaged firing rate from the target lies in
    [c_lower / T, c_upper / T] after T rounds.
    """
    if max_trigger_distance < 0:
        raise ContractViolationError("trigger-distance ceiling must be nonnegative")
    k, a = gains.gain, gains.filter_alpha
    c_lower = min(-2.0 / a, -delta0 / k - (2.0 + a) / a)
    c_upper = max((max_trigger_distance - delta0) / k + (2.0 + a) / a, (2.0 + a) / a)
    return c_lower, c_upper


def liveness_check(controller: ClientController, window: int) -> int:
    """1 iff the client fired within the last ``window`` rounds.

    Finite-horizon stand-in for the guarantee that a client with a
    positive target never goes permanently quiet.
    """
    if window < 1:
        raise ContractViolationError("window must be at least one round")
    if controller.rounds_elapsed < window:
        raise ContractViolationError("run is shorter than the requested window")
    if not controller.target > 0:
        raise ContractViolationError("liveness is only meaningful for positive targets")
    return int(controller.rounds_since_event < window)
