"""Round traces, derived metrics, reports and trace serialization.

A run produces one :class:`RoundTrace` per round. Scalars describe the
post-round server state; the optional per-client arrays describe each
client's participation bit for the round together with the controller
state committed at the end of the round (load and threshold after the
round's update) and the trigger distance measured at the start of it.
Storing the post-update controller state means row k directly feeds the
exact participation identity at prefix length k + 1.

Trace files are delimited text: one header row, one row per round,
floats written with 17 significant digits so a write/read round trip is
lossless for float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .controller import ControllerGains, threshold_bounds
from .errors import ContractViolationError, TraceFormatError

_BASE_COLUMNS = (
    "round",
    "selected_count",
    "cumulative_events",
    "omega_norm",
    "grad_norm_global",
    "lagrangian",
    "F_theta",
    "f_omega",
    "selected",
)
TARGET_METRICS = ("loss", "grad_norm")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class RoundTrace:
    """Everything recorded about one round."""

    round: int
    selected: tuple[int, ...]
    selected_count: int
    cumulative_events: int
    omega_norm: float
    grad_norm_global: float
    lagrangian: float
    F_theta: float
    f_omega: float
    fired: np.ndarray | None = None
    load: np.ndarray | None = None
    delta: np.ndarray | None = None
    distance: np.ndarray | None = None

    def __post_init__(self):
        if self.selected_count != len(self.selected):
            raise ContractViolationError("selected_count must equal the selection size")

    def __eq__(self, other):
        if not isinstance(other, RoundTrace):
            return NotImplemented
        scalars = (
            self.round == other.round
            and self.selected == other.selected
            and self.selected_count == other.selected_count
            and self.cumulative_events == other.cumulative_events
            and self.omega_norm == other.omega_norm
            and self.grad_norm_global == other.grad_norm_global
            and self.lagrangian == other.lagrangian
            and self.F_theta == other.F_theta
            and self.f_omega == other.f_omega
        )
        if not scalars:
            return False
        for mine, theirs in (
            (self.fired, other.fired),
            (self.load, other.load),
            (self.delta, other.delta),
            (self.distance, other.distance),
        ):
            if (mine is None) != (theirs is None):
                return False
            if mine is not None and not np.array_equal(mine, theirs):
                return False
        return True

    @property
    def has_per_client(self) -> bool:
        return self.fired is not None


@dataclass
class ExperimentReport:
    """Summary of a finished run."""

    rounds: int
    total_events: int
    events_to_target: int | None
    realized_rates: list[float] | None
    network_average_rate: float | None
    identity_max_residual: float | None
    delta_bound_violations: int | None
    final_residuals: tuple[float, float, float, float] | None

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        if self.final_residuals is not None:
            out["final_residuals"] = {
                "grad_norm_global": self.final_residuals[0],
                "lagrangian": self.final_residuals[1],
                "F_theta": self.final_residuals[2],
                "f_omega": self.final_residuals[3],
            }
        return out


# ---------------------------------------------------------------------------
# metrics


def _metric_series(trace: list[RoundTrace], metric: str) -> np.ndarray:
    if metric == "loss":
        return np.array([row.f_omega for row in trace])
    if metric == "grad_norm":
        return np.array([row.grad_norm_global for row in trace])
    raise ContractViolationError(f"unknown target metric: {metric!r}")


def events_to_target(trace: list[RoundTrace], metric: str, target: float) -> int | None:
    """Participation events spent when the metric first reaches the target.

    Returns None when the run never got there, mirroring an unreachable
    target in an efficiency table.
    """
    if not trace:
        raise ContractViolationError("trace is empty")
    values = _metric_series(trace, metric)
    below = np.flatnonzero(values <= target)
    if below.size == 0:
        return None
    return trace[int(below[0])].cumulative_events


def fired_matrix(trace: list[RoundTrace]) -> np.ndarray:
    """Per-round participation bits as a (rounds, clients) array."""
    if not trace:
        raise ContractViolationError("trace is empty")
    if not trace[0].has_per_client:
        raise ContractViolationError("trace was recorded without per-client columns")
    return np.stack([row.fired for row in trace])


def realized_rate(trace: list[RoundTrace], client: int) -> float:
    """Fraction of rounds in which one client participated."""
    fired = fired_matrix(trace)
    return float(fired[:, client].sum() / fired.shape[0])


def realized_rates(trace: list[RoundTrace]) -> np.ndarray:
    """Per-client participation fractions over the whole trace."""
    fired = fired_matrix(trace)
    return fired.sum(axis=0) / fired.shape[0]


def identity_residual_matrix(
    trace: list[RoundTrace],
    gains: ControllerGains,
    targets,
    delta0,
    load0,
) -> np.ndarray:
    """Participation-identity residuals for every client and prefix.

    Entry (T - 1, i) is client i's deviation from the exact telescoping
    identity after the first T rounds; all entries should sit at
    floating-point noise on a controller-driven run.
    """
    fired = fired_matrix(trace).astype(float)
    rounds, n_clients = fired.shape
    load = np.stack([row.load for row in trace])
    delta = np.stack([row.delta for row in trace])
    targets = np.broadcast_to(np.asarray(targets, dtype=float), (n_clients,))
    delta0 = np.broadcast_to(np.asarray(delta0, dtype=float), (n_clients,))
    load0 = np.broadcast_to(np.asarray(load0, dtype=float), (n_clients,))
    horizon = np.arange(1, rounds + 1, dtype=float)[:, None]
    mean_rate = np.cumsum(fired, axis=0) / horizon
    drift = (delta - delta0[None, :]) / (gains.gain * horizon)
    filtered = (load - load0[None, :]) / (gains.filter_alpha * horizon)
    return np.abs(mean_rate - targets[None, :] - drift - filtered)


def threshold_bound_violations(
    trace: list[RoundTrace], gains: ControllerGains, delta0
) -> int:
    """Count realized thresholds outside their guaranteed envelope.

    The envelope uses each client's own empirical trigger-distance
    ceiling, taken from the recorded distances.
    """
    if not trace or not trace[0].has_per_client:
        raise ContractViolationError("trace was recorded without per-client columns")
    delta = np.stack([row.delta for row in trace])
    distance = np.stack([row.distance for row in trace])
    n_clients = delta.shape[1]
    delta0 = np.broadcast_to(np.asarray(delta0, dtype=float), (n_clients,))
    ceilings = distance.max(axis=0)
    violations = 0
    for i in range(n_clients):
        lower, upper = threshold_bounds(float(delta0[i]), gains, float(ceilings[i]))
        realized = np.concatenate(([delta0[i]], delta[:, i]))
        violations += int(np.sum((realized < lower) | (realized > upper)))
    return violations


def report(trace: list[RoundTrace], cfg) -> ExperimentReport:
    """Reduce a finished run to its headline numbers.

    ``cfg`` is the run's configuration; controller diagnostics are only
    filled in for controller-driven runs recorded with per-client
    columns, and the events-to-target entry only when the configuration
    names a target metric and value.
    """
    if not trace:
        return ExperimentReport(0, 0, None, None, None, None, None, None)
    events = None
    if cfg.target_metric is not None and cfg.target_value is not None:
        events = events_to_target(trace, cfg.target_metric, cfg.target_value)
    rates = average = identity = violations = None
    if trace[0].has_per_client:
        per_client = realized_rates(trace)
        rates = [float(r) for r in per_client]
        average = float(per_client.mean())
        if cfg.algorithm == "fedback" and not cfg.pin_threshold_zero:
            identity = float(
                identity_residual_matrix(
                    trace, cfg.gains, cfg.targets, cfg.delta0, cfg.load0
                ).max()
            )
            violations = threshold_bound_violations(trace, cfg.gains, cfg.delta0)
    last = trace[-1]
    return ExperimentReport(
        rounds=len(trace),
        total_events=last.cumulative_events,
        events_to_target=events,
        realized_rates=rates,
        network_average_rate=average,
        identity_max_residual=identity,
        delta_bound_violations=violations,
        final_residuals=(last.grad_norm_global, last.lagrangian, last.F_theta, last.f_omega),
    )


def write_report(rep: ExperimentReport, path) -> None:
    Path(path).write_text(json.dumps(rep.to_dict(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# trace serialization


def emit_trace(trace: list[RoundTrace], path, per_client: bool = True) -> None:
    """Write a trace file; see the module docstring for the format.

    ``per_client`` controls whether the wide per-client columns are
    written; dropping them bounds file size for large federations.
    """
    columns = list(_BASE_COLUMNS)
    n_clients = None
    if per_client and trace and trace[0].has_per_client:
        n_clients = trace[0].fired.shape[0]
        for prefix in ("fired", "load", "delta", "dist"):
            columns.extend(f"{prefix}_{i}" for i in range(n_clients))
    lines = [",".join(columns)]
    for row in trace:
        fields = [
            str(row.round),
            str(row.selected_count),
            str(row.cumulative_events),
            _fmt(row.omega_norm),
            _fmt(row.grad_norm_global),
            _fmt(row.lagrangian),
            _fmt(row.F_theta),
            _fmt(row.f_omega),
            ";".join(str(i) for i in row.selected),
        ]
        if n_clients is not None:
            if not row.has_per_client:
                raise ContractViolationError("trace mixes rows with and without per-client data")
            fields.extend(str(int(v)) for v in row.fired)
            fields.extend(_fmt(v) for v in row.load)
            fields.extend(_fmt(v) for v in row.delta)
            fields.extend(_fmt(v) for v in row.distance)
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def load_trace(path) -> list[RoundTrace]:
    """Read a trace file written by :func:`emit_trace`."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise TraceFormatError(f"{path}: empty file, expected a header row")
    header = lines[0].split(",")
    if header[: len(_BASE_COLUMNS)] != list(_BASE_COLUMNS):
        raise TraceFormatError(f"{path}: unrecognized header")
    extra = header[len(_BASE_COLUMNS) :]
    n_clients = len(extra) // 4 if extra else 0
    if extra and (len(extra) != 4 * n_clients or extra[0] != "fired_0"):
        raise TraceFormatError(f"{path}: malformed per-client columns")
    trace = []
    for line_no, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        if len(fields) != len(header):
            raise TraceFormatError(
                f"{path} row {line_no}: expected {len(header)} fields, found {len(fields)}"
            )
        try:
            selected = tuple(int(v) for v in fields[8].split(";") if v)
            kwargs = {}
            if n_clients:
                base = len(_BASE_COLUMNS)
                raw = fields[base:]
                kwargs["fired"] = np.array([int(v) for v in raw[:n_clients]])
                kwargs["load"] = np.array([float(v) for v in raw[n_clients : 2 * n_clients]])
                kwargs["delta"] = np.array([float(v) for v in raw[2 * n_clients : 3 * n_clients]])
                kwargs["distance"] = np.array([float(v) for v in raw[3 * n_clients :]])
            trace.append(
                RoundTrace(
                    round=int(fields[0]),
                    selected=selected,
                    selected_count=int(fields[1]),
                    cumulative_events=int(fields[2]),
                    omega_norm=float(fields[3]),
                    grad_norm_global=float(fields[4]),
                    lagrangian=float(fields[5]),
                    F_theta=float(fields[6]),
                    f_omega=float(fields[7]),
                    **kwargs,
                )
            )
        except (ValueError, ContractViolationError) as exc:
            raise TraceFormatError(f"{path} row {line_no}: {exc}") from exc
    return trace
