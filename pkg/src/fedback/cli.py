"""Command-line entry points.

Subcommands:

* ``run``       execute one configuration, write its trace and report
* ``sweep``     grid a configuration over a list of target rates
* ``compare``   matched-seed event-triggered vs random-sampling report
* ``validate``  re-check the closed-loop invariants on a finished trace

Configurations are JSON files holding RunConfig fields (see the README
for the schema); explicit flags override config values.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .engine import RunConfig, build_problem, quadratic_optimum, run_experiment
from .errors import ContractViolationError, TraceFormatError
from .harness import (
    emit_trace,
    identity_residual_matrix,
    load_trace,
    report,
    threshold_bound_violations,
    write_report,
)

SWEEP_RATES = (0.05, 0.1, 0.15, 0.2, 0.4, 0.6)
IDENTITY_TOLERANCE = 1e-9


def _load_config(path: str) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ContractViolationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ContractViolationError(f"config {path} must hold a JSON object")
    return raw


def _apply_overrides(raw: dict, args: argparse.Namespace) -> dict:
    for flag, key in (
        ("seed", "seed"),
        ("algorithm", "algorithm"),
        ("rounds", "n_rounds"),
        ("clients", "n_clients"),
        ("rho", "rho"),
        ("rate", "targets"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            raw[key] = value
    return raw


def _write_outputs(trace, cfg: RunConfig, out_dir: Path, stem: str, light: bool) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    emit_trace(trace, out_dir / f"{stem}.csv", per_client=not light)
    write_report(report(trace, cfg), out_dir / f"{stem}_report.json")


def cmd_run(args: argparse.Namespace) -> int:
    raw = _apply_overrides(_load_config(args.config), args)
    cfg = RunConfig.from_dict(raw)
    trace = run_experiment(cfg)
    out = Path(args.out)
    _write_outputs(trace, cfg, out, "trace", args.light_trace)
    rep = report(trace, cfg)
    print(f"algorithm={cfg.algorithm} rounds={rep.rounds} events={rep.total_events}")
    if rep.network_average_rate is not None:
        print(f"network average participation rate: {rep.network_average_rate:.4f}")
    if rep.final_residuals is not None:
        print(f"final global loss: {rep.final_residuals[3]:.6e}")
    print(f"wrote {out / 'trace.csv'} and {out / 'trace_report.json'}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    raw = _apply_overrides(_load_config(args.config), args)
    rates = [float(r) for r in args.rates.split(",") if r.strip()]
    out = Path(args.out)
    print(f"{'rate':>6} {'events':>8} {'avg rate':>9} {'final loss':>14}")
    for rate in rates:
        run_raw = dict(raw)
        run_raw["targets"] = rate
        cfg = RunConfig.from_dict(run_raw)
        trace = run_experiment(cfg)
        stem = f"trace_rate{rate:g}"
        _write_outputs(trace, cfg, out, stem, args.light_trace)
        rep = report(trace, cfg)
        avg = "-" if rep.network_average_rate is None else f"{rep.network_average_rate:9.4f}"
        print(f"{rate:6.2f} {rep.total_events:8d} {avg} {rep.final_residuals[3]:14.6e}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    if args.algorithm == "fedback":
        raise ContractViolationError("pick a random-sampling baseline to compare against")
    raw = _apply_overrides(_load_config(args.config), args)
    raw["algorithm"] = "fedback"
    cfg = RunConfig.from_dict(raw)
    if cfg.data is None or cfg.data.task != "regression":
        raise ContractViolationError("compare needs the quadratic (regression) benchmark")
    objectives, _, _ = build_problem(cfg)
    _, f_star = quadratic_optimum(objectives)
    target = f_star + args.target_gap
    out = Path(args.out)
    results = {}
    for algorithm in ("fedback", args.algorithm):
        run_raw = dict(raw)
        run_raw["algorithm"] = algorithm
        run_raw["target_metric"] = "loss"
        run_raw["target_value"] = target
        run_cfg = RunConfig.from_dict(run_raw)
        trace = run_experiment(run_cfg, objectives=objectives)
        _write_outputs(trace, run_cfg, out, f"trace_{algorithm}", args.light_trace)
        losses = np.array([row.f_omega for row in trace])
        window = min(args.window, len(losses))
        rep = report(trace, run_cfg)
        results[algorithm] = {
            "events_to_target": rep.events_to_target,
            "total_events": rep.total_events,
            "final_loss_gap": float(losses[-1] - f_star) if len(losses) else None,
            "loss_std_final_window": float(losses[-window:].std()) if window else None,
        }
    (out / "compare.json").write_text(
        json.dumps({"seed": cfg.seed, "target_loss": target, "results": results}, indent=2)
        + "\n"
    )
    for name, row in results.items():
        reached = row["events_to_target"]
        print(
            f"{name:>8}: events_to_target={'never' if reached is None else reached} "
            f"loss_std={row['loss_std_final_window']:.3e}"
        )
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_dict(_load_config(args.config))
    trace = load_trace(args.trace)
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        if ok:
            print(f"PASS {name}")
        else:
            failures += 1
            print(f"FAIL {name}{': ' + detail if detail else ''}")

    if not trace:
        print("trace is empty; nothing to validate")
        return 0
    counts_ok = all(row.selected_count == len(row.selected) for row in trace)
    check("selection counts match selections", counts_ok)
    running = np.cumsum([row.selected_count for row in trace])
    cumulative = np.array([row.cumulative_events for row in trace])
    check(
        "cumulative events equal running selection totals",
        bool(np.array_equal(running, cumulative)),
    )
    if not trace[0].has_per_client:
        print("trace has no per-client columns; controller checks skipped")
        return 1 if failures else 0
    fired_sums = np.array([int(row.fired.sum()) for row in trace])
    check(
        "per-client bits sum to the selection count",
        bool(np.array_equal(fired_sums, np.array([row.selected_count for row in trace]))),
    )
    loads = np.stack([row.load for row in trace])
    check("loads stay in [0, 1]", bool(np.all((loads >= 0) & (loads <= 1))))
    if cfg.algorithm == "fedback" and not cfg.pin_threshold_zero:
        residual = float(
            identity_residual_matrix(trace, cfg.gains, cfg.targets, cfg.delta0, cfg.load0).max()
        )
        check(
            f"participation identity residual <= {IDENTITY_TOLERANCE:g}",
            residual <= IDENTITY_TOLERANCE,
            f"max residual {residual:.3e}",
        )
        violations = threshold_bound_violations(trace, cfg.gains, cfg.delta0)
        check("thresholds stay inside their envelope", violations == 0, f"{violations} violations")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedback", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, require_core: bool = False) -> None:
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, required=require_core, help="run seed")
        p.add_argument("--algorithm", required=require_core, help="algorithm name")
        p.add_argument("--out", required=require_core, default=None, help="output directory")
        p.add_argument("--rounds", type=int, default=None, help="override round count")
        p.add_argument("--clients", type=int, default=None, help="override client count")
        p.add_argument("--rho", type=float, default=None, help="override proximal weight")
        p.add_argument("--rate", type=float, default=None, help="override the shared target rate")
        p.add_argument(
            "--light-trace", action="store_true", help="drop per-client trace columns"
        )

    p_run = sub.add_parser("run", help="execute one configuration")
    add_common(p_run)
    p_run.set_defaults(func=cmd_run, out="runs")

    p_sweep = sub.add_parser("sweep", help="grid a configuration over target rates")
    add_common(p_sweep)
    p_sweep.add_argument(
        "--rates",
        default=",".join(str(r) for r in SWEEP_RATES),
        help="comma-separated target rates",
    )
    p_sweep.set_defaults(func=cmd_sweep, out="sweep")

    p_cmp = sub.add_parser("compare", help="matched-seed comparison against a baseline")
    add_common(p_cmp, require_core=True)
    p_cmp.add_argument("--target-gap", type=float, default=1e-3, help="loss gap defining success")
    p_cmp.add_argument("--window", type=int, default=500, help="final window for loss variance")
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate", help="re-check invariants on a finished trace")
    p_val.add_argument("--config", required=True, help="JSON config the trace was run with")
    p_val.add_argument("--trace", required=True, help="trace file to validate")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ContractViolationError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
