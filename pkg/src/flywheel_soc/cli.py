"""Command-line front end.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 bound violation
(``--check``).
"""
from __future__ import annotations

import argparse
import io
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import __version__
from .approx import (
    BOUND_SLACK,
    ApproxMode,
    bound_report,
    error_bounds,
    simulate_approx,
)
from .exact import SimulationMode, simulate_exact
from .io import (
    BOUND_COLUMNS,
    CLASSIFY_COLUMNS,
    COMPARE_COLUMNS,
    CONFIG_KEYS,
    TRACE_COLUMNS,
    FormatError,
    load_config,
    load_profile,
    params_from_mapping,
    read_trace_csv,
    trace_rows,
    write_table,
)
from .model import (
    EnergyTrace,
    FlywheelParams,
    ParameterError,
    PowerProfile,
    classify_transition,
    validate_params,
    validate_profile,
)
from .oracle import OracleConfig, integrate_ode, integrate_physical, simulate_baseline

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_BOUND = 0, 1, 2, 3

ENGINES = ("exact", "approx-full", "approx-truncated", "baseline", "ode-oracle",
           "physical-oracle")


@dataclass(frozen=True)
class RunConfig:
    params: FlywheelParams
    engine: str = "exact"
    clamp: bool = False
    output_format: str = "csv"
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ParameterError(f"unknown engine {self.engine!r}")
        if self.output_format not in ("csv", "json"):
            raise ParameterError(f"unknown output format {self.output_format!r}")


def run_engine(config: RunConfig, profile: PowerProfile, engine: Optional[str] = None,
               clamp: Optional[bool] = None) -> EnergyTrace:
    engine = engine or config.engine
    clamp = config.clamp if clamp is None else clamp
    params = config.params
    mode = SimulationMode.CLAMP if clamp else SimulationMode.UNCONSTRAINED
    if engine == "exact":
        return simulate_exact(profile, params, mode)
    if engine == "approx-full":
        return simulate_approx(profile, params, ApproxMode.FULL, mode)
    if engine == "approx-truncated":
        return simulate_approx(profile, params, ApproxMode.TRUNCATED, mode)
    if engine == "baseline":
        return simulate_baseline(profile, params, clamp=clamp)
    if engine == "ode-oracle":
        return integrate_ode(profile, params, config.oracle, clamp=clamp)
    if engine == "physical-oracle":
        return integrate_physical(profile, params, config.oracle, clamp=clamp)
    raise ParameterError(f"unknown engine {engine!r}")


def _bounds(profile: PowerProfile, params: FlywheelParams, n: int) -> list:
    return [float(b) for b in error_bounds(n, params.delta, params.T_loss, profile, params.e_d,
                                           params.P_prev_init)]


def _trace_from_csv(text: str, params: FlywheelParams, profile: PowerProfile) -> EnergyTrace:
    cols = read_trace_csv(text)
    try:
        energy = [float(v) for v in cols["e_j"]]
    except ValueError as exc:
        raise FormatError(f"approximate trace: {exc}") from None
    if len(energy) != len(profile) + 1:
        raise FormatError(
            f"approximate trace has {len(energy)} rows, expected {len(profile) + 1}")
    slots = np.arange(len(energy))
    return EnergyTrace(slot=slots, time=slots * params.delta, energy=energy)


def run(command: str, config: RunConfig, profile: PowerProfile, check: bool = False,
        approx_trace: Optional[str] = None) -> tuple:
    """Execute one subcommand; returns ``(exit_status, output_text)``."""
    params = validate_params(config.params)
    validate_profile(profile, params)
    out = io.StringIO()
    status = EXIT_OK

    if command == "simulate":
        trace = run_engine(config, profile)
        write_table(trace_rows(trace), TRACE_COLUMNS, config.output_format, out)

    elif command == "compare":
        trace = run_engine(config, profile)
        ref = run_engine(config, profile, engine="exact")
        bounds = _bounds(profile, params, len(trace))
        rows = trace_rows(trace)
        for row, e_ref, bound in zip(rows, ref.energy, bounds):
            gap = abs(float(e_ref) - row["e_j"])
            row.update(e_ref_j=float(e_ref), gap_j=gap, bound_j=bound)
            if check and gap > bound + BOUND_SLACK:
                status = EXIT_BOUND
        write_table(rows, COMPARE_COLUMNS, config.output_format, out)

    elif command == "bound":
        exact = simulate_exact(profile, params, SimulationMode.UNCONSTRAINED)
        if approx_trace is not None:
            approx = _trace_from_csv(approx_trace, params, profile)
        else:
            if config.engine not in ("approx-full", "approx-truncated"):
                raise ParameterError("bound requires --engine approx-full or approx-truncated")
            approx = run_engine(config, profile, clamp=False)
        report = bound_report(exact, approx, profile, params)
        rows = [{
            "k": e.k,
            "t_s": e.k * params.delta,
            "e_ref_j": float(exact.energy[e.k]),
            "e_j": float(approx.energy[e.k]),
            "gap_j": e.gap,
            "bound_j": e.bound,
            "satisfied": e.satisfied,
        } for e in report.entries]
        write_table(rows, BOUND_COLUMNS, config.output_format, out)
        if check and not report.all_satisfied:
            status = EXIT_BOUND

    elif command == "classify":
        rows = []
        P_prev = params.P_prev_init
        for k, P_in in enumerate(profile.powers, start=1):
            tr = classify_transition(P_in, P_prev, params.delta, params.T_cont,
                                     params.e_c, params.e_d)
            rows.append({
                "k": k, "p_in_w": P_in, "p_prev_w": P_prev, "case": str(tr.case_tag),
                "eta_in": tr.eta_in, "eta_prev": tr.eta_prev, "eta_eff": tr.eta_eff,
                "t_change_s": tr.t_change,
            })
            P_prev = P_in
        write_table(rows, CLASSIFY_COLUMNS, config.output_format, out)

    else:
        raise ParameterError(f"unknown command {command!r}")
    return status, out.getvalue()


class _Parser(argparse.ArgumentParser):
    # usage errors are validation errors, not I/O errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", required=True, help="CSV with header slot,power_w")
    common.add_argument("--config", help="key=value parameter file")
    for key in CONFIG_KEYS:
        common.add_argument("--" + key.replace("_", "-"), dest=key, type=float,
                            help=f"override {key} from the config file")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-o", "--output", help="output path (default: stdout)")
    common.add_argument("--substeps", type=int, default=OracleConfig.substeps_per_slot,
                        help="RK4 steps per smooth piece of a slot (oracle engines)")
    common.add_argument("--quad-tol", type=float, default=OracleConfig.quad_tol)

    parser = _Parser(prog="flywheel-soc",
                     description="Flywheel state-of-charge evolution under slotted power commands.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="run one engine and emit its trace")
    p.add_argument("--engine", choices=ENGINES, default="exact")
    p.add_argument("--clamp", action="store_true", help="clip energy to [0, E_cap] each slot")

    p = sub.add_parser("compare", parents=[common],
                       help="run an engine alongside the exact recursion, with gap and bound columns")
    p.add_argument("--engine", choices=ENGINES, default="approx-truncated")
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--check", action="store_true", help="exit 3 if any gap exceeds the bound")

    p = sub.add_parser("bound", parents=[common], help="per-slot error-bound report")
    p.add_argument("--engine", choices=("approx-full", "approx-truncated"),
                   default="approx-truncated")
    p.add_argument("--check", action="store_true", help="exit 3 on any violation")
    p.add_argument("--approx-trace",
                   help="check this trace CSV instead of computing the approximate trace")

    sub.add_parser("classify", parents=[common], help="per-slot transition table")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        values = load_config(args.config) if args.config else {}
        approx_text = None
        if getattr(args, "approx_trace", None):
            with open(args.approx_trace, newline="") as fh:
                approx_text = fh.read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FormatError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        for key, name in CONFIG_KEYS.items():
            if getattr(args, key) is not None:
                values[name] = getattr(args, key)
        params = validate_params(params_from_mapping(values))
        config = RunConfig(params=params, engine=getattr(args, "engine", "exact"),
                           clamp=getattr(args, "clamp", False), output_format=args.format,
                           oracle=OracleConfig(quad_tol=args.quad_tol,
                                               substeps_per_slot=args.substeps))
        profile = load_profile(args.profile, params.delta, params.P_rated)
        status, text = run(args.command, config, profile, check=getattr(args, "check", False),
                           approx_trace=approx_text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FormatError, ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    try:
        if args.output:
            with open(args.output, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if status == EXIT_BOUND:
        print("error: gap exceeds error bound", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
