"""Command-line entry point for solving, estimating and simulating.

Subcommands:

* ``solve``     problem.json -> report.json (+ validation block with --truth)
* ``estimate``  measurements.csv -> problem.json
* ``simulate``  sweep-config.json -> sweep.csv + regression side-file
* ``spectrum``  problem.json -> eigenvalue listing on stdout

All randomness funnels through the single ``--seed`` flag (default 0), so
every run is reproducible byte for byte.  Exit codes: 0 success, 2 input
validation failure, 3 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .quat import UnitQuaternion
from .qmat import (
    ConvergenceError,
    PowerIterationOptions,
    QuatVector,
    SpectrumPairingError,
    hermitian_spectrum,
    power_iteration,
)
from .solver import (
    AttitudeVector,
    DegenerateEigenvectorError,
    ReferenceSet,
    attitude_error,
    bounds_report,
    build_relative_matrix,
    problem_from_json,
    problem_to_json,
    report_to_json,
    solve,
)
from .relative import (
    AmbiguousSolutionError,
    UnobservableRotationError,
    read_measurements_csv,
    relative_matrix_from_measurements,
    resign_truth_to_estimate,
)
from .simulate import (
    default_sweep_config,
    monte_carlo_sweep,
    sweep_config_from_json,
    write_regression_json,
    write_sweep_csv,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3


class _CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except OSError as exc:
        raise _CliError(f"cannot read {path}: {exc}", EXIT_VALIDATION) from exc
    except json.JSONDecodeError as exc:
        raise _CliError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}",
                        EXIT_VALIDATION) from exc


def _dump_json(path: str, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _options(args) -> PowerIterationOptions:
    kwargs = {"seed": args.seed}
    if getattr(args, "tol", None) is not None:
        kwargs["residual_tol"] = args.tol
    return PowerIterationOptions(**kwargs)


def _parse_reference(text: str) -> tuple[int, UnitQuaternion]:
    try:
        index_part, _, quat_part = text.partition("=")
        index = int(index_part)
        comps = [float(c) for c in quat_part.split(",")]
        if len(comps) != 4:
            raise ValueError(f"expected 4 components, got {len(comps)}")
        return index, UnitQuaternion(*comps)
    except ValueError as exc:
        raise _CliError(
            f"invalid --reference '{text}' (expected <index>=<w,x,y,z>): {exc}",
            EXIT_VALIDATION) from exc


def _load_truth(path: str) -> AttitudeVector:
    obj = _load_json(path)
    if not isinstance(obj, dict) or "attitudes" not in obj:
        raise _CliError(f"{path}: truth JSON must contain an 'attitudes' array",
                        EXIT_VALIDATION)
    try:
        return AttitudeVector(np.asarray(obj["attitudes"], dtype=float))
    except ValueError as exc:
        raise _CliError(f"{path}: {exc}", EXIT_VALIDATION) from exc


def _cmd_solve(args) -> int:
    o_hat, refs = problem_from_json(_load_json(args.input))
    opts = _options(args)
    report = solve(o_hat, refs, opts)
    payload = report_to_json(report)

    n = o_hat.n
    print(f"sensors:      {n}")
    print(f"lambda1:      {report.lambda1:.12g}  (lambda1/N = {report.lambda1 / n:.9f})")
    print(f"iterations:   {report.iterations}")
    print(f"C1:           {report.c1_value:.6g}  (C1/N^2 = {100.0 * report.c1_value / n**2:.4g} %)")
    if report.c2_value is not None:
        print(f"C2:           {report.c2_value:.6g}")
    print(f"gauge fixed:  {report.gauge_fixed}"
          + (f"  (references: {list(refs.indices)})" if len(refs) else "  (no references)"))

    if args.truth is not None:
        truth = _load_truth(args.truth)
        if len(truth) != n:
            raise _CliError(f"truth has {len(truth)} attitudes but the problem "
                            f"has {n} sensors", EXIT_VALIDATION)
        # estimated matrices carry an unobservable entry-sign gauge; move the
        # truth into it so the diagnostics measure real error, not sign flips
        o_true, eps = resign_truth_to_estimate(build_relative_matrix(truth), o_hat)
        r_true = QuatVector(truth.data * eps[:, None])
        pair = power_iteration(o_hat.matrix, opts)
        bounds = bounds_report(o_hat, o_true,
                               r_hat=pair.vector.scaled(math.sqrt(n)),
                               r=r_true)
        e_q = attitude_error(report.attitudes, truth)
        payload["validation"] = {
            "e_O": bounds.e_O,
            "e_Q": e_q,
            "e_R": bounds.e_R,
            "lambda1_over_N": bounds.lambda1_over_N,
            "max_tail_over_N": bounds.max_tail_over_N,
            "eigengap": bounds.eigengap,
            "dk_bound": bounds.dk_bound,
            "weyl_ok": bounds.weyl_ok,
            "dk_ok": bounds.dk_ok,
        }
        print(f"e(O):         {100.0 * bounds.e_O:.6g} %")
        print(f"e(Q):         {100.0 * e_q:.6g} %")
        print(f"eigengap:     {bounds.eigengap:.9g}")
        print(f"weyl_ok:      {bounds.weyl_ok}   dk_ok: {bounds.dk_ok}")

    _dump_json(args.output, payload)
    print(f"report written to {args.output}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    measurements = read_measurements_csv(args.input)
    n = len(measurements)
    if args.reference:
        entries = sorted(_parse_reference(t) for t in args.reference)
    else:
        entries = [(0, UnitQuaternion.identity())]
    for index, _ in entries:
        if index >= n:
            raise _CliError(f"reference index {index} out of range for {n} sensors",
                            EXIT_VALIDATION)
    refs = ReferenceSet(tuple(i for i, _ in entries), tuple(a for _, a in entries))
    o_hat = relative_matrix_from_measurements(measurements)
    _dump_json(args.output, problem_to_json(o_hat, refs))
    print(f"estimated {n * (n - 1) // 2} pairwise attitudes for {n} sensors")
    print(f"problem written to {args.output}")
    return EXIT_OK


def _cmd_simulate(args) -> int:
    if args.input is not None:
        config = sweep_config_from_json(_load_json(args.input))
        if args.seed_given:
            config = dataclasses.replace(config, seed=args.seed)
    else:
        config = default_sweep_config(seed=args.seed)
    result = monte_carlo_sweep(config)
    write_sweep_csv(args.output, result)
    regression_path = args.regression_output or str(
        Path(args.output).with_suffix(".regression.json"))
    write_regression_json(regression_path, result)
    usable = sum(1 for r in result.rows if not r.failed)
    print(f"sweep: {len(result.rows)} rows ({usable} usable, "
          f"{result.failures} failures) -> {args.output}")
    if result.regression is not None:
        print(f"regression: slope {result.regression.slope:.4f}, "
              f"intercept {result.regression.intercept:.4g}, "
              f"r2 {result.regression.r2:.4f} -> {regression_path}")
    else:
        print(f"regression: undefined (constant input error) -> {regression_path}")
    return EXIT_OK


def _cmd_spectrum(args) -> int:
    o_hat, _ = problem_from_json(_load_json(args.input))
    values = hermitian_spectrum(o_hat.matrix)
    print("eigenvalues (descending):")
    for v in values:
        print(f"  {v:.12g}")
    if len(values) > 1:
        print(f"eigengap d = lambda1 - lambda2 = {values[0] - values[1]:.12g}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quatsync",
        description="Sensor-network attitude synchronization from pairwise "
                    "relative attitudes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a problem file")
    p_solve.add_argument("--input", required=True, help="problem JSON")
    p_solve.add_argument("--output", required=True, help="report JSON to write")
    p_solve.add_argument("--truth", default=None,
                         help="ground-truth attitudes JSON; adds validation diagnostics")
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--tol", type=float, default=None,
                         help="power-iteration residual tolerance")
    p_solve.set_defaults(func=_cmd_solve)

    p_est = sub.add_parser("estimate",
                           help="build a problem file from field measurements")
    p_est.add_argument("--input", required=True, help="measurements CSV")
    p_est.add_argument("--output", required=True, help="problem JSON to write")
    p_est.add_argument("--reference", action="append", default=None,
                       metavar="IDX=W,X,Y,Z",
                       help="reference sensor attitude; repeatable "
                            "(default: sensor 0 = identity)")
    p_est.set_defaults(func=_cmd_estimate)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo noise sweep")
    p_sim.add_argument("--input", default=None,
                       help="sweep config JSON (default: stock 20-sensor study)")
    p_sim.add_argument("--output", required=True, help="sweep CSV to write")
    p_sim.add_argument("--regression-output", default=None,
                       help="regression JSON side-file "
                            "(default: derived from --output)")
    p_sim.add_argument("--seed", type=int, default=0,
                       help="overrides the config seed when given")
    p_sim.set_defaults(func=_cmd_simulate)

    p_spec = sub.add_parser("spectrum", help="print the full eigenvalue spectrum")
    p_spec.add_argument("--input", required=True, help="problem JSON")
    p_spec.set_defaults(func=_cmd_spectrum)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate":
        args.seed_given = ("--seed" in argv)
    try:
        return args.func(args)
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (UnobservableRotationError, AmbiguousSolutionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, DegenerateEigenvectorError, SpectrumPairingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
