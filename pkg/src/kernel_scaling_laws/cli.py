"""ksl: learning-curve theory, simulation and coefficient estimation from the shell."""
from pathlib import Path
from typing import Any, Optional, Sequence
import argparse
import json
import logging
import sys

import numpy as np
from pydantic import ValidationError

from kernel_scaling_laws.artifacts import atomic_write, read_curve, write_curve, write_json
from kernel_scaling_laws.estimation import (
    cumulative_table,
    estimate_from_data,
    fit_powerlaw,
    load_labels,
    load_matrix,
)
from kernel_scaling_laws.exceptions import ConvergenceError, KernelScalingError, TrainerError
from kernel_scaling_laws.rates import TABLE_ONE, compare
from kernel_scaling_laws.schema import LearningCurve, RunConfig
from kernel_scaling_laws.simulator import empirical_learning_curve
from kernel_scaling_laws.state_evolution import (
    fit_curve_slope,
    solve_point,
    theory_sweep,
)

logger = logging.getLogger(__name__)

COMMANDS = ("theory-rates", "se-solve", "se-sweep", "simulate", "estimate", "fit-curve")
_FLAG_ALIASES = {"lambda": "lam"}


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    parser.add_argument("--config", help="key=value file; flags take precedence")
    parser.add_argument("--alpha", type=float, help="capacity coefficient (> 1)")
    parser.add_argument("--r", type=float, help="source coefficient (>= 0)")
    parser.add_argument("--p-cut", dest="p_cut", type=int, help="spectrum truncation (default 10000)")
    parser.add_argument("--method", choices=["maxmargin", "svm", "hinge", "ridge"])
    parser.add_argument("--n", help="sample counts: 128:8192:x2, 100:1000:+100 or 128,256")
    regularization = parser.add_mutually_exclusive_group()
    regularization.add_argument("--lambda", dest="lam", type=float, help="fixed regularization")
    regularization.add_argument("--ell", type=float, help="lambda = n^-ell")
    regularization.add_argument("--optimal", action="store_true", help="optimize lambda at every n")
    parser.add_argument("--lambda-grid", dest="lambda_grid", help="lambda grid for --optimal")
    parser.add_argument("--sigma", type=float, help="label noise standard deviation")
    parser.add_argument("--seeds", type=int, help="datasets per sample count")
    parser.add_argument("--seed", type=int, help="first dataset seed")
    parser.add_argument("--excess", action="store_true", help="subtract the label-noise error floor")
    parser.add_argument("--fit", action="store_true", help="report the log-log slope of the curve")
    parser.add_argument("--table", action="store_true", help="print the reference rate table")
    parser.add_argument("--input", help="matrix or curve file")
    parser.add_argument("--labels", help="label vector file")
    parser.add_argument("--format", choices=["csv", "kmx"])
    parser.add_argument("--gram", action="store_true", help="--input already holds a gram matrix")
    parser.add_argument("--kernel", choices=["rbf", "polynomial", "linear"])
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--degree", type=int)
    parser.add_argument("--offset", type=float)
    parser.add_argument("--no-normalize", dest="normalize", action="store_false")
    parser.add_argument("--teacher-method", dest="teacher_method", choices=["hinge", "logistic"])
    parser.add_argument("--range1", help="capacity fit range k_min:k_max")
    parser.add_argument("--range2", help="source fit range k_min:k_max")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, help="worker processes (default $KSL_JOBS or 1)")
    parser.add_argument("--log-level", dest="log_level", help="default $KSL_LOG_LEVEL or WARNING")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--damping", type=float)
    parser.add_argument("--max-iter", dest="max_iter", type=int)
    parser.add_argument("--svm-tol", dest="svm_tol", type=float)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ksl", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_parser()
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common], argument_default=argparse.SUPPRESS)
    return parser


def read_config_file(path: str) -> dict[str, str]:
    """Parse key=value lines; '#' starts a comment."""
    values = {}
    for line_number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{line_number}: expected key=value, got {line!r}")
        key = key.strip().lstrip("-").replace("-", "_")
        values[_FLAG_ALIASES.get(key, key)] = value.strip()
    return values


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    parser = build_parser()
    namespace = vars(parser.parse_args(argv))
    command = namespace.pop("command")
    config_path = namespace.pop("config", None)
    try:
        values: dict[str, Any] = read_config_file(config_path) if config_path else {}
        values.pop("command", None)
        values.update(namespace)
        return RunConfig(command=command, **values)
    except (OSError, ValueError, ValidationError) as exc:
        parser.error(str(exc))


def _summary(config: RunConfig, **fields: Any) -> dict[str, Any]:
    return {"command": config.command, "config": config.model_dump(mode="json"), **fields}


def _curve_summary(curve: LearningCurve, fit: bool) -> dict[str, Any]:
    summary: dict[str, Any] = {
        "points": len(curve.points),
        "failures": [failure.model_dump() for failure in curve.failures],
    }
    if fit and len(curve.points) >= 2:
        summary["slope"] = fit_curve_slope(curve)
    return summary


def _theory_method(config: RunConfig) -> str:
    return "maxmargin" if config.method == "svm" else config.method


def _run_theory_rates(config: RunConfig, out: Path) -> dict[str, Any]:
    report = compare(config.alpha, config.r)
    if config.table:
        print("dataset,alpha,r,a_svm,a_ridge,a_svm_table,a_ridge_table")
        for name, alpha, r, svm_table, ridge_table in TABLE_ONE:
            row = compare(alpha, r)
            print(f"{name},{alpha},{r},{row.a_svm:.4f},{row.a_ridge_opt:.4f},{svm_table},{ridge_table}")
    write_json(out / "rates.json", report)
    return _summary(config, rates=report.model_dump(mode="json"))


def _run_se_solve(config: RunConfig, out: Path) -> dict[str, Any]:
    n = config.n[0]
    point, params = solve_point(
        _theory_method(config), config.power_law(), config.lambda_rule(), config.sigma, config.solver_config(), n
    )
    record = {"point": point, "params": params}
    write_json(out / "se_solve.json", record)
    fields: dict[str, Any] = {"n": n, "error": point.value, "lambda": point.lam}
    fields.update(eta=params.eta, m=params.m, q=params.q, z=params.z)
    if params.diagnostics is not None:
        fields.update(iterations=params.diagnostics.iterations, clamped=params.diagnostics.clamped)
    return _summary(config, **fields)


def _run_se_sweep(config: RunConfig, out: Path) -> dict[str, Any]:
    curve = theory_sweep(
        _theory_method(config),
        config.power_law(),
        config.n,
        config.lambda_rule(),
        config.sigma,
        config.solver_config(),
        jobs=config.jobs,
    )
    write_curve(out / "curve.csv", curve)
    write_json(
        out / "diagnostics.json",
        {"failures": curve.failures, "points": curve.points, "solves": curve.diagnostics},
    )
    return _summary(config, **_curve_summary(curve, config.fit))


def _run_simulate(config: RunConfig, out: Path) -> dict[str, Any]:
    method = "svm" if config.method == "maxmargin" else config.method
    curve = empirical_learning_curve(
        method,
        config.power_law(),
        config.n,
        seeds=config.seeds,
        lambda_rule=config.lambda_rule(),
        sigma=config.sigma,
        base_seed=config.seed,
        excess=config.excess,
        tol=config.svm_tol,
        jobs=config.jobs,
    )
    write_curve(out / "curve.csv", curve)
    write_curve(out / "records.csv", curve, per_seed=True)
    return _summary(config, **_curve_summary(curve, config.fit))


def _run_estimate(config: RunConfig, out: Path) -> dict[str, Any]:
    X = load_matrix(config.input, config.format)
    labels = load_labels(config.labels)
    estimate, spectrum = estimate_from_data(
        X,
        labels,
        config.kernel_spec(),
        config.range1,
        config.range2,
        teacher_method=config.teacher_method,
        gram=config.gram,
    )
    write_json(out / "estimate.json", estimate)
    rows = cumulative_table(spectrum)
    lines = ["k,C1,C2"] + [f"{int(k)},{c1!r},{c2!r}" for k, c1, c2 in rows.tolist()]
    atomic_write(out / "cumulative.csv", "\n".join(lines) + "\n")
    return _summary(config, alpha_hat=estimate.alpha_hat, r_hat=estimate.r_hat, outside_domain=estimate.outside_domain)


def _run_fit_curve(config: RunConfig, out: Path) -> dict[str, Any]:
    curve = read_curve(config.input)
    k_min, k_max = config.range1 or (None, None)
    fit = fit_powerlaw(curve.ns, curve.values, k_min, k_max)
    return _summary(config, slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared)


_HANDLERS = {
    "theory-rates": _run_theory_rates,
    "se-solve": _run_se_solve,
    "se-sweep": _run_se_sweep,
    "simulate": _run_simulate,
    "estimate": _run_estimate,
    "fit-curve": _run_fit_curve,
}


def _error_record(exc: BaseException, exit_code: int) -> str:
    record: dict[str, Any] = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code}
    if isinstance(exc, ConvergenceError):
        record.update(iterations=exc.iterations, residuals=exc.residuals, damping_trace=exc.damping_trace)
    return json.dumps(record, sort_keys=True)


def run(config: RunConfig) -> int:
    """Execute one command; 0 on success, 1 on domain errors, 2 on non-convergence."""
    out = Path(config.out)
    try:
        summary = _HANDLERS[config.command](config, out)
    except (ConvergenceError, TrainerError) as exc:
        logger.error(f"{config.command} did not converge: {exc}")
        print(_error_record(exc, 2), file=sys.stderr)
        return 2
    except (KernelScalingError, ValueError, OSError) as exc:
        logger.error(f"{config.command} failed: {exc}")
        print(_error_record(exc, 1), file=sys.stderr)
        return 1

    failures = summary.get("failures") or []
    print(json.dumps(summary, sort_keys=True, default=_json_default))
    if any(failure["error"] in {"ConvergenceError", "TrainerFailures"} for failure in failures):
        return 2
    return 0


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    config = parse_args(argv)
    logging.basicConfig(
        level=config.log_level.upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
