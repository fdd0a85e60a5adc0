"""Command-line verifier: builds the operators on the requested sectors and
reports every identity as a scale-free residual in one JSON document.

Exit status is 0 when all suites pass, 1 when any fails and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import orjson
import pydantic
import scipy
from pydantic import ValidationError

from . import console
from .errors import ConfigurationError, QOpsError
from .models import (BetheRootReport, EnvironmentStamp, RunConfig, SuiteRecord, SuiteReport,
                     as_pair)
from .qkernel import root_of_unity_warnings
from .settings import Settings
from .suites import RunContext, Suite, SuiteFactory, point_label, q_operator

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def parse_complex(text: str) -> Tuple[float, float]:
    """'re,im' or 're' -> (re, im)."""
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return (float(parts[0]), 0.0)
        if len(parts) == 2:
            return (float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")


def parse_int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qops-verify",
        description="Verify transfer-matrix and Q-operator identities on charge sectors.")
    parser.add_argument("--sites", type=int, default=2, help="Number of lattice sites M.")
    sectors = parser.add_mutually_exclusive_group()
    sectors.add_argument("--sectors", type=parse_int_list, help="Sector degrees, e.g. 0,1,2.")
    sectors.add_argument("--sector-max", type=int, help="All sectors 0..L.")
    spin = parser.add_mutually_exclusive_group()
    spin.add_argument("--spin-int", type=int, help="Integer spin I (finite-dimensional mode).")
    spin.add_argument("--zeta", type=parse_complex, help="Complex zeta as 're,im'.")
    parser.add_argument("--q", type=parse_complex, help="Deformation parameter q as 're,im'.")
    parser.add_argument("--phi", type=parse_complex, help="Horizontal field phi as 're,im'.")
    grid = parser.add_mutually_exclusive_group()
    grid.add_argument("--lambda", dest="lambdas", type=parse_complex, action="append",
                      help="Spectral parameter (repeatable).")
    grid.add_argument("--lambda-circle", help="'r,n': n points on the circle of radius r.")
    parser.add_argument("--trunc-tol", type=float, help="Fock trace truncation tolerance.")
    parser.add_argument("--trunc-max", type=int, help="Maximum number of Fock terms.")
    parser.add_argument("--suites", default="all", help="Comma-separated suite names or 'all'.")
    parser.add_argument("--out", help="Report path ('-' or omitted for stdout).")
    parser.add_argument("--dump-matrices", help="Directory for <op>_l<l>.csv matrix dumps.")
    parser.add_argument("--precision-warn", action="store_true",
                        help="Report q close to a root of unity.")
    parser.add_argument("--workers", type=int, help="Thread pool size for parameter points.")
    parser.add_argument("--quiet", action="store_true", help="Silence status lines.")
    return parser


def _circle(text: str) -> List[Tuple[float, float]]:
    try:
        radius, count = text.split(",")
        radius, count = float(radius), int(count)
    except ValueError:
        raise ConfigurationError(f"--lambda-circle expects 'r,n', got {text!r}")
    if count < 1 or radius <= 0:
        raise ConfigurationError("--lambda-circle needs r > 0 and n >= 1")
    phases = np.exp(2j * np.pi * (np.arange(count) + 0.5) / count)
    return [as_pair(radius * z) for z in phases]


def config_from_args(args: argparse.Namespace, settings: Optional[Settings] = None) -> RunConfig:
    settings = settings or Settings.from_env()
    values = {
        "sites": args.sites,
        "trunc_tol": args.trunc_tol if args.trunc_tol is not None else settings.trunc_tol,
        "trunc_min": settings.trunc_min,
        "trunc_max": args.trunc_max if args.trunc_max is not None else settings.trunc_max,
        "series_tol": settings.series_tol,
        "suites": [s.strip() for s in args.suites.split(",") if s.strip()],
        "out": args.out,
        "dump_matrices": args.dump_matrices,
        "precision_warn": args.precision_warn,
        "workers": args.workers if args.workers is not None else settings.workers,
    }
    if args.sectors is not None:
        values["sectors"] = args.sectors
    elif args.sector_max is not None:
        if args.sector_max < 0:
            raise ConfigurationError("--sector-max must be nonnegative")
        values["sectors"] = list(range(args.sector_max + 1))
    for name in ("spin_int", "zeta", "q", "phi"):
        value = getattr(args, name)
        if value is not None:
            values[name] = value
    if args.lambdas:
        values["lambdas"] = args.lambdas
    elif args.lambda_circle:
        values["lambdas"] = _circle(args.lambda_circle)
    if values["trunc_min"] > values["trunc_max"]:
        values["trunc_min"] = values["trunc_max"]
    try:
        return RunConfig(**values)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid configuration: {exc}") from exc


def environment_stamp() -> EnvironmentStamp:
    return EnvironmentStamp(
        python=platform.python_version(),
        numpy=np.__version__,
        scipy=scipy.__version__,
        pydantic=pydantic.VERSION,
        platform=platform.platform(),
    )


def _context(config: RunConfig) -> RunContext:
    try:
        context = RunContext.from_config(config)
        for lam in context.lambdas:
            context.params(lam)
    except QOpsError as exc:
        raise ConfigurationError(f"invalid parameters: {exc}") from exc
    return context


def _run_point(suite: Suite, context: RunContext, point) -> Tuple[SuiteRecord, List[BetheRootReport]]:
    label = point_label(point, context)
    tolerance = suite.tolerance_for(point)
    skip = suite.skip_reason(context)
    if skip:
        return SuiteRecord(name=suite.name, params=label, tolerance=tolerance, passed=True,
                           skipped=True, diagnostic=skip), []
    started = time.perf_counter()
    try:
        outcome = suite.evaluate(context, point)
    except QOpsError as exc:
        ms = (time.perf_counter() - started) * 1000
        console.status(suite.name, f"{label} failed: {exc}", "fail")
        return SuiteRecord(name=suite.name, params=label, tolerance=tolerance, passed=False,
                           ms=ms, diagnostic=str(exc)), []
    ms = (time.perf_counter() - started) * 1000
    if outcome.tolerance is not None:
        tolerance = outcome.tolerance
    passed = bool(outcome.residual < tolerance)
    console.status(suite.name, f"{label} residual={outcome.residual:.2e} tol={tolerance:.0e}",
                   "ok" if passed else "fail")
    record = SuiteRecord(name=suite.name, params=label, residual=float(outcome.residual),
                         tolerance=tolerance, passed=passed, ms=ms, diagnostic=outcome.diagnostic)
    return record, outcome.reports


def dump_matrices(context: RunContext, directory) -> List[Path]:
    """T, Q_f (generic spin) and A+ at the first grid lambda, one CSV per sector."""
    directory = Path(directory)
    params = context.params()
    operators = ["T", "Aplus"] if context.integer else ["T", "Qf", "Aplus"]
    written = []
    for l in context.sectors:
        basis = context.basis(l)
        for name in operators:
            try:
                matrix = q_operator(params, basis, name, context.policy)
            except QOpsError as exc:
                console.status("dump", f"{name} l={l} skipped: {exc}", "warn")
                continue
            written.append(matrix.dump_csv(directory / f"{name}_l{l}.csv"))
    return written


def run_suite(config: RunConfig) -> SuiteReport:
    context = _context(config)
    warnings = []
    if config.precision_warn:
        warnings.extend(root_of_unity_warnings(context.q))
        for message in warnings:
            console.status("precision", message, "warn")
    jobs = []
    for name in config.suites:
        suite = SuiteFactory.create_suite(name)
        jobs.extend((suite, point) for point in suite.points(context))
    console.status("run", f"{len(jobs)} points over {len(config.suites)} suites, "
                   f"M={context.sites}, sectors={list(context.sectors)}", "run")

    def run(job):
        return _run_point(job[0], context, job[1])

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    report = SuiteReport(config=config.model_dump(mode="json"), warnings=warnings,
                         environment=environment_stamp())
    for record, reports in results:
        report.suites.append(record)
        report.bethe.extend(reports)
    if config.dump_matrices:
        dump_matrices(context, config.dump_matrices)
    failed = sum(1 for record in report.suites if not record.passed)
    console.status("report", f"{len(report.suites)} records, {failed} failed",
                   "report" if failed else "done")
    return report


def serialize(report: SuiteReport) -> bytes:
    return orjson.dumps(report.as_document(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)


def write_report(report: SuiteReport, out: Optional[str]) -> None:
    payload = serialize(report)
    if out is None or out == "-":
        sys.stdout.buffer.write(payload + b"\n")
        sys.stdout.flush()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload + b"\n")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    console.set_quiet(True if args.quiet else None)
    try:
        config = config_from_args(args)
        report = run_suite(config)
    except ConfigurationError as exc:
        console.status("config", str(exc), "fail")
        return EXIT_CONFIG
    write_report(report, config.out)
    return EXIT_OK if report.all_passed else EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
