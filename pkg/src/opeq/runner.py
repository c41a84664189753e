"""Solve / check / reproduce pipelines shared by the service and the CLI.

Each pipeline returns a PipelineOutcome holding the report dict, its
canonical bytes, the exit code and human-readable summary lines.  Report
files carry the fixed top-level keys problem_digest / solve / checks /
timings_ms / version.  Stage timings are returned in the summary (they go
to stdout) and the report field "timings_ms" is always null: wall-clock
values would break the byte-identical-reports guarantee.

Exit codes: 0 success, 1 input error (raised as ProblemInputError before
any numerics), 2 solver failure or an erroring check.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .diagnostics import (
    check_contraction,
    check_frechet,
    check_lax_milgram,
    check_norm_separation,
    check_weak_coercivity,
)
from .grid import sup_norm
from .problems import BuiltProblem, ProblemFileModel, build_setup
from .reportjson import canonical_bytes, problem_digest, to_jsonable
from .solvers import (
    ContinuationError,
    SolverError,
    solve_continuation,
    solve_newton,
    solve_picard,
    uniqueness_probe,
)

UNIQUENESS_STARTS = 16
LAX_MILGRAM_TRIALS = 64


@dataclass(frozen=True)
class PipelineOutcome:
    report: dict
    body: bytes
    exit_code: int
    summary: list[str]


def _skeleton(model: ProblemFileModel) -> dict:
    return {
        "problem_digest": problem_digest(model),
        "solve": None,
        "checks": [],
        "timings_ms": None,
        "version": __version__,
    }


def _solve_entry(report, failure: str | None = None) -> dict:
    entry = {"kind": "solve", "failure": failure}
    entry.update(to_jsonable(report))
    return entry


def _continuation_entry(report, failure: str | None = None, t_value: float | None = None) -> dict:
    entry = {"kind": "continuation", "failure": failure, "failed_at_t": t_value}
    if report is not None:
        entry.update(to_jsonable(report))
    return entry


_SOLVERS = {"picard": solve_picard, "newton": solve_newton}

_FAILURE_NAMES = {
    "MaxIterExceededError": "max_iter_exceeded",
    "DivergenceError": "divergence",
    "SingularJacobianError": "singular_jacobian",
}


def _run_solver(built: BuiltProblem, method: str):
    """Returns (report_or_None, solve_entry_dict, converged)."""
    if method == "continuation":
        v0 = built.rhs_start
        steps = built.model.continuation.steps
        try:
            report = solve_continuation(built.problem, v0, built.rhs, steps, built.options)
        except ContinuationError as exc:
            return None, _continuation_entry(None, failure=str(exc), t_value=exc.t_value), False
        return report, _continuation_entry(report), True
    solver = _SOLVERS[method]
    try:
        report = solver(built.problem, built.rhs, built.options)
    except SolverError as exc:
        name = _FAILURE_NAMES.get(type(exc).__name__, "solver_error")
        partial = exc.report
        entry = _solve_entry(partial, failure=name) if partial is not None else {
            "kind": "solve",
            "failure": name,
        }
        return partial, entry, False
    return report, _solve_entry(report), True


def run_solve(model: ProblemFileModel) -> PipelineOutcome:
    """`solve` pipeline: one solver run, report written, exit 0/2."""
    built = build_setup(model)
    report_doc = _skeleton(model)
    start = time.perf_counter()
    report, entry, converged = _run_solver(built, built.method)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    report_doc["solve"] = entry

    summary = []
    if built.method == "continuation" and report is not None:
        summary.append(
            f"continuation: {report.steps} steps, max jump "
            f"{report.max_consecutive_jump:.6g}, endpoint_matches_direct={report.endpoint_matches_direct}"
        )
    elif report is not None:
        summary.append(
            f"{report.method}: converged={report.converged} iterations={report.iterations} "
            f"residual_sup={report.residual_sup:.6g}"
        )
    if not converged:
        summary.append(f"solver failure: {entry.get('failure')}")
    summary.append(f"timings: solve={elapsed_ms:.1f}ms")
    return PipelineOutcome(report_doc, canonical_bytes(report_doc), 0 if converged else 2, summary)


def _checks_for(built: BuiltProblem, seed: int) -> list[dict]:
    problem, v = built.problem, built.rhs
    checks: list[dict] = []

    def guarded(name: str, fn):
        try:
            status, payload = fn()
        except Exception as exc:  # noqa: BLE001 - checks must not kill the run
            checks.append({"name": name, "status": "error", "message": f"{type(exc).__name__}: {exc}"})
            return
        entry = {"name": name, "status": status}
        entry.update({"report": to_jsonable(payload)} if payload is not None else {})
        checks.append(entry)

    def contraction():
        rep = check_contraction(problem, u_range=1.0 + 2.0 * sup_norm(v))
        return ("pass" if rep.is_contractive else "fail"), rep

    def norm_separation():
        rep = check_norm_separation(problem)
        return ("pass" if rep.passed else "fail"), rep

    def weak_coercivity():
        rep = check_weak_coercivity(problem, directions=4, scales=(1.0, 10.0, 100.0), seed=seed)
        if rep.lower_bound_certified is not None and rep.monotone_growth_observed:
            return "pass", rep
        return ("estimate" if rep.monotone_growth_observed else "fail"), rep

    def frechet():
        if not problem.has_hammerstein:
            return "skipped", None
        ones = problem.grid.constant(1.0)
        rep = check_frechet(problem, v, ones)
        return ("pass" if rep.passed else "fail"), rep

    def lax_milgram():
        matrix = (
            problem.identity_coefficient * np.eye(problem.grid.size)
            + problem.linear_matrix().entries
        )
        rep = check_lax_milgram(matrix, trials=LAX_MILGRAM_TRIALS, seed=seed)
        return "estimate", rep

    guarded("contraction", contraction)
    guarded("norm_separation", norm_separation)
    guarded("weak_coercivity", weak_coercivity)
    guarded("frechet", frechet)
    guarded("lax_milgram", lax_milgram)
    return checks


def run_check(model: ProblemFileModel) -> PipelineOutcome:
    """`check` pipeline: hypothesis checks only; exit 2 iff a check errs."""
    built = build_setup(model)
    report_doc = _skeleton(model)
    start = time.perf_counter()
    checks = _checks_for(built, seed=model.solver.seed)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    report_doc["checks"] = checks

    summary = [f"{c['name']}: {c['status']}" for c in checks]
    summary.append(f"timings: checks={elapsed_ms:.1f}ms")
    errs = any(c["status"] == "error" for c in checks)
    return PipelineOutcome(report_doc, canonical_bytes(report_doc), 2 if errs else 0, summary)


def run_reproduce(model: ProblemFileModel) -> PipelineOutcome:
    """`reproduce` pipeline: checks + solve + cross-solver + uniqueness probe."""
    built = build_setup(model)
    report_doc = _skeleton(model)
    summary: list[str] = []
    timings: list[str] = []

    start = time.perf_counter()
    checks = _checks_for(built, seed=model.solver.seed)
    timings.append(f"checks={1e3 * (time.perf_counter() - start):.1f}ms")

    start = time.perf_counter()
    report, entry, converged = _run_solver(built, built.method)
    timings.append(f"solve={1e3 * (time.perf_counter() - start):.1f}ms")
    report_doc["solve"] = entry
    if report is not None and built.method != "continuation":
        summary.append(
            f"{report.method}: converged={report.converged} iterations={report.iterations} "
            f"residual_sup={report.residual_sup:.6g}"
        )

    if converged and built.method in ("picard", "newton"):
        other = "newton" if built.method == "picard" else "picard"
        start = time.perf_counter()
        try:
            other_report = _SOLVERS[other](built.problem, built.rhs, built.options)
            gap = float(
                np.max(np.abs(other_report.solution.values - report.solution.values))
            )
            agreement = gap <= 10.0 * built.options.tol
            checks.append(
                {
                    "name": "cross_solver_agreement",
                    "status": "pass" if agreement else "fail",
                    "report": {
                        "methods": [built.method, other],
                        "sup_distance": gap,
                        "tolerance": 10.0 * built.options.tol,
                    },
                }
            )
            summary.append(f"cross-solver ({other}): sup distance {gap:.3e}")
        except SolverError as exc:
            checks.append(
                {
                    "name": "cross_solver_agreement",
                    "status": "error",
                    "message": f"{type(exc).__name__}: {exc}",
                }
            )
        timings.append(f"cross={1e3 * (time.perf_counter() - start):.1f}ms")

        start = time.perf_counter()
        try:
            probe = uniqueness_probe(
                built.problem, built.rhs, UNIQUENESS_STARTS, built.options
            )
            clusters = len(probe.distinct_solutions)
            status = (
                "pass"
                if clusters == 1 and probe.all_converged and probe.jacobian_nonsingular_at_each
                else "fail"
            )
            checks.append({"name": "uniqueness_probe", "status": status, "report": to_jsonable(probe)})
            summary.append(
                f"uniqueness: {clusters} cluster(s) from {probe.starts} starts, "
                f"all_converged={probe.all_converged}"
            )
        except Exception as exc:  # noqa: BLE001
            checks.append(
                {
                    "name": "uniqueness_probe",
                    "status": "error",
                    "message": f"{type(exc).__name__}: {exc}",
                }
            )
        timings.append(f"uniqueness={1e3 * (time.perf_counter() - start):.1f}ms")

    report_doc["checks"] = checks
    summary.extend(f"{c['name']}: {c['status']}" for c in checks)
    summary.append("timings: " + " ".join(timings))
    errs = any(c["status"] == "error" for c in checks)
    exit_code = 0 if (converged and not errs) else 2
    return PipelineOutcome(report_doc, canonical_bytes(report_doc), exit_code, summary)
