"""Solvers for alpha*u + Ku + C(u) = v and a multistart uniqueness probe.

solve_picard runs the successive-approximation map T(u) = (v - Ku - C(u))/alpha.
Internally the update is propagated in increment form,

    d_{n+1} = (-K d_n - (C(u_n + d_n) - C(u_n))) / alpha,    u_{n+1} = u_n + d_n,

which is algebraically identical to u_{n+1} = T(u_n) but keeps the computed
step sizes accurate relative to their own scale, so observed contraction
ratios stay clean down to machine level.  After the step tolerance triggers,
iteration continues briefly ("polish") while contraction persists, down to
tol/1000 or the roundoff floor, so the returned iterate sits essentially on
the discrete fixed point instead of one tolerance away from it.

solve_newton iterates u += delta with (alpha*I + K + C'(u)) delta = v - f(u).
solve_continuation tracks the solution along a homotopy of right-hand sides
with warm starts; uniqueness_probe runs Newton from random starts and
clusters the limits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .grid import GridFunction, require_same_grid, sup_norm
from .operators import (
    Problem,
    SingularMatrixError,
    apply_f_values,
    contraction_modulus,
    hammerstein_values,
    is_nonsingular,
    jacobian_matrix,
    linear_solve,
)

_EPS = float(np.finfo(np.float64).eps)

# polish phase: keep contracting past tol down to tol*POLISH_FACTOR,
# at most POLISH_MAX_EXTRA extra steps, never below the roundoff floor
POLISH_FACTOR = 1e-3
POLISH_MAX_EXTRA = 40

FD_VALIDATION_STEP = 1e-6
FD_VALIDATION_RTOL = 1e-4


class SolverError(RuntimeError):
    """Base class; carries the partial report when one exists."""

    def __init__(self, message: str, report: "SolveReport | None" = None):
        super().__init__(message)
        self.report = report


class DivergenceError(SolverError):
    """Successive-approximation steps grew three times in a row."""


class MaxIterExceededError(SolverError):
    """Iteration budget exhausted before the tolerance was met."""


class SingularJacobianError(SolverError):
    """f'(u) failed the pivot test at some Newton iterate."""


class ContinuationError(SolverError):
    """A continuation step failed; carries the homotopy parameter."""

    def __init__(self, message: str, t_value: float):
        super().__init__(message)
        self.t_value = t_value


class NotContractiveWarning(UserWarning):
    """Sampled contraction estimate is >= 1; iteration attempted anyway."""


class FrechetValidationWarning(UserWarning):
    """Assembled Jacobian disagrees with a finite-difference probe."""


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 500
    fd_validation: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class SolveReport:
    solution: GridFunction
    method: str
    iterations: int
    residual_sup: float
    step_sizes: list[float]
    contraction_ratio_observed: float | None
    a_priori_bound: float | None
    converged: bool


@dataclass(frozen=True)
class ContinuationReport:
    steps: int
    solutions: list[GridFunction]
    max_consecutive_jump: float
    endpoint_matches_direct: bool


@dataclass(frozen=True)
class UniquenessReport:
    starts: int
    distinct_solutions: list[GridFunction]
    cluster_radius: float
    all_converged: bool
    jacobian_nonsingular_at_each: bool
    failed_starts: int = 0


def _max_ratio(steps: list[float]) -> float | None:
    ratios = [b / a for a, b in zip(steps, steps[1:]) if a > 0.0]
    return max(ratios) if ratios else None


def _finish_report(problem, v_values, u_values, method, steps, kappa, converged):
    residual = float(np.max(np.abs(apply_f_values(problem, u_values) - v_values)))
    bound = None
    if kappa is not None and kappa < 1.0 and steps:
        bound = kappa ** len(steps) / (1.0 - kappa) * steps[0]
    return SolveReport(
        solution=problem.grid.function(u_values),
        method=method,
        iterations=len(steps),
        residual_sup=residual,
        step_sizes=list(steps),
        contraction_ratio_observed=_max_ratio(steps) if method == "picard" else None,
        a_priori_bound=bound,
        converged=converged,
    )


def solve_picard(
    problem: Problem,
    v: GridFunction,
    opts: SolverOptions = SolverOptions(),
    initial: GridFunction | None = None,
) -> SolveReport:
    """Successive approximation u_{n+1} = (v - K u_n - C(u_n)) / alpha from u_0 = v.

    Stops once the sup-norm step is <= opts.tol (plus the polish phase
    described in the module docstring).  Warns NotContractiveWarning when
    the sampled contraction estimate is >= 1 and raises DivergenceError if
    steps then grow three times in a row; raises MaxIterExceededError when
    the budget runs out.  The reported residual is recomputed from scratch.
    """
    require_same_grid(problem.grid, v)
    if initial is not None:
        require_same_grid(problem.grid, initial)
    v_values = v.values
    alpha = problem.identity_coefficient
    kernel = problem.linear_matrix()
    h = problem.hammerstein_kernel

    kappa = contraction_modulus(problem, u_range=1.0 + 2.0 * sup_norm(v))
    if kappa >= 1.0:
        warnings.warn(
            f"sampled contraction estimate {kappa:.4g} >= 1; "
            "successive approximation may diverge",
            NotContractiveWarning,
            stacklevel=2,
        )

    u = np.array(initial.values if initial is not None else v_values, dtype=np.float64)
    c_u = hammerstein_values(problem.grid, h, u) if h is not None else None
    # first increment from a full evaluation of T(u) - u
    t_u = (v_values - kernel.apply(u) - (c_u if c_u is not None else 0.0)) / alpha - u
    d = t_u
    steps: list[float] = []
    grow_count = 0
    converged = False
    polish_extra = 0

    while len(steps) < opts.max_iter:
        step = float(np.max(np.abs(d)))
        noise_floor = 8.0 * _EPS * (1.0 + float(np.max(np.abs(u))))

        if converged:
            # polish: only accept steps that keep contracting above the floor
            if polish_extra >= POLISH_MAX_EXTRA or step <= max(opts.tol * POLISH_FACTOR, noise_floor):
                break
            guard = min(0.999, kappa + 1e-7) if kappa < 1.0 else 0.9
            if steps and steps[-1] > 0 and step > guard * steps[-1]:
                break
            polish_extra += 1

        u_next = u + d
        steps.append(step)

        if not converged:
            if len(steps) >= 2 and step > steps[-2] and step > max(opts.tol, 100.0 * noise_floor):
                grow_count += 1
                if grow_count >= 3:
                    raise DivergenceError(
                        f"step size grew 3 consecutive iterations (last {step:.3e})",
                        _finish_report(problem, v_values, u_next, "picard", steps, kappa, False),
                    )
            else:
                grow_count = 0
            if step <= opts.tol:
                # a convergence claim must be certifiable: below the fp
                # resolution of the iterate, require an actually stationary
                # update rather than trusting the propagated increment
                resolvable = opts.tol >= _EPS * (1.0 + float(np.max(np.abs(u))))
                if resolvable or step == 0.0 or not np.array_equal(u_next, u):
                    converged = True

        # next increment: d <- (-K d - (C(u_next) - C(u))) / alpha
        d_new = -kernel.apply(d)
        if h is not None:
            c_next = hammerstein_values(problem.grid, h, u_next)
            d_new = d_new - (c_next - c_u)
            c_u = c_next
        d = d_new / alpha
        u = u_next

        if converged and float(np.max(np.abs(d))) == 0.0:
            break

    if not converged:
        raise MaxIterExceededError(
            f"no convergence to tol={opts.tol:g} within {opts.max_iter} iterations",
            _finish_report(problem, v_values, u, "picard", steps, kappa, False),
        )
    return _finish_report(problem, v_values, u, "picard", steps, kappa, True)


def _validate_jacobian_fd(problem: Problem, u: np.ndarray, jac: np.ndarray) -> None:
    """One directional finite-difference probe of the Hammerstein Jacobian."""
    grid = problem.grid
    h = problem.hammerstein_kernel
    m = np.ones(grid.size)
    t = FD_VALIDATION_STEP
    fd = (hammerstein_values(grid, h, u + t * m) - hammerstein_values(grid, h, u)) / t
    alpha = problem.identity_coefficient
    jv = (jac - alpha * np.eye(grid.size) - problem.linear_matrix().entries) @ m
    gap = float(np.max(np.abs(fd - jv)))
    if gap > FD_VALIDATION_RTOL * (1.0 + float(np.max(np.abs(jv)))):
        warnings.warn(
            f"Hammerstein Jacobian-vector product deviates from finite differences by {gap:.3e}",
            FrechetValidationWarning,
            stacklevel=3,
        )


def solve_newton(
    problem: Problem,
    v: GridFunction,
    opts: SolverOptions = SolverOptions(),
    initial: GridFunction | None = None,
) -> SolveReport:
    """Newton-Kantorovich iteration (alpha*I + K + C'(u_n)) delta = v - f(u_n).

    Starts from u_0 = v (or `initial`), stops when the step or the residual
    drops to opts.tol.  Raises SingularJacobianError when f'(u) fails the
    pivot test and MaxIterExceededError when the budget runs out.
    """
    require_same_grid(problem.grid, v)
    if initial is not None:
        require_same_grid(problem.grid, initial)
    v_values = v.values
    u = np.array(initial.values if initial is not None else v_values, dtype=np.float64)
    steps: list[float] = []

    residual = v_values - apply_f_values(problem, u)
    if float(np.max(np.abs(residual))) <= opts.tol:
        return _finish_report(problem, v_values, u, "newton", steps, None, True)

    for iteration in range(opts.max_iter):
        jac = jacobian_matrix(problem, u)
        if iteration == 0 and opts.fd_validation and problem.has_hammerstein:
            _validate_jacobian_fd(problem, u, jac)
        try:
            delta = linear_solve(jac, residual)
        except SingularMatrixError as exc:
            raise SingularJacobianError(
                f"singular Jacobian at iteration {iteration}: {exc}",
                _finish_report(problem, v_values, u, "newton", steps, None, False),
            ) from exc
        u = u + delta
        steps.append(float(np.max(np.abs(delta))))
        residual = v_values - apply_f_values(problem, u)
        if steps[-1] <= opts.tol or float(np.max(np.abs(residual))) <= opts.tol:
            return _finish_report(problem, v_values, u, "newton", steps, None, True)

    raise MaxIterExceededError(
        f"no convergence to tol={opts.tol:g} within {opts.max_iter} iterations",
        _finish_report(problem, v_values, u, "newton", steps, None, False),
    )


def _solve_with_fallback(problem, v, opts, initial):
    try:
        return solve_newton(problem, v, opts, initial=initial)
    except SingularJacobianError:
        return solve_picard(problem, v, opts, initial=initial)


def solve_continuation(
    problem: Problem,
    v0: GridFunction,
    v1: GridFunction,
    steps: int,
    opts: SolverOptions = SolverOptions(),
) -> ContinuationReport:
    """Track solutions of f(u) = (1-t)v0 + t*v1 over t = 0, 1/steps, ..., 1.

    Each stage is solved by Newton warm-started from the previous solution
    (falling back to successive approximation on a singular Jacobian); the
    endpoint is cross-checked against a cold solve at v1.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    require_same_grid(problem.grid, v0)
    require_same_grid(problem.grid, v1)
    grid = problem.grid
    solutions: list[GridFunction] = []
    previous: GridFunction | None = None
    for j in range(steps + 1):
        t = j / steps
        v_t = grid.function((1.0 - t) * v0.values + t * v1.values)
        try:
            report = _solve_with_fallback(problem, v_t, opts, initial=previous)
        except SolverError as exc:
            raise ContinuationError(f"continuation failed at t={t:g}: {exc}", t) from exc
        previous = report.solution
        solutions.append(report.solution)

    jumps = [
        float(np.max(np.abs(b.values - a.values)))
        for a, b in zip(solutions, solutions[1:])
    ]
    direct = _solve_with_fallback(problem, v1, opts, initial=None)
    endpoint_gap = float(np.max(np.abs(direct.solution.values - solutions[-1].values)))
    return ContinuationReport(
        steps=steps,
        solutions=solutions,
        max_consecutive_jump=max(jumps),
        endpoint_matches_direct=endpoint_gap <= 10.0 * opts.tol,
    )


def uniqueness_probe(
    problem: Problem,
    v: GridFunction,
    starts: int,
    opts: SolverOptions = SolverOptions(),
    cluster_radius: float = 1e-6,
) -> UniquenessReport:
    """Run Newton from seeded random starts and cluster the limits.

    Starts are i.i.d. uniform in [-R, R] with R = 1 + 2*||v||.  Converged
    solutions closer than cluster_radius in sup-norm are merged; the
    representatives are checked for Jacobian nonsingularity by the pivot
    test.  This gathers evidence for uniqueness, it cannot certify a count.
    """
    if starts < 1:
        raise ValueError("starts must be >= 1")
    require_same_grid(problem.grid, v)
    grid = problem.grid
    radius = 1.0 + 2.0 * sup_norm(v)
    rng = np.random.default_rng(opts.seed)
    initials = rng.uniform(-radius, radius, size=(starts, grid.size))

    representatives: list[np.ndarray] = []
    failed = 0
    for i in range(starts):
        try:
            report = solve_newton(problem, v, opts, initial=grid.function(initials[i]))
        except SolverError:
            failed += 1
            continue
        sol = report.solution.values
        if not any(float(np.max(np.abs(sol - rep))) <= cluster_radius for rep in representatives):
            representatives.append(sol)

    nonsingular = all(is_nonsingular(jacobian_matrix(problem, rep)) for rep in representatives)
    return UniquenessReport(
        starts=starts,
        distinct_solutions=[grid.function(rep) for rep in representatives],
        cluster_radius=cluster_radius,
        all_converged=failed == 0,
        jacobian_nonsingular_at_each=nonsingular,
        failed_starts=failed,
    )
