"""Nystrom discretization of f = alpha*I + K + C and dense linear algebra.

K is a sum of linear integral operators with kernels k(x,y); C is an
optional Hammerstein operator with kernel h(x,y,u).  Matrices store
entries[i][j] = w_j * kernel(x_i, x_j), so a matrix-vector product is the
quadrature approximation of the integral operator applied to a grid
function.  The induced operator norm for the sup-norm is the max absolute
row sum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .expressions import Expr, differentiate_u, evaluate_array, uses_u
from .grid import DomainSpec, Grid, GridFunction, require_same_grid

PIVOT_RTOL = 1e-14
RESIDUAL_RTOL = 1e-10

# |h_u| symbolic-vs-override agreement required at this level
DERIVATIVE_CROSSCHECK_TOL = 1e-8


class KernelUsesUError(ValueError):
    """A linear kernel (or rhs) mentions the solution variable u."""


class SingularMatrixError(ArithmeticError):
    """LU pivot below the relative threshold; the system is (near) singular."""


class ResidualBoundError(ArithmeticError):
    """Direct solve could not meet the backward-residual tolerance."""


class DerivativeMismatchError(ValueError):
    """Supplied h_u disagrees with the symbolic derivative on the grid."""


@dataclass(frozen=True)
class NystromMatrix:
    """Dense matrix realization of a linear integral operator on a grid."""

    entries: np.ndarray = field(repr=False)
    grid: Grid

    def __post_init__(self):
        n = self.grid.size
        if self.entries.shape != (n, n):
            raise ValueError(f"entries shape {self.entries.shape} != ({n}, {n})")
        self.entries.setflags(write=False)

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.entries @ values


@dataclass(frozen=True)
class Problem:
    """Discretized equation alpha*u + sum_k K_k u + C(u) = v.

    linear_kernels are u-free expressions k(x,y); hammerstein_kernel is an
    optional h(x,y,u) with derivative h_u taken symbolically unless
    hammerstein_derivative overrides it (the two are cross-checked at every
    Jacobian assembly).
    """

    domain: DomainSpec
    grid: Grid
    linear_kernels: tuple[Expr, ...] = ()
    hammerstein_kernel: Expr | None = None
    hammerstein_derivative: Expr | None = None
    identity_coefficient: float = 1.0
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "linear_kernels", tuple(self.linear_kernels))
        for k in self.linear_kernels:
            if uses_u(k):
                raise KernelUsesUError("linear kernels must not depend on u")
        if self.identity_coefficient == 0.0:
            raise ValueError("identity_coefficient must be nonzero")
        if self.hammerstein_derivative is not None and self.hammerstein_kernel is None:
            raise ValueError("hammerstein_derivative given without hammerstein_kernel")

    @property
    def has_hammerstein(self) -> bool:
        return self.hammerstein_kernel is not None

    def linear_matrix(self) -> NystromMatrix:
        """Sum of the assembled linear kernels (zero matrix if none), cached."""
        if "linear_matrix" not in self._cache:
            total = np.zeros((self.grid.size, self.grid.size))
            for k in self.linear_kernels:
                total = total + assemble_linear(self.grid, k).entries
            self._cache["linear_matrix"] = NystromMatrix(total, self.grid)
        return self._cache["linear_matrix"]


def _pair_bindings(grid: Grid, u_row: np.ndarray | None = None) -> dict:
    """Bindings for kernel evaluation over all node pairs (i rows, j columns)."""
    bindings: dict = {
        "x1": grid.nodes[:, 0][:, None],
        "y1": grid.nodes[:, 0][None, :],
    }
    if grid.domain.dimension == 2:
        bindings["x2"] = grid.nodes[:, 1][:, None]
        bindings["y2"] = grid.nodes[:, 1][None, :]
    if u_row is not None:
        bindings["u"] = u_row[None, :]
    return bindings


def kernel_values(grid: Grid, kernel: Expr) -> np.ndarray:
    """kernel(x_i, x_j) over all grid node pairs, shape (n, n)."""
    n = grid.size
    return evaluate_array(kernel, _pair_bindings(grid), shape=(n, n))


def assemble_linear(grid: Grid, kernel: Expr) -> NystromMatrix:
    """Nystrom matrix of the linear operator with kernel k(x,y).

    entries[i][j] = w_j * k(x_i, x_j); row i of a product with u
    approximates (Ku)(x_i).
    """
    if uses_u(kernel):
        raise KernelUsesUError("linear kernel must not depend on u")
    return NystromMatrix(kernel_values(grid, kernel) * grid.weights[None, :], grid)


def hammerstein_values(grid: Grid, h: Expr, u_values: np.ndarray) -> np.ndarray:
    """Quadrature of h(x_i, y_j, u_j) against the weights, one value per node."""
    n = grid.size
    hij = evaluate_array(h, _pair_bindings(grid, u_values), shape=(n, n))
    return hij @ grid.weights


def apply_hammerstein(grid: Grid, h: Expr, u: GridFunction) -> GridFunction:
    """C(u)(x_i) = sum_j w_j h(x_i, y_j, u_j)."""
    require_same_grid(grid, u)
    return grid.function(hammerstein_values(grid, h, u.values))


def hammerstein_jacobian_entries(
    grid: Grid, h: Expr, u_values: np.ndarray, derivative: Expr | None = None
) -> np.ndarray:
    n = grid.size
    symbolic = differentiate_u(h)
    if derivative is not None:
        sym_vals = evaluate_array(symbolic, _pair_bindings(grid, u_values), shape=(n, n))
        given_vals = evaluate_array(derivative, _pair_bindings(grid, u_values), shape=(n, n))
        gap = float(np.max(np.abs(sym_vals - given_vals)))
        if gap > DERIVATIVE_CROSSCHECK_TOL:
            raise DerivativeMismatchError(
                f"supplied h_u deviates from the symbolic derivative by {gap:.3e} "
                f"(> {DERIVATIVE_CROSSCHECK_TOL:.0e}) on the grid"
            )
        hu_vals = given_vals
    else:
        hu_vals = evaluate_array(symbolic, _pair_bindings(grid, u_values), shape=(n, n))
    return hu_vals * grid.weights[None, :]


def hammerstein_jacobian(
    grid: Grid, h: Expr, u: GridFunction, derivative: Expr | None = None
) -> NystromMatrix:
    """Frechet derivative of C at u: entries[i][j] = w_j h_u(x_i, y_j, u_j)."""
    require_same_grid(grid, u)
    return NystromMatrix(hammerstein_jacobian_entries(grid, h, u.values, derivative), grid)


def apply_f_values(problem: Problem, u_values: np.ndarray) -> np.ndarray:
    out = problem.identity_coefficient * u_values + problem.linear_matrix().apply(u_values)
    if problem.has_hammerstein:
        out = out + hammerstein_values(problem.grid, problem.hammerstein_kernel, u_values)
    return out


def apply_f(problem: Problem, u: GridFunction) -> GridFunction:
    """f(u) = alpha*u + sum_k K_k u + C(u)."""
    require_same_grid(problem.grid, u)
    return problem.grid.function(apply_f_values(problem, u.values))


def jacobian_matrix(problem: Problem, u_values: np.ndarray) -> np.ndarray:
    """f'(u) = alpha*I + sum_k K_k + C'(u) as a dense matrix."""
    n = problem.grid.size
    jac = problem.identity_coefficient * np.eye(n) + problem.linear_matrix().entries
    if problem.has_hammerstein:
        jac = jac + hammerstein_jacobian_entries(
            problem.grid,
            problem.hammerstein_kernel,
            u_values,
            problem.hammerstein_derivative,
        )
    return jac


def operator_sup_norm(matrix: NystromMatrix | np.ndarray) -> float:
    """Induced operator norm for the sup-norm: max absolute row sum."""
    entries = matrix.entries if isinstance(matrix, NystromMatrix) else np.asarray(matrix)
    if entries.shape[0] != entries.shape[1]:
        raise ValueError("operator norm requires a square matrix")
    return float(np.abs(entries).sum(axis=1).max())


def _as_square_array(matrix) -> np.ndarray:
    a = matrix.entries if isinstance(matrix, NystromMatrix) else np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _lu_with_pivot_check(a: np.ndarray):
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("zero matrix")
    with warnings.catch_warnings():
        # scipy warns on exact zero pivots; the pivot check below is the signal
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    smallest = float(pivots.min())
    if smallest < PIVOT_RTOL * scale:
        raise SingularMatrixError(
            f"pivot {smallest:.3e} below threshold {PIVOT_RTOL * scale:.3e}"
        )
    return lu, piv


def is_nonsingular(matrix) -> bool:
    """Partial-pivoting test: True when no pivot falls under the threshold."""
    try:
        _lu_with_pivot_check(_as_square_array(matrix))
    except SingularMatrixError:
        return False
    return True


def linear_solve(matrix, rhs) -> np.ndarray:
    """Solve A x = b by LU with row partial pivoting.

    Raises SingularMatrixError when a pivot magnitude drops below
    1e-14 * max|A|, and ResidualBoundError if (after one step of iterative
    refinement) the backward residual exceeds 1e-10 * (1 + ||b||_inf).
    """
    a = _as_square_array(matrix)
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape != (a.shape[0],):
        raise ValueError(f"rhs shape {b.shape} does not match matrix {a.shape}")
    lu, piv = _lu_with_pivot_check(a)
    x = lu_solve((lu, piv), b, check_finite=False)
    bound = RESIDUAL_RTOL * (1.0 + float(np.max(np.abs(b))))
    residual = b - a @ x
    if float(np.max(np.abs(residual))) > bound:
        x = x + lu_solve((lu, piv), residual, check_finite=False)
        residual = b - a @ x
        if float(np.max(np.abs(residual))) > bound:
            raise ResidualBoundError(
                f"backward residual {float(np.max(np.abs(residual))):.3e} exceeds {bound:.3e}"
            )
    return x


# ---------------------------------------------------------------------------
# Sampled operator moduli (shared by the solvers and the diagnostics)
# ---------------------------------------------------------------------------

def sampled_kernel_sup(problem: Problem) -> float:
    """Max over grid pairs of |sum of linear kernels| (0 when there are none)."""
    if not problem.linear_kernels:
        return 0.0
    total = None
    for k in problem.linear_kernels:
        vals = kernel_values(problem.grid, k)
        total = vals if total is None else total + vals
    return float(np.max(np.abs(total)))


def _sampled_expr_sup(grid: Grid, expr: Expr, u_range: float, u_samples: int) -> float:
    n = grid.size
    best = 0.0
    for u in np.linspace(-u_range, u_range, u_samples):
        bindings = _pair_bindings(grid)
        bindings["u"] = float(u)
        vals = evaluate_array(expr, bindings, shape=(n, n))
        best = max(best, float(np.max(np.abs(vals))))
    return best


def sampled_h_sup(problem: Problem, u_range: float, u_samples: int = 101) -> float | None:
    """Max of |h| over grid pairs x uniform u in [-u_range, u_range], or None."""
    if not problem.has_hammerstein:
        return None
    return _sampled_expr_sup(problem.grid, problem.hammerstein_kernel, u_range, u_samples)


def sampled_hu_sup(problem: Problem, u_range: float, u_samples: int = 101) -> float | None:
    """Max of |h_u| over grid pairs x uniform u in [-u_range, u_range].

    None when the problem has no Hammerstein part.  This is a sampled
    estimate on a declared range, not a global bound.
    """
    if not problem.has_hammerstein:
        return None
    hu = (
        problem.hammerstein_derivative
        if problem.hammerstein_derivative is not None
        else differentiate_u(problem.hammerstein_kernel)
    )
    return _sampled_expr_sup(problem.grid, hu, u_range, u_samples)


def contraction_modulus(problem: Problem, u_range: float) -> float:
    """Sampled Lipschitz estimate of (K + C)/alpha: (M + sup|h_u|) * meas / |alpha|."""
    measure = problem.grid.measure
    kappa = sampled_kernel_sup(problem) * measure
    hu = sampled_hu_sup(problem, u_range)
    if hu is not None:
        kappa += hu * measure
    return kappa / abs(problem.identity_coefficient)
