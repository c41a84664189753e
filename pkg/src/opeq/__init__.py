"""opeq: solvers and diagnostics for perturbed operator equations on gridded C(Omega).

The package discretizes equations of the form

    alpha*u(x) + sum_k INT k(x,y) u(y) dy + INT h(x, y, u(y)) dy = v(x),   x in Omega,

on a quadrature grid (Nystrom method), solves them by successive
approximation or Newton's method, and runs numerical checks of the
structural hypotheses behind existence/uniqueness: contraction moduli,
norm separation, weak-coercivity ray probes, Frechet-derivative order,
Rayleigh-quotient coercivity and finite-dimensional index stability.
"""

__version__ = "0.1.0"

from .expressions import (
    Binary,
    Constant,
    Expr,
    MissingBindingError,
    NumericDomainError,
    ParseError,
    Unary,
    UnknownIdentifierError,
    Variable,
    differentiate_u,
    evaluate,
    parse,
    to_source,
)
from .grid import (
    DomainSpec,
    EmptyFunctionError,
    Grid,
    GridFunction,
    GridMismatchError,
    InvalidDomainError,
    UnsupportedDimensionError,
    build_grid,
    integrate,
    sup_norm,
)
from .operators import (
    DerivativeMismatchError,
    KernelUsesUError,
    NystromMatrix,
    Problem,
    ResidualBoundError,
    SingularMatrixError,
    apply_f,
    apply_hammerstein,
    assemble_linear,
    hammerstein_jacobian,
    linear_solve,
    operator_sup_norm,
)
from .solvers import (
    ContinuationError,
    ContinuationReport,
    DivergenceError,
    MaxIterExceededError,
    NotContractiveWarning,
    SingularJacobianError,
    SolveReport,
    SolverError,
    SolverOptions,
    UniquenessReport,
    solve_continuation,
    solve_newton,
    solve_picard,
    uniqueness_probe,
)
from .diagnostics import (
    ContractionReport,
    CoercivityReport,
    FrechetReport,
    IndexReport,
    IndexStabilityReport,
    LaxMilgramReport,
    MissingHammersteinError,
    NormSeparationReport,
    check_contraction,
    check_frechet,
    check_lax_milgram,
    check_norm_separation,
    check_weak_coercivity,
    fredholm_index,
    index_stability_trial,
)
