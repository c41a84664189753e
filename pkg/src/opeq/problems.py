"""Problem files: schema, validation, and construction of discrete problems.

A problem file is a JSON document fully describing one equation instance:
domain, quadrature, kernel expressions, right-hand side and solver options.
Validation is total before any numerical work: the pydantic models reject
unknown keys and malformed structure, and every expression is parsed and
checked against the variables its role allows (kernels are spatial in x/y,
the Hammerstein kernel may also use u, right-hand sides are functions of x
only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .expressions import Expr, ParseError, free_variables, parse
from .grid import DomainSpec, Grid, GridFunction, build_grid
from .operators import Problem
from .solvers import SolverOptions


class ProblemInputError(ValueError):
    """Invalid problem input; message is a single-line diagnostic."""


class UnknownExampleError(ProblemInputError):
    """Requested embedded example does not exist."""


class DomainModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    intervals: list[list[float]]

    @field_validator("intervals")
    @classmethod
    def _check_intervals(cls, value):
        if not 1 <= len(value) <= 2:
            raise ValueError("domain must have 1 or 2 intervals")
        for pair in value:
            if len(pair) != 2:
                raise ValueError(f"interval must be a [a, b] pair, got {pair}")
            if not pair[0] < pair[1]:
                raise ValueError(f"interval [{pair[0]}, {pair[1]}] is empty")
        return value


class QuadratureModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rule: Literal["trapezoid", "gauss-legendre"] = "trapezoid"
    nodes_per_dim: Optional[int] = Field(default=None, ge=2)


class SolverModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: Literal["picard", "newton", "continuation"] = "picard"
    tol: float = Field(default=1e-10, gt=0)
    max_iter: int = Field(default=500, ge=1)
    seed: int = 0


class ContinuationModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rhs_start: str
    steps: int = Field(ge=1)


class ProblemFileModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    domain: DomainModel
    quadrature: QuadratureModel = QuadratureModel()
    linear_kernels: list[str] = []
    hammerstein_kernel: Optional[str] = None
    hammerstein_derivative: Optional[str] = None
    rhs: str
    solver: SolverModel = SolverModel()
    continuation: Optional[ContinuationModel] = None


def format_validation_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "problem file"
    return f"{location}: {first['msg']}"


def validate_problem_data(data) -> ProblemFileModel:
    """Validate raw JSON data against the schema; single-line errors."""
    try:
        return ProblemFileModel.model_validate(data)
    except ValidationError as exc:
        raise ProblemInputError(format_validation_error(exc)) from exc


def _parse_field(source: str, field_name: str, allowed: frozenset[str]) -> Expr:
    try:
        expr = parse(source)
    except ParseError as exc:
        raise ProblemInputError(f"{field_name}: {exc}") from exc
    stray = free_variables(expr) - allowed
    if stray:
        raise ProblemInputError(
            f"{field_name}: variable(s) {sorted(stray)} not allowed here "
            f"(allowed: {sorted(allowed)})"
        )
    return expr


@dataclass(frozen=True)
class BuiltProblem:
    """A problem file turned into grid-level objects, ready to solve."""

    model: ProblemFileModel
    problem: Problem
    rhs: GridFunction
    rhs_start: GridFunction | None
    options: SolverOptions
    method: str


def build_setup(model: ProblemFileModel) -> BuiltProblem:
    """Build grid, operators and right-hand sides from a validated model."""
    domain = DomainSpec(tuple(tuple(pair) for pair in model.domain.intervals))
    grid = build_grid(domain, model.quadrature.rule, model.quadrature.nodes_per_dim)

    spatial = frozenset(("x1", "y1") if domain.dimension == 1 else ("x1", "x2", "y1", "y2"))
    rhs_vars = frozenset(("x1",) if domain.dimension == 1 else ("x1", "x2"))

    kernels = tuple(
        _parse_field(source, f"linear_kernels[{i}]", spatial)
        for i, source in enumerate(model.linear_kernels)
    )
    hammerstein = None
    derivative = None
    if model.hammerstein_kernel is not None:
        hammerstein = _parse_field(
            model.hammerstein_kernel, "hammerstein_kernel", spatial | {"u"}
        )
        if model.hammerstein_derivative is not None:
            derivative = _parse_field(
                model.hammerstein_derivative, "hammerstein_derivative", spatial | {"u"}
            )
    elif model.hammerstein_derivative is not None:
        raise ProblemInputError("hammerstein_derivative: requires hammerstein_kernel")

    problem = Problem(
        domain=domain,
        grid=grid,
        linear_kernels=kernels,
        hammerstein_kernel=hammerstein,
        hammerstein_derivative=derivative,
    )

    rhs = grid.from_expression(_parse_field(model.rhs, "rhs", rhs_vars))
    rhs_start = None
    if model.solver.method == "continuation":
        if model.continuation is None:
            raise ProblemInputError(
                "solver.method: 'continuation' requires a continuation section"
            )
        rhs_start = grid.from_expression(
            _parse_field(model.continuation.rhs_start, "continuation.rhs_start", rhs_vars)
        )

    options = SolverOptions(
        tol=model.solver.tol, max_iter=model.solver.max_iter, seed=model.solver.seed
    )
    return BuiltProblem(
        model=model,
        problem=problem,
        rhs=rhs,
        rhs_start=rhs_start,
        options=options,
        method=model.solver.method,
    )


def apply_overrides(
    model: ProblemFileModel,
    tol: float | None = None,
    nodes: int | None = None,
    seed: int | None = None,
    method: str | None = None,
) -> ProblemFileModel:
    """Re-validate the model with command-line / request overrides applied."""
    data = model.model_dump()
    if tol is not None:
        data["solver"]["tol"] = tol
    if nodes is not None:
        data["quadrature"]["nodes_per_dim"] = nodes
    if seed is not None:
        data["solver"]["seed"] = seed
    if method is not None:
        if method not in ("picard", "newton"):
            raise ProblemInputError(f"method override must be picard or newton, got {method!r}")
        data["solver"]["method"] = method
    return validate_problem_data(data)


# ---------------------------------------------------------------------------
# Embedded canonical instances
# ---------------------------------------------------------------------------
# Instance constants are configuration choices with visible margin in the
# contraction and norm-separation conditions, not data from elsewhere.

CANONICAL_EXAMPLES: dict[str, dict] = {
    "example1": {
        "domain": {"intervals": [[0.0, 1.0]]},
        "quadrature": {"rule": "trapezoid", "nodes_per_dim": 201},
        "linear_kernels": ["0.4*cos(x*y)", "0.2*x*y"],
        "rhs": "1+x",
        "solver": {"method": "picard", "tol": 1e-10, "max_iter": 500, "seed": 0},
    },
    "example2": {
        "domain": {"intervals": [[0.0, 1.0]]},
        "quadrature": {"rule": "trapezoid", "nodes_per_dim": 201},
        "linear_kernels": [],
        "hammerstein_kernel": "0.25*sin(u)",
        "rhs": "1",
        "solver": {"method": "newton", "tol": 1e-10, "max_iter": 500, "seed": 0},
    },
}


def canonical_example(example_id: str) -> ProblemFileModel:
    """Embedded instance behind `reproduce example1|example2`."""
    try:
        data = CANONICAL_EXAMPLES[example_id]
    except KeyError:
        known = ", ".join(sorted(CANONICAL_EXAMPLES))
        raise UnknownExampleError(f"unknown example {example_id!r} (known: {known})") from None
    return ProblemFileModel.model_validate(data)
