"""Quadrature grids on axis-aligned boxes and functions living on them.

A Grid realizes INT_Omega by a positive quadrature rule and the sup-norm of
C(Omega) by the max over nodes.  Omega is a product of 1 or 2 closed
intervals; 2-D rules are row-major tensor products of the 1-D rule.  Every
grid carries an identity token so that functions from different grids
cannot be mixed silently.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .expressions import Expr, evaluate_array

DEFAULT_NODES_1D = 201
DEFAULT_NODES_2D = 41

_RULES = ("trapezoid", "gauss-legendre")

_token_counter = itertools.count(1)


class InvalidDomainError(ValueError):
    """Interval with a >= b."""


class UnsupportedDimensionError(ValueError):
    """Domain dimension outside {1, 2}."""


class GridMismatchError(ValueError):
    """Grid function used with a grid it does not belong to."""


class EmptyFunctionError(ValueError):
    """Grid function with no values."""


@dataclass(frozen=True)
class DomainSpec:
    """Product of closed intervals [a_i, b_i], dimension 1 or 2."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        object.__setattr__(self, "intervals", ivs)
        if len(ivs) == 0:
            raise InvalidDomainError("domain needs at least one interval")
        if len(ivs) > 2:
            raise UnsupportedDimensionError(f"dimension {len(ivs)} not supported (max 2)")
        for a, b in ivs:
            if not (a < b):
                raise InvalidDomainError(f"interval [{a}, {b}] is empty")

    @property
    def dimension(self) -> int:
        return len(self.intervals)

    @property
    def measure(self) -> float:
        out = 1.0
        for a, b in self.intervals:
            out *= b - a
        return out


@dataclass(frozen=True)
class Grid:
    """Quadrature nodes/weights on a DomainSpec.

    nodes has shape (n, dim); weights shape (n,), all positive and summing
    to the domain measure up to roundoff.
    """

    domain: DomainSpec
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    rule: str
    nodes_per_dim: int
    token: int = field(default_factory=lambda: next(_token_counter), compare=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def measure(self) -> float:
        return self.domain.measure

    def function(self, values) -> "GridFunction":
        """Wrap an array of node values as a function on this grid."""
        return GridFunction(np.asarray(values, dtype=np.float64), self)

    def constant(self, value: float) -> "GridFunction":
        return self.function(np.full(self.size, float(value)))

    def spatial_bindings(self, prefix: str = "x") -> dict[str, np.ndarray]:
        """Variable bindings {x1[, x2]} (or y...) of the node coordinates."""
        out = {f"{prefix}1": self.nodes[:, 0]}
        if self.domain.dimension == 2:
            out[f"{prefix}2"] = self.nodes[:, 1]
        return out

    def from_expression(self, expr: Expr) -> "GridFunction":
        """Evaluate a spatial expression (variables x1[, x2]) at the nodes."""
        values = evaluate_array(expr, self.spatial_bindings("x"), shape=(self.size,))
        return self.function(values)


@dataclass(frozen=True)
class GridFunction:
    """Element of the discretized C(Omega): one value per grid node."""

    values: np.ndarray = field(repr=False)
    grid: Grid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.shape[0] != self.grid.size:
            raise GridMismatchError(
                f"values have shape {values.shape}, grid has {self.grid.size} nodes"
            )
        if values.shape[0] and not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)


def require_same_grid(grid: Grid, f: GridFunction) -> None:
    if f.grid.token != grid.token:
        raise GridMismatchError("grid function belongs to a different grid")


def _rule_1d(a: float, b: float, rule: str, m: int) -> tuple[np.ndarray, np.ndarray]:
    if rule == "trapezoid":
        nodes = np.linspace(a, b, m)
        h = (b - a) / (m - 1)
        weights = np.full(m, h)
        weights[0] = weights[-1] = h / 2
        return nodes, weights
    # gauss-legendre on [-1, 1], mapped affinely
    t, w = np.polynomial.legendre.leggauss(m)
    half = (b - a) / 2
    return half * t + (a + b) / 2, half * w


def build_grid(domain: DomainSpec, rule: str = "trapezoid", nodes_per_dim: int | None = None) -> Grid:
    """Build a quadrature grid.

    trapezoid: uniform nodes, weights h*[1/2, 1, ..., 1, 1/2].
    gauss-legendre: standard nodes/weights mapped to each interval.
    2-D grids are the row-major tensor product of the 1-D rules.
    """
    if rule not in _RULES:
        raise ValueError(f"rule must be one of {_RULES}, got {rule!r}")
    if nodes_per_dim is None:
        nodes_per_dim = DEFAULT_NODES_1D if domain.dimension == 1 else DEFAULT_NODES_2D
    if nodes_per_dim < 2:
        raise ValueError(f"nodes_per_dim must be >= 2, got {nodes_per_dim}")
    per_dim = [_rule_1d(a, b, rule, nodes_per_dim) for a, b in domain.intervals]
    if domain.dimension == 1:
        nodes = per_dim[0][0][:, None].copy()
        weights = per_dim[0][1].copy()
    else:
        (n1, w1), (n2, w2) = per_dim
        nodes = np.column_stack(
            [np.repeat(n1, nodes_per_dim), np.tile(n2, nodes_per_dim)]
        )
        weights = (w1[:, None] * w2[None, :]).ravel()
    return Grid(domain=domain, nodes=nodes, weights=weights, rule=rule, nodes_per_dim=nodes_per_dim)


def integrate(grid: Grid, f: GridFunction) -> float:
    """Quadrature sum sum_j w_j f_j approximating INT_Omega f."""
    require_same_grid(grid, f)
    return float(np.dot(grid.weights, f.values))


def sup_norm(f: GridFunction) -> float:
    """max_j |f_j|, the discrete C(Omega) norm."""
    if f.values.shape[0] == 0:
        raise EmptyFunctionError("sup_norm of an empty grid function")
    return float(np.max(np.abs(f.values)))
