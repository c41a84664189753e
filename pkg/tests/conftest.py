import pytest

from opeq.expressions import parse
from opeq.grid import DomainSpec, build_grid
from opeq.operators import Problem


@pytest.fixture(scope="session")
def unit_domain():
    return DomainSpec(((0.0, 1.0),))


@pytest.fixture(scope="session")
def grid_201(unit_domain):
    return build_grid(unit_domain, "trapezoid", 201)


@pytest.fixture(scope="session")
def grid_51(unit_domain):
    return build_grid(unit_domain, "trapezoid", 51)


@pytest.fixture()
def constant_kernel_problem(unit_domain, grid_201):
    """u + INT 0.5 u dy = v on [0, 1]: contraction constant exactly 0.5."""
    return Problem(domain=unit_domain, grid=grid_201, linear_kernels=(parse("0.5"),))


@pytest.fixture()
def sine_problem(unit_domain, grid_201):
    """u + INT 0.25 sin(u) dy = v on [0, 1]: smooth Hammerstein instance."""
    return Problem(domain=unit_domain, grid=grid_201, hammerstein_kernel=parse("0.25*sin(u)"))


@pytest.fixture()
def identity_problem(unit_domain, grid_51):
    return Problem(domain=unit_domain, grid=grid_51)


def bisect_sine_constant(target: float = 1.0, tol: float = 1e-12) -> float:
    """Independent oracle: solve c + 0.25*sin(c) = target by plain bisection."""
    import math

    def g(c):
        return c + 0.25 * math.sin(c) - target

    lo, hi = -5.0, 5.0
    assert g(lo) < 0 < g(hi)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if g(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
