import numpy as np
import pytest

from opeq.expressions import parse
from opeq.grid import DomainSpec, GridMismatchError, build_grid
from opeq.operators import (
    DerivativeMismatchError,
    KernelUsesUError,
    Problem,
    ResidualBoundError,
    SingularMatrixError,
    apply_f,
    apply_hammerstein,
    assemble_linear,
    hammerstein_jacobian,
    is_nonsingular,
    linear_solve,
    operator_sup_norm,
    sampled_hu_sup,
    sampled_kernel_sup,
)


@pytest.fixture()
def g3():
    return build_grid(DomainSpec(((0.0, 1.0),)), "trapezoid", 3)


class TestAssembleLinear:
    def test_constant_kernel_row_sums(self, g3):
        m = assemble_linear(g3, parse("0.5"))
        assert np.allclose(m.entries.sum(axis=1), 0.5, rtol=0, atol=1e-15)
        assert np.array_equal(m.entries, 0.5 * np.tile(g3.weights, (3, 1)))

    def test_zero_kernel(self, g3):
        assert np.all(assemble_linear(g3, parse("0")).entries == 0.0)

    def test_separable_kernel_on_constant_function(self, grid_201):
        # INT_0^1 x*y dy = x/2, exact for trapezoid (affine in y)
        m = assemble_linear(grid_201, parse("x*y"))
        out = m.apply(np.ones(grid_201.size))
        assert np.allclose(out, grid_201.nodes[:, 0] * 0.5, rtol=0, atol=1e-14)

    def test_row_sums_equal_apply_to_one(self, grid_201):
        m = assemble_linear(grid_201, parse("0.4*cos(x*y)"))
        assert np.allclose(m.apply(np.ones(grid_201.size)), m.entries.sum(axis=1), rtol=1e-14)

    def test_kernel_with_u_rejected(self, g3):
        with pytest.raises(KernelUsesUError):
            assemble_linear(g3, parse("u"))

    def test_2d_assembly_constant(self):
        g = build_grid(DomainSpec(((0.0, 2.0), (0.0, 3.0))), "trapezoid", 5)
        m = assemble_linear(g, parse("0.1"))
        assert np.allclose(m.entries.sum(axis=1), 0.1 * 6.0, rtol=1e-12)


class TestApplyHammerstein:
    def test_sine_at_zero(self, grid_201):
        h = parse("0.25*sin(u)")
        out = apply_hammerstein(grid_201, h, grid_201.constant(0.0))
        assert np.all(out.values == 0.0)

    def test_sine_at_half_pi(self, grid_201):
        h = parse("0.25*sin(u)")
        out = apply_hammerstein(grid_201, h, grid_201.constant(np.pi / 2))
        assert np.allclose(out.values, 0.25, rtol=0, atol=1e-14)

    def test_u_free_kernel_matches_linear_path(self, grid_201):
        h = parse("0.3*cos(x*y)")
        ones = grid_201.constant(1.0)
        out = apply_hammerstein(grid_201, h, ones)
        linear = assemble_linear(grid_201, h).apply(ones.values)
        assert np.allclose(out.values, linear, rtol=1e-14)

    def test_grid_mismatch(self, grid_201, grid_51):
        with pytest.raises(GridMismatchError):
            apply_hammerstein(grid_201, parse("u"), grid_51.constant(0.0))

    def test_domain_error_propagates(self, grid_51):
        from opeq.expressions import NumericDomainError

        with pytest.raises(NumericDomainError):
            apply_hammerstein(grid_51, parse("1/u"), grid_51.constant(0.0))


class TestHammersteinJacobian:
    def test_sine_at_zero_entries(self, grid_201):
        jac = hammerstein_jacobian(grid_201, parse("0.25*sin(u)"), grid_201.constant(0.0))
        assert np.array_equal(jac.entries, 0.25 * np.tile(grid_201.weights, (grid_201.size, 1)))

    def test_u_free_kernel_zero_jacobian(self, grid_201):
        jac = hammerstein_jacobian(grid_201, parse("x*y"), grid_201.constant(1.0))
        assert np.all(jac.entries == 0.0)

    def test_bitwise_match_with_frozen_assembly(self, grid_51):
        # h = x*u has h_u = x (structurally u-free via the override): the
        # Jacobian must agree bitwise with assembling that kernel directly
        u = grid_51.constant(0.7)
        jac = hammerstein_jacobian(grid_51, parse("x*u"), u, derivative=parse("x"))
        direct = assemble_linear(grid_51, parse("x"))
        assert np.array_equal(jac.entries, direct.entries)

    def test_jvp_matches_finite_differences(self, grid_201):
        h = parse("0.25*sin(u)")
        u = grid_201.constant(0.8)
        m = grid_201.function(np.cos(3 * grid_201.nodes[:, 0]))
        jac = hammerstein_jacobian(grid_201, h, u)
        jv = jac.apply(m.values)
        errs = []
        for t in (1e-3, 1e-4, 1e-5):
            up = grid_201.function(u.values + t * m.values)
            fd = (apply_hammerstein(grid_201, h, up).values
                  - apply_hammerstein(grid_201, h, u).values) / t
            errs.append(np.max(np.abs(fd - jv)))
        # remainder is O(t): one decade per step of t
        assert 5 <= errs[0] / errs[1] <= 20
        assert 5 <= errs[1] / errs[2] <= 20

    def test_override_crosscheck_accepts_correct(self, grid_51):
        u = grid_51.constant(0.3)
        jac = hammerstein_jacobian(
            grid_51, parse("0.25*sin(u)"), u, derivative=parse("0.25*cos(u)")
        )
        sym = hammerstein_jacobian(grid_51, parse("0.25*sin(u)"), u)
        assert np.allclose(jac.entries, sym.entries, rtol=0, atol=1e-15)

    def test_override_crosscheck_rejects_wrong(self, grid_51):
        u = grid_51.constant(0.3)
        with pytest.raises(DerivativeMismatchError):
            hammerstein_jacobian(
                grid_51, parse("0.25*sin(u)"), u, derivative=parse("0.3*cos(u)")
            )


class TestApplyF:
    def test_identity_only(self, grid_51):
        dom = DomainSpec(((0.0, 1.0),))
        p = Problem(domain=dom, grid=grid_51)
        v = grid_51.function(np.sin(grid_51.nodes[:, 0]))
        assert np.array_equal(apply_f(p, v).values, v.values)

    def test_constant_kernel_closed_form(self, constant_kernel_problem):
        g = constant_kernel_problem.grid
        out = apply_f(constant_kernel_problem, g.constant(2.0 / 3.0))
        assert np.allclose(out.values, 1.0, rtol=0, atol=1e-12)

    def test_zero_through_sine(self, sine_problem):
        g = sine_problem.grid
        assert np.all(apply_f(sine_problem, g.constant(0.0)).values == 0.0)

    def test_identity_coefficient(self, grid_51):
        dom = DomainSpec(((0.0, 1.0),))
        p = Problem(domain=dom, grid=grid_51, identity_coefficient=2.0)
        v = grid_51.constant(1.0)
        assert np.allclose(apply_f(p, v).values, 2.0, rtol=0, atol=0)

    def test_zero_identity_coefficient_rejected(self, grid_51):
        with pytest.raises(ValueError):
            Problem(domain=DomainSpec(((0.0, 1.0),)), grid=grid_51, identity_coefficient=0.0)


class TestOperatorSupNorm:
    def test_zero_matrix(self, g3):
        assert operator_sup_norm(assemble_linear(g3, parse("0"))) == 0.0

    def test_constant_half(self, grid_201):
        assert operator_sup_norm(assemble_linear(grid_201, parse("0.5"))) == pytest.approx(
            0.5, abs=1e-13
        )

    def test_product_kernel(self, grid_201):
        # max_x INT_0^1 x*y dy = 1/2 (analytic oracle), exact for affine-in-y
        assert operator_sup_norm(assemble_linear(grid_201, parse("x*y"))) == pytest.approx(
            0.5, abs=1e-12
        )

    def test_bounded_by_sup_times_measure(self, grid_201):
        dom = DomainSpec(((0.0, 1.0),))
        for source in ("0.4*cos(x*y)", "x*y - 0.2", "exp(tanh(x+y))*0.1"):
            p = Problem(domain=dom, grid=grid_201, linear_kernels=(parse(source),))
            norm = operator_sup_norm(p.linear_matrix())
            bound = sampled_kernel_sup(p) * grid_201.measure
            assert norm <= bound + 1e-12

    def test_equality_for_constant_kernel(self, grid_201):
        dom = DomainSpec(((0.0, 1.0),))
        p = Problem(domain=dom, grid=grid_201, linear_kernels=(parse("-0.7"),))
        assert operator_sup_norm(p.linear_matrix()) == pytest.approx(0.7, abs=1e-13)


class TestLinearSolve:
    def test_identity(self):
        b = np.array([3.0, -1.0, 2.5])
        assert np.array_equal(linear_solve(np.eye(3), b), b)

    def test_diagonal(self):
        x = linear_solve(np.diag([2.0, 4.0]), np.array([2.0, 8.0]))
        assert np.allclose(x, [1.0, 2.0], rtol=0, atol=0)

    def test_constant_kernel_oracle(self, constant_kernel_problem):
        # closed form u = v/(1 + lambda*meas) with lambda = 0.5
        g = constant_kernel_problem.grid
        a = np.eye(g.size) + constant_kernel_problem.linear_matrix().entries
        x = linear_solve(a, np.ones(g.size))
        assert np.max(np.abs(x - 2.0 / 3.0)) <= 1e-12

    def test_singular_matrix(self):
        with pytest.raises(SingularMatrixError):
            linear_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.array([1.0, 2.0]))

    def test_zero_matrix(self):
        with pytest.raises(SingularMatrixError):
            linear_solve(np.zeros((2, 2)), np.array([1.0, 2.0]))

    def test_near_singular_pivot_threshold(self):
        with pytest.raises(SingularMatrixError):
            linear_solve(np.diag([1.0, 1e-15]), np.array([1.0, 1.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            linear_solve(np.eye(3), np.ones(2))
        with pytest.raises(ValueError):
            linear_solve(np.ones((2, 3)), np.ones(2))

    def test_backward_residual_on_conditioned_matrices(self):
        # 100 random matrices with condition up to 1e6, solution of size O(1)
        rng = np.random.default_rng(42)
        for trial in range(100):
            n = int(rng.integers(5, 60))
            q1, _ = np.linalg.qr(rng.standard_normal((n, n)))
            q2, _ = np.linalg.qr(rng.standard_normal((n, n)))
            cond = 10.0 ** rng.uniform(0, 6)
            sigma = np.logspace(0, -np.log10(cond), n)
            a = q1 @ np.diag(sigma) @ q2
            x_true = rng.uniform(-1.0, 1.0, n)
            b = a @ x_true
            x = linear_solve(a, b)
            residual = np.max(np.abs(a @ x - b))
            assert residual <= 1e-10 * (1.0 + np.max(np.abs(b)))

    def test_is_nonsingular(self):
        assert is_nonsingular(np.eye(4))
        assert not is_nonsingular(np.zeros((3, 3)))


class TestSampledModuli:
    def test_kernel_sup_constant(self, constant_kernel_problem):
        assert sampled_kernel_sup(constant_kernel_problem) == 0.5

    def test_kernel_sup_sums_kernels(self, grid_51):
        dom = DomainSpec(((0.0, 1.0),))
        p = Problem(domain=dom, grid=grid_51, linear_kernels=(parse("0.3"), parse("0.2")))
        assert sampled_kernel_sup(p) == 0.5

    def test_hu_sup_attains_cos_peak(self, sine_problem):
        # |0.25*cos(u)| attains 0.25 at u = 0, inside any symmetric range
        assert sampled_hu_sup(sine_problem, u_range=3.0) == 0.25

    def test_hu_sup_none_without_hammerstein(self, constant_kernel_problem):
        assert sampled_hu_sup(constant_kernel_problem, u_range=1.0) is None
