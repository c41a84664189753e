"""Numerical checks of the structural hypotheses behind solvability.

Each check samples a hypothesis at discrete scale and reports evidence, not
proof: contraction moduli from kernel sups, norm separation from 1, ray
probes of weak coercivity with a certificate only in the contractive case,
Frechet remainder order for the Hammerstein part, sampled Rayleigh
quotients for the coercive-bilinear-form condition, and rank/index
computations with perturbation trials for index stability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import require_same_grid
from .operators import (
    NystromMatrix,
    Problem,
    apply_f_values,
    assemble_linear,
    hammerstein_jacobian_entries,
    hammerstein_values,
    operator_sup_norm,
    sampled_h_sup,
    sampled_hu_sup,
    sampled_kernel_sup,
)

SV_RANK_RTOL = 1e-10
NORM_SEPARATION_BAND = 1e-8
MONOTONE_DECREASE_RTOL = 1e-9
FRECHET_PASS_ORDER = 1.5
FRECHET_NOISE_LEVEL = 1e-13


class MissingHammersteinError(ValueError):
    """Frechet check requested on a problem without a Hammerstein kernel."""


@dataclass(frozen=True)
class ContractionReport:
    kernel_sup_M: float
    measure: float
    contraction_constant_k: float
    # sup|h| bounds the operator's size, sup|h_u| its Lipschitz modulus; the
    # contraction estimate uses the latter, both are reported
    hammerstein_h_sup: float | None
    hammerstein_hu_sup: float | None
    hu_sample_range: float | None
    combined_estimate_kappa: float
    is_contractive: bool


@dataclass(frozen=True)
class CoercivityReport:
    # one list of (scale, ||f(scale*u)||_sup) pairs per probe direction
    ray_samples: list[list[tuple[float, float]]]
    lower_bound_certified: float | None
    monotone_growth_observed: bool
    certificate_note: str


@dataclass(frozen=True)
class NormSeparationReport:
    norm_K_plus_C: float
    distance_from_1: float
    corollary1_gap: float | None
    passed: bool


@dataclass(frozen=True)
class FrechetReport:
    t_values: list[float]
    remainders: list[float]
    estimated_order: float | None
    passed: bool


@dataclass(frozen=True)
class LaxMilgramReport:
    min_rayleigh: float
    trials: int
    seed: int

    def pass_for_c(self, c: float) -> bool:
        """Whether the sampled quotients stayed >= c (an estimate, not a certificate)."""
        return self.min_rayleigh >= c


@dataclass(frozen=True)
class IndexReport:
    rows: int
    cols: int
    rank: int
    dim_kernel: int
    codim_range: int
    index: int
    sv_threshold_used: float


@dataclass(frozen=True)
class IndexStabilityReport:
    perturbation_kind: str
    magnitude: float
    trials: int
    index: int
    all_indices_equal: bool
    rank_instability_flagged: bool


def check_contraction(problem: Problem, u_range: float = 10.0) -> ContractionReport:
    """Sample the contraction condition max|k| * meas(Omega) < 1.

    The linear kernels are summed and their absolute max M is sampled over
    all grid node pairs; |h_u| is sampled over grid pairs times 101 uniform
    u-values in [-u_range, u_range].  kappa = M*meas + sup|h_u|*meas.
    """
    if not u_range > 0:
        raise ValueError("u_range must be positive")
    measure = problem.grid.measure
    m_sup = sampled_kernel_sup(problem)
    h_sup = sampled_h_sup(problem, u_range)
    hu_sup = sampled_hu_sup(problem, u_range)
    kappa = m_sup * measure + (hu_sup * measure if hu_sup is not None else 0.0)
    return ContractionReport(
        kernel_sup_M=m_sup,
        measure=measure,
        contraction_constant_k=m_sup * measure,
        hammerstein_h_sup=h_sup,
        hammerstein_hu_sup=hu_sup,
        hu_sample_range=u_range if hu_sup is not None else None,
        combined_estimate_kappa=kappa,
        is_contractive=kappa < 1.0,
    )


def check_weak_coercivity(
    problem: Problem,
    directions: int = 4,
    scales: tuple[float, ...] = (1.0, 10.0, 100.0),
    seed: int = 0,
) -> CoercivityReport:
    """Tabulate ||f(scale*u)|| along rays of unit-sup-norm directions.

    Direction 0 is the constant function 1; the rest are seeded random.
    A linear lower bound is certified only for purely linear problems with
    ||K|| < |alpha| (the contractive case); otherwise the samples are
    evidence only, since the reverse-triangle bound is not pointwise valid
    when the perturbation norm exceeds the identity part.
    """
    if len(scales) < 2 or any(b <= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly increasing with >= 2 entries")
    if directions < 1:
        raise ValueError("directions must be >= 1")
    grid = problem.grid
    rng = np.random.default_rng(seed)
    dirs = [np.ones(grid.size)]
    while len(dirs) < directions:
        cand = rng.uniform(-1.0, 1.0, grid.size)
        peak = float(np.max(np.abs(cand)))
        if peak > 0:
            dirs.append(cand / peak)

    rays = []
    for direction in dirs:
        samples = []
        for lam in scales:
            value = float(np.max(np.abs(apply_f_values(problem, lam * direction))))
            samples.append((float(lam), value))
        rays.append(samples)

    monotone = True
    for samples in rays:
        values = [v for _, v in samples]
        if not values[-1] > values[0]:
            monotone = False
        for a, b in zip(values, values[1:]):
            if b < a * (1.0 - MONOTONE_DECREASE_RTOL):
                monotone = False

    alpha = abs(problem.identity_coefficient)
    linear_norm = operator_sup_norm(problem.linear_matrix())
    if not problem.has_hammerstein and linear_norm < alpha:
        certified = alpha - linear_norm
        note = (
            f"certified: ||f(u)|| >= {certified:.6g}*||u|| since the linear "
            f"perturbation norm {linear_norm:.6g} < |alpha| = {alpha:.6g}"
        )
    else:
        certified = None
        note = (
            "no certificate: the reverse-triangle lower bound is only implied "
            "when the perturbation norm is below the identity part; ray "
            "samples are reported as evidence"
        )
    return CoercivityReport(
        ray_samples=rays,
        lower_bound_certified=certified,
        monotone_growth_observed=monotone,
        certificate_note=note,
    )


def check_norm_separation(problem: Problem) -> NormSeparationReport:
    """Distance of ||sum of linear kernels|| from 1 (the degenerate family).

    Also reports | ||I + K_first|| - ||sum of the rest|| | as the gap for the
    homeomorphism-plus-compact split when at least one kernel is present.
    """
    grid = problem.grid
    norm = operator_sup_norm(problem.linear_matrix())
    distance = abs(norm - 1.0)
    gap = None
    if problem.linear_kernels:
        first = assemble_linear(grid, problem.linear_kernels[0]).entries
        f_norm = operator_sup_norm(
            problem.identity_coefficient * np.eye(grid.size) + first
        )
        rest = np.zeros_like(first)
        for k in problem.linear_kernels[1:]:
            rest = rest + assemble_linear(grid, k).entries
        gap = abs(f_norm - operator_sup_norm(rest))
    return NormSeparationReport(
        norm_K_plus_C=norm,
        distance_from_1=distance,
        corollary1_gap=gap,
        passed=distance > NORM_SEPARATION_BAND,
    )


def check_frechet(
    problem: Problem,
    u,
    m,
    t_values: tuple[float, ...] = (1e-2, 1e-3, 1e-4),
) -> FrechetReport:
    """Remainder order of C(u + t*m) - C(u) - t*C'(u)m as t decreases.

    The estimated order is the least-squares slope of log remainder against
    log t; it passes at slope >= 1.5 (smooth kernels give about 2), or with
    all remainders at roundoff level for kernels affine in u, in which case
    the slope is meaningless and reported as None.
    """
    if not problem.has_hammerstein:
        raise MissingHammersteinError("problem has no Hammerstein kernel")
    if len(t_values) < 3 or any(b >= a for a, b in zip(t_values, t_values[1:])) or t_values[-1] <= 0:
        raise ValueError("t_values must be strictly decreasing positive with >= 3 entries")
    grid = problem.grid
    require_same_grid(grid, u)
    require_same_grid(grid, m)
    h = problem.hammerstein_kernel
    c_u = hammerstein_values(grid, h, u.values)
    jac_m = hammerstein_jacobian_entries(
        grid, h, u.values, problem.hammerstein_derivative
    ) @ m.values

    remainders = []
    for t in t_values:
        c_t = hammerstein_values(grid, h, u.values + t * m.values)
        remainders.append(float(np.max(np.abs(c_t - c_u - t * jac_m))))

    at_noise = max(remainders) <= FRECHET_NOISE_LEVEL
    if at_noise:
        order = None
    else:
        logs = np.log([max(r, 1e-300) for r in remainders])
        order = float(np.polyfit(np.log(np.asarray(t_values)), logs, 1)[0])
    passed = at_noise or (order is not None and order >= FRECHET_PASS_ORDER)
    return FrechetReport(
        t_values=[float(t) for t in t_values],
        remainders=remainders,
        estimated_order=order,
        passed=passed,
    )


def check_lax_milgram(matrix, trials: int = 64, seed: int = 0) -> LaxMilgramReport:
    """Sampled min of |u^T A u| / (u^T u) over random unit vectors.

    A positive sampled minimum is evidence for the coercive-bilinear-form
    condition |(Au|u)| >= c||u||^2; it never certifies it.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    a = matrix.entries if isinstance(matrix, NystromMatrix) else np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    rng = np.random.default_rng(seed)
    smallest = np.inf
    for _ in range(trials):
        u = rng.standard_normal(a.shape[0])
        u = u / np.linalg.norm(u)
        quotient = abs(float(u @ (a @ u))) / float(u @ u)
        smallest = min(smallest, quotient)
    return LaxMilgramReport(min_rayleigh=smallest, trials=trials, seed=seed)


def fredholm_index(matrix) -> IndexReport:
    """Rank via singular values above 1e-10 * sigma_max; index = n - m.

    dim ker = n - rank and codim range = m - rank, so the index is forced
    to n - m by rank-nullity whatever the rank; the report carries all four
    numbers and the absolute threshold used.
    """
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError("matrix must be 2-D and non-empty")
    rows, cols = a.shape
    singular = np.linalg.svd(a, compute_uv=False)
    threshold = SV_RANK_RTOL * float(singular[0])
    rank = int(np.sum(singular > threshold))
    return IndexReport(
        rows=rows,
        cols=cols,
        rank=rank,
        dim_kernel=cols - rank,
        codim_range=rows - rank,
        index=(cols - rank) - (rows - rank),
        sv_threshold_used=threshold,
    )


def index_stability_trial(
    s_matrix,
    perturbation_kind: str,
    magnitude: float,
    trials: int = 100,
    seed: int = 0,
) -> IndexStabilityReport:
    """Verify the index is unchanged by seeded random perturbations.

    finite_rank: random rank-one outer products scaled to spectral norm
    `magnitude`; small_norm: random dense matrices scaled likewise.  The
    report flags rank instability when some singular value of S sits within
    10*magnitude of the rank threshold, where computed ranks (not indices)
    may wobble.
    """
    if perturbation_kind not in ("finite_rank", "small_norm"):
        raise ValueError("perturbation_kind must be 'finite_rank' or 'small_norm'")
    if not magnitude > 0:
        raise ValueError("magnitude must be positive")
    s = np.asarray(s_matrix, dtype=np.float64)
    base = fredholm_index(s)
    rows, cols = s.shape
    rng = np.random.default_rng(seed)

    all_equal = True
    for _ in range(trials):
        if perturbation_kind == "finite_rank":
            a = rng.standard_normal(rows)
            b = rng.standard_normal(cols)
            perturbation = np.outer(a, b)
            norm = float(np.linalg.norm(a) * np.linalg.norm(b))
        else:
            perturbation = rng.standard_normal((rows, cols))
            norm = float(np.linalg.svd(perturbation, compute_uv=False)[0])
        perturbation *= magnitude / norm
        if fredholm_index(s + perturbation).index != base.index:
            all_equal = False

    singular = np.linalg.svd(s, compute_uv=False)
    cutoff = SV_RANK_RTOL * float(singular[0])
    flagged = bool(np.any(np.abs(singular - cutoff) <= 10.0 * magnitude))
    return IndexStabilityReport(
        perturbation_kind=perturbation_kind,
        magnitude=magnitude,
        trials=trials,
        index=base.index,
        all_indices_equal=all_equal,
        rank_instability_flagged=flagged,
    )
