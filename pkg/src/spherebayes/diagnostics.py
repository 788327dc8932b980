"""Numerical checks of the theory: constants, zeta bound, limits and rates.

Everything here is seeded and deterministic; the reports are plain dataclasses
that ``cli diagnose`` serialises as JSON lines.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .bayes import PriorSpec, hierarchical_limit_estimate, shrinkage_estimate
from .kernels import KernelSpec, generic_tail_bound, generic_tail_of_t
from .spectral import (
    FOUR_PI,
    TWO_PI,
    BasisSpec,
    WeightScheme,
    basis_matrix,
    legendre_table,
    random_directions,
)
from .spline import RegressionData, diffuse_bayes_estimate, evaluate_spline, fit_spline

# --------------------------------------------------------------------------
# constants


def minimax_constants(s: float, dim: int = 2, vol: float = FOUR_PI) -> tuple[float, float]:
    """Weyl constant W and Pinsker constant phi of the minimax lower bound."""
    if not s > dim / 2:
        raise ValueError("need s > dim/2")
    W = vol / ((2.0 * math.sqrt(math.pi)) ** dim * gamma_fn(1.0 + dim / 2.0))
    e = 2.0 * s / (2.0 * s + dim)
    phi = (2.0 * s / (2.0 * s + 2.0 * dim)) ** e * ((2.0 * s + dim) / dim) ** (dim / (2.0 * s + dim))
    return float(W), float(phi)


def weyl_ratio(k: int) -> float:
    """lambda_k / (number of eigenfunctions up to degree k); tends to 1 on S^2."""
    return k * (k + 1.0) / (k + 1.0) ** 2


@dataclass(frozen=True)
class ZetaResult:
    s: float
    k_max: int
    partial_sum: float
    tail_estimate: float
    tail_bound: float
    covariance_bound_ok: bool

    @property
    def value(self) -> float:
        return self.partial_sum + self.tail_estimate


def zeta_check(s: float, k_max: int = 100_000, rng: np.random.Generator | None = None) -> ZetaResult:
    """Z(x, s) = sum_{k>=1} (2k+1)/(4 pi) (k(k+1))^-s, the same for every x.

    The tail beyond k_max is estimated by the midpoint integral
    ((k+1/2)(k+3/2))^(1-s) / (s-1) / (4 pi) and bounded by the integral test.
    Also checks |Q(x1, x2)| <= Z on random pairs, the covariance bound for the
    tail process.
    """
    if not s > 1:
        raise ValueError("need s > 1")
    k = np.arange(1, k_max + 1, dtype=float)
    partial = float(np.sum((2 * k + 1) * (k * (k + 1)) ** (-s)) / FOUR_PI)
    tail_est = ((k_max + 0.5) * (k_max + 1.5)) ** (1 - s) / (s - 1) / FOUR_PI
    bound = generic_tail_bound(k_max, s)
    rng = rng if rng is not None else np.random.default_rng(0)
    a = random_directions(50, rng)
    b = random_directions(50, rng)
    st = np.sin(a[:, 0]) * np.sin(b[:, 0]) * np.cos(a[:, 1] - b[:, 1]) + np.cos(a[:, 0]) * np.cos(b[:, 0])
    off = generic_tail_of_t(0, s, st, tol=1e-10)
    ok = bool(np.all(np.abs(off) <= partial + tail_est + 1e-12))
    return ZetaResult(s, k_max, partial, float(tail_est), float(bound), ok)


# --------------------------------------------------------------------------
# series oracles used across the test-suite


def iota_series(t, K: int = 0, terms: int = 10_000) -> np.ndarray:
    """Brute-force sum_{k=K+1}^{terms} P_k(t) / (2 pi (k+1)(k+2)(k+3))."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    P = legendre_table(terms, t)
    k = np.arange(terms + 1, dtype=float)[:, None]
    w = 1.0 / (TWO_PI * (k + 1) * (k + 2) * (k + 3))
    return (P * w)[K + 1 :].sum(axis=0)


def alternating_oracle(terms: int = 200_000) -> float:
    """sum_{k>=1} (-1)^k / ((k+1)(k+2)(k+3)) with Richardson averaging of the
    last two partial sums."""
    k = np.arange(1, terms + 1, dtype=float)
    terms_ = (-1.0) ** k / ((k + 1) * (k + 2) * (k + 3))
    s = np.cumsum(terms_)
    return float(0.5 * (s[-1] + s[-2]))


def addition_formula_error(K: int, points) -> float:
    """max |sum_q Y_kq(x)^2 - (2k+1)/(4 pi)| over k <= K and the points."""
    B = basis_matrix(K, points)
    err = 0.0
    for k in range(K + 1):
        sq = (B[:, k * k : (k + 1) ** 2] ** 2).sum(axis=1)
        err = max(err, float(np.abs(sq - (2 * k + 1) / FOUR_PI).max()))
    return err


# --------------------------------------------------------------------------
# limit checks


@dataclass(frozen=True)
class LimitReport:
    seed: int
    shrinkage_identity: float
    diffuse_limit: float
    hb_limit: float
    hb_distances: tuple
    hb_monotone: bool
    passed: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def shrinkage_discrepancy(rng: np.random.Generator, n: int = 10, K: int = 1) -> float:
    spec = BasisSpec(K, weight_scheme=WeightScheme.IOTA)
    pts = random_directions(n, rng)
    y = rng.normal(size=n)
    res = shrinkage_estimate(RegressionData(pts, y), spec, PriorSpec(b=4.0, c_exp=1.0))
    return float(np.abs(res.psi_direct - res.psi_shrinkage).max())


def _regression_instance(rng, n, K, noise=0.1):
    pts = random_directions(n, rng)
    g = rng.normal(size=(K + 3) ** 2)
    y = basis_matrix(K + 2, pts) @ g + noise * rng.normal(size=n)
    return RegressionData(pts, y)


def diffuse_discrepancy(rng, nu: float = 1e8, n: int = 60, K: int = 2, xi: float = 1e-4) -> float:
    spec = BasisSpec(K, weight_scheme=WeightScheme.IOTA)
    kern = KernelSpec.full(K)
    data = _regression_instance(rng, n, K)
    fit = fit_spline(data, spec, kern, xi)
    est = diffuse_bayes_estimate(data, spec, kern, nu, xi)
    q = random_directions(50, rng)
    return float(np.abs(est(q) - evaluate_spline(fit, q)).max())


def hb_limit_distances(rng, n: int = 60, K: int = 2, xi: float = 1e-4, exponents=range(7)):
    spec = BasisSpec(K, weight_scheme=WeightScheme.IOTA)
    kern = KernelSpec.full(K)
    data = _regression_instance(rng, n, K)
    fit = fit_spline(data, spec, kern, xi)
    q = random_directions(50, rng)
    ref = evaluate_spline(fit, q)
    out = []
    for j in exponents:
        est = hierarchical_limit_estimate(data, spec, n * xi, 10.0**j)
        out.append(float(np.abs(est(q) - ref).max()))
    return tuple(out)


def limit_suite(seed: int = 0, shrinkage_instances: int = 20) -> LimitReport:
    rng = np.random.default_rng(seed)
    shrink = max(shrinkage_discrepancy(rng) for _ in range(shrinkage_instances))
    diffuse = diffuse_discrepancy(rng)
    dist = hb_limit_distances(rng)
    mono = all(b < a for a, b in zip(dist, dist[1:]))
    passed = {
        "shrinkage_identity": shrink < 1e-9,
        "diffuse_limit": diffuse < 1e-5,
        "hb_limit": dist[-1] < 1e-4 and mono,
    }
    return LimitReport(seed, shrink, diffuse, dist[-1], dist, mono, passed)


# --------------------------------------------------------------------------
# rate experiment


@dataclass(frozen=True)
class RateReport:
    s: float
    n_values: tuple
    mise: tuple
    slope: float
    theoretical_slope: float
    noise_sd: float
    xi_constant: float
    truth_degree: int
    truth_norm: float  # Sobolev norm bound M of the truncated truth

    @property
    def in_theory_range(self) -> bool:
        """The rate is only claimed above the smoothness floor s > 4 on S^2."""
        return self.s > 4.0

    def to_dict(self) -> dict:
        return asdict(self)


def mise_rule(total: int = 2000) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) times trapezoid in phi; 40 x 50 = 2000 nodes."""
    n_theta = 40
    n_phi = total // n_theta
    x, w = np.polynomial.legendre.leggauss(n_theta)
    phi = np.arange(n_phi) * TWO_PI / n_phi
    T, P = np.meshgrid(np.arccos(x), phi, indexing="ij")
    W = np.outer(w, np.full(n_phi, TWO_PI / n_phi))
    return np.column_stack([T.ravel(), P.ravel()]), W.ravel()


def truth_coefficients(s: float, degree: int, rng: np.random.Generator) -> np.ndarray:
    """gamma_kq = (1+k)^-(s+1) with a random sign per coefficient."""
    kappa = (degree + 1) ** 2
    k = np.concatenate([np.full(2 * j + 1, j) for j in range(degree + 1)])
    return (1.0 + k) ** (-(s + 1.0)) * rng.choice([-1.0, 1.0], size=kappa)


def sobolev_norm(coef: np.ndarray, s: float) -> float:
    degree = int(round(math.sqrt(coef.size))) - 1
    k = np.concatenate([np.full(2 * j + 1, j) for j in range(degree + 1)])
    return float(np.sum((k * (k + 1.0)) ** s * coef**2))


def rate_experiment(
    s: float = 5.0,
    n_list=(100, 200, 400, 800, 1600),
    replicates: int = 20,
    seed: int = 0,
    noise_sd: float = 0.5,
    xi_constant: float = 1e-5,
    truth_degree: int = 12,
    K: int = 0,
) -> RateReport:
    """Monte Carlo MISE of the spline with xi = C n^(-2s/(2s+2)).

    Uniform random designs, a truth with coefficients (1+k)^-(s+1) up to
    ``truth_degree`` (signs drawn once from the seed), and the GENERIC_S
    kernel of order s.  The slope is the least-squares fit of log MISE on
    log n.  Orders 1 < s <= 4 run for exploration; see ``in_theory_range``.
    """
    if not s > 1:
        raise ValueError("need s > 1")
    n_list = tuple(int(n) for n in n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    master = np.random.default_rng(seed)
    coef = truth_coefficients(s, truth_degree, master)
    nodes, weights = mise_rule()
    truth_at_nodes = basis_matrix(truth_degree, nodes) @ coef
    spec = BasisSpec(K, s, WeightScheme.LAMBDA)
    kern = KernelSpec(spec, "generic")
    streams = master.spawn(len(n_list))
    mise = []
    expo = 2.0 * s / (2.0 * s + 2.0)
    for n, stream in zip(n_list, streams):
        xi = xi_constant * n ** (-expo)
        errs = []
        for rep_rng in stream.spawn(replicates):
            pts = random_directions(n, rep_rng)
            y = basis_matrix(truth_degree, pts) @ coef + noise_sd * rep_rng.normal(size=n)
            fit = fit_spline(RegressionData(pts, y), spec, kern, xi)
            err = evaluate_spline(fit, nodes) - truth_at_nodes
            errs.append(float(weights @ err**2))
        mise.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log(n_list), np.log(mise), 1)[0])
    return RateReport(
        s, n_list, tuple(mise), slope, -expo, noise_sd, xi_constant, truth_degree,
        sobolev_norm(coef, s),
    )
