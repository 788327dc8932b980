"""Symmetry-adaptive hierarchical Bayes regression on the sphere.

Coefficients gamma of the retained harmonics get the mixture prior
p N(0, tau^2 Gamma^0) + (1 - p) N(0, tau^2 Gamma^1): branch 0 holds the
non-zonal coefficients at exactly zero (rotational symmetry about the pole),
branch 1 lets them vary.  The tail beyond degree K is integrated out into the
covariance through Q(p) = p Z + (1 - p) F, with Z the zonal and F the full
tail kernel.  tau^2 and v = sigma^2/tau^2 receive second-stage priors and are
integrated out numerically (see ``vposterior``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .errors import EmptyInput, NonIntegrable, SingularSystem
from .kernels import KernelSpec, check_distinct, full_tail_of_t, gram, kernel_cross
from .spectral import (
    BasisSpec,
    Direction,
    PointsLike,
    WeightScheme,
    as_points,
    basis_matrix,
    iota_weight,
    legendre_table,
    unit_vectors,
)
from .spline import RegressionData, cholesky, design_matrix
from .vposterior import VPosterior, hyper_a

__all__ = [
    "PriorSpec",
    "BranchCovariances",
    "SpectralReduction",
    "BayesFit",
    "TailCache",
    "build_branch_covariances",
    "spectral_reduce",
    "v_posterior_density",
    "branch_posterior_mean",
    "posterior_mixture_weight",
    "posterior_variance",
    "fit_hierarchical",
    "shrinkage_estimate",
    "hierarchical_limit_estimate",
]


@dataclass(frozen=True)
class PriorSpec:
    """First- and second-stage prior settings.

    The default retained ladders are the iota weights for every zonal entry;
    branch 1 gives non-zonal entries ``epsilon`` times that weight and branch
    0 gives them zero.  ``retained_scale`` multiplies both retained ladders.
    Explicit ``beta0``/``beta1`` vectors (in basis ordering) override the
    defaults.
    """

    p: float = 0.5
    b: float = 4.0
    c_exp: float = 1.0
    epsilon: float = 0.01
    retained_scale: float = 100.0
    beta0: np.ndarray | None = field(default=None, compare=False)
    beta1: np.ndarray | None = field(default=None, compare=False)
    series_tolerance: float = 1e-10

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if not 2.0 < self.b <= 4.0:
            raise ValueError("b must lie in (2, 4]")
        if not self.c_exp < self.b / 2.0:
            raise ValueError("c_exp must be below b/2")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")
        if not self.retained_scale > 0:
            raise ValueError("retained_scale must be positive")

    @property
    def a(self) -> float:
        return hyper_a(self.b)

    def with_p(self, p: float) -> "PriorSpec":
        return PriorSpec(
            p, self.b, self.c_exp, self.epsilon, self.retained_scale,
            self.beta0, self.beta1, self.series_tolerance,
        )

    def ladders(self, spec: BasisSpec) -> tuple[np.ndarray, np.ndarray]:
        zonal = spec.zonal_mask
        base = self.retained_scale * iota_weight(spec.degrees)
        beta0 = np.where(zonal, base, 0.0) if self.beta0 is None else np.asarray(self.beta0, float)
        beta1 = (
            np.where(zonal, base, self.epsilon * base)
            if self.beta1 is None
            else np.asarray(self.beta1, float)
        )
        _check_ladders(spec, beta0, beta1)
        return beta0, beta1


def _check_ladders(spec: BasisSpec, beta0, beta1) -> None:
    kappa = spec.kappa
    if beta0.shape != (kappa,) or beta1.shape != (kappa,):
        raise ValueError(f"ladders must have length {kappa}")
    zonal = spec.zonal_mask
    if np.any(beta0[~zonal] != 0.0):
        raise ValueError("branch-0 ladder must be exactly zero off the zonal entries")
    if np.any(beta0[zonal] <= 0) or np.any(beta1 < 0):
        raise ValueError("ladders must be positive on zonal entries and non-negative elsewhere")
    # non-zonal entries of branch 1 may not exceed the zonal entry of their degree
    zonal_of_degree = beta1[zonal][spec.degrees]
    if np.any(beta1 > zonal_of_degree * (1 + 1e-12)):
        raise ValueError("branch-1 non-zonal variances must not exceed the zonal variance")


# --------------------------------------------------------------------------
# tail covariances


class TailCache:
    """Tail kernel matrices on a fixed design for several truncation levels.

    The K = 0 zonal tail is summed once; higher K remove the degree-1..K
    terms.  The full tail has a closed form and is evaluated directly.
    """

    def __init__(self, points: PointsLike, series_tolerance: float = 1e-10):
        self.points = as_points(points)
        check_distinct(self.points)
        self.tol = series_tolerance
        self._zonal0 = None
        self._cos = np.cos(self.points[:, 0])
        xyz = unit_vectors(self.points[:, 0], self.points[:, 1])
        self._t = np.clip(xyz @ xyz.T, -1.0, 1.0)

    def _degree_weight(self, k):
        return 1.0 / (2.0 * math.pi * (k + 1.0) * (k + 2.0) * (k + 3.0))

    def zonal(self, K: int) -> np.ndarray:
        if self._zonal0 is None:
            self._zonal0 = gram(KernelSpec.zonal(0, series_tolerance=self.tol), self.points)
        Z = self._zonal0.copy()
        if K >= 1:
            P = legendre_table(K, self._cos)
            for k in range(1, K + 1):
                Z -= self._degree_weight(k) * np.outer(P[k], P[k])
        return Z

    def full(self, K: int) -> np.ndarray:
        return full_tail_of_t(K, self._t)

    def mixture(self, K: int, p: float) -> np.ndarray:
        Z = self.zonal(K) if p > 0 else 0.0
        F = self.full(K) if p < 1 else 0.0
        return p * Z + (1.0 - p) * F


@dataclass(frozen=True)
class BranchCovariances:
    gamma0: np.ndarray
    gamma1: np.ndarray
    tail: np.ndarray

    def gamma(self, r: int) -> np.ndarray:
        return self.gamma0 if r == 0 else self.gamma1


def build_branch_covariances(
    spec: BasisSpec, prior: PriorSpec, points: PointsLike, tails: TailCache | None = None
) -> BranchCovariances:
    """Diagonals of Gamma^0, Gamma^1 and the mixed tail matrix Q(p)."""
    beta0, beta1 = prior.ladders(spec)
    tails = tails if tails is not None else TailCache(points, prior.series_tolerance)
    return BranchCovariances(beta0, beta1, tails.mixture(spec.K, prior.p))


# --------------------------------------------------------------------------
# spectral reduction and branch quantities


@dataclass(frozen=True)
class SpectralReduction:
    d: np.ndarray
    w: np.ndarray
    H: np.ndarray


def spectral_reduce(Phi: np.ndarray, gamma_diag: np.ndarray, tail: np.ndarray, y) -> SpectralReduction:
    """Eigendecomposition of Phi Gamma Phi' + Q and the rotated data H'y."""
    gamma_diag = np.asarray(gamma_diag, dtype=float)
    C = (Phi * gamma_diag) @ Phi.T + tail
    C = 0.5 * (C + C.T)
    try:
        d, H = linalg.eigh(C, check_finite=False)
    except linalg.LinAlgError as exc:  # pragma: no cover - symmetric input
        raise SingularSystem(f"eigensolver failed: {exc}") from None
    d = np.where(d < 1e-12, 0.0, d)
    return SpectralReduction(d, H.T @ np.asarray(y, dtype=float), H)


def v_posterior_density(reduction: SpectralReduction, prior: PriorSpec) -> VPosterior:
    return VPosterior(reduction.d, reduction.w, prior.b, prior.c_exp)


def _projector(reduction: SpectralReduction, gamma_diag, Phi) -> np.ndarray:
    """Gamma Phi' H, shape (kappa, n)."""
    return (np.asarray(gamma_diag)[:, None] * Phi.T) @ reduction.H


def branch_posterior_mean(
    reduction: SpectralReduction,
    gamma_diag,
    Phi: np.ndarray,
    vpost: VPosterior | None,
    scheme: str = "gauss",
) -> np.ndarray:
    """Gamma Phi' H E[(vI + D)^-1 | y] H'y."""
    if vpost is None or not np.any(reduction.w != 0):
        return np.zeros(Phi.shape[1])
    return _projector(reduction, gamma_diag, Phi) @ (vpost.mean_inverse(scheme) * reduction.w)


def posterior_mixture_weight(p: float, log_m0: float, log_m1: float) -> float:
    """p m0 / (p m0 + (1 - p) m1) evaluated in log space."""
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    l0 = math.log(p) + log_m0
    l1 = math.log1p(-p) + log_m1
    return float(math.exp(l0 - logsumexp([l0, l1])))


def branch_variance(
    reduction: SpectralReduction,
    gamma_diag,
    Phi: np.ndarray,
    vpost: VPosterior,
    gamma_mean: np.ndarray,
    c_exp: float,
) -> np.ndarray:
    """Posterior covariance of gamma within one branch.

    Given v, tau^2 | y is inverse gamma with mean S(v)/(n + 2c - 4), and the
    conditional covariance is tau^2 (Gamma - B (vI + D)^-1 B') with
    B = Gamma Phi' H.  Adding the spread of the conditional means gives the
    law-of-total-variance form below.
    """
    n = reduction.d.size
    denom = n + 2.0 * c_exp - 4.0
    if denom <= 0:
        raise NonIntegrable("posterior variance needs n + 2 c_exp - 4 > 0")
    B = _projector(reduction, gamma_diag, Phi)
    d, w = vpost.d, reduction.w

    def pieces(v):
        inv = 1.0 / (v[:, None] + d[None, :])
        S = (w * w * inv).sum(axis=1)
        return S, S[:, None] * inv, (inv * w) @ B.T

    S, S_inv, h = pieces(vpost.nodes)
    wt = vpost.weights
    ES = wt @ S
    ES_inv = wt @ S_inv
    Ehh = (h * wt[:, None]).T @ h
    V = (ES * np.diag(gamma_diag) - (B * ES_inv) @ B.T) / denom
    V += Ehh - np.outer(gamma_mean, gamma_mean)
    return 0.5 * (V + V.T)


def posterior_variance(var0, var1, gamma0, gamma1, pstar: float) -> np.ndarray:
    """Mixture covariance p*V0 + (1-p*)V1 + p*(1-p*) (g0 - g1)(g0 - g1)'."""
    delta = np.asarray(gamma0) - np.asarray(gamma1)
    return pstar * var0 + (1.0 - pstar) * var1 + pstar * (1.0 - pstar) * np.outer(delta, delta)


# --------------------------------------------------------------------------
# end-to-end fit


@dataclass(frozen=True)
class BayesFit:
    spec: BasisSpec
    prior: PriorSpec
    gamma0: np.ndarray
    gamma1: np.ndarray
    pstar: float
    log_m0: float
    log_m1: float
    variance: np.ndarray | None
    points: np.ndarray
    reductions: tuple = field(default=(), repr=False, compare=False)

    @property
    def gamma(self) -> np.ndarray:
        return self.pstar * self.gamma0 + (1.0 - self.pstar) * self.gamma1

    @property
    def log_marginal(self) -> float:
        """log[p m0 + (1 - p) m1]."""
        return mixture_log_marginal(self.prior.p, self.log_m0, self.log_m1)

    def _eval(self, coef, x):
        vals = basis_matrix(self.spec.K, x) @ coef
        return float(vals[0]) if isinstance(x, Direction) else vals

    def f0(self, x):
        return self._eval(self.gamma0, x)

    def f1(self, x):
        return self._eval(self.gamma1, x)

    def __call__(self, x):
        return self._eval(self.gamma, x)


def mixture_log_marginal(p: float, log_m0: float, log_m1: float) -> float:
    terms = []
    if p > 0:
        terms.append(math.log(p) + log_m0)
    if p < 1:
        terms.append(math.log1p(-p) + log_m1)
    return float(logsumexp(terms))


def _branch(Phi, gamma_diag, tail, y, prior):
    red = spectral_reduce(Phi, gamma_diag, tail, y)
    vpost = v_posterior_density(red, prior)
    return red, vpost


def fit_hierarchical(
    data: RegressionData,
    spec: BasisSpec,
    prior: PriorSpec,
    compute_variance: bool = True,
    tails: TailCache | None = None,
) -> BayesFit:
    """Covariances, reductions, p*, branch means and the mixture estimate."""
    if data.n == 0:
        raise EmptyInput("no observations")
    Phi = design_matrix(spec, data.points)
    cov = build_branch_covariances(spec, prior, data.points, tails)
    y = data.y
    reds, posts, means, logm = [], [], [], []
    for r in (0, 1):
        red, vpost = _branch(Phi, cov.gamma(r), cov.tail, y, prior)
        reds.append(red)
        posts.append(vpost)
        means.append(branch_posterior_mean(red, cov.gamma(r), Phi, vpost))
        logm.append(vpost.log_evidence)
    pstar = posterior_mixture_weight(prior.p, logm[0], logm[1])
    variance = None
    if compute_variance:
        v0 = branch_variance(reds[0], cov.gamma0, Phi, posts[0], means[0], prior.c_exp)
        v1 = branch_variance(reds[1], cov.gamma1, Phi, posts[1], means[1], prior.c_exp)
        variance = posterior_variance(v0, v1, means[0], means[1], pstar)
    return BayesFit(
        spec, prior, means[0], means[1], pstar, logm[0], logm[1], variance,
        data.points, tuple(reds),
    )


# --------------------------------------------------------------------------
# direct modelling of the tail: shrinkage form and the spline limit


@dataclass(frozen=True)
class ShrinkageResult:
    """Coefficients psi = (d, c) of phi(x)'d + q(x)'c."""

    spec: BasisSpec
    kernel: KernelSpec
    psi_direct: np.ndarray
    psi_shrinkage: np.ndarray
    points: np.ndarray

    @property
    def psi(self) -> np.ndarray:
        return self.psi_direct

    def __call__(self, x: PointsLike):
        kappa = self.spec.kappa
        pts = as_points(x)
        vals = basis_matrix(self.spec.K, pts) @ self.psi[:kappa] + kernel_cross(
            self.kernel, pts, self.points
        ) @ self.psi[kappa:]
        return float(vals[0]) if isinstance(x, Direction) else vals


def _full_ladder(spec: BasisSpec, scale: float) -> np.ndarray:
    return scale * iota_weight(spec.degrees)


def shrinkage_estimate(
    data: RegressionData, spec: BasisSpec, prior: PriorSpec, prior_scale: float = 1.0
) -> ShrinkageResult:
    """Hierarchical Bayes estimate of psi = (gamma, eta) with the tail modelled
    directly, computed both from the eigen-form and as a shrinkage of the
    least-squares solution.

    With Xi = diag(Gamma, Q_n) and Upsilon = [Phi, I], for each v
    Xi Upsilon'(vI + Upsilon Xi Upsilon')^-1 y equals
    (I - v (v Xi^-1 + Upsilon'Upsilon)^-1 Xi^-1) psi_ls for any solution
    psi_ls of the normal equations; both sides are averaged over the same
    v-posterior quadrature.
    """
    kernel = KernelSpec.full(spec.K, series_tolerance=prior.series_tolerance)
    check_distinct(data.points)
    n, y = data.n, data.y
    Phi = design_matrix(spec, data.points)
    kappa = Phi.shape[1]
    Gam = _full_ladder(spec, prior_scale)
    Qn = gram(kernel, data.points)
    Xi = linalg.block_diag(np.diag(Gam), Qn)
    Ups = np.hstack([Phi, np.eye(n)])
    red = spectral_reduce(Phi, Gam, Qn, y)
    vpost = v_posterior_density(red, prior)

    direct = Xi @ Ups.T @ (red.H @ (vpost.mean_inverse() * red.w))

    try:
        Xi_inv = linalg.block_diag(np.diag(1.0 / Gam), linalg.cho_solve(cholesky(Qn), np.eye(n)))
    except SingularSystem as exc:
        raise SingularSystem(f"tail covariance is singular: {exc}") from None
    UtU = Ups.T @ Ups
    psi_ls = linalg.lstsq(UtU, Ups.T @ y)[0]
    rhs = Xi_inv @ psi_ls
    shrink = np.zeros(kappa + n)
    for v, wt in zip(vpost.nodes, vpost.weights):
        shrink += wt * v * linalg.solve(v * Xi_inv + UtU, rhs, assume_a="sym")
    return ShrinkageResult(spec, kernel, direct, psi_ls - shrink, data.points)


@dataclass(frozen=True)
class HierarchicalLimit:
    spec: BasisSpec
    kernel: KernelSpec
    d: np.ndarray
    c: np.ndarray
    points: np.ndarray

    def __call__(self, x: PointsLike):
        pts = as_points(x)
        vals = basis_matrix(self.spec.K, pts) @ self.d + kernel_cross(
            self.kernel, pts, self.points
        ) @ self.c
        return float(vals[0]) if isinstance(x, Direction) else vals


def hierarchical_limit_estimate(
    data: RegressionData, spec: BasisSpec, v: float, prior_scale: float
) -> HierarchicalLimit:
    """f_hb = phi'd + q'c at fixed v with Gamma = prior_scale * iota ladder.

    c = (vI + Q + Phi Gamma Phi')^-1 y and d = Gamma Phi' c; the Woodbury form
    d = (Gamma^-1 + Phi'Q_v^-1 Phi)^-1 Phi'Q_v^-1 y keeps large scales stable.
    With v = n xi the estimate approaches the smoothing spline as the scale
    grows.
    """
    if not (v > 0 and prior_scale > 0):
        raise ValueError("v and prior_scale must be positive")
    if spec.weight_scheme is not WeightScheme.IOTA:
        spec = BasisSpec(spec.K, spec.s, WeightScheme.IOTA)
    kernel = KernelSpec.full(spec.K)
    check_distinct(data.points)
    Phi = design_matrix(spec, data.points)
    Q = gram(kernel, data.points)
    Q[np.diag_indices(data.n)] += v
    fac = cholesky(Q)
    Qi_Phi = linalg.cho_solve(fac, Phi)
    Qi_y = linalg.cho_solve(fac, data.y)
    inner = Phi.T @ Qi_Phi
    inner[np.diag_indices_from(inner)] += 1.0 / _full_ladder(spec, prior_scale)
    d = linalg.solve(0.5 * (inner + inner.T), Phi.T @ Qi_y, assume_a="pos")
    c = Qi_y - Qi_Phi @ d
    return HierarchicalLimit(spec, kernel, d, c, data.points)
