"""Choice of the truncation level K by Bayes factors and Schwarz's criterion."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .bayes import PriorSpec, TailCache, mixture_log_marginal, spectral_reduce, v_posterior_density
from .errors import RankDeficient
from .spectral import BasisSpec, WeightScheme
from .spline import RegressionData, cholesky, design_matrix

DEFAULT_P_GRID = (0.5, 0.8, 0.9, 0.95, 0.995)


@dataclass(frozen=True)
class ModelScore:
    K: int
    log_marginal: float
    log_bayes_factor: float
    schwarz: float
    p_best: float

    @property
    def bayes_factor(self) -> float:
        return math.exp(self.log_bayes_factor) if self.log_bayes_factor < 700 else math.inf


def _spec(K: int) -> BasisSpec:
    return BasisSpec(K, weight_scheme=WeightScheme.IOTA)


def _check_size(n: int, K: int) -> None:
    if (K + 1) ** 2 >= n:
        raise ValueError(f"K={K} needs more than {(K + 1) ** 2} observations, have {n}")


def branch_log_marginals(
    data: RegressionData, K: int, prior: PriorSpec, tails: TailCache | None = None
) -> tuple[float, float]:
    """log m^0(y | M_K) and log m^1(y | M_K); a branch with zero prior weight
    is skipped and reported as -inf."""
    _check_size(data.n, K)
    spec = _spec(K)
    tails = tails if tails is not None else TailCache(data.points, prior.series_tolerance)
    Phi = design_matrix(spec, data.points)
    beta0, beta1 = prior.ladders(spec)
    Q = tails.mixture(K, prior.p)
    out = []
    for r, beta in ((0, beta0), (1, beta1)):
        weight = prior.p if r == 0 else 1.0 - prior.p
        if weight == 0.0:
            out.append(-math.inf)
            continue
        red = spectral_reduce(Phi, beta, Q, data.y)
        out.append(v_posterior_density(red, prior).log_evidence)
    return out[0], out[1]


def log_marginal(
    data: RegressionData, K: int, prior: PriorSpec, tails: TailCache | None = None
) -> float:
    """log[p m^0(y | M_K) + (1 - p) m^1(y | M_K)]."""
    l0, l1 = branch_log_marginals(data, K, prior, tails)
    return mixture_log_marginal(prior.p, l0, l1)


def _best_over_p(data, K, prior, p_grid, tails):
    best = (-math.inf, None)
    for p in p_grid:
        val = log_marginal(data, K, prior.with_p(p), tails)
        if val > best[0]:
            best = (val, p)
    return best


def bayes_factor_table(
    data: RegressionData,
    K_range,
    p_grid=DEFAULT_P_GRID,
    prior: PriorSpec | None = None,
    with_schwarz: bool = True,
) -> list[ModelScore]:
    """Scores for each K; the Bayes factor is taken against K_max = max(K_range).

    For every K the marginal is maximised over ``p_grid`` and that p is
    reported.  Use ``select_k`` to pick the winner.
    """
    prior = prior if prior is not None else PriorSpec()
    Ks = sorted(set(int(k) for k in K_range))
    if not Ks or Ks[0] < 1:
        raise ValueError("K_range must be non-empty with K >= 1")
    K_max = Ks[-1]
    _check_size(data.n, K_max)
    tails = TailCache(data.points, prior.series_tolerance)
    best = {K: _best_over_p(data, K, prior, p_grid, tails) for K in Ks}
    ref = best[K_max][0]
    rows = []
    for K in Ks:
        lm, p = best[K]
        sch = schwarz_criterion(data, K, K_max, prior, tails) if with_schwarz else math.nan
        rows.append(ModelScore(K, lm, 0.0 if K == K_max else lm - ref, sch, p))
    return rows


def select_k(scores: list[ModelScore]) -> int:
    """argmax of the Bayes factor; ties go to the smaller K."""
    top = max(s.log_bayes_factor for s in scores)
    return min(s.K for s in scores if s.log_bayes_factor == top)


# --------------------------------------------------------------------------
# Schwarz's criterion


def _moment_variances(r: np.ndarray, M: np.ndarray, Q: np.ndarray) -> tuple[float, float]:
    """Solve E[r'r] and E[r'Qr] for (sigma^2, tau^2) given residual projector M."""
    MQ = M @ Q
    A = np.array([[np.trace(M), np.trace(MQ)], [np.trace(MQ), np.trace(MQ @ MQ)]])
    rhs = np.array([r @ r, r @ Q @ r])
    try:
        s2, t2 = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        s2, t2 = (r @ r) / np.trace(M), 0.0
    floor = 1e-12 * max(r @ r / r.size, 1e-300)
    if s2 <= floor:
        s2 = max((r @ r - max(t2, 0.0) * np.trace(MQ)) / np.trace(M), floor)
    return float(s2), float(max(t2, 0.0))


def _gls_loglik(y, Phi, Sigma) -> float:
    fac = cholesky(Sigma)
    Si_Phi = linalg.cho_solve(fac, Phi)
    M = Phi.T @ Si_Phi
    if np.linalg.cond(M) > 1e12:
        raise RankDeficient("GLS normal matrix is numerically singular")
    g = linalg.solve(M, Si_Phi.T @ y, assume_a="sym")
    r = y - Phi @ g
    logdet = 2.0 * np.log(np.diag(fac[0])).sum()
    return float(-0.5 * (logdet + r @ linalg.cho_solve(fac, r) + y.size * math.log(2 * math.pi)))


def profile_variances(
    data: RegressionData, K: int, prior: PriorSpec, tails: TailCache | None = None
) -> tuple[float, float]:
    """Method-of-moments (sigma^2, tau^2) from least-squares residuals at level K."""
    tails = tails if tails is not None else TailCache(data.points, prior.series_tolerance)
    Phi = design_matrix(_spec(K), data.points)
    Qm, Rm = np.linalg.qr(Phi)
    M = np.eye(data.n) - Qm @ Qm.T
    r = M @ data.y
    return _moment_variances(r, M, tails.mixture(K, prior.p))


def schwarz_criterion(
    data: RegressionData,
    K_i: int,
    K_j: int,
    prior: PriorSpec | None = None,
    tails: TailCache | None = None,
    variances: tuple[float, float] | None = None,
) -> float:
    """-log(L_j / L_i) + ((K_j+1)^2 - (K_i+1)^2)/2 log n.

    Each likelihood is the Gaussian likelihood at the GLS estimate of gamma
    with Sigma_K = sigma^2 I + tau^2 Q_K(p); (sigma^2, tau^2) are plug-in
    moment estimates from the larger model and are shared by both.  A
    positive value favours the smaller model M_i.
    """
    prior = prior if prior is not None else PriorSpec()
    if K_i > K_j:
        raise ValueError("schwarz_criterion needs K_i <= K_j")
    if K_i == K_j:
        return 0.0
    _check_size(data.n, K_j)
    tails = tails if tails is not None else TailCache(data.points, prior.series_tolerance)
    s2, t2 = variances if variances is not None else profile_variances(data, K_j, prior, tails)
    n = data.n
    ll = []
    for K in (K_i, K_j):
        Sigma = t2 * tails.mixture(K, prior.p)
        Sigma[np.diag_indices(n)] += s2
        ll.append(_gls_loglik(data.y, design_matrix(_spec(K), data.points), Sigma))
    penalty = 0.5 * ((K_j + 1) ** 2 - (K_i + 1) ** 2) * math.log(n)
    return float(-(ll[1] - ll[0]) + penalty)
