"""Penalized smoothing splines on the sphere.

The fit is f(x) = phi(x)'d + q(x)'c where phi collects the retained harmonics
(degrees <= K) and q(x)_i = Q(x_i, x) is the tail kernel.  With
Q_xi = [Q(x_i, x_j)] + n xi I the coefficients solve

    (Phi' Q_xi^-1 Phi) d = Phi' Q_xi^-1 y,     c = Q_xi^-1 (y - Phi d).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import EmptyInput, RankDeficient, SingularSystem
from .kernels import KernelSpec, check_distinct, gram, kernel_cross
from .spectral import BasisSpec, Direction, PointsLike, as_points, basis_matrix

COND_LIMIT = 1e12
DEFAULT_XI_GRID = tuple(np.logspace(-8, 2, 25))


@dataclass(frozen=True)
class RegressionData:
    points: np.ndarray
    y: np.ndarray
    noise_sd: float | None = None

    def __post_init__(self):
        pts = as_points(self.points)
        y = np.asarray(self.y, dtype=float).ravel()
        if y.size == 0:
            raise EmptyInput("no observations")
        if pts.shape[0] != y.size:
            raise ValueError(f"{pts.shape[0]} points but {y.size} responses")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        if self.noise_sd is not None and not self.noise_sd > 0:
            raise ValueError("noise_sd must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size


def design_matrix(spec: BasisSpec, points: PointsLike) -> np.ndarray:
    """Rows are the retained harmonics at each design point."""
    return basis_matrix(spec.K, points)


def _check_kernel(spec: BasisSpec, kernel: KernelSpec) -> None:
    if kernel.K != spec.K:
        raise ValueError(f"kernel tail starts above K={kernel.K}, basis has K={spec.K}")


def cholesky(A: np.ndarray):
    try:
        return linalg.cho_factor(A, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystem(f"matrix is not positive definite: {exc}") from None


def solve_representer(G: np.ndarray, Phi: np.ndarray, y: np.ndarray, ridge: float):
    """Coefficients (c, d) for kernel matrix G, design Phi and diagonal ridge.

    Returns (c, d, factor, Qi_Phi, M) so callers can reuse the factorisation.
    """
    n, kappa = Phi.shape
    if n < kappa:
        raise RankDeficient(f"{n} observations cannot determine {kappa} retained coefficients")
    Q = G.copy()
    Q[np.diag_indices(n)] += ridge
    fac = cholesky(Q)
    Qi_Phi = linalg.cho_solve(fac, Phi, check_finite=False)
    Qi_y = linalg.cho_solve(fac, y, check_finite=False)
    M = Phi.T @ Qi_Phi
    M = 0.5 * (M + M.T)
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RankDeficient(f"retained-harmonic system has condition {cond:.3g}")
    d = linalg.solve(M, Phi.T @ Qi_y, assume_a="sym", check_finite=False)
    c = Qi_y - Qi_Phi @ d
    return c, d, fac, Qi_Phi, M


@dataclass(frozen=True)
class SplineFit:
    spec: BasisSpec
    kernel: KernelSpec
    xi: float
    c: np.ndarray
    d: np.ndarray
    points: np.ndarray
    _gram: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __call__(self, x: PointsLike):
        return evaluate_spline(self, x)

    def roughness(self) -> float:
        """Tail seminorm c' G c of the fitted function."""
        G = self._gram if self._gram is not None else gram(self.kernel, self.points)
        return float(self.c @ G @ self.c)


def fit_spline(data: RegressionData, spec: BasisSpec, kernel: KernelSpec, xi: float) -> SplineFit:
    if not xi > 0:
        raise ValueError("xi must be positive")
    _check_kernel(spec, kernel)
    check_distinct(data.points)
    G = gram(kernel, data.points)
    Phi = design_matrix(spec, data.points)
    c, d, *_ = solve_representer(G, Phi, data.y, data.n * xi)
    return SplineFit(spec, kernel, float(xi), c, d, data.points, G)


def evaluate_spline(fit: SplineFit, x: PointsLike):
    """phi(x)'d + q(x)'c; a float for a single direction, else an array."""
    pts = as_points(x)
    vals = basis_matrix(fit.spec.K, pts) @ fit.d + kernel_cross(fit.kernel, pts, fit.points) @ fit.c
    return float(vals[0]) if _is_single(x) else vals


def _is_single(x) -> bool:
    return isinstance(x, Direction)


def penalized_objective(y, fitted, c, G, xi) -> float:
    """(1/n) ||y - fitted||^2 + xi c'Gc."""
    r = np.asarray(y) - np.asarray(fitted)
    return float(r @ r / r.size + xi * c @ G @ c)


def influence_matrix(G: np.ndarray, Phi: np.ndarray, ridge: float) -> np.ndarray:
    """A with fitted values A y at the design points.

    Since the fitted values equal y - ridge * c, I - A = ridge * C where
    C = Q^-1 - Q^-1 Phi M^-1 Phi' Q^-1.
    """
    n = G.shape[0]
    _, _, fac, Qi_Phi, M = solve_representer(G, Phi, np.zeros(n), ridge)
    Qi = linalg.cho_solve(fac, np.eye(n), check_finite=False)
    C = Qi - Qi_Phi @ linalg.solve(M, Qi_Phi.T, assume_a="sym")
    A = np.eye(n) - ridge * C
    return 0.5 * (A + A.T)


@dataclass(frozen=True)
class GCVResult:
    xi: float
    grid: np.ndarray
    scores: np.ndarray
    failures: tuple = ()


def gcv_select_xi(
    data: RegressionData, spec: BasisSpec, kernel: KernelSpec, grid=DEFAULT_XI_GRID
) -> GCVResult:
    """Score V(xi) = n ||(I - A) y||^2 / tr(I - A)^2 over the grid.

    Grid points whose fit fails get a NaN score and are listed in ``failures``.
    Scores within a small tolerance of the minimum are ties, resolved toward
    the smallest xi.
    """
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("grid must be non-empty with positive values")
    _check_kernel(spec, kernel)
    check_distinct(data.points)
    G = gram(kernel, data.points)
    Phi = design_matrix(spec, data.points)
    n, y = data.n, data.y
    scores = np.full(grid.size, np.nan)
    failures = []
    for i, xi in enumerate(grid):
        try:
            A = influence_matrix(G, Phi, n * xi)
        except (RankDeficient, SingularSystem) as exc:
            failures.append((float(xi), str(exc)))
            continue
        r = y - A @ y
        scores[i] = n * (r @ r) / np.trace(np.eye(n) - A) ** 2
    ok = np.isfinite(scores)
    if not ok.any():
        raise RankDeficient("every grid value failed: " + "; ".join(m for _, m in failures))
    tie = np.nanmin(scores) + 1e-12 * float(np.mean(y * y))
    order = np.argsort(grid)
    best = next(i for i in order if ok[i] and scores[i] <= tie)
    return GCVResult(float(grid[best]), grid, scores, tuple(failures))


@dataclass(frozen=True)
class DiffuseBayes:
    """Posterior mean when the retained coefficients carry a N(0, nu I) prior.

    With S = nu Phi Phi' + Q_xi the mean is phi(x)' nu Phi' S^-1 y + q(x)' S^-1 y;
    ``alpha`` stores S^-1 y and ``d`` stores nu Phi' S^-1 y.
    """

    spec: BasisSpec
    kernel: KernelSpec
    nu: float
    xi: float
    alpha: np.ndarray
    d: np.ndarray
    points: np.ndarray

    def __call__(self, x: PointsLike):
        pts = as_points(x)
        vals = basis_matrix(self.spec.K, pts) @ self.d + kernel_cross(
            self.kernel, pts, self.points
        ) @ self.alpha
        return float(vals[0]) if _is_single(x) else vals


def diffuse_bayes_estimate(
    data: RegressionData, spec: BasisSpec, kernel: KernelSpec, nu: float, xi: float
) -> DiffuseBayes:
    """Finite-nu diffuse-prior estimator; approaches the spline as nu grows.

    S^-1 is applied through the Woodbury identity around Q_xi, which keeps the
    solve well conditioned for very large nu.
    """
    if not (nu > 0 and xi > 0):
        raise ValueError("nu and xi must be positive")
    _check_kernel(spec, kernel)
    check_distinct(data.points)
    Phi = design_matrix(spec, data.points)
    Q = gram(kernel, data.points)
    Q[np.diag_indices(data.n)] += data.n * xi
    fac = cholesky(Q)
    Qi_Phi = linalg.cho_solve(fac, Phi, check_finite=False)
    Qi_y = linalg.cho_solve(fac, data.y, check_finite=False)
    inner = Phi.T @ Qi_Phi
    inner[np.diag_indices_from(inner)] += 1.0 / nu
    try:
        # d = nu Phi' S^-1 y = (I/nu + Phi'Q^-1 Phi)^-1 Phi'Q^-1 y
        d = linalg.solve(0.5 * (inner + inner.T), Phi.T @ Qi_y, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    alpha = Qi_y - Qi_Phi @ d
    return DiffuseBayes(spec, kernel, float(nu), float(xi), alpha, d, data.points)
