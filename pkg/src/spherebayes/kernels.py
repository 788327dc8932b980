"""Tail reproducing kernels and the kernel matrices built from them.

Three kernels are available, all sums over degrees k > K:

FULL
    sum_k beta_k sum_q Y_kq(x1) Y_kq(x2) with the iota ladder
    beta_k = ((k+1/2)(k+1)(k+2)(k+3))^-1.  By the addition formula the
    degree-k term is P_k(t) / (2 pi (k+1)(k+2)(k+3)), t = x1.x2, and the whole
    series has a closed form through ``q2_closed_form``.
ZONAL
    the same ladder restricted to q = 0, i.e.
    sum_k P_k(cos th1) P_k(cos th2) / (2 pi (k+1)(k+2)(k+3)); summed as a
    truncated series with an exact telescoping tail bound.
GENERIC_S
    sum_k (k(k+1))^-s (2k+1)/(4 pi) P_k(t), truncated with an integral tail
    bound.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, DuplicatePoints
from .spectral import (
    FOUR_PI,
    TWO_PI,
    BasisSpec,
    PointsLike,
    WeightScheme,
    as_angles,
    legendre_table,
    unit_vectors,
)

DUPLICATE_TOL = 1e-9
_BLOCK = 2048
# truncate once the analytic tail bound is this fraction of the tolerance,
# so that the realised error is strictly inside it
_TAIL_SAFETY = 0.25


class KernelBranch(enum.Enum):
    FULL = "full"
    ZONAL = "zonal"
    GENERIC_S = "generic"


@dataclass(frozen=True)
class KernelSpec:
    basis: BasisSpec
    branch: KernelBranch = KernelBranch.FULL
    series_tolerance: float = 1e-10
    max_terms: int = 200_000

    def __post_init__(self):
        if isinstance(self.branch, str):
            object.__setattr__(self, "branch", KernelBranch(self.branch))
        if not 0.0 < self.series_tolerance <= 1e-4:
            raise ValueError("series_tolerance must lie in (0, 1e-4]")
        scheme = self.basis.weight_scheme
        if self.branch is KernelBranch.GENERIC_S:
            if scheme is not WeightScheme.LAMBDA:
                raise ValueError("GENERIC_S kernels need the LAMBDA weight scheme")
        elif scheme is not WeightScheme.IOTA:
            raise ValueError(f"{self.branch.name} kernels need the IOTA weight scheme")

    @property
    def K(self) -> int:
        return self.basis.K

    @classmethod
    def full(cls, K: int, **kw) -> "KernelSpec":
        return cls(BasisSpec(K, weight_scheme=WeightScheme.IOTA), KernelBranch.FULL, **kw)

    @classmethod
    def zonal(cls, K: int, **kw) -> "KernelSpec":
        return cls(BasisSpec(K, weight_scheme=WeightScheme.IOTA), KernelBranch.ZONAL, **kw)

    @classmethod
    def generic(cls, K: int, s: float, **kw) -> "KernelSpec":
        return cls(BasisSpec(K, s, WeightScheme.LAMBDA), KernelBranch.GENERIC_S, **kw)


@dataclass(frozen=True)
class KernelMatrix:
    entries: np.ndarray
    ridge: float = 0.0
    ridge_scale: float = 1.0

    @property
    def n(self) -> int:
        return self.entries.shape[0]


# --------------------------------------------------------------------------
# scalar kernels of t = cos(angle)


def q2_closed_form(w):
    """The closed-form function q_2(w) whose half, less 1/6, sums
    P_k(w) / ((k+1)(k+2)(k+3)) over k >= 1."""
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > 1.0 + 1e-12) or not np.all(np.isfinite(w)):
        raise DomainError("q2 argument must lie in [-1, 1]")
    z = np.clip((1.0 - w) / 2.0, 0.0, 1.0)
    safe = np.where(z > 0.0, z, 1.0)
    log_term = np.log1p(1.0 / np.sqrt(safe)) * (12.0 * z * z - 4.0 * z)
    # ln(1 + z^-1/2) * O(z) -> 0 as z -> 0
    log_term = np.where(z > 0.0, log_term, 0.0)
    out = 0.5 * (log_term - 12.0 * z**1.5 + 6.0 * z + 1.0)
    return out if out.ndim else float(out)


def _iota_degree_weight(k):
    """Per-degree weight beta_k (2k+1)/(4 pi) of the iota ladder."""
    k = np.asarray(k, dtype=float)
    return 1.0 / (TWO_PI * (k + 1.0) * (k + 2.0) * (k + 3.0))


def full_tail_of_t(K: int, t):
    """FULL kernel as a function of t = cos(angle)."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    total = 0.5 * q2_closed_form(t) - 1.0 / 6.0
    if K >= 1:
        P = legendre_table(K, t)
        for k in range(1, K + 1):
            total = total - P[k] / ((k + 1.0) * (k + 2.0) * (k + 3.0))
    return total / TWO_PI


def iota_tail_terms(tol: float) -> int:
    """Last degree N such that the telescoped tail beyond N is <= tol."""
    # sum_{k>N} 1/(2 pi (k+1)(k+2)(k+3)) = 1 / (4 pi (N+2)(N+3))
    target = 1.0 / (FOUR_PI * tol)
    N = int(math.ceil((-5.0 + math.sqrt(1.0 + 4.0 * target)) / 2.0))
    while 1.0 / (FOUR_PI * (N + 2) * (N + 3)) > tol:
        N += 1
    return max(N, 0)


def generic_tail_bound(N: int, s: float) -> float:
    """Upper bound for sum_{k>N} (2k+1)/(4 pi) (k(k+1))^-s."""
    N = max(N, 1)
    return (N ** (2 - 2 * s) / (s - 1.0) + N ** (1 - 2 * s) / (2 * s - 1.0)) / FOUR_PI


def generic_tail_terms(s: float, tol: float, max_terms: int) -> int:
    hi = 1
    while generic_tail_bound(hi, s) > tol:
        hi *= 2
        if hi > 4 * max_terms:
            break
    lo = max(hi // 2, 1)
    while lo < hi:
        mid = (lo + hi) // 2
        if generic_tail_bound(mid, s) > tol:
            lo = mid + 1
        else:
            hi = mid
    if hi > max_terms:
        raise ValueError(
            f"s={s} needs {hi} series terms for tolerance {tol}; "
            f"raise series_tolerance or max_terms"
        )
    return hi


def generic_tail_of_t(K: int, s: float, t, tol: float = 1e-10, max_terms: int = 200_000):
    """GENERIC_S kernel as a function of t, by forward recurrence."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    N = max(generic_tail_terms(s, _TAIL_SAFETY * tol, max_terms), K + 1)
    total = np.zeros_like(t)
    p_prev, p = np.ones_like(t), t.copy()
    for k in range(1, N + 1):
        if k > K:
            total += (2 * k + 1) / FOUR_PI * (k * (k + 1.0)) ** (-s) * p
        p, p_prev = ((2 * k + 1) * t * p - k * p_prev) / (k + 1), p
    return total


def zonal_tail_cross(K: int, c1, c2, tol: float = 1e-10) -> np.ndarray:
    """ZONAL kernel between colatitude cosines c1 (n1,) and c2 (n2,)."""
    c1 = np.clip(np.atleast_1d(np.asarray(c1, dtype=float)), -1.0, 1.0)
    c2 = np.clip(np.atleast_1d(np.asarray(c2, dtype=float)), -1.0, 1.0)
    N = max(iota_tail_terms(_TAIL_SAFETY * tol), K + 1)
    both = np.concatenate([c1, c2])
    n1 = c1.size
    out = np.zeros((c1.size, c2.size))
    p_prev, p = np.ones_like(both), both.copy()
    block_rows, block_w = [], []

    def flush():
        if block_rows:
            P = np.array(block_rows)
            w = np.array(block_w)
            out[...] += (P[:, :n1] * w[:, None]).T @ P[:, n1:]
            block_rows.clear()
            block_w.clear()

    for k in range(1, N + 1):
        if k > K:
            block_rows.append(p)
            block_w.append(_iota_degree_weight(k))
            if len(block_rows) == _BLOCK:
                flush()
        p, p_prev = ((2 * k + 1) * both * p - k * p_prev) / (k + 1), p
    flush()
    return out


# --------------------------------------------------------------------------
# pairwise kernels and matrices


def kernel_cross(spec: KernelSpec, a: PointsLike, b: PointsLike) -> np.ndarray:
    """Matrix [Q(a_i, b_j)] for the kernel described by ``spec``."""
    ta, pa = as_angles(a)
    tb, pb = as_angles(b)
    if spec.branch is KernelBranch.ZONAL:
        return zonal_tail_cross(spec.K, np.cos(ta), np.cos(tb), spec.series_tolerance)
    t = np.clip(unit_vectors(ta, pa) @ unit_vectors(tb, pb).T, -1.0, 1.0)
    if spec.branch is KernelBranch.FULL:
        return full_tail_of_t(spec.K, t)
    return generic_tail_of_t(spec.K, spec.basis.s, t, spec.series_tolerance, spec.max_terms)


def _pair(spec: KernelSpec, x1, x2) -> float:
    return float(kernel_cross(spec, x1, x2)[0, 0])


def tail_kernel_full(spec: KernelSpec, x1, x2) -> float:
    if spec.branch is not KernelBranch.FULL:
        raise ValueError("tail_kernel_full needs a FULL kernel spec")
    return _pair(spec, x1, x2)


def tail_kernel_zonal(spec: KernelSpec, x1, x2) -> float:
    if spec.branch is not KernelBranch.ZONAL:
        raise ValueError("tail_kernel_zonal needs a ZONAL kernel spec")
    return _pair(spec, x1, x2)


def tail_kernel_generic(spec: KernelSpec, x1, x2) -> float:
    if spec.branch is not KernelBranch.GENERIC_S:
        raise ValueError("tail_kernel_generic needs a GENERIC_S kernel spec")
    return _pair(spec, x1, x2)


def check_distinct(points: PointsLike, tol: float = DUPLICATE_TOL) -> None:
    xyz = unit_vectors(*as_angles(points))
    pairs = cKDTree(xyz).query_pairs(r=tol)
    if pairs:
        i, j = sorted(next(iter(pairs)))
        raise DuplicatePoints(f"points {i} and {j} coincide within {tol} rad")


def gram(spec: KernelSpec, points: PointsLike) -> np.ndarray:
    """Symmetric kernel matrix on the design, without ridge."""
    G = kernel_cross(spec, points, points)
    return 0.5 * (G + G.T)


def kernel_matrix(
    spec: KernelSpec, points: PointsLike, ridge: float = 0.0, ridge_scale: str = "n"
) -> KernelMatrix:
    """Pairwise kernel values plus ``ridge * scale`` on the diagonal.

    ``ridge_scale`` is ``"n"`` (scale by the number of points, as in the
    smoothing problem) or ``"1"``.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    theta, phi = as_angles(points)
    check_distinct(np.column_stack([theta, phi]))
    n = theta.size
    scale = float(n) if str(ridge_scale) == "n" else 1.0
    G = gram(spec, np.column_stack([theta, phi]))
    G[np.diag_indices(n)] += ridge * scale
    return KernelMatrix(G, ridge, scale)


def mixture_tail_matrix(
    points: PointsLike, spec0: KernelSpec, spec1: KernelSpec, p: float
) -> KernelMatrix:
    """p * (zonal-branch tail) + (1 - p) * (full-branch tail)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if spec0.branch is not KernelBranch.ZONAL or spec1.branch is not KernelBranch.FULL:
        raise ValueError("mixture needs a ZONAL spec0 and a FULL spec1")
    check_distinct(points)
    Z = gram(spec0, points) if p > 0.0 else 0.0
    F = gram(spec1, points) if p < 1.0 else 0.0
    return KernelMatrix(p * Z + (1.0 - p) * F)
