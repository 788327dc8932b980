"""Real spherical harmonics, Legendre functions and the zonal/non-zonal split.

Conventions
-----------
* A direction is (theta, phi): colatitude in [0, pi), longitude in [0, 2 pi).
  The unit vector is (cos phi sin theta, sin phi sin theta, cos theta).
* Harmonics are orthonormal with respect to the *unnormalised* surface
  measure (total mass 4 pi).  Associated Legendre functions carry no
  Condon-Shortley phase, so P_1^1(x) = +sqrt(1 - x^2).
* Within each degree k the basis is ordered q = 0, 1, -1, 2, -2, ..., k, -k,
  i.e. the zonal harmonic comes first.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
# the South Pole is stored as the largest colatitude below pi
SOUTH_POLE_THETA = math.nextafter(math.pi, 0.0)


def canonical_angles(theta, phi):
    """Map arbitrary (theta, phi) onto theta in [0, pi), phi in [0, 2 pi)."""
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    phi = np.asarray(phi, dtype=float)
    flip = theta > math.pi
    theta = np.where(flip, TWO_PI - theta, theta)
    phi = np.where(flip, phi + math.pi, phi)
    theta = np.where(theta >= math.pi, SOUTH_POLE_THETA, theta)
    phi = np.mod(phi, TWO_PI)
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    return theta, phi


@dataclass(frozen=True)
class Direction:
    """A point on the unit sphere."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise DomainError(f"non-finite angles ({self.theta}, {self.phi})")
        t, p = canonical_angles(self.theta, self.phi)
        object.__setattr__(self, "theta", float(t))
        object.__setattr__(self, "phi", float(p))

    @property
    def vector(self) -> np.ndarray:
        return unit_vectors(self.theta, self.phi)

    @classmethod
    def from_vector(cls, v) -> "Direction":
        theta, phi = angles_from_vectors(np.asarray(v, dtype=float)[None, :])
        return cls(float(theta[0]), float(phi[0]))


PointsLike = Union[Direction, Sequence[Direction], np.ndarray]


def as_angles(points: PointsLike) -> tuple[np.ndarray, np.ndarray]:
    """Return (theta, phi) 1-d arrays from Directions or an (n, 2) array."""
    if isinstance(points, Direction):
        return np.array([points.theta]), np.array([points.phi])
    if isinstance(points, np.ndarray):
        arr = np.atleast_2d(np.asarray(points, dtype=float))
        if arr.shape[-1] != 2:
            raise ValueError("angle arrays must have shape (n, 2)")
        return canonical_angles(arr[:, 0], arr[:, 1])
    pts = list(points)
    if pts and not isinstance(pts[0], Direction):
        return as_angles(np.asarray(pts, dtype=float))
    theta = np.array([p.theta for p in pts], dtype=float)
    phi = np.array([p.phi for p in pts], dtype=float)
    return theta, phi


def as_points(points: PointsLike) -> np.ndarray:
    """Canonical (n, 2) array of [theta, phi] rows."""
    theta, phi = as_angles(points)
    return np.column_stack([theta, phi])


def unit_vectors(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([np.cos(phi) * st, np.sin(phi) * st, np.cos(theta)], axis=-1)


def angles_from_vectors(xyz) -> tuple[np.ndarray, np.ndarray]:
    xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
    # arctan2 keeps full precision near the poles, where arccos(z) does not
    theta = np.arctan2(np.hypot(xyz[:, 0], xyz[:, 1]), xyz[:, 2])
    phi = np.arctan2(xyz[:, 1], xyz[:, 0])
    return canonical_angles(theta, phi)


def random_directions(n: int, rng: np.random.Generator) -> np.ndarray:
    """n directions drawn uniformly on the sphere, as an (n, 2) angle array."""
    z = rng.uniform(-1.0, 1.0, size=n)
    phi = rng.uniform(0.0, TWO_PI, size=n)
    return np.column_stack(canonical_angles(np.arccos(z), phi))


def rotate_points(rotation: np.ndarray, points: PointsLike) -> np.ndarray:
    """Apply a 3x3 rotation matrix to directions; returns an (n, 2) array."""
    xyz = unit_vectors(*as_angles(points))
    return np.column_stack(angles_from_vectors(xyz @ np.asarray(rotation).T))


# --------------------------------------------------------------------------
# harmonic indexing


class WeightScheme(enum.Enum):
    LAMBDA = "lambda"
    IOTA = "iota"


class HarmonicIndex(NamedTuple):
    k: int
    q: int

    @property
    def invariance_class(self) -> int:
        return 0 if self.q == 0 else 1


def harmonic_position(k: int, q: int) -> int:
    """Position of Y_kq in the zonal-first ordering."""
    if abs(q) > k:
        raise DomainError(f"|q| > k for (k={k}, q={q})")
    if q == 0:
        return k * k
    return k * k + 2 * abs(q) - (1 if q > 0 else 0)


def harmonic_indices(K: int) -> tuple[HarmonicIndex, ...]:
    out = []
    for k in range(K + 1):
        out.append(HarmonicIndex(k, 0))
        for q in range(1, k + 1):
            out.append(HarmonicIndex(k, q))
            out.append(HarmonicIndex(k, -q))
    return tuple(out)


def iota_weight(k):
    """Per-coefficient variance ((k+1/2)(k+1)(k+2)(k+3))^-1."""
    k = np.asarray(k, dtype=float)
    return 1.0 / ((k + 0.5) * (k + 1.0) * (k + 2.0) * (k + 3.0))


def lambda_weight(k, s: float):
    """lambda_k^-s with lambda_k = k(k+1); infinite at k = 0."""
    k = np.asarray(k, dtype=float)
    with np.errstate(divide="ignore"):
        return (k * (k + 1.0)) ** (-s)


@dataclass(frozen=True)
class BasisSpec:
    """Truncation level, smoothness order and prior weight ladder."""

    K: int
    s: float = 2.0
    weight_scheme: WeightScheme = WeightScheme.LAMBDA

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 0:
            raise ValueError(f"K must be a non-negative integer, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        if not self.s > 1.0:
            raise ValueError(f"smoothness s must exceed dim/2 = 1, got {self.s}")
        if isinstance(self.weight_scheme, str):
            object.__setattr__(self, "weight_scheme", WeightScheme(self.weight_scheme))

    @property
    def kappa(self) -> int:
        return (self.K + 1) ** 2

    @cached_property
    def ordering(self) -> tuple[HarmonicIndex, ...]:
        return harmonic_indices(self.K)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([i.k for i in self.ordering])

    @cached_property
    def orders(self) -> np.ndarray:
        return np.array([i.q for i in self.ordering])

    @cached_property
    def zonal_mask(self) -> np.ndarray:
        return self.orders == 0

    def weight(self, k):
        if self.weight_scheme is WeightScheme.IOTA:
            return iota_weight(k)
        return lambda_weight(k, self.s)


class EigenInfo(NamedTuple):
    eigenvalue: float
    weight: float
    dim_zonal: int
    dim_nonzonal: int


def eigen_info(spec: BasisSpec, k: int) -> EigenInfo:
    if k < 0:
        raise DomainError("degree must be non-negative")
    return EigenInfo(float(k * (k + 1)), float(spec.weight(k)), 1, 2 * k)


# --------------------------------------------------------------------------
# Legendre functions


def _check_unit_interval(x, name="argument"):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1.0 + 1e-12) or not np.all(np.isfinite(x)):
        raise DomainError(f"{name} must lie in [-1, 1]")
    return np.clip(x, -1.0, 1.0)


def legendre_p(k: int, w):
    """Legendre polynomial P_k(w) by the three-term recurrence."""
    if k < 0:
        raise DomainError("degree must be non-negative")
    w = _check_unit_interval(w, "w")
    p_prev = np.ones_like(w)
    if k == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = w.copy()
    for j in range(1, k):
        p, p_prev = ((2 * j + 1) * w * p - j * p_prev) / (j + 1), p
    return p if p.ndim else float(p)


def legendre_table(K: int, w) -> np.ndarray:
    """Array of P_0(w) .. P_K(w), shape (K+1,) + w.shape."""
    w = np.asarray(w, dtype=float)
    out = np.empty((K + 1,) + w.shape)
    out[0] = 1.0
    if K >= 1:
        out[1] = w
    for j in range(1, K):
        out[j + 1] = ((2 * j + 1) * w * out[j] - j * out[j - 1]) / (j + 1)
    return out


def normalized_alf_table(K: int, x) -> np.ndarray:
    """Normalised associated Legendre functions.

    Returns ``A`` of shape (K+1, K+1) + x.shape with
    ``A[k, q] = sqrt((2k+1)/(4 pi) (k-q)!/(k+q)!) P_k^q(x)`` for q <= k and
    zero above the diagonal.
    """
    x = np.asarray(x, dtype=float)
    u = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    A = np.zeros((K + 1, K + 1) + x.shape)
    A[0, 0] = 1.0 / math.sqrt(FOUR_PI)
    for m in range(1, K + 1):
        A[m, m] = math.sqrt((2 * m + 1) / (2.0 * m)) * u * A[m - 1, m - 1]
    for m in range(0, K):
        A[m + 1, m] = math.sqrt(2 * m + 3) * x * A[m, m]
    for m in range(0, K + 1):
        for k in range(m + 2, K + 1):
            a = math.sqrt((4.0 * k * k - 1.0) / (k * k - m * m))
            b = math.sqrt((2 * k + 1) * ((k - 1) ** 2 - m * m) / ((2 * k - 3) * (k * k - m * m)))
            A[k, m] = a * x * A[k - 1, m] - b * A[k - 2, m]
    return A


def _log_norm(k: int, q: int) -> float:
    return 0.5 * (math.log((2 * k + 1) / FOUR_PI) + gammaln(k - q + 1) - gammaln(k + q + 1))


def legendre_assoc(k: int, q: int, x):
    """Associated Legendre function P_k^q(x), no Condon-Shortley phase."""
    if not 0 <= q <= k:
        raise DomainError(f"need 0 <= q <= k, got k={k}, q={q}")
    x = _check_unit_interval(x, "x")
    A = normalized_alf_table(k, x)[k, q]
    out = A * math.exp(-_log_norm(k, q))
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# harmonics


def _harmonics_from_table(A, K, theta, phi, ordering) -> np.ndarray:
    n = theta.shape[0]
    out = np.empty((n, len(ordering)))
    root2 = math.sqrt(2.0)
    for col, (k, q) in enumerate(ordering):
        if q == 0:
            out[:, col] = A[k, 0]
        elif q > 0:
            out[:, col] = root2 * A[k, q] * np.cos(q * phi)
        else:
            out[:, col] = root2 * A[k, -q] * np.sin(-q * phi)
    return out


def basis_matrix(K: int, points: PointsLike) -> np.ndarray:
    """Rows phi(x_i)' for each point: shape (n, (K+1)^2)."""
    theta, phi = as_angles(points)
    A = normalized_alf_table(K, np.cos(theta))
    return _harmonics_from_table(A, K, theta, phi, harmonic_indices(K))


def spherical_harmonic(idx, x: PointsLike):
    """Real harmonic Y_kq evaluated at one or many directions."""
    k, q = idx
    if abs(q) > k or k < 0:
        raise DomainError(f"invalid harmonic index ({k}, {q})")
    theta, phi = as_angles(x)
    A = normalized_alf_table(k, np.cos(theta))
    out = _harmonics_from_table(A, k, theta, phi, [(k, q)])[:, 0]
    if isinstance(x, Direction):
        return float(out[0])
    return out


def basis_vector(spec: BasisSpec, x: Direction) -> np.ndarray:
    return basis_matrix(spec.K, x)[0]
