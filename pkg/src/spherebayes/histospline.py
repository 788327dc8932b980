"""Histosplines: smoothing splines fitted to cell averages of binned directions.

Cells are the m x m colatitude/longitude rectangles
[pi (j1-1)/m, pi j1/m) x [2 pi (j2-1)/m, 2 pi j2/m).  The data are the
empirical densities (relative frequency / cell area), which are matched
against the cell averages L_j u of the fitted function

    u(x) = phi(x)'d + qc(x)'c,     qc_j(x) = L_j Q(., x),

where Q is the FULL tail kernel.  Coefficients follow the spline solve with
the doubly averaged kernel matrix [L_i L_j Q] and ridge m^2 xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EmptyInput, RankDeficient
from .kernels import KernelBranch, KernelSpec, full_tail_of_t
from .spectral import (
    FOUR_PI,
    TWO_PI,
    BasisSpec,
    Direction,
    PointsLike,
    as_angles,
    as_points,
    basis_matrix,
    harmonic_indices,
    normalized_alf_table,
)
from .spline import solve_representer

DEFAULT_NODES = 16


@dataclass(frozen=True)
class CellGrid:
    m: int
    frequencies: np.ndarray
    count: int = 0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be positive")
        f = np.asarray(self.frequencies, dtype=float)
        if f.shape != (self.m, self.m):
            raise ValueError(f"frequencies must be {self.m} x {self.m}")
        object.__setattr__(self, "frequencies", f)

    @property
    def theta_edges(self) -> np.ndarray:
        return np.linspace(0.0, math.pi, self.m + 1)

    @property
    def phi_edges(self) -> np.ndarray:
        return np.linspace(0.0, TWO_PI, self.m + 1)

    @property
    def volumes(self) -> np.ndarray:
        return cell_volumes(self.m)

    @property
    def densities(self) -> np.ndarray:
        """Relative frequency per unit area."""
        return self.frequencies / self.volumes

    def centers(self) -> np.ndarray:
        """Cell centres as an (m^2, 2) angle array in row-major cell order."""
        te, pe = self.theta_edges, self.phi_edges
        tc = 0.5 * (te[:-1] + te[1:])
        pc = 0.5 * (pe[:-1] + pe[1:])
        T, P = np.meshgrid(tc, pc, indexing="ij")
        return np.column_stack([T.ravel(), P.ravel()])

    @classmethod
    def uniform(cls, m: int) -> "CellGrid":
        return cls(m, cell_volumes(m) / FOUR_PI)


def cell_volumes(m: int) -> np.ndarray:
    te = np.linspace(0.0, math.pi, m + 1)
    band = np.cos(te[:-1]) - np.cos(te[1:])
    return np.outer(band, np.full(m, TWO_PI / m))


def bin_directions(directions: PointsLike, m: int) -> CellGrid:
    """Relative frequencies on the m x m grid; cells are half-open and the
    South Pole falls in the last band."""
    if m < 2:
        raise ValueError("m must be at least 2")
    theta, phi = as_angles(directions)
    if theta.size == 0:
        raise EmptyInput("no directions to bin")
    i = np.minimum((theta * m / math.pi).astype(int), m - 1)
    j = np.minimum((phi * m / TWO_PI).astype(int), m - 1)
    counts = np.zeros((m, m))
    np.add.at(counts, (i, j), 1.0)
    return CellGrid(m, counts / theta.size, int(theta.size))


# --------------------------------------------------------------------------
# cell averages of the retained harmonics


def _phi_integrals(q: int, a: float, b: float) -> float:
    if q == 0:
        return b - a
    if q > 0:
        return (math.sin(q * b) - math.sin(q * a)) / q
    q = -q
    return (math.cos(q * a) - math.cos(q * b)) / q


def _band_rule(a: float, b: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (b - a)
    theta = 0.5 * (a + b) + half * x
    return theta, half * w * np.sin(theta)


def cell_functionals(spec: BasisSpec, m: int, nodes: int | None = None) -> np.ndarray:
    """m^2 x kappa matrix of cell averages of every retained harmonic."""
    K = spec.K
    nodes = nodes if nodes is not None else max(20, 2 * K)
    te = np.linspace(0.0, math.pi, m + 1)
    pe = np.linspace(0.0, TWO_PI, m + 1)
    vols = cell_volumes(m)
    out = np.empty((m, m, spec.kappa))
    root2 = math.sqrt(2.0)
    for i1 in range(m):
        theta, wt = _band_rule(te[i1], te[i1 + 1], nodes)
        A = normalized_alf_table(K, np.cos(theta))  # (K+1, K+1, nodes)
        for col, (k, q) in enumerate(harmonic_indices(K)):
            th = float(A[k, abs(q)] @ wt) * (1.0 if q == 0 else root2)
            for i2 in range(m):
                out[i1, i2, col] = th * _phi_integrals(q, pe[i2], pe[i2 + 1]) / vols[i1, i2]
    return out.reshape(m * m, spec.kappa)


# --------------------------------------------------------------------------
# doubly averaged tail kernel


def _theta_pair_rule(a1, b1, a2, b2, nodes):
    """Nodes and weights for the (theta1, theta2) integral with sin factors.

    For a band with itself the square is cut along theta1 = theta2, where the
    kernel is least smooth, and the symmetry of the integrand is used.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    if a1 == a2:
        L = b1 - a1
        dl = 0.5 * L * (x + 1.0)
        wd = 0.5 * L * w
        # theta1 in [a, b - delta]
        span = L - dl
        t1 = a1 + 0.5 * span[:, None] * (x[None, :] + 1.0)
        w1 = 0.5 * span[:, None] * w[None, :]
        T1 = t1.ravel()
        T2 = (t1 + dl[:, None]).ravel()
        W = 2.0 * (wd[:, None] * w1).ravel()
    else:
        t1 = 0.5 * (a1 + b1) + 0.5 * (b1 - a1) * x
        t2 = 0.5 * (a2 + b2) + 0.5 * (b2 - a2) * x
        T1, T2 = (g.ravel() for g in np.meshgrid(t1, t2, indexing="ij"))
        W = np.outer(0.5 * (b1 - a1) * w, 0.5 * (b2 - a2) * w).ravel()
    return T1, T2, W * np.sin(T1) * np.sin(T2)


def _offset_rule(m: int, nodes: int):
    """Longitude-difference nodes for every sector offset s, with the tent
    weight from integrating over both sectors; the tent kink is a panel edge."""
    h = TWO_PI / m
    x, w = np.polynomial.legendre.leggauss(nodes)
    u = 0.5 * h * (x + 1.0)  # in [0, h]
    wu = 0.5 * h * w
    deltas = np.concatenate([-h + u, u])  # relative to s h
    weights = np.concatenate([wu * u, wu * (h - u)])
    s = np.arange(m)[:, None] * h
    return s + deltas[None, :], np.broadcast_to(weights, (m, deltas.size))


@lru_cache(maxsize=16)
def _cell_kernel_table(K: int, m: int, nodes: int) -> np.ndarray:
    """Integrals of Q over cell pairs, indexed by (band i, band j, offset s)."""
    te = np.linspace(0.0, math.pi, m + 1)
    delta, dw = _offset_rule(m, nodes)
    cos_delta = np.cos(delta)  # (m, 2 nodes)
    table = np.empty((m, m, m))
    for i in range(m):
        for j in range(i, m):
            T1, T2, W = _theta_pair_rule(te[i], te[i + 1], te[j], te[j + 1], nodes)
            cc = (np.cos(T1) * np.cos(T2))[:, None, None]
            ss = (np.sin(T1) * np.sin(T2))[:, None, None]
            F = full_tail_of_t(K, cc + ss * cos_delta[None])
            vals = np.einsum("p,psd,sd->s", W, F, dw)
            table[i, j] = table[j, i] = vals
    table.setflags(write=False)
    return table


def cell_kernel_matrix(K: int, m: int, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """[L_i L_j Q] over all cell pairs, row-major cell order."""
    table = _cell_kernel_table(K, m, nodes)
    vols = cell_volumes(m).ravel()
    band = np.repeat(np.arange(m), m)
    sector = np.tile(np.arange(m), m)
    offset = (sector[None, :] - sector[:, None]) % m
    Q = table[band[:, None], band[None, :], offset]
    Q = Q / np.outer(vols, vols)
    return 0.5 * (Q + Q.T)


def cell_kernel_vectors(K: int, m: int, x: PointsLike, nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Rows qc(x)' = [L_j Q(., x)]_j for each query direction, shape (len(x), m^2)."""
    te = np.linspace(0.0, math.pi, m + 1)
    pe = np.linspace(0.0, TWO_PI, m + 1)
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    th_nodes, th_w = [], []
    for i in range(m):
        t, w = _band_rule(te[i], te[i + 1], nodes)
        th_nodes.append(t)
        th_w.append(w)
    th_nodes = np.array(th_nodes)  # (m, nodes)
    th_w = np.array(th_w)
    ph_nodes = 0.5 * (pe[:-1] + pe[1:])[:, None] + 0.5 * (pe[1] - pe[0]) * gx[None, :]
    ph_w = 0.5 * (pe[1] - pe[0]) * gw
    # unit vectors at all nodes: (m, nodes, m, nodes, 3)
    st, ct = np.sin(th_nodes), np.cos(th_nodes)
    cp, sp = np.cos(ph_nodes), np.sin(ph_nodes)
    nx = st[:, :, None, None] * cp[None, None, :, :]
    ny = st[:, :, None, None] * sp[None, None, :, :]
    nz = np.broadcast_to(ct[:, :, None, None], nx.shape)
    wts = th_w[:, :, None, None] * ph_w[None, None, None, :]
    vols = cell_volumes(m)
    theta, phi = as_angles(x)
    out = np.empty((theta.size, m * m))
    for r, (t, p) in enumerate(zip(theta, phi)):
        v = (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))
        dots = np.clip(v[0] * nx + v[1] * ny + v[2] * nz, -1.0, 1.0)
        vals = (full_tail_of_t(K, dots) * wts).sum(axis=(1, 3))
        out[r] = (vals / vols).ravel()
    return out


# --------------------------------------------------------------------------
# fit


@dataclass(frozen=True)
class HistosplineFit:
    spec: BasisSpec
    kernel: KernelSpec
    xi: float
    m: int
    c_check: np.ndarray
    d_check: np.ndarray
    nodes: int = DEFAULT_NODES
    _cellQ: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __call__(self, x: PointsLike):
        pts = as_points(x)
        vals = basis_matrix(self.spec.K, pts) @ self.d_check + cell_kernel_vectors(
            self.spec.K, self.m, pts, self.nodes
        ) @ self.c_check
        return float(vals[0]) if isinstance(x, Direction) else vals

    def roughness(self) -> float:
        Q = self._cellQ if self._cellQ is not None else cell_kernel_matrix(self.spec.K, self.m, self.nodes)
        return float(self.c_check @ Q @ self.c_check)

    @property
    def integral(self) -> float:
        """Integral of u over the sphere; only the constant harmonic contributes."""
        return float(self.d_check[0] * math.sqrt(FOUR_PI))

    @property
    def normalising_constant(self) -> float:
        return 1.0 / self.integral


def fit_histospline(
    grid: CellGrid, spec: BasisSpec, kernel: KernelSpec, xi: float, nodes: int = DEFAULT_NODES
) -> HistosplineFit:
    """Fit u to the empirical cell densities of ``grid``."""
    if not xi > 0:
        raise ValueError("xi must be positive")
    if kernel.branch is not KernelBranch.FULL or kernel.K != spec.K:
        raise ValueError("histosplines use the FULL kernel with the basis truncation level")
    m = grid.m
    if spec.kappa > m * m:
        raise RankDeficient(f"{m * m} cells cannot determine {spec.kappa} retained coefficients")
    Phi = cell_functionals(spec, m)
    Q = cell_kernel_matrix(spec.K, m, nodes)
    y = grid.densities.ravel()
    c, d, *_ = solve_representer(Q, Phi, y, m * m * xi)
    return HistosplineFit(spec, kernel, float(xi), m, c, d, nodes, Q)
