"""Posterior of the variance ratio v = sigma^2 / tau^2 after integrating out tau^2.

For a covariance sigma^2 I + tau^2 H D H' and data rotated to w = H'y, an
F(a, b) prior on v and the improper prior (tau^2)^-c on tau^2 give

    log pi(v | y) = log F_{a,b}(v) - 1/2 sum log(v + d_i)
                    - h log(sum w_i^2 / (v + d_i)) + const,   h = (n + 2c - 2)/2.

All integrals are taken in u = log v.  The constants dropped in the density
are kept in ``log_evidence`` (normal density factor, the Gamma function from
the tau^2 integral and the F normaliser), so evidences are comparable across
models fitted to the same n observations.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln, gammaln, logsumexp

from .errors import NonIntegrable

EIGEN_FLOOR = 1e-12
_GL_ORDER = 16
_START_PANELS = 32
_MAX_PANELS = 8192
_REL_TOL = 1e-13
_WINDOW_DROP = 60.0
_SIMPSON_INTERVALS = 8192
_CHUNK = 1 << 20


def hyper_a(b: float) -> float:
    """F-prior numerator degrees of freedom tied to b."""
    return 8.0 * (b + 2.0) / (b - 2.0)


def log_f_density(v, a: float, b: float):
    v = np.asarray(v, dtype=float)
    return (
        0.5 * a * math.log(a)
        + 0.5 * b * math.log(b)
        - betaln(0.5 * a, 0.5 * b)
        + (0.5 * a - 1.0) * np.log(v)
        - 0.5 * (a + b) * np.log(b + a * v)
    )


class VPosterior:
    """Normalised posterior density of v for one branch.

    Parameters
    ----------
    d : eigenvalues of the branch covariance (clamped at zero below 1e-12)
    w : rotated data H'y
    b, c_exp : hyperprior parameters; a = 8(b+2)/(b-2)
    """

    def __init__(self, d, w, b: float = 4.0, c_exp: float = 1.0):
        d = np.asarray(d, dtype=float).ravel()
        w = np.asarray(w, dtype=float).ravel()
        if d.shape != w.shape:
            raise ValueError("d and w must have equal length")
        self.d = np.where(d < EIGEN_FLOOR, 0.0, d)
        self.w2 = w * w
        self.n = d.size
        self.b = float(b)
        self.a = hyper_a(self.b)
        self.c_exp = float(c_exp)
        self.h = 0.5 * (self.n + 2.0 * self.c_exp - 2.0)
        if self.h <= 0:
            raise NonIntegrable("need n + 2 c_exp - 2 > 0")
        if not np.any(self.w2 > 0):
            raise NonIntegrable("all rotated data are zero")
        self._const = (
            -0.5 * self.n * math.log(2.0 * math.pi) + gammaln(self.h) + self.h * math.log(2.0)
        )
        self._window = self._find_window()
        self.nodes, log_w = self._gauss_nodes()
        self.log_evidence = float(logsumexp(log_w))
        self.weights = np.exp(log_w - self.log_evidence)

    # -- integrand ---------------------------------------------------------

    def _sums(self, v):
        """(sum log(v + d), sum w^2 / (v + d)) for a 1-d array of v."""
        v = np.asarray(v, dtype=float)
        out_log = np.empty(v.size)
        out_s = np.empty(v.size)
        step = max(1, _CHUNK // max(self.n, 1))
        for lo in range(0, v.size, step):
            vd = v[lo : lo + step, None] + self.d[None, :]
            out_log[lo : lo + step] = np.log(vd).sum(axis=1)
            out_s[lo : lo + step] = (self.w2[None, :] / vd).sum(axis=1)
        return out_log, out_s

    def log_density_unnormalised(self, v):
        """Log of the full integrand in v, including every constant."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        slog, S = self._sums(v)
        with np.errstate(divide="ignore"):
            return (
                self._const
                + log_f_density(v, self.a, self.b)
                - 0.5 * slog
                - self.h * np.log(S)
            )

    def _log_in_u(self, u):
        u = np.asarray(u, dtype=float)
        return self.log_density_unnormalised(np.exp(u)) + u

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros(v.shape)
        pos = v > 0
        out[pos] = np.exp(self.log_density_unnormalised(v[pos]) - self.log_evidence)
        return out if out.ndim else float(out)

    # -- quadrature --------------------------------------------------------

    def _find_window(self):
        for half in (80.0, 200.0, 700.0):
            u = np.arange(-half, half + 0.25, 0.5)
            ell = self._log_in_u(u)
            if not np.any(np.isfinite(ell)):
                raise NonIntegrable("v-posterior is zero or infinite on the search grid")
            ell = np.where(np.isfinite(ell), ell, -np.inf)
            top = ell.max()
            if np.isposinf(top):
                raise NonIntegrable("v-posterior is unbounded")
            inside = np.nonzero(ell > top - _WINDOW_DROP)[0]
            if inside[0] > 0 and inside[-1] < u.size - 1:
                return u[inside[0] - 1], u[inside[-1] + 1]
        raise NonIntegrable("v-posterior mass does not decay within |log v| <= 700")

    def _gauss_nodes(self):
        lo, hi = self._window
        x, wt = np.polynomial.legendre.leggauss(_GL_ORDER)
        prev = None
        panels = _START_PANELS
        while panels <= _MAX_PANELS:
            edges = np.linspace(lo, hi, panels + 1)
            half = 0.5 * np.diff(edges)
            mid = 0.5 * (edges[:-1] + edges[1:])
            u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
            log_w = self._log_in_u(u) + np.log((half[:, None] * wt[None, :]).ravel())
            total = logsumexp(log_w)
            if not np.isfinite(total):
                raise NonIntegrable("v-posterior normaliser is not finite")
            # the log normaliser is only known to a few ulps of its magnitude
            floor = 64.0 * np.finfo(float).eps * max(1.0, abs(total))
            if prev is not None and abs(math.expm1(total - prev)) < max(_REL_TOL, floor):
                return np.exp(u), log_w
            prev = total
            panels *= 2
        raise NonIntegrable("adaptive Gauss rule did not converge")

    def simpson_nodes(self, intervals: int = _SIMPSON_INTERVALS):
        """Composite Simpson nodes and normalised weights on the same window."""
        lo, hi = self._window
        u = np.linspace(lo, hi, intervals + 1)
        coef = np.ones(intervals + 1)
        coef[1:-1:2] = 4.0
        coef[2:-1:2] = 2.0
        log_w = self._log_in_u(u) + np.log(coef * (hi - lo) / (3.0 * intervals))
        total = logsumexp(log_w)
        return np.exp(u), np.exp(log_w - total), float(total)

    def expect(self, fn, scheme: str = "gauss"):
        """E[fn(v) | y]; fn maps an (m,) array of v to an (m, ...) array."""
        if scheme == "gauss":
            v, wts = self.nodes, self.weights
        elif scheme == "simpson":
            v, wts, _ = self.simpson_nodes()
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        vals = np.asarray(fn(v), dtype=float)
        return np.tensordot(wts, vals, axes=(0, 0))

    def mean_inverse(self, scheme: str = "gauss") -> np.ndarray:
        """E[1 / (v + d_i) | y] for every i."""
        return self.expect(lambda v: 1.0 / (v[:, None] + self.d[None, :]), scheme)

    def quadratic_form(self, v) -> np.ndarray:
        """S(v) = sum w_i^2 / (v + d_i)."""
        return self._sums(np.atleast_1d(v))[1]
