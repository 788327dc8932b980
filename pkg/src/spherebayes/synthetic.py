"""Seeded synthetic data sets used by the scripts, the CLI and the tests."""

from __future__ import annotations

import math

import numpy as np

from .spectral import basis_matrix, random_directions
from .spline import RegressionData


def zonal_truth(points) -> np.ndarray:
    """A degree-2 function of colatitude only."""
    theta = np.asarray(points, dtype=float)[:, 0]
    c = np.cos(theta)
    return c + 2.0 * c**2 - 0.5 * np.sin(theta) ** 2


def nonzonal_truth(points) -> np.ndarray:
    """Strong longitude dependence at degrees 1 and 2."""
    theta, phi = np.asarray(points, dtype=float).T
    st = np.sin(theta)
    return st * np.cos(phi) + st**2 * np.sin(2.0 * phi) + np.cos(theta)


def regression_sample(truth, n: int, noise_sd: float, rng: np.random.Generator) -> RegressionData:
    pts = random_directions(n, rng)
    y = truth(pts) + noise_sd * rng.normal(size=n)
    return RegressionData(pts, y)


def harmonic_truth(K: int, rng: np.random.Generator):
    """Standard normal coefficients on every harmonic of degree <= K."""
    coef = rng.normal(size=(K + 1) ** 2)

    def f(points):
        return basis_matrix(K, points) @ coef

    f.coefficients = coef
    f.degree = K
    return f


def clustered_directions(n: int, rng: np.random.Generator, kappa: float = 4.0,
                         background: float = 0.3) -> np.ndarray:
    """Directions from a von Mises-Fisher cluster about the north pole mixed
    with a uniform background, as (n, 2) angles."""
    n_bg = rng.binomial(n, background)
    n_cl = n - n_bg
    # inverse CDF of cos(theta) under vMF on S^2
    u = rng.uniform(size=n_cl)
    w = 1.0 + np.log(u + (1.0 - u) * math.exp(-2.0 * kappa)) / kappa
    cl = np.column_stack([np.arccos(np.clip(w, -1.0, 1.0)), rng.uniform(0.0, 2.0 * math.pi, n_cl)])
    pts = np.vstack([cl, random_directions(n_bg, rng)])
    return pts[rng.permutation(n)]
