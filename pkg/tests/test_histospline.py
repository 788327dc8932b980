import math

import numpy as np
import pytest
from scipy import integrate

from spherebayes.errors import EmptyInput, RankDeficient
from spherebayes.histospline import (
    CellGrid,
    bin_directions,
    cell_functionals,
    cell_kernel_matrix,
    cell_volumes,
    fit_histospline,
)
from spherebayes.kernels import KernelSpec
from spherebayes.spectral import (
    FOUR_PI,
    BasisSpec,
    WeightScheme,
    harmonic_position,
    random_directions,
    spherical_harmonic,
)


def _spec(K):
    return BasisSpec(K, weight_scheme=WeightScheme.IOTA)


def test_volumes_tile_the_sphere():
    for m in (2, 5, 10):
        assert cell_volumes(m).sum() == pytest.approx(FOUR_PI, abs=1e-12)


def test_binning(rng):
    grid = bin_directions(random_directions(1000, rng), 6)
    assert grid.frequencies.sum() == pytest.approx(1.0) and grid.count == 1000
    south = bin_directions(np.array([[math.pi, 0.0], [0.0, 0.0]]), 4)
    assert south.frequencies[3, 0] == 0.5 and south.frequencies[0, 0] == 0.5
    with pytest.raises(EmptyInput):
        bin_directions(np.zeros((0, 2)), 4)


def test_cell_average_against_adaptive_quadrature():
    m, (k, q) = 7, (5, 3)
    i1, i2 = 2, 5
    A = cell_functionals(_spec(5), m)
    a, b = i1 * math.pi / m, (i1 + 1) * math.pi / m
    c, d = i2 * 2 * math.pi / m, (i2 + 1) * 2 * math.pi / m
    val, _ = integrate.dblquad(
        lambda p, t: spherical_harmonic((k, q), np.array([[t, p]]))[0] * math.sin(t),
        a, b, c, d, epsabs=1e-13, epsrel=1e-12,
    )
    vol = cell_volumes(m)[i1, i2]
    assert A[i1 * m + i2, harmonic_position(k, q)] == pytest.approx(val / vol, abs=1e-10)


def test_quadrature_refinement_is_stable():
    a16, a32 = cell_functionals(_spec(4), 6, 16), cell_functionals(_spec(4), 6, 32)
    assert np.abs(a16 - a32).max() < 1e-8
    q16, q32 = cell_kernel_matrix(3, 6, 16), cell_kernel_matrix(3, 6, 32)
    assert np.abs(q16 - q32).max() < 1e-8


def test_uniform_fixed_point():
    fit = fit_histospline(CellGrid.uniform(6), _spec(2), KernelSpec.full(2), 1e-3)
    q = random_directions(50, np.random.default_rng(0))
    assert np.abs(fit(q) - 1 / FOUR_PI).max() < 1e-10
    assert fit.integral == pytest.approx(1.0, abs=1e-12)


def test_roughness_decreases_with_xi(rng):
    grid = bin_directions(random_directions(3000, rng) * np.array([0.6, 1.0]), 6)
    rough = [fit_histospline(grid, _spec(2), KernelSpec.full(2), xi).roughness()
             for xi in (1e-6, 1e-4, 1e-2, 1.0)]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(rough, rough[1:]))


def test_zonal_density_gives_zonal_fit(rng):
    # density proportional to 1 + 0.8 cos(theta); with 1e5 draws the sampling
    # noise in the 30 retained non-zonal coefficients alone gives about 7%
    n = 1_000_000
    u = rng.uniform(size=n)
    c = (-1 + np.sqrt(1 - 0.8 * (2 - 0.8) + 4 * 0.8 * u)) / 0.8
    pts = np.column_stack([np.arccos(np.clip(c, -1, 1)), rng.uniform(0, 2 * math.pi, n)])
    fit = fit_histospline(bin_directions(pts, 16), _spec(5), KernelSpec.full(5), 1e-4)
    theta = np.linspace(0.2, math.pi - 0.2, 9)
    phi = np.linspace(0, 2 * math.pi, 24, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    vals = fit(np.column_stack([T.ravel(), P.ravel()])).reshape(T.shape)
    spread = (vals.max(axis=1) - vals.min(axis=1)).max()
    assert spread < 0.05 * (vals.max() - vals.min())


def test_preconditions():
    with pytest.raises(RankDeficient):
        fit_histospline(CellGrid.uniform(2), _spec(2), KernelSpec.full(2), 1e-3)
    with pytest.raises(ValueError):
        fit_histospline(CellGrid.uniform(4), _spec(2), KernelSpec.full(2), 0.0)
    with pytest.raises(ValueError):
        fit_histospline(CellGrid.uniform(4), _spec(2), KernelSpec.full(1), 1e-3)
