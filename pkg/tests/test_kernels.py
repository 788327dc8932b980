import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spherebayes.diagnostics import alternating_oracle, iota_series
from spherebayes.errors import DomainError, DuplicatePoints
from spherebayes.kernels import (
    KernelBranch,
    KernelSpec,
    check_distinct,
    full_tail_of_t,
    generic_tail_of_t,
    gram,
    kernel_cross,
    kernel_matrix,
    mixture_tail_matrix,
    q2_closed_form,
    tail_kernel_full,
    zonal_tail_cross,
)
from spherebayes.spectral import (
    FOUR_PI,
    BasisSpec,
    Direction,
    WeightScheme,
    legendre_table,
    random_directions,
    rotate_points,
)


def test_q2_endpoints():
    assert q2_closed_form(1.0) == 0.5
    assert q2_closed_form(-1.0) == pytest.approx(4 * math.log(2) - 2.5, abs=1e-14)
    with pytest.raises(DomainError):
        q2_closed_form(1.1)


def test_full_kernel_values():
    assert full_tail_of_t(0, 1.0) == pytest.approx(1 / (24 * math.pi), abs=1e-15)
    # alternating series oracle at t = -1
    assert full_tail_of_t(0, -1.0) == pytest.approx(alternating_oracle() / (2 * math.pi), abs=1e-12)
    assert full_tail_of_t(0, -1.0) == pytest.approx(-0.0048339, abs=5e-8)


@pytest.mark.parametrize("K", [0, 1, 3, 7])
def test_full_kernel_matches_series(K):
    t = np.linspace(-1, 1, 41)
    assert np.abs(full_tail_of_t(K, t) - iota_series(t, K)).max() < 1e-8


def test_zonal_kernel_is_longitude_average_of_full():
    # average over the longitude difference with a 512-point trapezoid rule
    K = 2
    c1, c2 = np.array([0.3, -0.8, 0.95]), np.array([0.1, 0.6])
    s1, s2 = np.sqrt(1 - c1**2), np.sqrt(1 - c2**2)
    dphi = np.arange(512) * 2 * math.pi / 512
    t = c1[:, None, None] * c2[None, :, None] + s1[:, None, None] * s2[None, :, None] * np.cos(dphi)
    avg = full_tail_of_t(K, t).mean(axis=-1)
    assert np.abs(zonal_tail_cross(K, c1, c2) - avg).max() < 1e-10


@pytest.mark.parametrize("s", [2.0, 3.5, 5.0])
def test_generic_kernel_against_direct_sum(s):
    t = np.linspace(-1, 1, 9)
    P = legendre_table(4000, t)
    k = np.arange(4001.0)[:, None]
    with np.errstate(divide="ignore"):
        coef = (2 * k + 1) / FOUR_PI * (k * (k + 1)) ** (-s)
    direct = (coef[2:] * P[2:]).sum(axis=0)
    # the direct sum is itself truncated at 4000; allow its own tail
    slack = 4000.0 ** (2 - 2 * s) / (s - 1) / FOUR_PI
    assert np.abs(generic_tail_of_t(1, s, t) - direct).max() < slack + 1e-10


def test_slow_series_is_refused():
    with pytest.raises(ValueError, match="series terms"):
        generic_tail_of_t(0, 1.5, 0.3)
    assert np.isfinite(generic_tail_of_t(0, 1.5, 0.3, tol=1e-4))


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(BasisSpec(2, weight_scheme=WeightScheme.LAMBDA), KernelBranch.FULL)
    with pytest.raises(ValueError):
        KernelSpec(BasisSpec(2, weight_scheme=WeightScheme.IOTA), KernelBranch.GENERIC_S)
    assert KernelSpec.full(3).K == 3


@given(st.integers(0, 2**32 - 1))
def test_kernels_are_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    a, b = random_directions(3, rng), random_directions(3, rng)
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    R = q * np.sign(np.linalg.det(q))
    for spec in (KernelSpec.full(2), KernelSpec.generic(1, 3.0)):
        before = kernel_cross(spec, a, b)
        after = kernel_cross(spec, rotate_points(R, a), rotate_points(R, b))
        assert np.abs(before - after).max() < 1e-10


@given(st.integers(0, 2**32 - 1), st.sampled_from(["full", "zonal", "generic"]))
def test_gram_symmetric_positive_semidefinite(seed, branch):
    pts = random_directions(25, np.random.default_rng(seed))
    spec = {"full": KernelSpec.full(1), "zonal": KernelSpec.zonal(1),
            "generic": KernelSpec.generic(1, 2.0)}[branch]
    G = gram(spec, pts)
    assert np.array_equal(G, G.T)
    assert np.linalg.eigvalsh(G).min() > -1e-10 * np.abs(G).max()


def test_kernel_matrix_ridge_and_mixture(rng):
    pts = random_directions(12, rng)
    km = kernel_matrix(KernelSpec.full(1), pts, ridge=0.1)
    G = gram(KernelSpec.full(1), pts)
    assert np.allclose(km.entries - G, 12 * 0.1 * np.eye(12))
    km1 = kernel_matrix(KernelSpec.full(1), pts, ridge=0.1, ridge_scale="1")
    assert np.allclose(km1.entries - G, 0.1 * np.eye(12))
    mix = mixture_tail_matrix(pts, KernelSpec.zonal(1), KernelSpec.full(1), 0.3)
    want = 0.3 * gram(KernelSpec.zonal(1), pts) + 0.7 * G
    assert np.allclose(mix.entries, want, atol=1e-12)


def test_duplicates_rejected():
    pts = np.array([[0.5, 1.0], [0.5, 1.0 + 1e-12], [1.0, 2.0]])
    with pytest.raises(DuplicatePoints):
        check_distinct(pts)
    # the Gram matrix itself is well defined, only solves need distinct sites
    G = gram(KernelSpec.full(0), pts)
    assert np.allclose(G[0], G[1])


def test_pair_kernel_scalar():
    spec = KernelSpec.full(0)
    x = Direction(0.4, 0.1)
    assert tail_kernel_full(spec, x, x) == pytest.approx(1 / (24 * math.pi), abs=1e-15)
