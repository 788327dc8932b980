"""The fifteen acceptance criteria, each at its stated tolerance.

Each test records one PASS/FAIL line (see conftest) before asserting, so the
terminal summary lists every criterion even when some fail.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from spherebayes import persistence
from spherebayes.bayes import PriorSpec, fit_hierarchical
from spherebayes.diagnostics import (
    addition_formula_error,
    diffuse_discrepancy,
    hb_limit_distances,
    rate_experiment,
    shrinkage_discrepancy,
    zeta_check,
)
from spherebayes.histospline import CellGrid, fit_histospline
from spherebayes.kernels import (
    KernelSpec,
    full_tail_of_t,
    generic_tail_of_t,
    gram,
    q2_closed_form,
)
from spherebayes.model_select import bayes_factor_table, select_k
from spherebayes.projection import (
    Pole,
    jacobian_ratios,
    lambert_inverse,
    lambert_project,
)
from spherebayes.spectral import (
    FOUR_PI,
    BasisSpec,
    Direction,
    WeightScheme,
    basis_matrix,
    legendre_table,
    random_directions,
    unit_vectors,
)
from spherebayes.spline import fit_spline, solve_representer
from spherebayes.synthetic import (
    harmonic_truth,
    nonzonal_truth,
    regression_sample,
    zonal_truth,
)
from spherebayes.vposterior import VPosterior


def test_c01_addition_formula(acceptance):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    err = addition_formula_error(30, random_directions(100, rng))
    secs = time.perf_counter() - t0
    ok = err < 1e-10 and secs < 10
    acceptance(1, "addition formula", ok, f"max err {err:.2e}, {secs:.2f} s")
    assert ok


def test_c02_orthonormality(acceptance):
    x, wx = np.polynomial.legendre.leggauss(200)
    phi = np.arange(200) * 2 * math.pi / 200
    T, P = np.meshgrid(np.arccos(x), phi, indexing="ij")
    W = np.outer(wx, np.full(200, 2 * math.pi / 200)).ravel()
    B = basis_matrix(9, np.column_stack([T.ravel(), P.ravel()]))
    err = np.abs(B.T @ (W[:, None] * B) - np.eye(B.shape[1])).max()
    ok = err < 1e-8
    acceptance(2, "orthonormality (degree 9, 200x200 rule)", ok, f"max err {err:.2e}")
    assert ok


def test_c03_closed_form_kernel(acceptance):
    rng = np.random.default_rng(3)
    K = rng.integers(0, 11, size=500)
    a, b = random_directions(500, rng), random_directions(500, rng)
    t = np.einsum("ij,ij->i", unit_vectors(*a.T), unit_vectors(*b.T))
    # one 10^4-term table for every case, summed from K+1
    terms = 10_000
    P = legendre_table(terms, t)
    k = np.arange(terms + 1, dtype=float)[:, None]
    S = P / (2 * math.pi * (k + 1) * (k + 2) * (k + 3))
    tail = S.sum(axis=0) - np.array([S[: Ki + 1, j].sum() for j, Ki in enumerate(K)])
    closed = np.array([full_tail_of_t(int(Ki), tj) for Ki, tj in zip(K, t)]).ravel()
    series_err = np.abs(closed - tail).max()
    diag = abs(float(full_tail_of_t(0, 1.0)) - 1 / (24 * math.pi))
    q1 = abs(float(q2_closed_form(1.0)) - 0.5)
    qm1 = abs(float(q2_closed_form(-1.0)) - (4 * math.log(2) - 2.5))
    ok = series_err < 1e-8 and max(diag, q1, qm1) < 1e-12
    acceptance(
        3, "closed-form kernel", ok,
        f"series {series_err:.2e}; Q(x,x) {diag:.1e}; q2(1) {q1:.1e}; q2(-1) {qm1:.1e}",
    )
    assert ok


def test_c04_zeta_value(acceptance):
    z = zeta_check(2.0)
    err_value = abs(z.value - 1 / FOUR_PI)
    pts = random_directions(100, np.random.default_rng(4))
    # degree <= 30 from the harmonics themselves, the rest telescopes exactly
    B = basis_matrix(30, pts)
    deg = np.concatenate([np.full(2 * j + 1, j) for j in range(31)])
    lam = np.zeros(deg.size)
    lam[deg > 0] = (deg[deg > 0] * (deg[deg > 0] + 1.0)) ** -2.0
    per_point = (B**2) @ lam + 1 / (FOUR_PI * 31**2)
    diag = generic_tail_of_t(0, 2.0, np.ones(100), tol=1e-10)
    err_points = max(np.abs(per_point - 1 / FOUR_PI).max(), np.abs(diag - 1 / FOUR_PI).max())
    ok = err_value < 1e-10 and err_points < 1e-10
    acceptance(4, "zeta value at s = 2", ok, f"sum {err_value:.1e}; pointwise {err_points:.1e}")
    assert ok


def test_c05_null_space_exactness(acceptance):
    rng = np.random.default_rng(5)
    spec = BasisSpec(2, weight_scheme=WeightScheme.IOTA)
    kern = KernelSpec.full(2)
    worst_d = worst_c = 0.0
    for _ in range(20):
        pts = random_directions(40, rng)
        d0 = rng.normal(size=spec.kappa)
        Phi = basis_matrix(2, pts)
        G = gram(kern, pts)
        for xi in (1e-3, 1.0, 1e3):
            c, d, *_ = solve_representer(G, Phi, Phi @ d0, 40 * xi)
            worst_d = max(worst_d, np.abs(d - d0).max())
            worst_c = max(worst_c, np.abs(c).max())
    ok = worst_d < 1e-8 and worst_c < 1e-8
    acceptance(5, "null-space exactness", ok, f"|d - d0| {worst_d:.1e}; |c| {worst_c:.1e}")
    assert ok


def test_c06_diffuse_limit(acceptance):
    dist = diffuse_discrepancy(np.random.default_rng(6), nu=1e8)
    ok = dist < 1e-5
    acceptance(6, "diffuse prior limit (nu = 1e8)", ok, f"sup distance {dist:.2e}")
    assert ok


def test_c07_shrinkage_identity(acceptance):
    rng = np.random.default_rng(7)
    worst = max(shrinkage_discrepancy(rng, n=10) for _ in range(100))
    ok = worst < 1e-9
    acceptance(7, "shrinkage identity", ok, f"max discrepancy {worst:.2e}")
    assert ok


def test_c08_hierarchical_limit(acceptance):
    dist = hb_limit_distances(np.random.default_rng(8))
    mono = all(b < a for a, b in zip(dist, dist[1:]))
    ok = dist[-1] < 1e-4 and mono
    acceptance(8, "hierarchical limit to the spline", ok,
               f"at 1e6 {dist[-1]:.2e}; monotone {mono}")
    assert ok


def test_c09_v_posterior_normalisation(acceptance):
    rng = np.random.default_rng(9)
    worst_rel = worst_mass = 0.0
    for _ in range(50):
        n = int(rng.integers(5, 80))
        d = rng.exponential(rng.uniform(0.01, 10.0), size=n) * (rng.uniform(size=n) > 0.2)
        w = rng.normal(scale=rng.uniform(0.1, 5.0), size=n)
        vp = VPosterior(d, w, b=float(rng.uniform(2.2, 4.0)), c_exp=float(rng.uniform(0.0, 1.0)))
        _, _, log_simpson = vp.simpson_nodes()
        worst_rel = max(worst_rel, abs(math.expm1(log_simpson - vp.log_evidence)))
        lo, hi = vp._window
        mass, _ = integrate.quad(lambda u: vp.pdf(math.exp(u)) * math.exp(u), lo, hi,
                                 limit=400, epsabs=1e-12, epsrel=1e-10)
        worst_mass = max(worst_mass, abs(mass - 1.0))
    ok = worst_rel < 1e-6 and worst_mass < 1e-6
    acceptance(9, "v-posterior normalisation", ok,
               f"Gauss vs Simpson {worst_rel:.1e}; |integral - 1| {worst_mass:.1e}")
    assert ok


@pytest.mark.slow
def test_c10_adaptivity(acceptance):
    rng = np.random.default_rng(10)
    spec = BasisSpec(4, weight_scheme=WeightScheme.IOTA)
    prior = PriorSpec(p=0.5)
    t0 = time.perf_counter()
    rates = {}
    for name, truth in (("zonal", zonal_truth), ("nonzonal", nonzonal_truth)):
        ps = np.array([
            fit_hierarchical(regression_sample(truth, 400, 0.05, rng), spec, prior,
                             compute_variance=False).pstar
            for _ in range(50)
        ])
        rates[name] = np.mean(ps > 0.9) if name == "zonal" else np.mean(ps < 0.1)
    secs = time.perf_counter() - t0
    ok = rates["zonal"] >= 0.9 and rates["nonzonal"] >= 0.9 and secs < 300
    acceptance(10, "adaptivity of p*", ok,
               f"zonal {rates['zonal']:.2f}; non-zonal {rates['nonzonal']:.2f}; {secs:.0f} s")
    assert ok


@pytest.mark.slow
def test_c11_model_recovery(acceptance):
    rng = np.random.default_rng(11)
    hits, ref_exact = 0, True
    for _ in range(30):
        truth = harmonic_truth(3, rng)
        data = regression_sample(truth, 300, 0.05, rng)
        scores = bayes_factor_table(data, range(1, 7), with_schwarz=False)
        hits += select_k(scores) == 3
        top = [s for s in scores if s.K == 6][0]
        ref_exact &= top.log_bayes_factor == 0.0 and top.bayes_factor == 1.0
    ok = hits >= 21 and ref_exact
    acceptance(11, "model recovery by Bayes factors", ok,
               f"{hits}/30 recovered K = 3; reference factor exactly 1: {ref_exact}")
    assert ok


@pytest.mark.slow
def test_c12_rate(acceptance):
    t0 = time.perf_counter()
    rep = rate_experiment(5.0, (100, 200, 400, 800, 1600), replicates=20, seed=0)
    secs = time.perf_counter() - t0
    ok = abs(rep.slope - rep.theoretical_slope) <= 0.15 and secs < 900
    acceptance(12, "MISE rate at s = 5", ok,
               f"slope {rep.slope:.3f} vs {rep.theoretical_slope:.3f}; {secs:.0f} s")
    assert ok


def test_c13_histospline_uniform(acceptance):
    spec = BasisSpec(4, weight_scheme=WeightScheme.IOTA)
    fit = fit_histospline(CellGrid.uniform(10), spec, KernelSpec.full(4), 1e-4)
    pts = np.vstack([random_directions(300, np.random.default_rng(13)), CellGrid.uniform(10).centers()])
    err = np.abs(fit(pts) - 1 / FOUR_PI).max()
    ok = err < 1e-3
    acceptance(13, "histospline uniform fixed point", ok, f"sup err {err:.1e}")
    assert ok


def test_c14_lambert(acceptance):
    anchors = [
        (lambert_project(Direction(0.0, 0.0)), (0.0, 0.0)),
        (lambert_project(Direction(math.pi / 2, 0.0)), (math.sqrt(2.0), 0.0)),
    ]
    anchor_err = max(max(abs(a - b) for a, b in zip(got, want)) for got, want in anchors)
    south = lambert_project(Direction(math.pi, 0.0))
    anchor_err = max(anchor_err, abs(math.hypot(*south) - 2.0))
    rng = np.random.default_rng(14)
    jac = max(np.abs(jacobian_ratios(1_000_000, rng, pole) - 1).max() for pole in Pole)
    pts = random_directions(1000, rng)
    pts = pts[pts[:, 0] < math.pi - 1e-3]
    back = lambert_inverse(lambert_project(pts, Pole.NORTH), Pole.NORTH)
    dphi = np.angle(np.exp(1j * (back[:, 1] - pts[:, 1])))
    trip = max(np.abs(back[:, 0] - pts[:, 0]).max(), np.abs(dphi).max())
    ok = anchor_err < 1e-12 and jac < 0.02 and trip < 1e-10
    acceptance(14, "Lambert projection", ok,
               f"anchors {anchor_err:.1e}; Jacobian {jac:.3f}; round trip {trip:.1e}")
    assert ok


def test_c15_persistence(acceptance, tmp_path):
    rng = np.random.default_rng(15)
    data = regression_sample(zonal_truth, 120, 0.05, rng)
    spec = BasisSpec(3, weight_scheme=WeightScheme.IOTA)
    fits = {
        "spline": fit_spline(data, spec, KernelSpec.full(3), 1e-3),
        "bayes": fit_hierarchical(data, spec, PriorSpec(), compute_variance=True),
        "histospline": fit_histospline(CellGrid.uniform(8), spec, KernelSpec.full(3), 1e-3),
    }
    q = random_directions(100, rng)
    worst = 0.0
    for name, fit in fits.items():
        path = tmp_path / f"{name}.sba"
        persistence.save(fit, path)
        back = persistence.load(path)
        worst = max(worst, np.abs(back(q) - fit(q)).max())
    ok = worst < 1e-12
    acceptance(15, "archive round trip", ok, f"max difference {worst:.1e}")
    assert ok
