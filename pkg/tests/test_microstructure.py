import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from lcfrisk._backend import available
from lcfrisk.errors import DomainError
from lcfrisk.fields import ScalarSurfaceField
from lcfrisk.material import deviator, ro_strain
from lcfrisk.microstructure import (
    DEFAULT_VARTHETA,
    DEFAULT_VARTHETA_SE,
    FCC,
    MultiscaleParams,
    adjusted_strain,
    grain_product_survival,
    kappa,
    life_distribution,
    max_resolved_shear,
    multiscale_survival,
    principal_stresses,
    quaternion_to_matrix,
    resolved_shear_sample,
    rotation_stream,
    sample_rotations,
    schmid_factor,
    schmid_life,
    sort_by_magnitude,
    two_sample_ks,
    vartheta_consistency,
)

sym = st.lists(st.floats(-1e3, 1e3), min_size=6, max_size=6).map(
    lambda v: np.array([[v[0], v[5], v[4]], [v[5], v[1], v[3]], [v[4], v[3], v[2]]])
)


def brute_tau(sigma, U):
    # loop over the 12 systems written out explicitly
    best = 0.0
    for n in ([1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]):
        n = np.array(n, float) / math.sqrt(3)
        for d in ([1, -1, 0], [1, 0, -1], [0, 1, -1], [1, 1, 0], [1, 0, 1], [0, 1, 1]):
            d = np.array(d, float)
            if n @ d != 0:
                continue
            d /= math.sqrt(2)
            best = max(best, abs((U @ n) @ sigma @ (U @ d)))
    return best


def test_fcc_table():
    assert FCC.n_systems == 12 and FCC.check()


def test_rotations_orthonormal(rng):
    R = sample_rotations(rng, 1000)
    np.testing.assert_allclose(np.einsum("mki,mkj->mij", R, R), np.broadcast_to(np.eye(3), R.shape), atol=1e-14)
    np.testing.assert_allclose(np.linalg.det(R), 1.0, atol=1e-14)


def test_quaternion_identity_and_half_turn():
    assert np.array_equal(quaternion_to_matrix([1.0, 0, 0, 0]), np.eye(3))
    np.testing.assert_allclose(quaternion_to_matrix([0.0, 0, 0, 1.0]), np.diag([-1.0, -1.0, 1.0]), atol=1e-15)


def test_rotation_angle_is_haar(rng):
    # Haar measure on SO(3): angle CDF (theta - sin theta) / pi
    R = sample_rotations(rng, 20000)
    theta = np.arccos(np.clip((np.trace(R, axis1=1, axis2=2) - 1) / 2, -1, 1))
    assert kstest(theta, lambda t: (t - np.sin(t)) / np.pi).pvalue > 1e-3


def test_stream_independent_of_threads():
    n = 140_000
    a = rotation_stream(n, 7, threads=1)
    b = rotation_stream(n, 7, threads=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a[:10], rotation_stream(10, 8)[:10])


@pytest.mark.parametrize("name", sorted(available()))
def test_kernel_matches_brute_force(name, rng):
    k = available()[name]
    s = rng.normal(size=(3, 3)) * 100
    s = s + s.T
    U = sample_rotations(rng, 25)
    got = k.max_resolved_shear(deviator(s), U, FCC.normals, FCC.directions)
    want = [brute_tau(s, u) for u in U]
    np.testing.assert_allclose(got, want, rtol=1e-13)


def test_identity_uniaxial():
    assert max_resolved_shear(np.diag([1.0, 0, 0]), np.eye(3)) == pytest.approx(1 / math.sqrt(6), rel=1e-15)


def test_hydrostatic_zero():
    tau = resolved_shear_sample(np.eye(3) * 321.0, 100_000, 3)
    assert np.all(tau == 0.0)


def test_uniaxial_bound():
    s = 250.0
    tau = resolved_shear_sample(np.diag([s, 0, 0]), 100_000, 4)
    assert tau.max() <= s / 2
    assert tau.min() > 0


def test_vartheta_constant_reproducible():
    mean, se, z = vartheta_consistency(DEFAULT_VARTHETA, n=100_000, seed=11)
    assert abs(z) < 4
    assert DEFAULT_VARTHETA_SE < 1e-4


# -- principal stresses / kappa --------------------------------------------------------
@settings(max_examples=80, deadline=None)
@given(sym)
def test_principal_stresses_match_eigvalsh(s):
    ref = np.linalg.eigvalsh(s)[::-1]
    np.testing.assert_allclose(principal_stresses(s), ref, atol=1e-9 * max(1.0, np.abs(s).max()))


@pytest.mark.parametrize("diag,k", [((600, 0, 0), 0.0), ((1, 0, -1), 1.0), ((2, 1, 0), 0.5),
                                    ((-3, 0, 0), 0.0), ((5, 5, 5), 0.0), ((1, -1, 1), 2.0)])
def test_kappa_values(diag, k):
    assert kappa(np.diag(np.array(diag, float))) == pytest.approx(k, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(sym, st.floats(0.1, 10.0))
def test_kappa_rotation_and_scale_invariant(s, c):
    if np.abs(s).max() < 1e-3:
        return
    R = quaternion_to_matrix(np.array([0.3, -0.5, 0.2, 0.7]) / np.linalg.norm([0.3, -0.5, 0.2, 0.7]))
    k = kappa(s)
    assert kappa(R @ s @ R.T) == pytest.approx(k, rel=1e-7, abs=1e-7)
    assert kappa(c * s) == pytest.approx(k, rel=1e-9, abs=1e-9)


def test_pure_shear_rotated():
    t = 80.0
    s = np.array([[0, t, 0], [t, 0, 0], [0, 0, 0.0]])
    assert kappa(s) == pytest.approx(1.0, rel=1e-12)


def test_sort_tie_break():
    np.testing.assert_array_equal(sort_by_magnitude([-2.0, 1.0, 2.0]), [2.0, -2.0, 1.0])


def test_kappa_zero_tensor():
    with pytest.raises(DomainError):
        kappa(np.zeros((3, 3)))


# -- Schmid-adjusted lives ------------------------------------------------------------
def test_adjusted_strain_at_mean_factor(material):
    eps = 4e-3
    assert adjusted_strain(DEFAULT_VARTHETA, eps, material, DEFAULT_VARTHETA) == pytest.approx(eps, rel=1e-12)


def test_schmid_life_decreasing_in_factor(material, rng):
    sigma = np.diag([500.0, 0, 0])
    eps = ro_strain(500.0, material.ro)
    U = sample_rotations(rng, 200)
    m = schmid_factor(sigma, U)
    lives = np.array([schmid_life(sigma, u, eps, material).cycles for u in U])
    order = np.argsort(m)
    assert np.all(np.diff(lives[order]) <= 0)


def test_life_distribution_reproducible(material):
    a = life_distribution(np.diag([600.0, 0, 0]), 3000, 5, material)
    b = life_distribution(np.diag([600.0, 0, 0]), 3000, 5, material, threads=3)
    assert np.array_equal(a.lives, b.lives)
    assert a.summary()["kappa"] == 0.0
    assert np.all(np.diff(a.lives) >= 0)


def test_uniaxial_vs_shear_distinct(material):
    s = 600.0
    uni = life_distribution(np.diag([s, 0, 0]), 10_000, 1, material)
    t = s / math.sqrt(3)
    shear = life_distribution(np.diag([t, 0, -t]), 10_000, 2, material)
    stat, p = two_sample_ks(uni, shear)
    assert p < 0.01


def test_nelson_aalen(material):
    d = life_distribution(np.diag([600.0, 0, 0]), 500, 9, material)
    assert d.cumulative_hazard(0.0) == 0.0
    assert d.cumulative_hazard(d.lives[-1]) == pytest.approx(sum(1 / k for k in range(1, 501)), rel=1e-12)


def test_histogram_counts(material):
    d = life_distribution(np.diag([600.0, 0, 0]), 1000, 9, material)
    edges, counts = d.histogram(20)
    assert counts.sum() == 1000 and len(edges) == 21


def test_zero_stress_rejected(material):
    with pytest.raises(DomainError):
        life_distribution(np.zeros((3, 3)), 10, 1, material)


# -- multiscale survival -----------------------------------------------------------------
def unit_surface():
    w = np.full((6, 4), 0.25)
    return ScalarSurfaceField(np.arange(6), np.zeros_like(w), w)


@pytest.mark.parametrize("mu_g", [1.0, 0.01, 3e-4])
def test_constant_hazard_closed_form(mu_g):
    h0 = 2e-4
    surf = unit_surface()
    p = MultiscaleParams(mu_g=mu_g)
    t = np.array([0.0, 1.0, 10.0, 100.0])
    S = multiscale_survival(lambda tt: h0 * tt, surf, p, t)
    np.testing.assert_allclose(S, np.exp(-6.0 * h0 * t / mu_g), rtol=1e-12)
    assert S[0] == 1.0


def test_survival_monotone_with_sampled_hazard(material):
    d = life_distribution(np.diag([600.0, 0, 0]), 2000, 4, material)
    t = np.linspace(0, d.lives[-1], 50)
    S = multiscale_survival(d.cumulative_hazard, unit_surface(), MultiscaleParams(mu_g=0.5), t)
    assert S[0] == 1.0 and np.all(np.diff(S) <= 0)


def test_grain_product_matches_poisson_limit():
    H, A, p = 0.01, 6.0, MultiscaleParams(mu_g=0.1)
    assert grain_product_survival(H, A, p) == pytest.approx(math.exp(-A * H / p.mu_g), rel=1e-12)


def test_negative_hazard_rejected():
    with pytest.raises(DomainError):
        multiscale_survival(-1.0, unit_surface(), MultiscaleParams(), 1.0)


def test_kappa_rotated_uniaxial_is_zero(rng):
    R = sample_rotations(rng, 500)
    s = np.einsum("mij,jk,mlk->mil", R, np.diag([600.0, 0.0, 0.0]), R)
    assert np.max(kappa(s)) <= 1e-12
