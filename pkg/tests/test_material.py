import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from lcfrisk._backend import available
from lcfrisk.errors import DomainError
from lcfrisk.material import (
    CmbParams,
    ElasticParams,
    Material,
    RambergOsgoodParams,
    StressTensor,
    cmb_inverse,
    cmb_strain,
    deviator,
    life_from_strain,
    ndet_derivative,
    ndet_from_elastic_stress,
    neuber_residual,
    neuber_shakedown,
    ro_inverse,
    ro_strain,
    von_mises,
    von_mises_gradient,
)

RO = RambergOsgoodParams(200e3, 1200.0, 0.15)
CMB = CmbParams(1000.0, 0.5, -0.09, -0.6)

ro_params = st.builds(
    RambergOsgoodParams,
    st.floats(50e3, 250e3),
    st.floats(300.0, 3000.0),
    st.floats(0.05, 0.3),
)
cmb_params = st.builds(
    CmbParams,
    st.floats(300.0, 3000.0),
    st.floats(0.05, 2.0),
    st.floats(-0.15, -0.03),
    st.floats(-0.9, -0.4),
)


def neuber_oracle(s_el, p):
    return brentq(lambda s: s * s / p.E + s * (s / p.K) ** (1 / p.n_prime) - s_el**2 / p.E,
                  0.0, s_el, xtol=1e-14, rtol=4 * np.finfo(float).eps)


# -- elastic constants -------------------------------------------------------------
def test_young_poisson_round_trip():
    e = ElasticParams.from_young_poisson(210e3, 0.28)
    assert e.E == pytest.approx(210e3, rel=1e-14)
    assert e.nu == pytest.approx(0.28, rel=1e-14)


@pytest.mark.parametrize("nu", [0.0, 0.5, -0.2])
def test_poisson_out_of_range(nu):
    with pytest.raises(DomainError):
        ElasticParams.from_young_poisson(200e3, nu)


def test_inconsistent_E_rejected():
    with pytest.raises(DomainError, match="inconsistent"):
        ElasticParams(100.0, 80.0, E=1.0)


# -- stress invariants ---------------------------------------------------------------
def test_von_mises_reference_states():
    assert von_mises(np.diag([300.0, 0, 0])) == pytest.approx(300.0, rel=1e-15)
    tau = 100.0
    shear = np.array([[0, tau, 0], [tau, 0, 0], [0, 0, 0]])
    assert von_mises(shear) == pytest.approx(math.sqrt(3) * tau, rel=1e-15)
    assert von_mises(np.eye(3) * 7.0) == 0.0


def test_deviator_of_hydrostatic_is_exact_zero():
    d = deviator(np.eye(3) * 123.456789)
    assert np.all(d == 0.0)


def test_stress_tensor_voigt_order():
    s = StressTensor((1, 2, 3, 4, 5, 6))
    m = s.matrix
    assert (m[1, 2], m[0, 2], m[0, 1]) == (4, 5, 6)
    assert StressTensor.from_matrix(m) == s
    with pytest.raises(DomainError):
        StressTensor.from_matrix(np.arange(9.0).reshape(3, 3))


def test_von_mises_gradient_matches_fd(rng):
    s = rng.normal(size=(3, 3)) * 100
    s = s + s.T
    g = von_mises_gradient(s)
    h = 1e-5
    for i in range(3):
        for j in range(3):
            e = np.zeros((3, 3))
            e[i, j] = h
            fd = (von_mises(s + e) - von_mises(s - e)) / (2 * h)
            assert g[i, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)


# -- Ramberg-Osgood / CMB / Neuber ----------------------------------------------------
@settings(max_examples=60, deadline=None)
@given(ro_params, st.floats(1.0, 2500.0))
def test_ro_round_trip(p, s):
    assert ro_inverse(ro_strain(s, p), p) == pytest.approx(s, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(cmb_params, st.floats(1.0, 1e9))
def test_cmb_round_trip(p, N):
    assert cmb_inverse(cmb_strain(N, p, 200e3), p, 200e3) == pytest.approx(N, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(ro_params, st.floats(1.0, 3000.0))
def test_neuber_matches_bracketing_oracle(p, s_el):
    s = neuber_shakedown(s_el, p)
    assert abs(neuber_residual(s_el, s, p)) <= 1e-12
    assert s == pytest.approx(neuber_oracle(s_el, p), rel=1e-10)
    assert 0 < s <= s_el


def test_neuber_zero_stress():
    assert neuber_shakedown(0.0, RO) == 0.0


def test_scalar_and_array_agree_bitwise(rng):
    s = rng.uniform(10, 2000, 50)
    arr = neuber_shakedown(s, RO)
    assert all(neuber_shakedown(float(x), RO) == y for x, y in zip(s, arr))


@pytest.mark.parametrize("fn", [ro_strain, neuber_shakedown])
def test_negative_stress_rejected(fn):
    with pytest.raises(DomainError):
        fn(-1.0, RO)


def test_cmb_requires_positive_life():
    with pytest.raises(DomainError):
        cmb_strain(0.0, CMB, 200e3)


# -- lifing chain -------------------------------------------------------------------
def test_ndet_chain_against_independent_composition(material):
    for s_el in (150.0, 400.0, 800.0, 1500.0):
        sp = neuber_oracle(s_el, material.ro)
        eps = sp / material.E + (sp / material.ro.K) ** (1 / material.ro.n_prime)
        N = brentq(lambda n: cmb_strain(n, material.cmb, material.E) - eps, 0.5, 1e13, xtol=1e-12, rtol=1e-15)
        res = ndet_from_elastic_stress(s_el, material)
        assert res.cycles == pytest.approx(N, rel=1e-9)
        assert not res.runout


def test_ndet_monotone_decreasing(material):
    s = np.linspace(100, 2000, 40)
    N = ndet_from_elastic_stress(s, material).cycles
    assert np.all(np.diff(N) < 0)


def test_runout_cap(material):
    res = ndet_from_elastic_stress(1.0, material)
    assert res.cycles == material.N_max and res.runout
    lr = life_from_strain(np.array([0.0, 1e-2]), material)
    assert lr.runout.tolist() == [True, False]


def test_ndet_derivative_matches_fd(material):
    s = np.array([200.0, 600.0, 1200.0])
    N, dN, runout = ndet_derivative(s, material)
    h = 1e-4 * s
    fd = (ndet_from_elastic_stress(s + h, material).cycles - ndet_from_elastic_stress(s - h, material).cycles) / (2 * h)
    np.testing.assert_allclose(dN, fd, rtol=1e-6)
    assert not runout.any()


def test_material_rejects_bad_cap():
    with pytest.raises(DomainError):
        Material(ElasticParams.from_young_poisson(1.0, 0.3), RO, CMB, N_max=0.1)


# -- compiled and numpy kernels ------------------------------------------------------
@pytest.mark.parametrize("name", sorted(available()))
def test_kernels_each_backend(name, rng):
    k = available()[name]
    s = rng.uniform(1.0, 3000.0, 200)
    out, its = k.neuber_solve(s, RO.E, RO.K, RO.n_prime, 1e-12, 200)
    assert np.all(its >= 0)
    assert np.max(np.abs(neuber_residual(s, out, RO))) <= 1e-12
    eps = ro_strain(out, RO)
    sig, _ = k.ro_inverse_solve(eps, RO.E, RO.K, RO.n_prime, 1e-12, 200)
    np.testing.assert_allclose(sig, out, rtol=1e-10)
    N = rng.uniform(1.0, 1e8, 200)
    e = cmb_strain(N, CMB, RO.E)
    back, _ = k.cmb_inverse_solve(e, CMB.sigma_f_prime, CMB.eps_f_prime, CMB.b, CMB.c, RO.E, 1e-12, 200)
    np.testing.assert_allclose(back, N, rtol=1e-10)


def test_backends_agree(rng):
    ks = available()
    if len(ks) < 2:
        pytest.skip("compiled kernels not built")
    s = rng.uniform(1.0, 3000.0, 500)
    a, _ = ks["numpy"].neuber_solve(s, RO.E, RO.K, RO.n_prime, 1e-12, 200)
    b, _ = ks["cython"].neuber_solve(s, RO.E, RO.K, RO.n_prime, 1e-12, 200)
    np.testing.assert_allclose(a, b, rtol=1e-12)
