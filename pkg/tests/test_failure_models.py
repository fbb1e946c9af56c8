import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lcfrisk.errors import DomainError
from lcfrisk.failure_models import (
    Gompertz,
    GompertzModelParams,
    Weibull,
    cumulative_hazard,
    evaluate,
    gompertz_J,
    gompertz_J_sum,
    hazard,
    ndet_component,
    pof,
    proportional_hazard_J,
    survival,
    weibull_eta,
)
from lcfrisk.fem import load_mesh, surface_quadrature
from lcfrisk.fields import ScalarSurfaceField


def field_on(mesh, fn, n=None):
    sq = surface_quadrature(mesh, n)
    return ScalarSurfaceField(sq.face_ids, fn(sq.points), sq.weights, sq.points)


def smooth_life(p):
    return 1e4 * np.exp(0.2 * p[..., 0] + 0.1 * p[..., 1])


# -- distributions -------------------------------------------------------------------
@settings(max_examples=50, deadline=None)
@given(st.floats(10.0, 1e6), st.floats(1.0, 8.0), st.floats(0.0, 1e6))
def test_weibull_closed_forms(eta, m, t):
    d = Weibull(eta, m)
    H = (t / eta) ** m
    assert cumulative_hazard(d, t) == pytest.approx(H, rel=1e-13, abs=1e-300)
    assert survival(d, t) == pytest.approx(math.exp(-H), rel=1e-12, abs=1e-300)
    assert pof(d, t) + survival(d, t) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-8, 1.0), st.floats(1e-6, 1e-2), st.floats(0.0, 2e3))
def test_gompertz_closed_forms(J, a, t):
    d = Gompertz(J, a)
    assert cumulative_hazard(d, t) == pytest.approx(J * math.expm1(a * t), rel=1e-12, abs=1e-300)
    assert hazard(d, t) == pytest.approx(J * a * math.exp(a * t), rel=1e-13)


@pytest.mark.parametrize("d", [Weibull(2000.0, 2.4), Weibull(50.0, 1.0), Gompertz(1e-3, 2e-3)])
def test_hazard_is_derivative_of_cumulative(d):
    t = np.array([10.0, 100.0, 700.0])
    h = 1e-5 * t
    fd = (cumulative_hazard(d, t + h) - cumulative_hazard(d, t - h)) / (2 * h)
    np.testing.assert_allclose(hazard(d, t), fd, rtol=1e-7)


def test_pof_small_time_no_cancellation():
    # expm1 path: F ~ H for tiny H
    d = Weibull(1e6, 2.0)
    assert pof(d, 1.0) == pytest.approx(1e-12, rel=1e-10)


def test_pof_underflow_flag():
    rec = evaluate(Weibull(1e6, 60.0), [1.0, 1e6])
    assert rec["pof"][0] == 0.0 and rec["pof_underflow"] == [True, False]


@pytest.mark.parametrize("bad", [dict(eta=0.0, m_bar=2.0), dict(eta=1.0, m_bar=0.5), dict(eta=math.inf, m_bar=2.0)])
def test_weibull_rejects(bad):
    with pytest.raises(DomainError):
        Weibull(**bad)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        pof(Weibull(1.0, 1.0), -1.0)


def test_evaluate_record_round_trips():
    rec = evaluate(Gompertz(1e-3, 2e-3), [0.0, 100.0, 1000.0])
    assert json.loads(json.dumps(rec)) == rec
    assert rec["model"] == "gompertz" and rec["pof"][0] == 0.0


# -- surface aggregation ---------------------------------------------------------------
def test_weibull_eta_closed_form_on_bar(data_dir):
    # N = N0 (1 + x/4)^2 on the 4x1x1 bar, m = 2: integral known exactly
    mesh = load_mesh(data_dir / "bar_hex8.msh")
    f = field_on(mesh, lambda p: 1e4 * (1 + 0.25 * p[..., 0]) ** 2, n=8)
    exact = 1e-8 * (1 + 1 / 16 + 4 * 7 / 6)
    assert proportional_hazard_J(f, 2.0) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("name", ["bar_hex8", "notched_bar_hex8", "notched_bar_tet4", "ball_tet4"])
def test_aggregation_against_refined_quadrature(data_dir, name):
    mesh = load_mesh(data_dir / f"{name}.msh")
    f, ref = field_on(mesh, smooth_life), field_on(mesh, smooth_life, n=10)
    assert weibull_eta(f, 3.0) == pytest.approx(weibull_eta(ref, 3.0), rel=1e-8)
    p = GompertzModelParams(1e-3, 1e-4)
    assert gompertz_J(f, p) == pytest.approx(gompertz_J(ref, p), rel=1e-8)


def test_constant_field_on_ball_uses_facet_area(data_dir):
    manifest = json.loads((data_dir / "manifest.json").read_text())
    mesh = load_mesh(data_dir / "ball_tet4.msh")
    f = field_on(mesh, lambda p: np.full(p.shape[:-1], 5e3))
    A = manifest["ball_tet4"]["facet_area"]
    assert weibull_eta(f, 2.5) == pytest.approx(5e3 * A ** (-1 / 2.5), rel=1e-12)


def test_patch_additivity(data_dir):
    mesh = load_mesh(data_dir / "notched_bar_hex8.msh")
    f = field_on(mesh, smooth_life)
    mask = np.isin(mesh.boundary[2][f.face_ids], ["notch", "top"])
    J = proportional_hazard_J(f, 2.0)
    parts = proportional_hazard_J(f.subset(mask), 2.0) + proportional_hazard_J(f.subset(~mask), 2.0)
    assert parts == pytest.approx(J, rel=1e-12)
    p = GompertzModelParams(1e-3, 1e-4)
    g = gompertz_J_sum(f.subset(mask), p) + gompertz_J_sum(f.subset(~mask), p)
    assert g == pytest.approx(gompertz_J_sum(f, p), rel=1e-12)


def test_gompertz_log_space_matches_direct_sum(data_dir):
    mesh = load_mesh(data_dir / "unit_cube_tet4.msh")
    f = field_on(mesh, smooth_life)
    p = GompertzModelParams(2.0, 1e-3)
    assert gompertz_J(f, p) == pytest.approx(gompertz_J_sum(f, p), rel=1e-12)


def test_gompertz_underflow_is_zero_not_nan(data_dir):
    mesh = load_mesh(data_dir / "unit_cube_tet4.msh")
    f = field_on(mesh, lambda p: np.full(p.shape[:-1], 1e9))
    assert gompertz_J(f, GompertzModelParams(1.0, 1.0)) == 0.0


def test_face_order_does_not_matter(data_dir):
    mesh = load_mesh(data_dir / "notched_bar_hex8.msh")
    f = field_on(mesh, smooth_life)
    perm = np.random.default_rng(3).permutation(len(f.face_ids))
    g = ScalarSurfaceField(f.face_ids[perm], f.values[perm], f.weights[perm])
    assert proportional_hazard_J(g, 2.0) == proportional_hazard_J(f, 2.0)


def test_proportional_hazard_orders_designs(data_dir):
    # uniformly longer lives give a smaller J for every m
    mesh = load_mesh(data_dir / "notched_bar_hex8.msh")
    f = field_on(mesh, smooth_life)
    better = f.with_values(1.1 * f.values)
    for m in (1.0, 2.0, 5.0):
        assert proportional_hazard_J(better, m) < proportional_hazard_J(f, m)


def test_nonpositive_life_rejected(data_dir):
    mesh = load_mesh(data_dir / "unit_cube_tet4.msh")
    f = field_on(mesh, lambda p: np.zeros(p.shape[:-1]))
    with pytest.raises(DomainError, match="nonpositive"):
        proportional_hazard_J(f, 2.0)


def test_ndet_component_is_min(data_dir):
    mesh = load_mesh(data_dir / "unit_cube_tet4.msh")
    f = field_on(mesh, smooth_life)
    assert ndet_component(f) == f.values.min()
