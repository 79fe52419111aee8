import math

import numpy as np
import pytest

from ricci_mmp import sphere
from ricci_mmp.sphere import ConformalState, LatitudeGrid


def test_grid_validation_and_round_area():
    with pytest.raises(ValueError):
        LatitudeGrid(16)
    g = LatitudeGrid(64)
    assert g.integrate(np.ones(64)) == pytest.approx(4 * math.pi, rel=1e-15)
    assert g.face_sin[0] == 0.0 and g.face_sin[-1] == 0.0


def test_laplacian_of_first_harmonic():
    # L cos(theta) = -2 cos(theta); second order in the latitude spacing
    errs = []
    for m in (64, 128):
        g = LatitudeGrid(m)
        f = np.cos(g.theta)
        errs.append(np.max(np.abs(g.laplacian(f) + 2 * f)))
    assert errs[0] < 1e-2 and 3.5 < errs[0] / errs[1] < 4.5


def test_laplacian_is_mean_free():
    g = LatitudeGrid(96)
    f = np.random.default_rng(0).normal(size=96)
    assert abs(g.integrate(g.laplacian(f))) < 1e-12
    assert np.max(np.abs(g.laplacian(np.full(96, 3.0)))) < 3 * 16 * np.finfo(float).eps * g.spectral_radius


def test_banded_matches_dense_operator():
    g = LatitudeGrid(32)
    scale = 1 + np.random.default_rng(1).random(32)
    dense = np.column_stack([g.laplacian(np.eye(32)[:, j]) for j in range(32)])
    want = 0.7 * np.eye(32) - 0.3 * dense @ np.diag(scale)
    ab = g.banded(scale, 0.3, shift=0.7)
    got = np.diag(ab[1]) + np.diag(ab[0, 1:], 1) + np.diag(ab[2, :-1], -1)
    assert np.allclose(got, want, atol=1e-12)


@pytest.mark.parametrize("c", [1.0, 2.0])
def test_round_shrinker(c):
    g = LatitudeGrid(64)
    state, log = sphere.run_sphere(g, np.full(64, c), t_end=0.5 * c)
    assert np.allclose(state.v, 0.5 * c, atol=1e-13)
    assert np.allclose(log.column("A"), 4 * math.pi * (c - log.column("t")), rtol=1e-13)
    K, gb = sphere.gauss_curvature(g, state)
    assert np.allclose(K, 2 / c) and gb < 1e-14


def test_single_steps():
    g = LatitudeGrid(32)
    st = sphere.step_unnormalized(g, ConformalState(np.full(32, 2.0)), 0.25)
    assert np.allclose(st.v, 1.75, atol=1e-14) and st.t == 0.25
    # v = T0 is a fixed point of the normalized flow
    st = sphere.step_normalized_fano(g, ConformalState(np.full(32, 1.5)), 1.5, 0.3)
    assert np.allclose(st.v, 1.5, atol=1e-14)
    with pytest.raises(ValueError):
        sphere.step_unnormalized(g, st, 0.0)
    with pytest.raises(ValueError):
        sphere.step_normalized_fano(g, st, 0.0, 0.1)


def test_gauss_bonnet_for_bumpy_profile():
    g = LatitudeGrid(128)
    v = sphere.profile_from_cosines(g, [1.0, 0.3, 0.2, -0.1])
    K, gb = sphere.gauss_curvature(g, ConformalState(v))
    assert gb < 1e-13
    with pytest.raises(ValueError):
        sphere.gauss_curvature(g, ConformalState(v - 2))


def test_profile_from_cosines():
    g = LatitudeGrid(32)
    assert np.allclose(sphere.profile_from_cosines(g, [1.0, 0.5]), 1 + 0.5 * np.cos(g.theta))


def test_extinction_time_from_area():
    g = LatitudeGrid(128)
    v0 = sphere.profile_from_cosines(g, [1.0, 0.4, 0.2])
    rep = sphere.extinction_experiment(g, v0)
    assert rep.predicted_T == pytest.approx(rep.A0 / (4 * math.pi))
    assert rep.relative_error < 0.02 and rep.area_law_error < 1e-10
    assert rep.stop_time <= rep.predicted_T and rep.passed()


def test_normalized_flow_rounds_out():
    # reflection-symmetric data: even cosine modes only
    g = LatitudeGrid(64)
    v0 = sphere.profile_from_cosines(g, [1.0, 0.0, 0.3, 0.0, 0.1])
    rep = sphere.normalized_fano_experiment(g, v0, t_end=20.0)
    # A' = A / T0 - 4 pi has an unstable fixed point, so roundoff grows like exp(t / T0)
    assert rep.passed() and rep.area_drift < 1e-16 * math.exp(20.0 / rep.T0) * 100


def test_first_harmonic_is_neutral():
    # at v = T0 the cos(theta) mode linearizes to df/dt = (L/2 + 1) f / T0 = 0: a Moebius
    # motion, round as a geometry but not constant as a conformal factor
    g = LatitudeGrid(64)
    rep = sphere.normalized_fano_experiment(g, sphere.profile_from_cosines(g, [1.0, 1e-3]), t_end=10.0)
    assert 0.5e-3 < rep.final_deviation < 1.5e-3


def test_csv_columns():
    g = LatitudeGrid(32)
    _, log = sphere.run_sphere(g, np.ones(32), t_end=0.1)
    rows = log.to_csv().splitlines()
    assert rows[0] == ",".join(sphere.SPHERE_CSV_COLUMNS) and len(rows) == len(log.rows) + 1
    with pytest.raises(ValueError):
        sphere.run_sphere(g, -np.ones(32), t_end=0.1)
