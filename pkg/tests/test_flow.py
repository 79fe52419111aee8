import math

import numpy as np
import pytest

from ricci_mmp import flow
from ricci_mmp.density import DensitySpec, Mode, PerturbationParams
from ricci_mmp.flow import FlowConfig, FlowData, FlowState
from ricci_mmp.grid import PeriodicGrid


def euler_decay(ts):
    """Implicit Euler propagator of y' = -y along the accepted time stamps."""
    return np.cumprod(np.concatenate([[1.0], 1.0 / (1.0 + np.diff(ts))]))


def test_constant_density_ratio_grows_linearly():
    cfg = FlowConfig(PeriodicGrid(16), bigF=DensitySpec(constant=0.5), t_end=1.0)
    st = flow.run_flow(cfg, np.zeros((16, 16)))
    assert np.allclose(st.phi, math.log(2), atol=1e-12)
    log = st.monitors
    assert np.allclose(log["phi_inf"], log["t"] * math.log(2), atol=1e-12)


def test_single_step_matches_closed_form():
    cfg = FlowConfig(PeriodicGrid(16), bigF=DensitySpec(constant=0.5))
    data = FlowData(cfg)
    phi0 = np.zeros((16, 16))
    st = flow.step(FlowState(0.0, phi0, flow.rhs(data, phi0, 0.0)), cfg, 0.1, data)
    assert st.t == pytest.approx(0.1) and np.allclose(st.phi, 0.1 * math.log(2), atol=1e-13)
    with pytest.raises(ValueError):
        flow.step(st, cfg, 0.0, data)


def test_normalized_constant_decays():
    chi = DensitySpec(constant=1.0)
    cfg = FlowConfig(PeriodicGrid(16), mode=flow.NORMALIZED, chi_mode="prescribed", chi=chi, t_end=3.0)
    st = flow.run_flow(cfg, np.full((16, 16), 0.7))
    log = st.monitors
    assert np.allclose(log["phi_inf"], 0.7 * euler_decay(log["t"]), atol=1e-12)
    # first order accurate against the exact ODE solution
    assert abs(log["phi_inf"][-1] - 0.7 * math.exp(-3.0)) < 0.7 * 0.05


def test_normalized_shift_gap():
    cfg = FlowConfig(PeriodicGrid(32), bigF=DensitySpec(modes=(Mode(0.3, 1, 2),)),
                     g0=DensitySpec(modes=(Mode(0.2, 0, 1),)), mode=flow.NORMALIZED, t_end=2.0)
    a, b = flow.run_ensemble([cfg, cfg], [np.zeros((32, 32)), np.full((32, 32), 0.25)])
    ts = np.array(a.monitors["t"])
    assert np.allclose(b.phi - a.phi, 0.25 * euler_decay(ts)[-1], atol=1e-11)


def test_fixed_point_reached():
    cfg = FlowConfig(PeriodicGrid(32), bigF=DensitySpec(modes=(Mode(0.3, 1, 0),)), mode=flow.NORMALIZED,
                     chi_mode="prescribed", chi=DensitySpec(constant=1.0, modes=(Mode(0.2, 0, 1),)),
                     t_end=20.0, dt_max=0.5)
    st = flow.run_flow(cfg, np.zeros((32, 32)))
    assert st.monitors["fixed_point_gap"][-1] < 1e-6


def test_class_mass_is_linear():
    cfg = FlowConfig(PeriodicGrid(64), bigF=DensitySpec(zeros=(((0.3, 0.3), 1.0),), poles=(((0.7, 0.6), 0.5),)),
                     perturbation=PerturbationParams(s=0.1, w=0.01, r=0.01, delta=0.05), t_end=0.5)
    st = flow.run_flow(cfg, np.zeros((64, 64)))
    log = st.monitors
    assert np.max(np.abs(log["class_mass"] - log["expected_mass"])) < 1e-12
    data = FlowData(cfg)
    assert log["expected_mass"][0] == pytest.approx(0.95 + 0.1)
    assert data.mass_chi == pytest.approx(0.0, abs=1e-15)


def test_flat_scalar_curvature_vanishes():
    cfg = FlowConfig(PeriodicGrid(32), t_end=0.2)
    st = flow.run_flow(cfg, np.zeros((32, 32)))
    assert flow.scalar_curvature_monitor(st, cfg) == 0.0
    assert np.all(st.monitors["scal_inf"] == 0.0)


def test_round_bump_scalar_curvature():
    # G = c exp(-2u) has scalar curvature 2 lap(u) / G; c makes G - 1 mean free
    g = PeriodicGrid(64)
    cfg = FlowConfig(g, t_end=0.1)
    x, y = g.coords
    u = 0.1 * np.cos(2 * np.pi * x)
    G = np.exp(-2 * u)
    G /= G.mean()
    phi = g.inverse_half_lap(G - 1)
    S = flow.scalar_curvature(FlowData(cfg), phi, 0.0)
    assert np.allclose(S, 2 * g.lap(u) / G, atol=1e-9)


def test_rough_potential_and_smooth_approximations():
    g = PeriodicGrid(128)
    target = DensitySpec(poles=(((1 / 3, 1 / 3), 0.6),))
    rough = flow.rough_initial_potential(g, DensitySpec(), target)
    assert np.all(np.isfinite(rough))
    gaps = [np.max(np.abs(flow.smooth_approximation_sequence(g, DensitySpec(), target, j) - rough))
            for j in (4, 8, 16, 32)]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    with pytest.raises(ValueError):
        flow.smooth_approximation_sequence(g, DensitySpec(), target, 0)


def test_lowpass_keeps_low_modes():
    g = PeriodicGrid(32)
    x, y = g.coords
    f = np.cos(2 * np.pi * 3 * x) + np.sin(2 * np.pi * 9 * y)
    assert np.allclose(flow.lowpass(g, f, 4), np.cos(2 * np.pi * 3 * x), atol=1e-13)


def test_min_step_underflow_diagnostic():
    # chi = -1 makes g_t = 1 - t degenerate at t = 1
    cfg = FlowConfig(PeriodicGrid(16), chi_mode="prescribed", chi=DensitySpec(constant=-1.0, signed=True),
                     t_end=2.0, dt_min=1e-6)
    with pytest.raises(flow.MinStepUnderflow) as info:
        flow.run_flow(cfg, np.zeros((16, 16)))
    diag = info.value.diagnostic
    assert 0.99 < diag["t"] < 1.0 and diag["dt"] < 1e-6
    assert set(flow.CSV_COLUMNS) <= set(diag["last_monitors"])


def test_initial_density_must_be_positive():
    g = PeriodicGrid(16)
    x, _ = g.coords
    with pytest.raises(ValueError):
        flow.run_flow(FlowConfig(g), -2 * np.cos(2 * np.pi * x) / np.pi ** 2)


def test_config_validation():
    g = PeriodicGrid(16)
    with pytest.raises(ValueError):
        FlowConfig(g, mode="other")
    with pytest.raises(ValueError):
        FlowConfig(g, chi_mode="prescribed")
    with pytest.raises(ValueError):
        FlowConfig(g, t_end=0.0)
    assert flow.with_grid(FlowConfig(g), 64).grid.n == 64


def test_monitor_csv_and_snapshots():
    cfg = FlowConfig(PeriodicGrid(16), bigF=DensitySpec(constant=0.5), t_end=0.3, sample_times=(0.0, 0.1, 0.2))
    st = flow.run_flow(cfg, np.zeros((16, 16)))
    rows = st.monitors.to_csv().splitlines()
    assert rows[0] == ",".join(flow.CSV_COLUMNS) and len(rows) == len(st.monitors) + 1
    assert sorted(st.snapshots) == [0.0, 0.1, 0.2, 0.3]
    assert np.allclose(st.snapshots[0.2], 0.2 * math.log(2), atol=1e-12)
    with pytest.raises(ValueError):
        st.monitors.append(t=0.0)
