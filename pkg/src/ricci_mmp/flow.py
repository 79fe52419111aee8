"""Parabolic Monge-Ampere flows on the periodic local model.

Unnormalized:  d phi/dt = log((g_t + half_lap(phi)) / F),  g_t = g0 + t chi
Normalized:    d phi/dt = log((g_t + half_lap(phi)) / F) - phi,
               g_t = exp(-t) g0 + (1 - exp(-t)) chi

The perturbation family replaces g_t by (1 - delta) g0-part + s and F by
smooth * (r + zeros) / (w + poles).  Time stepping is implicit Euler, each
step solved by damped Newton; the Newton system is multiplied through by the
metric density G so that it is symmetric positive definite.

Several flows can be advanced in lockstep (``run_ensemble``) so that
comparison checks see identical time stamps.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .density import DensitySpec, PerturbationParams, build_density, smooth_part
from .elliptic import solve_linear_ma, solve_semilinear_ma
from .grid import LinearSolveFailed, PeriodicGrid

UNNORMALIZED = "unnormalized"
NORMALIZED = "normalized"
EPS = float(np.finfo(float).eps)

CSV_COLUMNS = ("t", "volume_ratio_min", "volume_ratio_max", "class_mass", "phi_inf",
               "phi_dot_inf", "scal_inf", "fixed_point_gap")


class StepRejected(RuntimeError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class MinStepUnderflow(RuntimeError):
    def __init__(self, message: str, diagnostic: dict):
        super().__init__(message)
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class FlowConfig:
    grid: PeriodicGrid
    g0: DensitySpec = DensitySpec()
    bigF: DensitySpec = DensitySpec()
    mode: str = UNNORMALIZED
    # "from_f": chi = half_lap(log smooth part of F); "prescribed": use ``chi``
    chi_mode: str = "from_f"
    chi: DensitySpec | None = None
    t_end: float = 1.0
    perturbation: PerturbationParams = PerturbationParams()
    dt0: float = 1e-3
    dt_min: float = 1e-8
    dt_max: float = 0.05
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    sample_times: tuple[float, ...] = ()
    extra_degeneracy: tuple[tuple[float, float], ...] = ()
    exclusion_radius: float = 0.1

    def __post_init__(self):
        if self.mode not in (UNNORMALIZED, NORMALIZED):
            raise ValueError("unknown mode %r" % self.mode)
        if self.chi_mode not in ("from_f", "prescribed"):
            raise ValueError("unknown chi_mode %r" % self.chi_mode)
        if self.chi_mode == "prescribed" and self.chi is None:
            raise ValueError("prescribed chi_mode needs a chi density")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @property
    def degeneracy_points(self) -> tuple[tuple[float, float], ...]:
        return self.g0.degeneracy_points + self.bigF.degeneracy_points + tuple(self.extra_degeneracy)

    @property
    def stepper_tolerance(self) -> float:
        return self.newton_tol


class FlowData:
    """Grid fields derived once from a FlowConfig."""

    def __init__(self, config: FlowConfig):
        self.config = config
        grid = config.grid
        p = config.perturbation
        self.g0 = (1.0 - p.delta) * build_density(grid, config.g0)
        self.F = build_density(grid, config.bigF, w=p.w, r=p.r)
        self.logF = np.log(self.F)
        if config.chi_mode == "from_f":
            # degeneracy factors would contribute point masses; only the smooth part enters
            self.chi = grid.half_lap(np.log(smooth_part(grid, config.bigF)))
        else:
            self.chi = smooth_part(grid, config.chi)
        self.s = p.s
        self.region = np.ones((grid.n, grid.n), dtype=bool)
        for pt in config.degeneracy_points:
            self.region &= grid.torus_distance(*pt) >= config.exclusion_radius
        self.mass_g0 = grid.integrate(self.g0)
        self.mass_chi = grid.integrate(self.chi)

    def g_t(self, t: float) -> np.ndarray:
        if self.config.mode == UNNORMALIZED:
            return self.g0 + t * self.chi + self.s
        e = math.exp(-t)
        return e * self.g0 + (1.0 - e) * self.chi + self.s

    def expected_mass(self, t: float) -> float:
        if self.config.mode == UNNORMALIZED:
            return self.mass_g0 + t * self.mass_chi + self.s
        e = math.exp(-t)
        return e * self.mass_g0 + (1.0 - e) * self.mass_chi + self.s


@dataclass
class MonitorLog:
    series: dict[str, list[float]] = field(default_factory=dict)

    def append(self, **values: float) -> None:
        ts = self.series.get("t")
        if ts and values["t"] < ts[-1]:
            raise ValueError("monitor time stamps must be monotone")
        for k, v in values.items():
            self.series.setdefault(k, []).append(float(v))

    def __getitem__(self, key: str) -> np.ndarray:
        return np.asarray(self.series[key])

    def __len__(self) -> int:
        return len(self.series.get("t", ()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for k in range(len(self)):
            w.writerow([repr(self.series[c][k]) for c in CSV_COLUMNS])
        return buf.getvalue()


@dataclass
class FlowState:
    t: float
    phi: np.ndarray
    phi_dot: np.ndarray
    monitors: MonitorLog = field(default_factory=MonitorLog)
    snapshots: dict[float, np.ndarray] = field(default_factory=dict)


def metric_density(data: FlowData, phi: np.ndarray, t: float) -> np.ndarray:
    return data.g_t(t) + data.config.grid.half_lap(phi)


def rhs(data: FlowData, phi: np.ndarray, t: float) -> np.ndarray:
    G = metric_density(data, phi, t)
    out = np.log(G) - data.logF
    if data.config.mode == NORMALIZED:
        out -= phi
    return out


def _residual(data: FlowData, u, phi, g1, dt):
    lap_half = data.config.grid.half_lap(u)
    G = g1 + lap_half
    if not np.all(G > 0):
        return None, G, 0.0
    N = u - phi - dt * (np.log(G) - data.logF)
    if data.config.mode == NORMALIZED:
        N += dt * u
    # rounding error of N: the Laplacian amplifies eps*|u| by its top eigenvalue
    lam_max = 0.5 * data.config.grid.spectral_radius
    umax = float(np.max(np.abs(u)))
    floor = 16 * EPS * float(np.max(np.abs(u) + np.abs(phi)
                                    + dt * (np.abs(g1) + np.abs(lap_half) + lam_max * umax) / G))
    return N, G, floor


def implicit_step(data: FlowData, phi: np.ndarray, phi_dot: np.ndarray, t: float, dt: float):
    """One implicit Euler step; returns (phi_new, phi_dot_new) or raises StepRejected."""
    cfg = data.config
    grid = cfg.grid
    t1 = t + dt
    g1 = data.g_t(t1)
    u = None
    for guess in (phi + dt * phi_dot, phi):
        N, G, floor = _residual(data, guess, phi, g1, dt)
        if N is not None:
            u = guess
            break
    if u is None:
        raise StepRejected("no positive initial guess")
    norm = float(np.max(np.abs(N)))
    shift = 1.0 + dt if cfg.mode == NORMALIZED else 1.0
    for _ in range(cfg.newton_max_iter):
        if norm <= max(cfg.newton_tol, floor):
            return u, (u - phi) / dt
        try:
            delta = grid.solve_shifted(shift * G, dt, -G * N, rtol=1e-9)
        except LinearSolveFailed as exc:
            raise StepRejected(str(exc))
        lam = 1.0
        for _ in range(31):
            trial = u + lam * delta
            Nt, Gt, ft = _residual(data, trial, phi, g1, dt)
            if Nt is not None:
                tnorm = float(np.max(np.abs(Nt)))
                if tnorm < norm:
                    break
            lam *= 0.5
        else:
            raise StepRejected("Newton damping exhausted at residual %.3e" % norm)
        u, N, G, floor, norm = trial, Nt, Gt, ft, tnorm
    if norm <= max(cfg.newton_tol, floor):
        return u, (u - phi) / dt
    raise StepRejected("Newton did not converge (residual %.3e)" % norm)


def step(state: FlowState, config: FlowConfig, dt: float, data: FlowData | None = None) -> FlowState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    data = data or FlowData(config)
    phi, phi_dot = implicit_step(data, state.phi, state.phi_dot, state.t, dt)
    return FlowState(state.t + dt, phi, phi_dot, state.monitors, state.snapshots)


def scalar_curvature(data: FlowData, phi: np.ndarray, t: float) -> np.ndarray:
    """-(lap log G)/G, twice the Gauss curvature of the metric G |dz|^2."""
    G = metric_density(data, phi, t)
    return -data.config.grid.lap(np.log(G)) / G


def scalar_curvature_monitor(state: FlowState, config: FlowConfig, data: FlowData | None = None) -> float:
    """sup of |scalar curvature| at distance >= exclusion_radius from degeneracy points."""
    data = data or FlowData(config)
    S = scalar_curvature(data, state.phi, state.t)
    return float(np.max(np.abs(S[data.region])))


def _record(state: FlowState, data: FlowData, fixed_point: np.ndarray | None) -> None:
    grid = data.config.grid
    lap_half = grid.half_lap(state.phi)
    G = data.g_t(state.t) + lap_half
    ratio = G / data.F
    S = -grid.lap(np.log(G)) / G
    state.monitors.append(
        t=state.t,
        volume_ratio_min=ratio.min(),
        volume_ratio_max=ratio.max(),
        class_mass=grid.integrate(G),
        expected_mass=data.expected_mass(state.t),
        phi_inf=np.max(np.abs(state.phi)),
        phi_dot_inf=np.max(np.abs(state.phi_dot)),
        phi_dot_max=state.phi_dot.max(),
        phi_dot_l1=grid.integrate(np.abs(state.phi_dot)),
        half_lap_sup=np.max(np.abs(lap_half)),
        scal_inf=np.max(np.abs(S[data.region])),
        fixed_point_gap=(np.max(np.abs(state.phi - fixed_point)) if fixed_point is not None else math.nan),
    )


def fixed_point_for(config: FlowConfig, data: FlowData | None = None) -> np.ndarray | None:
    """Kahler-Einstein limit of the normalized flow, when chi has positive mass."""
    if config.mode != NORMALIZED:
        return None
    data = data or FlowData(config)
    if not np.all(data.chi + data.s > 0):
        return None
    return solve_semilinear_ma(config.grid, data.chi + data.s, data.F).phi


def run_ensemble(configs: Sequence[FlowConfig], phi0s: Sequence[np.ndarray], t_end: float | None = None,
                 fixed_points: Sequence[np.ndarray | None] | None = None,
                 on_step: Callable[[list[FlowState]], None] | None = None) -> list[FlowState]:
    """Advance several flows with a shared adaptive time step.

    All members share the grid and stepper settings of ``configs[0]``; a step
    is rejected for every member if any member rejects it.
    """
    lead = configs[0]
    t_end = lead.t_end if t_end is None else t_end
    datas = [FlowData(c) for c in configs]
    if fixed_points is None:
        fixed_points = [None] * len(configs)
    states = []
    for data, phi0, fp in zip(datas, phi0s, fixed_points):
        phi0 = np.array(phi0, dtype=float)
        G0 = metric_density(data, phi0, 0.0)
        if not np.all(G0 > 0):
            raise ValueError("initial metric density is not positive (min %.3e)" % G0.min())
        st = FlowState(0.0, phi0, rhs(data, phi0, 0.0))
        _record(st, data, fp)
        states.append(st)
    targets = sorted({float(s) for s in lead.sample_times if 0 < s < t_end} | {t_end})
    for st in states:
        if 0.0 in lead.sample_times:
            st.snapshots[0.0] = st.phi.copy()
    dt = lead.dt0
    streak = 0
    t = 0.0
    k = 0
    last_reason = ""
    while k < len(targets):
        target = targets[k]
        h = min(dt, target - t)
        landing = h == target - t
        try:
            new = [implicit_step(d, s.phi, s.phi_dot, t, h) for d, s in zip(datas, states)]
        except StepRejected as exc:
            last_reason = exc.reason
            dt *= 0.5
            streak = 0
            if dt < lead.dt_min:
                diag = {"t": t, "dt": dt, "reason": last_reason,
                        "last_monitors": {key: vals[-1] for key, vals in states[0].monitors.series.items()}}
                raise MinStepUnderflow("time step fell below %.1e at t=%.6g: %s" % (lead.dt_min, t, last_reason), diag)
            continue
        t = target if landing else t + h
        for st, d, fp, (phi, phi_dot) in zip(states, datas, fixed_points, new):
            st.t, st.phi, st.phi_dot = t, phi, phi_dot
            _record(st, d, fp)
        if landing:
            for st in states:
                st.snapshots[target] = st.phi.copy()
            k += 1
        if on_step is not None:
            on_step(states)
        streak += 1
        if streak >= 5:
            dt = min(dt * 1.2, lead.dt_max)
            streak = 0
    return states


def run_flow(config: FlowConfig, phi0: np.ndarray, fixed_point: np.ndarray | None = None) -> FlowState:
    if fixed_point is None:
        fixed_point = fixed_point_for(config)
    return run_ensemble([config], [phi0], fixed_points=[fixed_point])[0]


def rough_initial_potential(grid: PeriodicGrid, g0, target) -> np.ndarray:
    """Bounded potential whose Monge-Ampere density is (a multiple of) ``target``."""
    g0 = build_density(grid, g0) if isinstance(g0, DensitySpec) else np.asarray(g0, dtype=float)
    F = build_density(grid, target) if isinstance(target, DensitySpec) else np.asarray(target, dtype=float)
    return solve_linear_ma(grid, g0, F).phi


def lowpass(grid: PeriodicGrid, f: np.ndarray, j: int) -> np.ndarray:
    fh = np.fft.rfft2(f)
    n = grid.n
    kx = np.abs(np.fft.fftfreq(n, d=1.0 / n))[:, None]
    ky = np.fft.rfftfreq(n, d=1.0 / n)[None, :]
    fh[(kx > j) | (ky > j)] = 0.0
    return np.fft.irfft2(fh, s=f.shape)


def smooth_approximation_sequence(grid: PeriodicGrid, g0, target, j: int) -> np.ndarray:
    """Potential for the target density low-passed at mode j, clipped and renormalized."""
    if j < 1:
        raise ValueError("j must be >= 1")
    F = build_density(grid, target) if isinstance(target, DensitySpec) else np.asarray(target, dtype=float)
    Fj = lowpass(grid, F, j)
    Fj = np.maximum(Fj, 1e-3 * grid.mean(F))
    Fj *= grid.mean(F) / grid.mean(Fj)
    return rough_initial_potential(grid, g0, Fj)


def with_grid(config: FlowConfig, n: int) -> FlowConfig:
    return replace(config, grid=PeriodicGrid(n, config.grid.laplacian))
