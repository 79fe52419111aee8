"""Axisymmetric Ricci flow on the 2-sphere in conformal form.

The metric is v * g_round with v = v(theta).  Its Gauss curvature is

    K = (1 - 0.5 * L log v) / v,    L f = (1/sin) d/dtheta (sin df/dtheta),

and the flow d(omega)/dt = -Ric(omega) reads dv/dt = -1 + 0.5 L log v.  With
the convention that a form in [K] integrates to -4 pi, the area drops at the
rate 4 pi and the flow becomes extinct at T0 = A0 / (4 pi).

Latitudes are pole-staggered, theta_k = (k + 1/2) pi / m.  Cell k spans the
faces k pi/m and (k+1) pi/m; quadrature uses the exact cell areas, so the
round sphere has discrete area exactly 4 pi, and L is written in flux form
with zero flux through the poles, so the sum of (L f) dA vanishes identically.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .flow import EPS, MinStepUnderflow, StepRejected

SPHERE_CSV_COLUMNS = ("t", "A", "min_v", "max_v", "max_abs_K", "gauss_bonnet_residual")


class LatitudeGrid:
    def __init__(self, m: int):
        if m < 32:
            raise ValueError("need at least 32 latitudes, got %d" % m)
        self.m = m
        self.dtheta = math.pi / m
        k = np.arange(m)
        self.theta = (k + 0.5) * self.dtheta
        faces = np.arange(m + 1) * self.dtheta
        self.face_sin = np.sin(faces)
        self.face_sin[0] = self.face_sin[-1] = 0.0
        self.area_weights = 2 * np.pi * (np.cos(faces[:-1]) - np.cos(faces[1:]))
        # L = diag(1/w) * S with S symmetric tridiagonal
        c = 2 * np.pi * self.face_sin / self.dtheta
        self._upper = c[1:-1] / self.area_weights[:-1]   # coefficient of f[k+1] in row k
        self._lower = c[1:-1] / self.area_weights[1:]    # coefficient of f[k-1] in row k
        self._diag = -(c[:-1] + c[1:]) / self.area_weights
        self.spectral_radius = float(np.max(np.abs(self._diag)) * 2)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        out = self._diag * f
        out[:-1] += self._upper * f[1:]
        out[1:] += self._lower * f[:-1]
        return out

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.area_weights, f))

    def banded(self, scale: np.ndarray, coef: float, shift: float = 1.0) -> np.ndarray:
        """Banded form of shift*I - coef * L * diag(scale) for solve_banded((1, 1), ...)."""
        ab = np.zeros((3, self.m))
        ab[0, 1:] = -coef * self._upper * scale[1:]
        ab[1] = shift - coef * self._diag * scale
        ab[2, :-1] = -coef * self._lower * scale[:-1]
        return ab


@dataclass
class ConformalState:
    v: np.ndarray
    t: float = 0.0


def profile_from_cosines(grid: LatitudeGrid, coeffs) -> np.ndarray:
    """v(theta) = sum_k coeffs[k] cos(k theta)."""
    v = np.zeros(grid.m)
    for k, a in enumerate(coeffs):
        v += a * np.cos(k * grid.theta)
    return v


def area(grid: LatitudeGrid, v: np.ndarray) -> float:
    return grid.integrate(v)


def gauss_curvature(grid: LatitudeGrid, state: ConformalState) -> tuple[np.ndarray, float]:
    """Gauss curvature per latitude and the relative Gauss-Bonnet residual."""
    v = state.v
    if not np.all(v > 0):
        raise ValueError("conformal factor must be positive")
    K = (1.0 - 0.5 * grid.laplacian(np.log(v))) / v
    total = grid.integrate(K * v)
    return K, abs(total - 4 * np.pi) / (4 * np.pi)


def _implicit_step(grid: LatitudeGrid, v_old: np.ndarray, dt: float, inv_T0: float,
                   tol: float = 1e-12, max_iter: int = 30) -> np.ndarray:
    """Damped Newton on v - v_old - dt (-1 + 0.5 L log v + v / T0) = 0."""

    def residual(v):
        if not np.all(v > 0):
            return None, 0.0
        logv = np.log(v)
        N = v - v_old - dt * (-1.0 + 0.5 * grid.laplacian(logv) + inv_T0 * v)
        floor = 16 * EPS * float(np.max(np.abs(v) + np.abs(v_old)
                                        + dt * (1.0 + grid.spectral_radius * np.max(np.abs(logv)))))
        return N, floor

    v = v_old.copy()
    N, floor = residual(v)
    norm = float(np.max(np.abs(N)))
    for _ in range(max_iter):
        if norm <= max(tol, floor):
            return v
        ab = grid.banded(1.0 / v, 0.5 * dt, shift=1.0 - dt * inv_T0)
        try:
            delta = solve_banded((1, 1), ab, -N)
        except np.linalg.LinAlgError as exc:
            raise StepRejected(str(exc))
        lam = 1.0
        for _ in range(31):
            trial = v + lam * delta
            Nt, ft = residual(trial)
            if Nt is not None and float(np.max(np.abs(Nt))) < norm:
                break
            lam *= 0.5
        else:
            raise StepRejected("Newton damping exhausted at residual %.3e" % norm)
        v, N, floor, norm = trial, Nt, ft, float(np.max(np.abs(Nt)))
    if norm <= max(tol, floor):
        return v
    raise StepRejected("Newton did not converge (residual %.3e)" % norm)


def step_unnormalized(grid: LatitudeGrid, state: ConformalState, dt: float) -> ConformalState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    return ConformalState(_implicit_step(grid, state.v, dt, 0.0), state.t + dt)


def step_normalized_fano(grid: LatitudeGrid, state: ConformalState, T0: float, dt: float) -> ConformalState:
    if not dt > 0 or not T0 > 0:
        raise ValueError("dt and T0 must be positive")
    return ConformalState(_implicit_step(grid, state.v, dt, 1.0 / T0), state.t + dt)


@dataclass
class SphereLog:
    rows: list[tuple[float, ...]] = field(default_factory=list)

    def record(self, grid: LatitudeGrid, state: ConformalState) -> None:
        K, gb = gauss_curvature(grid, state)
        self.rows.append((state.t, area(grid, state.v), float(state.v.min()), float(state.v.max()),
                          float(np.max(np.abs(K))), gb))

    def column(self, name: str) -> np.ndarray:
        j = SPHERE_CSV_COLUMNS.index(name)
        return np.array([r[j] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SPHERE_CSV_COLUMNS)
        for r in self.rows:
            w.writerow([repr(float(x)) for x in r])
        return buf.getvalue()


def run_sphere(grid: LatitudeGrid, v0: np.ndarray, t_end: float, T0: float | None = None,
               stop_min_v: float = 0.0, dt0: float = 1e-3, dt_min: float = 1e-8,
               dt_max: float = 0.05) -> tuple[ConformalState, SphereLog]:
    """Adaptive implicit Euler; unnormalized if T0 is None.

    Stops at t_end or as soon as min v drops below ``stop_min_v``.
    """
    v0 = np.asarray(v0, dtype=float)
    if not np.all(v0 > 0):
        raise ValueError("initial conformal factor must be positive")
    inv_T0 = 0.0 if T0 is None else 1.0 / T0
    state = ConformalState(v0.copy(), 0.0)
    log = SphereLog()
    log.record(grid, state)
    dt, streak = dt0, 0
    while state.t < t_end and state.v.min() >= stop_min_v:
        h = min(dt, t_end - state.t)
        try:
            v = _implicit_step(grid, state.v, h, inv_T0)
        except StepRejected as exc:
            dt *= 0.5
            streak = 0
            if dt < dt_min:
                raise MinStepUnderflow("time step fell below %.1e at t=%.6g: %s" % (dt_min, state.t, exc.reason),
                                       {"t": state.t, "dt": dt, "reason": exc.reason,
                                        "last_monitors": dict(zip(SPHERE_CSV_COLUMNS, log.rows[-1]))})
            continue
        state = ConformalState(v, t_end if h == t_end - state.t else state.t + h)
        log.record(grid, state)
        streak += 1
        if streak >= 5:
            dt, streak = min(dt * 1.2, dt_max), 0
    return state, log


@dataclass
class ExtinctionReport:
    A0: float
    predicted_T: float
    measured_T: float
    area_law_error: float
    max_gauss_bonnet_residual: float
    stop_time: float
    log: SphereLog

    @property
    def relative_error(self) -> float:
        return abs(self.measured_T - self.predicted_T) / self.predicted_T

    def passed(self, rel: float = 0.02, area_tol: float = 0.01, gb_tol: float = 0.005) -> bool:
        return (self.relative_error <= rel and self.area_law_error <= area_tol
                and self.max_gauss_bonnet_residual <= gb_tol)


def extinction_experiment(grid: LatitudeGrid, v0: np.ndarray, tol: float = 1e-2) -> ExtinctionReport:
    """Run the unnormalized flow until min v < tol and extrapolate the area to zero."""
    v0 = np.asarray(v0, dtype=float)
    A0 = area(grid, v0)
    T = A0 / (4 * np.pi)
    _, log = run_sphere(grid, v0, t_end=10 * T, stop_min_v=tol)
    t, A = log.column("t"), log.column("A")
    slope, intercept = np.polyfit(t, A, 1)
    measured = -intercept / slope
    early = t <= 0.9 * T
    law = float(np.max(np.abs(A[early] - (A0 - 4 * np.pi * t[early])))) / A0
    return ExtinctionReport(A0, T, float(measured), law,
                            float(np.max(log.column("gauss_bonnet_residual"))), float(t[-1]), log)


@dataclass
class FanoReport:
    T0: float
    final_deviation: float
    area_drift: float
    log: SphereLog
    v_final: np.ndarray

    def passed(self, tol: float = 1e-3, area_tol: float = 0.005) -> bool:
        return self.final_deviation < tol and self.area_drift <= area_tol


def normalized_fano_experiment(grid: LatitudeGrid, v0: np.ndarray, t_end: float = 20.0,
                               T0: float | None = None) -> FanoReport:
    """Normalized flow, by default with T0 = A0/(4 pi); reports sup |v - mean v| at t_end."""
    v0 = np.asarray(v0, dtype=float)
    A0 = area(grid, v0)
    T0 = A0 / (4 * np.pi) if T0 is None else T0
    state, log = run_sphere(grid, v0, t_end=t_end, T0=T0)
    vbar = area(grid, state.v) / (4 * np.pi)
    drift = float(np.max(np.abs(log.column("A") - A0))) / A0
    return FanoReport(T0, float(np.max(np.abs(state.v - vbar))), drift, log, state.v)
