"""Property harnesses for the flow engine: volume band, comparison, perturbation
monotonicity, normalized convergence and curvature stability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .density import PerturbationParams
from .elliptic import random_trig_density, solve_linear_ma
from .flow import (NORMALIZED, FlowConfig, FlowData, FlowState, MonitorLog, fixed_point_for,
                   run_ensemble)
from .grid import PeriodicGrid


class InsufficientSamples(ValueError):
    pass


class NotConverged(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


def relative_spread(values: Sequence[float]) -> float:
    """(max - min) / max of positive values; 0 for a single value."""
    v = np.asarray(values, dtype=float)
    if v.size < 2 or v.max() == 0:
        return 0.0
    return float((v.max() - v.min()) / v.max())


def fit_volume_band(log: MonitorLog, t_min: float) -> float:
    """Smallest C with exp(-C/t) <= ratio_min(t) and ratio_max(t) <= exp(C/t) for t >= t_min."""
    if not t_min > 0:
        raise ValueError("t_min must be positive")
    t = log["t"]
    keep = t >= t_min
    if keep.sum() < 2:
        raise InsufficientSamples("fewer than two samples with t >= %g" % t_min)
    lo = -np.log(log["volume_ratio_min"][keep])
    hi = np.log(log["volume_ratio_max"][keep])
    return float(max(0.0, np.max(t[keep] * np.maximum(lo, hi))))


@dataclass
class BandReport:
    fitted: list[float]
    spread: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(math.isfinite(c) for c in self.fitted) and self.spread <= self.tolerance


def volume_band_check(logs: Sequence[MonitorLog], t_min: float, tolerance: float = 0.25) -> BandReport:
    """Fit C on each log (successive grid refinements) and compare neighbours."""
    cs = [fit_volume_band(g, t_min) for g in logs]
    spread = max((relative_spread(cs[k:k + 2]) for k in range(len(cs) - 1)), default=0.0)
    return BandReport(cs, spread, tolerance)


@dataclass
class ComparisonReport:
    epsilon: float
    worst_violation: float = -math.inf
    worst_gap_increase: float = -math.inf
    gaps: list[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.worst_violation <= self.epsilon and self.worst_gap_increase <= self.epsilon


def comparison_check(config: FlowConfig, phi0_low: np.ndarray, phi0_high: np.ndarray,
                     t_end: float | None = None) -> ComparisonReport:
    """Run both flows in lockstep and check ordering and the sup-gap at every accepted step."""
    if np.any(phi0_low > phi0_high):
        raise ValueError("initial data are not ordered")
    eps = 10 * config.stepper_tolerance
    rep = ComparisonReport(eps)
    d0 = phi0_high - phi0_low
    rep.gaps.append(float(d0.max()))

    def watch(states: list[FlowState]):
        lo, hi = states
        d = hi.phi - lo.phi
        rep.worst_violation = max(rep.worst_violation, float(-d.min()))
        g = float(d.max())
        rep.worst_gap_increase = max(rep.worst_gap_increase, g - rep.gaps[-1])
        rep.gaps.append(g)

    run_ensemble([config, config], [phi0_low, phi0_high], t_end=t_end, on_step=watch)
    return rep


def random_ordered_pair(grid: PeriodicGrid, g0: np.ndarray, rng: np.random.Generator,
                        spread: float = 0.05) -> tuple[np.ndarray, np.ndarray]:
    """Two admissible potentials with phi_low <= phi_high pointwise."""
    a = solve_linear_ma(grid, g0, random_trig_density(grid, rng, modes=3, amplitude=0.4)).phi
    b = solve_linear_ma(grid, g0, random_trig_density(grid, rng, modes=3, amplitude=0.4)).phi
    b = b + float(np.max(a - b)) + spread * float(rng.random())
    return a, b


SWEEP_DIRECTION = {"r": -1, "w": 1, "s": 1}


@dataclass
class MonotonicityReport:
    times: tuple[float, ...]
    violations: dict[str, float] = field(default_factory=dict)
    gaps: dict[str, float] = field(default_factory=dict)
    convergence_gaps: list[float] = field(default_factory=list)
    reference_gap: float = math.nan
    slack: float = 0.0

    @property
    def monotone(self) -> bool:
        return all(v <= self.slack for v in self.violations.values())

    @property
    def converges(self) -> bool:
        g = self.convergence_gaps
        decreasing = all(b <= a for a, b in zip(g, g[1:]))
        return decreasing and g[-1] <= 2 * self.reference_gap

    @property
    def passed(self) -> bool:
        return self.monotone and self.converges


def perturbation_monotonicity_check(config: FlowConfig, sweeps: dict[str, Sequence[float]] | None = None,
                                    times: Sequence[float] = (0.1, 0.5, 1.0),
                                    vanishing: Sequence[float] = (0.1, 0.01, 0.001)) -> MonotonicityReport:
    """Pointwise ordering of the (s, w, r) family and convergence as all three vanish.

    Each sweep varies one parameter over increasing values with the others at
    zero.  Convergence compares runs with s = w = r = eps against the
    unperturbed run on the region away from the degeneracy points; the last
    gap must be within twice the gap of the s = 0.01 run.
    """
    if sweeps is None:
        sweeps = {"r": (0.001, 0.01, 0.1), "w": (0.001, 0.01, 0.1), "s": (0.001, 0.01, 0.1)}
    times = tuple(sorted(times))
    base = replace(config, t_end=times[-1], sample_times=times)
    phi0 = np.zeros((config.grid.n, config.grid.n))
    rep = MonotonicityReport(times, slack=10 * config.stepper_tolerance)
    for name, values in sweeps.items():
        values = sorted(values)
        cfgs = [replace(base, perturbation=PerturbationParams(**{name: v})) for v in values]
        states = run_ensemble(cfgs, [phi0] * len(cfgs))
        sign = SWEEP_DIRECTION[name]
        worst = -math.inf
        for t in times:
            for a, b in zip(states, states[1:]):
                worst = max(worst, float(np.max(-sign * (b.snapshots[t] - a.snapshots[t]))))
        rep.violations[name] = worst
        rep.gaps[name] = float(np.max(np.abs(states[-1].snapshots[times[-1]] - states[0].snapshots[times[-1]])))
    region = FlowData(base).region
    cfgs = [base, replace(base, perturbation=PerturbationParams(s=0.01))]
    cfgs += [replace(base, perturbation=PerturbationParams(s=e, w=e, r=e)) for e in vanishing]
    states = run_ensemble(cfgs, [phi0] * len(cfgs))
    ref = states[0].snapshots[times[-1]]

    def gap(st):
        return float(np.max(np.abs(st.snapshots[times[-1]] - ref)[region]))

    rep.reference_gap = gap(states[1])
    rep.convergence_gaps = [gap(st) for st in states[2:]]
    return rep


@dataclass
class ConvergenceReport:
    final_gap: float
    fitted_C: float
    decay_bound_ok: bool
    l1_final: float
    l1_monotone: bool
    tol: float
    l1_tol: float
    state: FlowState
    fixed_point: np.ndarray

    @property
    def passed(self) -> bool:
        return (self.final_gap < self.tol and self.decay_bound_ok and self.l1_monotone
                and self.l1_final < self.l1_tol)


def normalized_convergence_check(config: FlowConfig, phi0: np.ndarray, tol: float = 1e-5,
                                 l1_tol: float = 1e-6, fit_window: tuple[float, float] = (1.0, 10.0),
                                 raise_on_failure: bool = False) -> ConvergenceReport:
    """Normalized flow against the semilinear fixed point.

    sup(d phi/dt) <= C t exp(-t): C is fitted on ``fit_window`` and must then
    bound the rest of the run (values already at the stepper floor count as
    bounded).  The L1 norm of d phi/dt must be non-increasing for t >= 1 up
    to ten stepper tolerances.
    """
    if config.mode != NORMALIZED:
        raise ValueError("normalized_convergence_check needs a normalized config")
    data = FlowData(config)
    fp = fixed_point_for(config, data)
    if fp is None:
        raise ValueError("chi + s must be positive for a Kahler-Einstein limit")
    state = run_ensemble([config], [phi0], fixed_points=[fp])[0]
    log = state.monitors
    t = log["t"]
    sup_dot = log["phi_dot_max"]
    floor = 10 * config.stepper_tolerance
    a, b = fit_window
    w = (t >= a) & (t <= b)
    weight = t * np.exp(-t)
    C = float(np.max(np.maximum(sup_dot[w], 0.0) / weight[w])) if w.any() else math.nan
    later = t > b
    bound_ok = bool(math.isfinite(C) and np.all((sup_dot[later] <= C * weight[later]) | (sup_dot[later] <= floor)))
    l1 = log["phi_dot_l1"][t >= 1.0]
    l1_monotone = bool(np.all(np.diff(l1) <= floor))
    final_gap = float(np.max(np.abs(state.phi - fp)))
    rep = ConvergenceReport(final_gap, C, bound_ok, float(log["phi_dot_l1"][-1]), l1_monotone,
                            tol, l1_tol, state, fp)
    if raise_on_failure and final_gap >= tol:
        raise NotConverged("gap to fixed point %.3e at t=%g" % (final_gap, state.t), final_gap)
    return rep


def value_at(log: MonitorLog, key: str, t: float) -> float:
    """Monitor value at the first logged time >= t."""
    ts = log["t"]
    k = int(np.searchsorted(ts, t - 1e-12))
    if k >= len(ts):
        raise InsufficientSamples("log ends before t=%g" % t)
    return float(log[key][k])


def delta_quotients(config: FlowConfig, phi0: np.ndarray, deltas: Sequence[float] = (0.02, 0.01)) -> list[tuple[float, float]]:
    """Finite-difference d phi / d delta at t_end: (sup over the grid, inf over the region) per delta."""
    cfgs = [replace(config, perturbation=replace(config.perturbation, delta=0.0))]
    cfgs += [replace(config, perturbation=replace(config.perturbation, delta=d)) for d in deltas]
    states = run_ensemble(cfgs, [phi0] * len(cfgs))
    region = FlowData(cfgs[0]).region
    out = []
    for d, st in zip(deltas, states[1:]):
        q = (st.phi - states[0].phi) / d
        out.append((float(q.max()), float(q[region].min())))
    return out
