"""Static Monge-Ampere problems in complex dimension one on the torus.

In one complex dimension the mass-prescription equation g0 + half_lap(phi) = cF
is linear, so it is solved exactly by Fourier inversion.  The semilinear
equation chi + half_lap(phi) = exp(phi) F (the Kahler-Einstein fixed point of
the normalized flow) is solved by damped Newton.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import PeriodicGrid


class ZeroMassF(ValueError):
    pass


class NewtonDiverged(RuntimeError):
    pass


class NonpositiveDensityAtSolution(RuntimeError):
    pass


@dataclass
class EllipticSolution:
    phi: np.ndarray
    c: float
    residual: float
    iterations: int
    positive: bool = True


def solve_linear_ma(grid: PeriodicGrid, g0: np.ndarray, F: np.ndarray,
                    tol: float = 1e-10) -> EllipticSolution:
    """Solve g0 + half_lap(phi) = c F with c = mean(g0)/mean(F) and mean(phi) = 0."""
    mF = grid.mean(F)
    if not mF > 0:
        raise ZeroMassF("F has non-positive mass %r" % mF)
    c = grid.mean(g0) / mF
    rhs = c * F - g0
    phi = grid.inverse_half_lap(rhs)
    phi -= phi.mean()
    dens = g0 + grid.half_lap(phi)
    residual = float(np.max(np.abs(dens - c * F)))
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if residual > max(tol, 1e-13 * scale):
        raise RuntimeError("linear solve residual %.3e above tolerance" % residual)
    return EllipticSolution(phi, c, residual, 1, positive=bool(np.all(dens >= 0)))


def semilinear_residual(grid: PeriodicGrid, phi, chi, F) -> np.ndarray:
    return chi + grid.half_lap(phi) - np.exp(phi) * F


def solve_semilinear_ma(grid: PeriodicGrid, chi: np.ndarray, F: np.ndarray,
                        tol: float = 1e-11, max_iter: int = 100) -> EllipticSolution:
    """Damped Newton for chi + half_lap(phi) = exp(phi) F."""
    phi = np.full(F.shape, math.log(grid.mean(chi) / grid.mean(F)))
    R = semilinear_residual(grid, phi, chi, F)
    rnorm = float(np.max(np.abs(R)))
    it = 0
    while rnorm > tol:
        if it >= max_iter:
            raise NewtonDiverged("no convergence after %d iterations (residual %.3e)" % (it, rnorm))
        w = np.exp(phi) * F
        # (w - half_lap) delta = R
        delta = grid.solve_shifted(w, 1.0, R)
        lam = 1.0
        for _ in range(31):
            trial = phi + lam * delta
            Rt = semilinear_residual(grid, trial, chi, F)
            tnorm = float(np.max(np.abs(Rt)))
            if tnorm < rnorm:
                break
            lam *= 0.5
        else:
            raise NewtonDiverged("step damping exhausted at residual %.3e" % rnorm)
        phi, R, rnorm = trial, Rt, tnorm
        it += 1
    dens = chi + grid.half_lap(phi)
    if not np.all(dens > 0):
        raise NonpositiveDensityAtSolution("chi + half_lap(phi) has min %.3e" % dens.min())
    return EllipticSolution(phi, 1.0, rnorm, it)


def normalized_difference(phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Shift psi so that max(phi - psi) = max(psi - phi); return phi - psi."""
    d = phi - psi
    return d - 0.5 * (d.max() + d.min())


@dataclass
class StabilityRecord:
    pair_id: int
    l1: float
    linf: float
    ratio: float | None
    note: str = ""


@dataclass
class StabilityReport:
    exponent: float
    records: list[StabilityRecord] = field(default_factory=list)

    @property
    def fitted_C(self) -> float:
        ratios = [r.ratio for r in self.records if r.ratio is not None]
        return max(ratios) if ratios else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair_id", "l1_distance", "linf_distance", "ratio"])
        for r in self.records:
            w.writerow([r.pair_id, repr(r.l1), repr(r.linf), "" if r.ratio is None else repr(r.ratio)])
        return buf.getvalue()


def stability_experiment(grid: PeriodicGrid, g0: np.ndarray, pairs, epsilon: float) -> StabilityReport:
    """Empirical ratio ||phi - psi||_inf / ||f - g||_1^(1/(4 + epsilon)) per pair.

    f and g are rescaled to the mass of g0 before solving, so both problems
    share the normalization constant c = 1.
    """
    exponent = 1.0 / (4.0 + epsilon)
    report = StabilityReport(exponent)
    m0 = grid.mean(g0)
    for k, (f, g) in enumerate(pairs):
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        if np.any(f < 0) or np.any(g < 0):
            raise ValueError("pair %d has negative density values" % k)
        f = f * (m0 / grid.mean(f))
        g = g * (m0 / grid.mean(g))
        l1 = grid.integrate(np.abs(f - g))
        if l1 == 0.0:
            report.records.append(StabilityRecord(k, 0.0, 0.0, None, "identical densities, skipped"))
            continue
        phi = solve_linear_ma(grid, g0, f).phi
        psi = solve_linear_ma(grid, g0, g).phi
        linf = float(np.max(np.abs(normalized_difference(phi, psi))))
        report.records.append(StabilityRecord(k, l1, linf, linf / l1 ** exponent))
    return report


def random_trig_density(grid: PeriodicGrid, rng: np.random.Generator, modes: int = 4,
                        amplitude: float = 0.5) -> np.ndarray:
    """exp of a random real trigonometric polynomial of degree <= ``modes``.

    The term a cos + b sin at wave vector k is placed in the rfft2 spectrum,
    so the draws (and hence the density) do not depend on n.
    """
    n = grid.n
    if 2 * modes >= n:
        raise ValueError("grid too coarse for %d modes" % modes)
    spec = np.zeros((n, n // 2 + 1), dtype=complex)
    for kx in range(-modes, modes + 1):
        for ky in range(0, modes + 1):
            if kx == 0 and ky == 0:
                continue
            a, b = rng.normal(size=2) / (1 + kx * kx + ky * ky)
            c = 0.5 * n * n * complex(a, -b)
            spec[kx % n, ky] += c
            if ky == 0:
                spec[-kx % n, 0] += c.conjugate()
    s = np.fft.irfft2(spec, s=(n, n))
    s *= amplitude / max(1e-12, float(np.max(np.abs(s))))
    return np.exp(s)
