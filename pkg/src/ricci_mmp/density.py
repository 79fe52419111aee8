"""Degenerate densities: a positive smooth part times point zeros and poles.

A zero of order a at z0 contributes sigma(z; z0)^a and a pole of order b
contributes sigma(z; z0)^-b, where

    sigma(z; z0) = sin^2(pi (x - x0)) + sin^2(pi (y - y0))

is smooth, periodic and vanishes quadratically at z0.  Pole orders are kept in
(0, 1) so that the density is in L^p for 1 < p < 1/b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import PeriodicGrid

Point = tuple[float, float]


class CoincidentZeroAndPole(ValueError):
    pass


@dataclass(frozen=True)
class Mode:
    amplitude: float
    kx: int
    ky: int
    phase: float = 0.0


@dataclass(frozen=True)
class DensitySpec:
    constant: float = 1.0
    modes: tuple[Mode, ...] = ()
    zeros: tuple[tuple[Point, float], ...] = ()
    poles: tuple[tuple[Point, float], ...] = ()
    # background forms (chi) may change sign; they carry no zeros or poles
    signed: bool = False

    def __post_init__(self):
        if self.signed:
            if self.zeros or self.poles:
                raise ValueError("signed densities cannot carry zeros or poles")
            return
        for _, a in self.zeros:
            if a < 0:
                raise ValueError("zero orders must be >= 0, got %r" % a)
        for _, b in self.poles:
            if not 0 < b < 1:
                raise ValueError("pole orders must lie in (0, 1), got %r" % b)
        for p, _ in self.poles:
            if any(_same_point(p, z) for z, _ in self.zeros):
                raise CoincidentZeroAndPole("zero and pole at %r" % (p,))
        # a trigonometric polynomial is bounded below by constant - sum |a_k|
        if self.constant - sum(abs(m.amplitude) for m in self.modes) <= 0:
            raise ValueError("smooth part is not guaranteed positive")

    @property
    def degeneracy_points(self) -> tuple[Point, ...]:
        return tuple(p for p, _ in self.zeros) + tuple(p for p, _ in self.poles)

    @classmethod
    def constant_density(cls, c: float = 1.0) -> "DensitySpec":
        return cls(constant=c)

    @classmethod
    def from_dict(cls, doc: dict) -> "DensitySpec":
        return cls(
            constant=float(doc.get("constant", 1.0)),
            modes=tuple(Mode(float(m["amplitude"]), int(m["kx"]), int(m["ky"]), float(m.get("phase", 0.0)))
                        for m in doc.get("modes", ())),
            zeros=tuple(((float(z["x"]), float(z["y"])), float(z["order"])) for z in doc.get("zeros", ())),
            poles=tuple(((float(z["x"]), float(z["y"])), float(z["order"])) for z in doc.get("poles", ())),
            signed=bool(doc.get("signed", False)),
        )


def _same_point(p: Point, q: Point, tol: float = 1e-12) -> bool:
    # compare on the torus so that 1.2 and 0.2 agree despite rounding in %
    return all(abs((a - b + 0.5) % 1.0 - 0.5) <= tol for a, b in zip(p, q))


def sigma(grid: PeriodicGrid, p: Point) -> np.ndarray:
    """sigma(z; p), floored at its value for an offset of (h/4, h/4).

    The floor only bites when p sits within a quarter cell of a node, and keeps
    zeros and poles finite there instead of producing 0 or inf.
    """
    x, y = grid.coords
    s = np.sin(np.pi * (x - p[0])) ** 2 + np.sin(np.pi * (y - p[1])) ** 2
    floor = 2 * math.sin(math.pi * grid.h / 4) ** 2
    return np.maximum(s, floor)


def smooth_part(grid: PeriodicGrid, spec: DensitySpec) -> np.ndarray:
    x, y = grid.coords
    out = np.full(x.shape, spec.constant)
    for m in spec.modes:
        out = out + m.amplitude * np.cos(2 * np.pi * (m.kx * x + m.ky * y) + m.phase)
    return out


def zero_part(grid: PeriodicGrid, spec: DensitySpec) -> np.ndarray:
    out = np.ones((grid.n, grid.n))
    for p, a in spec.zeros:
        out = out * sigma(grid, p) ** a
    return out


def pole_part(grid: PeriodicGrid, spec: DensitySpec) -> np.ndarray:
    out = np.ones((grid.n, grid.n))
    for p, b in spec.poles:
        out = out * sigma(grid, p) ** b
    return out


def build_density(grid: PeriodicGrid, spec: DensitySpec, w: float = 0.0, r: float = 0.0) -> np.ndarray:
    """Realize smooth * (r + zeros) / (w + poles) pointwise.

    With w = r = 0 this is the unperturbed density; positive w caps the poles
    and positive r lifts the zeros.
    """
    return smooth_part(grid, spec) * (r + zero_part(grid, spec)) / (w + pole_part(grid, spec))


@dataclass(frozen=True)
class PerturbationParams:
    s: float = 0.0
    w: float = 0.0
    r: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.s < 0 or self.w < 0 or self.r < 0:
            raise ValueError("s, w, r must be non-negative")
        if not -0.5 < self.delta < 0.5:
            raise ValueError("delta must be small, got %r" % self.delta)

    def is_zero(self) -> bool:
        return self.s == self.w == self.r == self.delta == 0.0


def lp_norm(grid: PeriodicGrid, f: np.ndarray, p: float) -> float:
    return grid.integrate(np.abs(f) ** p) ** (1.0 / p)
