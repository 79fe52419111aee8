"""Periodic grid on the unit 2-torus and the operators shared by all solvers.

Convention: with z = x + iy, the (1,1)-form i dd^c phi is identified with
(1/2) * Laplacian(phi) dx^dy, Laplacian = d^2/dx^2 + d^2/dy^2.  A Kahler form
in the local model is therefore a positive density g, and adding a potential
changes it to g + half_laplacian(phi).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MAGIC = b"RMMPFLD1"


class LinearSolveFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class PeriodicGrid:
    n: int
    laplacian: str = "spectral"

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError("grid size must be a power of two >= 16, got %d" % self.n)
        if self.laplacian not in ("spectral", "fd2"):
            raise ValueError("unknown laplacian %r" % self.laplacian)

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid (x, y) with arrays indexed [ix, iy]."""
        s = np.arange(self.n) * self.h
        return np.meshgrid(s, s, indexing="ij")

    @cached_property
    def symbol(self) -> np.ndarray:
        """Fourier multiplier of the Laplacian on the rfft2 half-spectrum."""
        n = self.n
        kx = np.fft.fftfreq(n, d=1.0 / n)[:, None]
        ky = np.fft.rfftfreq(n, d=1.0 / n)[None, :]
        if self.laplacian == "spectral":
            return -(2 * np.pi) ** 2 * (kx ** 2 + ky ** 2)
        # eigenvalues of the 5-point stencil
        return -(4 * n * n) * (np.sin(np.pi * kx / n) ** 2 + np.sin(np.pi * ky / n) ** 2)

    @cached_property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(self.symbol)))

    def lap(self, f: np.ndarray) -> np.ndarray:
        return np.fft.irfft2(self.symbol * np.fft.rfft2(f), s=f.shape)

    def half_lap(self, f: np.ndarray) -> np.ndarray:
        return 0.5 * self.lap(f)

    def inverse_half_lap(self, f: np.ndarray) -> np.ndarray:
        """Mean-zero u with half_lap(u) = f - mean(f)."""
        fh = np.fft.rfft2(f)
        sym = 0.5 * self.symbol
        out = np.zeros_like(fh)
        mask = sym != 0
        out[mask] = fh[mask] / sym[mask]
        return np.fft.irfft2(out, s=f.shape)

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def integrate(self, f: np.ndarray) -> float:
        # unit area: the integral is the grid mean
        return float(np.mean(f))

    def torus_distance(self, x0: float, y0: float) -> np.ndarray:
        x, y = self.coords
        dx = np.abs((x - x0 + 0.5) % 1.0 - 0.5)
        dy = np.abs((y - y0 + 0.5) % 1.0 - 0.5)
        return np.hypot(dx, dy)

    def solve_shifted(self, diag: np.ndarray, coef: float, rhs: np.ndarray,
                      rtol: float = 1e-13, maxiter: int = 2000) -> np.ndarray:
        """Solve (diag - coef * half_lap) u = rhs for positive ``diag``.

        The operator is symmetric positive definite; preconditioned CG with
        the constant-coefficient inverse (mean(diag) - coef * half_lap)^-1.
        """
        d0 = float(np.mean(diag))
        pre = 1.0 / (d0 - coef * 0.5 * self.symbol)

        def A(u):
            return diag * u - coef * self.half_lap(u)

        def M(r):
            return np.fft.irfft2(pre * np.fft.rfft2(r), s=r.shape)

        u = M(rhs)
        r = rhs - A(u)
        z = M(r)
        p = z.copy()
        rz = float(np.vdot(r, z))
        bnorm = float(np.linalg.norm(rhs))
        if bnorm == 0.0:
            return np.zeros_like(rhs)
        for _ in range(maxiter):
            if float(np.linalg.norm(r)) <= rtol * bnorm:
                return u
            Ap = A(p)
            alpha = rz / float(np.vdot(p, Ap))
            u = u + alpha * p
            r = r - alpha * Ap
            z = M(r)
            rz_new = float(np.vdot(r, z))
            p = z + (rz_new / rz) * p
            rz = rz_new
        if float(np.linalg.norm(r)) <= 1e3 * rtol * bnorm:
            return u
        raise LinearSolveFailed("PCG did not converge in %d iterations" % maxiter)


def field_to_bytes(values: np.ndarray) -> bytes:
    """Flat binary: 8-byte magic, little-endian int64 n, then n*n doubles row-major."""
    values = np.ascontiguousarray(values, dtype="<f8")
    return MAGIC + struct.pack("<q", values.shape[0]) + values.tobytes(order="C")


def write_field(path, values: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(field_to_bytes(values))


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(16)
        if head[:8] != MAGIC:
            raise ValueError("not a field file")
        (n,) = struct.unpack("<q", head[8:])
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n * n:
        raise ValueError("truncated field file")
    return data.reshape(n, n).copy()


def field_to_csv(values: np.ndarray) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in values) + "\n"
