import numpy as np
import pytest

from ricci_mmp.grid import LinearSolveFailed, PeriodicGrid, field_to_csv, read_field, write_field


@pytest.mark.parametrize("n", [8, 48, 100])
def test_grid_size_validation(n):
    with pytest.raises(ValueError):
        PeriodicGrid(n)


def test_half_laplacian_fourier_modes():
    # i ddbar phi <-> half_lap(phi): cos(2 pi (k x + l y)) scales by -2 pi^2 (k^2 + l^2)
    g = PeriodicGrid(32)
    x, y = g.coords
    for k, l in [(1, 0), (0, 3), (2, 5)]:
        f = np.cos(2 * np.pi * (k * x + l * y))
        assert np.allclose(g.half_lap(f), -2 * np.pi ** 2 * (k * k + l * l) * f, atol=1e-9)


def test_fd2_matches_five_point_stencil():
    g = PeriodicGrid(32, "fd2")
    f = np.random.default_rng(0).normal(size=(32, 32))
    h2 = g.h ** 2
    stencil = (np.roll(f, 1, 0) + np.roll(f, -1, 0) + np.roll(f, 1, 1) + np.roll(f, -1, 1) - 4 * f) / h2
    assert np.allclose(g.lap(f), stencil, atol=1e-8 * np.abs(stencil).max())


def test_inverse_half_laplacian_roundtrip():
    g = PeriodicGrid(64)
    f = np.random.default_rng(1).normal(size=(64, 64))
    u = g.inverse_half_lap(f)
    assert abs(u.mean()) < 1e-14
    assert np.allclose(g.half_lap(u), f - f.mean(), atol=1e-10)


def test_laplacian_is_mean_free():
    g = PeriodicGrid(64)
    f = np.random.default_rng(2).normal(size=(64, 64)) * 1e3
    assert abs(g.lap(f).mean()) < 1e-9


def test_solve_shifted():
    g = PeriodicGrid(64)
    rng = np.random.default_rng(3)
    diag = 1 + 0.5 * rng.random((64, 64))
    rhs = rng.normal(size=(64, 64))
    u = g.solve_shifted(diag, 0.01, rhs)
    assert np.allclose(diag * u - 0.01 * g.half_lap(u), rhs, atol=1e-10)
    with pytest.raises(LinearSolveFailed):
        g.solve_shifted(diag, 0.01, rhs, rtol=1e-30, maxiter=2)


def test_torus_distance_wraps():
    g = PeriodicGrid(16)
    d = g.torus_distance(0.0, 0.0)
    assert d[0, 0] == 0 and np.isclose(d[15, 0], 1 / 16) and np.isclose(d.max(), np.sqrt(0.5))


def test_field_io(tmp_path):
    f = np.arange(256.0).reshape(16, 16) / 7
    p = tmp_path / "f.bin"
    write_field(p, f)
    raw = p.read_bytes()
    assert raw[:8] == b"RMMPFLD1" and len(raw) == 16 + 8 * 256
    assert np.array_equal(read_field(p), f)
    p.write_bytes(raw[:-8])
    with pytest.raises(ValueError):
        read_field(p)
    rows = field_to_csv(f).splitlines()
    assert len(rows) == 16 and float(rows[1].split(",")[2]) == f[1, 2]
