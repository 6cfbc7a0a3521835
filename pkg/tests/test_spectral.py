import numpy as np

from cocyclelab.interp import PeriodicCubic2D
from cocyclelab.spectral import dbar, deriv, dz, laplacian, nyquist_shell_max, refine_grid


def _trig(nx, ny, lx, ly):
    x = lx * np.arange(nx) / nx
    y = ly * np.arange(ny) / ny
    xg, yg = np.meshgrid(x, y, indexing="xy")
    return xg, yg


def test_deriv_matches_analytic():
    nx, ny, lx, ly = 48, 32, 2.0, 1.5
    xg, yg = _trig(nx, ny, lx, ly)
    f = np.sin(2 * np.pi * 3 * xg / lx) * np.cos(2 * np.pi * 2 * yg / ly)
    fx = (2 * np.pi * 3 / lx) * np.cos(2 * np.pi * 3 * xg / lx) * np.cos(2 * np.pi * 2 * yg / ly)
    fy = -(2 * np.pi * 2 / ly) * np.sin(2 * np.pi * 3 * xg / lx) * np.sin(2 * np.pi * 2 * yg / ly)
    assert np.abs(deriv(f, lx, axis=1) - fx).max() < 1e-11
    assert np.abs(deriv(f, ly, axis=0) - fy).max() < 1e-11


def test_laplacian_matches_analytic():
    nx = ny = 64
    lx, ly = 1.0, 2.0
    xg, yg = _trig(nx, ny, lx, ly)
    f = np.cos(2 * np.pi * xg / lx + 0.3) * np.sin(2 * np.pi * 4 * yg / ly)
    k2 = (2 * np.pi / lx) ** 2 + (2 * np.pi * 4 / ly) ** 2
    assert np.abs(laplacian(f, lx, ly) + k2 * f).max() < 1e-9


def test_dbar_dz_analytic_oracle():
    """dbar = (d/dx + i d/dy)/2 and dz = (d/dx - i d/dy)/2 on a trig
    polynomial with known partials."""
    nx = ny = 64
    lx, ly = 1.0, 1.5
    xg, yg = _trig(nx, ny, lx, ly)
    px = 2 * np.pi / lx
    py = 2 * np.pi / ly
    f = np.cos(2 * px * xg - py * yg + 0.4) + 0.3 * np.sin(px * xg)
    s = np.sin(2 * px * xg - py * yg + 0.4)
    fx = -2 * px * s + 0.3 * px * np.cos(px * xg)
    fy = py * s
    assert np.abs(dbar(f, lx, ly) - 0.5 * (fx + 1j * fy)).max() < 1e-10
    assert np.abs(dz(f, lx, ly) - 0.5 * (fx - 1j * fy)).max() < 1e-10


def test_dbar_conjugate_roles():
    """Conjugation swaps the split derivatives: dz(conj f) = conj(dbar f)."""
    nx = ny = 48
    xg, yg = _trig(nx, ny, 1.0, 1.0)
    f = np.exp(1j * np.cos(2 * np.pi * xg)) * np.sin(2 * np.pi * yg)
    lhs = dz(np.conj(f), 1.0, 1.0)
    rhs = np.conj(dbar(f, 1.0, 1.0))
    assert np.abs(lhs - rhs).max() < 1e-11
    # additivity back to the full x-derivative
    from cocyclelab.spectral import deriv

    assert np.abs(dbar(f, 1.0, 1.0) + dz(f, 1.0, 1.0)
                  - deriv(f, 1.0, axis=1)).max() < 1e-11


def test_deriv_extra_axes():
    nx = ny = 32
    xg, yg = _trig(nx, ny, 1.0, 1.0)
    f = np.stack([np.sin(2 * np.pi * xg), np.cos(2 * np.pi * xg)], axis=-1)
    d = deriv(f, 1.0, axis=1)
    assert np.abs(d[..., 0] - 2 * np.pi * np.cos(2 * np.pi * xg)).max() < 1e-11


def test_nyquist_shell_detects_roughness():
    nx = ny = 32
    xg, yg = _trig(nx, ny, 1.0, 1.0)
    smooth = np.cos(2 * np.pi * xg)
    rough = smooth + 0.1 * np.cos(np.pi * nx * xg)  # Nyquist wiggle
    assert nyquist_shell_max(smooth) < 1e-14
    assert nyquist_shell_max(rough) > 1e-3


def test_refine_grid_reproduces_bandlimited():
    nx = ny = 16
    xg, yg = _trig(nx, ny, 1.0, 1.0)
    f = 0.7 + np.sin(2 * np.pi * xg) * np.cos(2 * np.pi * 3 * yg)
    fine = refine_grid(f, 4)
    xg4, yg4 = _trig(4 * nx, 4 * ny, 1.0, 1.0)
    expected = 0.7 + np.sin(2 * np.pi * xg4) * np.cos(2 * np.pi * 3 * yg4)
    assert np.abs(fine - expected).max() < 1e-12


def test_interp_spectral_accuracy_on_bandlimited():
    nx = ny = 32
    xg, yg = _trig(nx, ny, 1.0, 1.0)
    f = np.cos(2 * np.pi * (2 * xg - yg) + 0.4)
    itp = PeriodicCubic2D(f, 1.0, 1.0)
    rng = np.random.default_rng(5)
    xs = rng.uniform(0, 1, 400)
    ys = rng.uniform(0, 1, 400)
    got = itp(xs, ys)
    expected = np.cos(2 * np.pi * (2 * xs - ys) + 0.4)
    assert np.abs(got - expected).max() < 1e-6
    # doubling the grid should cut the error by about 2^4
    f2 = np.cos(2 * np.pi * (2 * _trig(64, 64, 1.0, 1.0)[0]
                             - _trig(64, 64, 1.0, 1.0)[1]) + 0.4)
    itp2 = PeriodicCubic2D(f2, 1.0, 1.0)
    err1 = np.abs(got - expected).max()
    err2 = np.abs(itp2(xs, ys) - expected).max()
    assert err2 < err1 / 8


def test_interp_exact_on_grid_points():
    rng = np.random.default_rng(8)
    f = rng.normal(size=(24, 24))
    fs = np.fft.ifft2(np.fft.fft2(f) * (np.abs(np.fft.fftfreq(24)) < 0.2)[:, None]
                      * (np.abs(np.fft.fftfreq(24)) < 0.2)[None, :]).real
    itp = PeriodicCubic2D(fs, 1.0, 1.0, refine=4)
    xs = np.arange(24) / 24.0
    got = itp(xs, np.zeros(24))
    assert np.abs(got - fs[0]).max() < 1e-9


def test_interp_channels_and_chunking():
    nx = ny = 32
    xg, yg = _trig(nx, ny, 1.0, 1.0)
    data = np.stack([np.sin(2 * np.pi * xg), np.cos(2 * np.pi * yg)], axis=-1)
    itp = PeriodicCubic2D(data, 1.0, 1.0)
    rng = np.random.default_rng(3)
    xs = rng.uniform(-2, 2, 5000) % 1.0
    ys = rng.uniform(-2, 2, 5000) % 1.0
    small = itp(xs, ys, chunk=64)
    big = itp(xs, ys, chunk=100000)
    assert np.abs(small - big).max() == 0.0
    assert np.abs(small[:, 0] - np.sin(2 * np.pi * xs)).max() < 2e-7
