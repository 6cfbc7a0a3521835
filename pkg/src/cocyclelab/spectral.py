"""FFT differentiation helpers for periodic grids.

Arrays carry the grid on two leading axes (y, x) by default, with any number
of trailing component axes; every routine takes explicit axis arguments so
the same helpers serve (theta, y, x, ...) sample cubes.
"""

from __future__ import annotations

import numpy as np


def wavenumbers(n: int, length: float) -> np.ndarray:
    """Angular wavenumbers 2*pi*k/length in FFT order, Nyquist zeroed.

    Zeroing the Nyquist bin makes odd-order derivatives of real data real
    and is exact for fields with no content at that frequency (enforced
    elsewhere for the metric; smooth fields have negligible content there).
    """
    k = 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def deriv(arr: np.ndarray, length: float, axis: int) -> np.ndarray:
    """Spectral d/dx along the given axis of a periodic array."""
    arr = np.asarray(arr)
    n = arr.shape[axis]
    k = wavenumbers(n, length)
    shape = [1] * arr.ndim
    shape[axis] = n
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(arr, axis=axis), axis=axis)
    if np.isrealobj(arr):
        return out.real
    return out


def laplacian(arr: np.ndarray, lx: float, ly: float, axes: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Spectral Laplacian; axes = (y_axis, x_axis)."""
    arr = np.asarray(arr)
    ay, ax = axes
    ky = wavenumbers(arr.shape[ay], ly)
    kx = wavenumbers(arr.shape[ax], lx)
    f = np.fft.fft2(arr, axes=(ay, ax))
    sy = [1] * arr.ndim
    sy[ay] = arr.shape[ay]
    sx = [1] * arr.ndim
    sx[ax] = arr.shape[ax]
    f *= -(ky.reshape(sy) ** 2 + kx.reshape(sx) ** 2)
    out = np.fft.ifft2(f, axes=(ay, ax))
    if np.isrealobj(arr):
        return out.real
    return out


def dbar(arr: np.ndarray, lx: float, ly: float, axes: tuple[int, int] = (0, 1)) -> np.ndarray:
    """(d/dx + i d/dy)/2 with axes = (y_axis, x_axis)."""
    ay, ax = axes
    return 0.5 * (deriv(arr, lx, ax) + 1j * deriv(arr, ly, ay))


def dz(arr: np.ndarray, lx: float, ly: float, axes: tuple[int, int] = (0, 1)) -> np.ndarray:
    """(d/dx - i d/dy)/2 with axes = (y_axis, x_axis)."""
    ay, ax = axes
    return 0.5 * (deriv(arr, lx, ax) - 1j * deriv(arr, ly, ay))


def nyquist_shell_max(grid: np.ndarray) -> float:
    """Largest normalized FFT coefficient magnitude on the Nyquist rows/cols."""
    g = np.asarray(grid)
    ny, nx = g.shape[:2]
    f = np.fft.fft2(g, axes=(0, 1)) / (nx * ny)
    mags = np.abs(f)
    while mags.ndim > 2:
        mags = mags.max(axis=-1)
    pieces = []
    if ny % 2 == 0:
        pieces.append(mags[ny // 2, :].max())
    if nx % 2 == 0:
        pieces.append(mags[:, nx // 2].max())
    return float(max(pieces)) if pieces else 0.0


def refine_grid(grid: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited upsampling of a periodic grid by zero-padding its FFT.

    grid has shape (ny, nx, ...) with even ny, nx; returns the same data
    resampled on a (factor*ny, factor*nx) grid.  Exact on band-limited data,
    spectrally accurate on smooth data.  The Nyquist bins are split between
    +-Nyquist so real input stays real.
    """
    g = np.asarray(grid)
    if factor == 1:
        return g.copy()
    ny, nx = g.shape[:2]
    if ny % 2 or nx % 2:
        raise ValueError("refine_grid expects even grid sizes")
    fs = np.fft.fftshift(np.fft.fft2(g, axes=(0, 1)), axes=(0, 1))
    fs[0] *= 0.5
    fs = np.concatenate([fs, fs[:1]], axis=0)
    fs[:, 0] *= 0.5
    fs = np.concatenate([fs, fs[:, :1]], axis=1)
    big_ny, big_nx = factor * ny, factor * nx
    big = np.zeros((big_ny, big_nx) + g.shape[2:], dtype=complex)
    y0 = big_ny // 2 - ny // 2
    x0 = big_nx // 2 - nx // 2
    big[y0 : y0 + ny + 1, x0 : x0 + nx + 1] = fs
    out = np.fft.ifft2(np.fft.ifftshift(big, axes=(0, 1)), axes=(0, 1))
    out *= factor * factor
    if np.isrealobj(g):
        return out.real
    return out
