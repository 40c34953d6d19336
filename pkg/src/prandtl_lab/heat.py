"""Heat-kernel propagator for the linear problem

    dt W - eps^2 dxx W - dyy W = F,   dy W|_{y=0} = px,   dy W|_{y=Y} = 0,

used to cross-check the finite-difference stepper.  x is handled mode by mode
(factor exp(-eps^2 k^2 t)); in y the Neumann walls are replaced by even images
across y = 0 and y = Y, the wall flux enters through a boundary-layer
potential, and the source through Duhamel's formula.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf

from .grid import Grid


def _gauss_segments(c: np.ndarray, z: np.ndarray, t: float) -> np.ndarray:
    """Matrix M with (M f)_j = int G(c_j - z, t) f_lin(z) dz for piecewise-linear f on nodes z."""
    s = 2.0 * np.sqrt(t)
    za, zb = z[:-1], z[1:]
    L = zb - za
    ra = (za[None, :] - c[:, None]) / s
    rb = (zb[None, :] - c[:, None]) / s
    S0 = 0.5 * (erf(rb) - erf(ra))
    S1 = np.sqrt(t / np.pi) * (np.exp(-ra**2) - np.exp(-rb**2))  # int (z - c) G dz
    left = ((zb[None, :] - c[:, None]) * S0 - S1) / L
    right = (S1 + (c[:, None] - za[None, :]) * S0) / L
    M = np.zeros((len(c), len(z)))
    M[:, :-1] += left
    M[:, 1:] += right
    return M


def neumann_kernel(grid: Grid, t: float) -> np.ndarray:
    """Discrete solution operator of dt W = dyy W with homogeneous Neumann walls
    at 0 and Y (first images only)."""
    y = grid.y
    return (_gauss_segments(y, y, t) + _gauss_segments(-y, y, t)
            + _gauss_segments(2 * grid.Y - y, y, t))


def _gauss(r: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-r**2 / (4 * t)) / np.sqrt(4 * np.pi * t)


def _source_at(F, tau: float, dt: float) -> np.ndarray:
    if F is None or isinstance(F, np.ndarray):
        return F
    n = tau / dt
    i = int(np.clip(np.floor(n), 0, len(F) - 2))
    w = n - i
    return (1 - w) * F[i] + w * F[i + 1]


def heat_propagate(grid: Grid, W0: np.ndarray, F, px: np.ndarray, eps: float, dt: float, n_steps: int,
                   stride: int = 1, n_quad: int = 40) -> list[np.ndarray]:
    """Kernel solution at t = k * stride * dt, k = 0 .. n_steps // stride.

    ``F`` is None (no source), a single field (constant in time) or a sequence
    of fields at t = n dt, interpolated linearly in time.
    """
    nx = grid.nx
    k2 = (2 * np.pi * np.fft.rfftfreq(nx, d=1.0 / nx)) ** 2
    lam = eps**2 * k2
    W0h = np.fft.rfft(W0, axis=0)
    pxh = np.fft.rfft(np.broadcast_to(px, (nx,)).astype(float))
    xg, wg = np.polynomial.legendre.leggauss(n_quad)
    out = [np.array(W0, dtype=float)]
    y = grid.y
    for k in range(1, n_steps // stride + 1):
        t = k * stride * dt
        # r in (0, sqrt t), s = r^2, ds = 2 r dr
        r = 0.5 * np.sqrt(t) * (xg + 1.0)
        wr = 0.5 * np.sqrt(t) * wg
        K = neumann_kernel(grid, t)
        Wh = (K @ W0h.T).T * np.exp(-lam * t)[:, None]
        # wall flux: -int_0^t 2 G(y, s) e^{-lam s} px ds
        flux = np.zeros((len(lam), grid.ny))
        for ri, wi in zip(r, wr):
            s = ri**2
            prof = 2.0 * (_gauss(y, s) + _gauss(2 * grid.Y - y, s))
            flux += wi * 2 * ri * np.exp(-lam * s)[:, None] * prof[None, :]
        Wh -= flux * pxh[:, None]
        if F is not None:
            for ri, wi in zip(r, wr):
                s = ri**2
                Fh = np.fft.rfft(_source_at(F, t - s, dt), axis=0)
                Wh += wi * 2 * ri * np.exp(-lam * s)[:, None] * (neumann_kernel(grid, s) @ Fh.T).T
        out.append(np.fft.irfft(Wh, n=nx, axis=0))
    return out
