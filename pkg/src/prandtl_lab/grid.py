"""Discretization of the periodic strip T x [0, Y].

Fields are plain ``numpy`` arrays of shape ``(nx, ny)``: axis 0 is the periodic
x-direction (no duplicated seam column), axis 1 runs from the wall ``y = 0`` to
the truncation height ``y = Y``.  Functions take the :class:`Grid` explicitly.
"""
from __future__ import annotations

import csv
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson, simpson


class InvalidSpecError(ValueError):
    pass


class TailUnreliableWarning(UserWarning):
    """The integrand has not decayed at ``y = Y``; the closed-form tail is a guess."""


GRADINGS = ("uniform", "exponential")


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    Y: float = 30.0
    dt: float = 1e-3
    grading: str = "uniform"
    beta: float = 0.0

    def validate(self) -> None:
        if self.nx < 8 or self.ny < 3:
            raise InvalidSpecError(f"need nx >= 8 and ny >= 3, got nx={self.nx}, ny={self.ny}")
        if not self.Y > 1:
            raise InvalidSpecError(f"truncation height must exceed 1, got Y={self.Y}")
        if not self.dt > 0:
            raise InvalidSpecError(f"dt must be positive, got {self.dt}")
        if self.grading not in GRADINGS:
            raise InvalidSpecError(f"unknown grading {self.grading!r}")
        if self.grading == "exponential" and not self.beta > 0:
            raise InvalidSpecError("exponential grading needs beta > 0")


class Grid:
    """Node coordinates plus cached y-difference operators."""

    def __init__(self, spec: GridSpec, y: np.ndarray):
        self.spec = spec
        self.nx = spec.nx
        self.ny = spec.ny
        self.Y = float(spec.Y)
        self.dt = spec.dt
        self.hx = 1.0 / spec.nx
        self.x = np.arange(spec.nx) * self.hx
        self.y = y
        self.dy = np.diff(y)
        self.X, self.YY = np.meshgrid(self.x, self.y, indexing="ij")
        self._ops: dict = {}

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def weight(self, lam: float) -> np.ndarray:
        """(1+y)^lam as a row broadcastable against a field."""
        return (1.0 + self.y) ** lam

    def __repr__(self) -> str:
        s = self.spec
        return f"Grid(nx={s.nx}, ny={s.ny}, Y={s.Y}, grading={s.grading!r}, beta={s.beta})"


def build_grid(spec: GridSpec) -> Grid:
    spec.validate()
    j = np.arange(spec.ny)
    if spec.grading == "uniform":
        y = j * (spec.Y / (spec.ny - 1))
    else:
        b = spec.beta
        y = spec.Y * np.expm1(b * j / (spec.ny - 1)) / np.expm1(b)
    y[0] = 0.0
    y[-1] = spec.Y
    return Grid(spec, y)


# --------------------------------------------------------------------------- x

def deriv_x(grid: Grid, f: np.ndarray, k: int = 1, scheme: str = "fourier") -> np.ndarray:
    """k-th periodic x-derivative along axis 0.

    The first column is subtracted before transforming, so x-independent
    input gives an exactly zero result.
    """
    if not 1 <= k <= 6:
        raise ValueError(f"x-derivative order must be in 1..6, got {k}")
    f = np.asarray(f, dtype=float)
    g = f - f[:1]
    if scheme == "fourier":
        n = f.shape[0]
        m = np.fft.rfftfreq(n, d=1.0 / n)
        symbol = (2j * np.pi * m) ** k
        if k % 2 == 1 and n % 2 == 0:
            symbol[-1] = 0.0
        shape = (-1,) + (1,) * (f.ndim - 1)
        return np.fft.irfft(np.fft.rfft(g, axis=0) * symbol.reshape(shape), n=n, axis=0)
    if scheme == "centered":
        h = 1.0 / f.shape[0]
        out = g
        for _ in range(k // 2):
            out = (np.roll(out, -1, axis=0) - 2.0 * out + np.roll(out, 1, axis=0)) / h**2
        if k % 2:
            out = (np.roll(out, -1, axis=0) - np.roll(out, 1, axis=0)) / (2.0 * h)
        return out
    raise ValueError(f"unknown x scheme {scheme!r}")


def mean_x(f: np.ndarray) -> np.ndarray:
    return np.mean(f, axis=0)


# --------------------------------------------------------------------------- y

def fd_weights(x0: float, nodes: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for the m-th derivative at x0 (Fornberg 1988)."""
    n = len(nodes)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = nodes[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = nodes[i] - x0
        for j in range(i):
            c3 = nodes[i] - nodes[j]
            c2 *= c3
            if j == i - 1:
                for kk in range(mn, 0, -1):
                    c[i, kk] = c1 * (kk * c[i - 1, kk - 1] - c5 * c[i - 1, kk]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for kk in range(mn, 0, -1):
                c[j, kk] = (c4 * c[j, kk] - kk * c[j, kk - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def _stencil(j: int, k: int, lo_min: int, hi_max: int) -> range:
    width = k + 1 if k % 2 == 0 else k + 2
    half = width // 2
    lo, hi = j - half, j + half
    if lo >= lo_min and hi <= hi_max:
        return range(lo, hi + 1)
    n1 = k + 3
    if lo < lo_min:
        return range(lo_min, lo_min + n1)
    return range(hi_max - n1 + 1, hi_max + 1)


def _y_operator(grid: Grid, k: int, ghost: bool):
    """Sparse D (ny x ny) and ghost-weight column b with
    deriv = D f + b * neumann_value (per x)."""
    key = (k, ghost)
    if key in grid._ops:
        return grid._ops[key]
    y = grid.y
    ny = grid.ny
    use_ghost = ghost and k <= 2
    h0 = y[1] - y[0]
    yy = np.concatenate(([-h0], y)) if use_ghost else y
    off = 1 if use_ghost else 0
    rows, cols, vals = [], [], []
    b = np.zeros(ny)
    for j in range(ny):
        idx = _stencil(j, k, -off, ny - 1)
        nodes = np.array([yy[i + off] for i in idx])
        w = fd_weights(y[j], nodes, k)
        for i, wi in zip(idx, w):
            if i == -1:
                # mirror value f_{-1} = f_1 - 2 h0 g
                rows.append(j)
                cols.append(1)
                vals.append(wi)
                b[j] += -2.0 * h0 * wi
            else:
                rows.append(j)
                cols.append(i)
                vals.append(wi)
    D = sp.csr_matrix((vals, (rows, cols)), shape=(ny, ny))
    grid._ops[key] = (D, b)
    return D, b


def deriv_y(grid: Grid, f: np.ndarray, k: int = 1, boundary: str = "one_sided",
            neumann_value=None) -> np.ndarray:
    """k-th y-derivative, second order everywhere.

    ``boundary="ghost"`` mirrors the wall node through ``neumann_value`` (the
    prescribed dy f at y=0, one value per x); only stencils of order <= 2 use
    the ghost, higher orders fall back to one-sided closures.  The top row is
    always one-sided.
    """
    if not 1 <= k <= 5:
        raise ValueError(f"y-derivative order must be in 1..5, got {k}")
    if boundary not in ("one_sided", "ghost"):
        raise ValueError(f"unknown boundary mode {boundary!r}")
    f = np.asarray(f, dtype=float)
    if grid.ny < k + 3:
        raise ValueError(f"{grid.ny} y-nodes cannot carry a stencil for order {k}")
    ghost = boundary == "ghost"
    D, b = _y_operator(grid, k, ghost)
    flat = f.reshape(-1, f.shape[-1])
    out = (D @ flat.T).T
    if ghost and k <= 2:
        if neumann_value is None:
            raise ValueError("ghost boundary needs neumann_value")
        g = np.broadcast_to(np.asarray(neumann_value, dtype=float), f.shape[:-1]).reshape(-1)
        out = out + np.outer(g, b)
    return out.reshape(f.shape)


def integrate_y_upper(grid: Grid, f: np.ndarray, decay: float) -> np.ndarray:
    """Partial integrals int_{y_j}^inf f dy.

    Cumulative Simpson rule on [y_j, Y] plus the tail f(Y)(1+Y)/(decay-1),
    exact when f ~ (1+y)^(-decay) beyond Y.
    """
    if not decay > 1:
        raise ValueError(f"tail model needs decay > 1, got {decay}")
    f = np.asarray(f, dtype=float)
    top = f[..., -1]
    fmax = np.max(np.abs(f)) if f.size else 0.0
    if fmax > 0 and np.max(np.abs(top)) > 0.1 * fmax:
        warnings.warn("integrand has not decayed at y=Y", TailUnreliableWarning, stacklevel=2)
    tail = top * (1.0 + grid.Y) / (decay - 1.0)
    rev = cumulative_simpson(f[..., ::-1], x=grid.Y - grid.y[::-1], axis=-1, initial=0.0)
    return rev[..., ::-1] + tail[..., None]


def integrate_y_lower(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Partial integrals int_0^{y_j} f dy (cumulative Simpson from the wall)."""
    return cumulative_simpson(np.asarray(f, dtype=float), x=grid.y, axis=-1, initial=0.0)


def weighted_l2(grid: Grid, f: np.ndarray, lam: float = 0.0, ymax: float | None = None) -> float:
    """( int_T int_0^Y (1+y)^(2 lam) f^2 dy dx )^(1/2), optionally cut at ``ymax``."""
    f = np.asarray(f, dtype=float)
    w = (1.0 + grid.y) ** (2.0 * lam)
    if ymax is None:
        col = simpson(w * f**2, x=grid.y, axis=-1)
    else:
        n = int(np.searchsorted(grid.y, ymax, side="right"))
        col = simpson((w * f**2)[..., :n], x=grid.y[:n], axis=-1)
    return float(np.sqrt(max(np.mean(col), 0.0)))


def l2_x(f: np.ndarray) -> float:
    """L2(T) norm of a function of x alone."""
    return float(np.sqrt(np.mean(np.asarray(f, dtype=float) ** 2)))


# ------------------------------------------------------------------ container

_HEADER = struct.Struct("<qqddd")


def write_field(path, grid: Grid, values: np.ndarray, lam: float = float("nan")) -> None:
    """Binary container: little-endian header (nx, ny, Y, beta, lam) then
    row-major float64 values.  ``beta = 0`` encodes the uniform grading."""
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.shape != grid.shape:
        raise ValueError(f"field shape {values.shape} does not match grid {grid.shape}")
    beta = grid.spec.beta if grid.spec.grading == "exponential" else 0.0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(grid.nx, grid.ny, grid.Y, beta, lam))
        fh.write(values.tobytes(order="C"))


def read_field(path) -> tuple[dict, np.ndarray]:
    data = Path(path).read_bytes()
    nx, ny, Y, beta, lam = _HEADER.unpack_from(data)
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(nx, ny).copy()
    header = {"nx": nx, "ny": ny, "Y": Y,
              "grading": "exponential" if beta > 0 else "uniform", "beta": beta, "lam": lam}
    return header, values


def export_csv(path, grid: Grid, values: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for i in range(grid.nx):
            for j in range(grid.ny):
                w.writerow([f"{grid.x[i]:.17g}", f"{grid.y[j]:.17g}", f"{values[i, j]:.17g}"])


def deriv(grid: Grid, f: np.ndarray, alpha: tuple[int, int], **ykw) -> np.ndarray:
    """Mixed derivative dx^alpha[0] dy^alpha[1] (x first, then y)."""
    ax, ay = alpha
    out = np.asarray(f, dtype=float)
    if ax:
        out = deriv_x(grid, out, ax)
    if ay:
        out = deriv_y(grid, out, ay, **ykw)
    return out


def discretization_slack(grid: Grid) -> float:
    """h^2 with h the coarsest spacing; added to inequality tolerances."""
    return max(grid.hx, float(np.max(grid.dy))) ** 2
