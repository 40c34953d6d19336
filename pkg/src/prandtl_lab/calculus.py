"""Executable calculus inequalities: Hardy, Sobolev, trace, pointwise
interpolation, and weighted decay-rate fitting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from .grid import Grid, deriv, deriv_x, deriv_y, discretization_slack, l2_x, weighted_l2


class DomainError(ValueError):
    pass


class UndefinedRatioError(ValueError):
    pass


class PremiseViolatedError(ValueError):
    pass


class InsufficientSignalError(ValueError):
    pass


# f(., Y) must be below this fraction of max|f| for the decaying Hardy form
DECAY_THRESHOLD = 5e-3


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool
    tol: float


def _check(lhs: float, rhs: float, tol: float) -> InequalityCheck:
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs * (1.0 + tol) + 1e-300), tol)


def hardy_upper(grid: Grid, f: np.ndarray, lam: float,
                decay_threshold: float = DECAY_THRESHOLD) -> InequalityCheck:
    """||(1+y)^lam f|| <= 2/(2 lam+1) ||(1+y)^(lam+1) dy f||, lam > -1/2."""
    if not lam > -0.5:
        raise DomainError(f"needs lam > -1/2, got {lam}")
    f = np.asarray(f, dtype=float)
    fmax = np.max(np.abs(f))
    if fmax > 0 and np.max(np.abs(f[:, -1])) > decay_threshold * fmax:
        raise DomainError("field has not decayed at y = Y")
    lhs = weighted_l2(grid, f, lam)
    rhs = 2.0 / (2.0 * lam + 1.0) * weighted_l2(grid, deriv_y(grid, f, 1), lam + 1.0)
    return _check(lhs, rhs, 1e-6 + discretization_slack(grid))


def hardy_lower(grid: Grid, f: np.ndarray, lam: float) -> InequalityCheck:
    """||(1+y)^lam f|| <= sqrt(-1/(2 lam+1)) ||f(.,0)|| - 2/(2 lam+1) ||(1+y)^(lam+1) dy f||,
    lam < -1/2."""
    if not lam < -0.5:
        raise DomainError(f"needs lam < -1/2, got {lam}")
    f = np.asarray(f, dtype=float)
    lhs = weighted_l2(grid, f, lam)
    c = 2.0 * lam + 1.0
    rhs = np.sqrt(-1.0 / c) * l2_x(f[:, 0]) - 2.0 / c * weighted_l2(grid, deriv_y(grid, f, 1), lam + 1.0)
    return _check(lhs, rhs, 1e-6 + discretization_slack(grid))


def sobolev_ratio(grid: Grid, f: np.ndarray) -> float:
    """||f||_inf / (||f|| + ||dx f|| + ||dyy f||)."""
    f = np.asarray(f, dtype=float)
    den = (weighted_l2(grid, f) + weighted_l2(grid, deriv_x(grid, f, 1))
           + weighted_l2(grid, deriv_y(grid, f, 2)))
    if den == 0.0:
        raise UndefinedRatioError("sobolev ratio undefined for the zero field")
    return float(np.max(np.abs(f)) / den)


def _strip_integral(grid: Grid, g: np.ndarray, ytop: float = 1.0) -> float:
    """int_T int_0^ytop g dy dx, with a node inserted at ytop by linear interpolation."""
    n = int(np.searchsorted(grid.y, ytop, side="left"))
    ys = grid.y[:n]
    cols = g[:, :n]
    if n < grid.ny and grid.y[n] != ytop:
        w = (ytop - grid.y[n - 1]) / (grid.y[n] - grid.y[n - 1])
        top = (1 - w) * g[:, n - 1] + w * g[:, n]
    else:
        top = g[:, min(n, grid.ny - 1)]
    ys = np.append(ys, ytop)
    cols = np.concatenate([cols, top[:, None]], axis=1)
    return float(np.mean(trapezoid(cols, ys, axis=1)))


TRACE_CONSTANT = 2.0


def trace_bound(grid: Grid, f: np.ndarray) -> InequalityCheck:
    """int_T |f(x,0)| dx <= 2 (int_0^1 int_T |f| + int_0^1 int_T |dy f|)."""
    f = np.asarray(f, dtype=float)
    lhs = float(np.mean(np.abs(f[:, 0])))
    rhs = TRACE_CONSTANT * (_strip_integral(grid, np.abs(f))
                            + _strip_integral(grid, np.abs(deriv_y(grid, f, 1))))
    return _check(lhs, rhs, 1e-6 + discretization_slack(grid))


def pointwise_interp_check(grid: Grid, f: np.ndarray, C0: float, b0: float, C2: float, b2: float,
                           direction: str = "y") -> bool:
    """Check |df| <= 2 sqrt(C0 C2) (1+y)^(-(b0+b2)/2) given the premises
    |f| <= C0 (1+y)^-b0 and |d^2 f| <= C2 (1+y)^-b2."""
    if direction not in ("x", "y"):
        raise ValueError(f"direction must be 'x' or 'y', got {direction!r}")
    if direction == "y" and (b0 < 0 or b2 < 0):
        raise PremiseViolatedError("y-direction needs nonnegative decay exponents")
    f = np.asarray(f, dtype=float)
    tol = 1e-3 + discretization_slack(grid)
    w = 1.0 + grid.y
    d = deriv_x if direction == "x" else deriv_y
    d1, d2 = d(grid, f, 1), d(grid, f, 2)
    if np.any(np.abs(f) > C0 * w ** -b0 * (1 + tol)) or np.any(np.abs(d2) > C2 * w ** -b2 * (1 + tol)):
        raise PremiseViolatedError("premise bounds on f or its second derivative do not hold")
    bound = 2.0 * np.sqrt(C0 * C2) * w ** (-(b0 + b2) / 2.0)
    return bool(np.all(np.abs(d1) <= bound * (1.0 + tol)))


def measured_premise(grid: Grid, f: np.ndarray, b0: float, b2: float, direction: str = "y") -> tuple[float, float]:
    """Smallest C0, C2 for which the premises of :func:`pointwise_interp_check` hold."""
    d = deriv_x if direction == "x" else deriv_y
    w = 1.0 + grid.y
    return (float(np.max(np.abs(f) * w**b0)), float(np.max(np.abs(d(grid, f, 2)) * w**b2)))


def decay_target(alpha: tuple[int, int], sigma: float, gamma: float, s: int) -> float:
    """Expected pointwise decay exponent of D^alpha for a class member."""
    n = alpha[0] + alpha[1]
    if n <= 2:
        return sigma + alpha[1]
    if n <= s + 1:
        m = 2.0 ** (n - 2)
        return (sigma + (m - 1.0) * gamma) / m + alpha[1]
    if n == s + 2:
        return gamma + alpha[1]
    raise ValueError(f"no decay rate for |alpha| = {n} > s+2")


@dataclass(frozen=True)
class DecayFit:
    b_hat: float
    b_target: float
    meets: bool


def fit_decay_exponent(grid: Grid, f: np.ndarray, alpha: tuple[int, int], sigma: float,
                       gamma: float, s: int, noise_floor: float = 1e-13) -> DecayFit:
    """Least-squares decay exponent of |D^alpha f| against log(1+y) on [Y/4, 3Y/4]."""
    f = np.asarray(f, dtype=float)
    Df = deriv(grid, f, alpha) if any(alpha) else f
    win = (grid.y >= grid.Y / 4) & (grid.y <= 3 * grid.Y / 4)
    amp = np.abs(Df[:, win])
    scale = max(np.max(np.abs(f)), 1e-300)
    if not np.any(amp > noise_floor * scale):
        raise InsufficientSignalError(f"D^{alpha} f is below the noise floor on the fit window")
    i = int(np.argmax(np.sum(amp, axis=1)))
    row = amp[i]
    keep = row > noise_floor * scale
    if keep.sum() < 3:
        raise InsufficientSignalError(f"too few resolvable nodes for D^{alpha} f")
    slope = np.polyfit(np.log1p(grid.y[win][keep]), np.log(row[keep]), 1)[0]
    b_hat = -float(slope)
    b_target = decay_target(alpha, sigma, gamma, s)
    return DecayFit(b_hat, b_target, bool(b_hat >= b_target - 0.1))


# ------------------------------------------------------------ field families

@dataclass(frozen=True)
class ModeTerm:
    coeff: float
    m: int
    phase: float
    p: float
    q: float


def family_field(grid: Grid, terms: list[ModeTerm]) -> np.ndarray:
    """Sum of c cos(2 pi m x + phase) (1+y)^-p e^{-q y}."""
    out = np.zeros(grid.shape)
    for t in terms:
        out += (t.coeff * np.cos(2 * np.pi * t.m * grid.X + t.phase)
                * (1.0 + grid.YY) ** -t.p * np.exp(-t.q * grid.YY))
    return out


def random_terms(rng: np.random.Generator, n_terms: int = 3, max_mode: int = 3,
                 p_range=(2.0, 4.0), q_range=(0.0, 1.0)) -> list[ModeTerm]:
    return [ModeTerm(float(rng.uniform(-1, 1)), int(rng.integers(0, max_mode + 1)),
                     float(rng.uniform(0, 2 * np.pi)), float(rng.uniform(*p_range)),
                     float(rng.uniform(*q_range)))
            for _ in range(n_terms)]
