"""Weighted Sobolev norms, the cancellation quantities g_k and a = dy w / w,
solution-class membership and the almost-equivalence bracket."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .calculus import InequalityCheck
from .grid import Grid, deriv, deriv_x, deriv_y, discretization_slack, l2_x, weighted_l2


class InvalidParamsError(ValueError):
    pass


class MonotonicityViolated(ValueError):
    """Vorticity is not strictly positive; carries the first offending node."""

    def __init__(self, node: tuple[int, int], value: float):
        super().__init__(f"vorticity {value:.3e} <= 0 at node {node}")
        self.node = node
        self.value = value


class NotInClassError(ValueError):
    pass


@dataclass(frozen=True)
class NormParams:
    s: int = 4
    gamma: float = 1.0
    sigma: float = 2.6
    delta: float = 0.03

    def __post_init__(self):
        if self.s < 4 or self.s % 2:
            raise InvalidParamsError(f"s must be an even integer >= 4, got {self.s}")
        if self.gamma < 1:
            raise InvalidParamsError(f"gamma must be >= 1, got {self.gamma}")
        if not 0 < self.delta < 1:
            raise InvalidParamsError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.sigma > self.gamma + 0.5:
            raise InvalidParamsError(
                f"sigma = {self.sigma} <= gamma + 1/2 = {self.gamma + 0.5}: the solution class is empty")

    @property
    def low_margin(self) -> bool:
        """sigma within 1/2 of the emptiness threshold; truncation error in norms is uncontrolled."""
        return self.sigma - self.gamma - 0.5 < 0.5


def multi_indices(order: int):
    """All (a1, a2) with a1 + a2 <= order."""
    return [(a1, n - a1) for n in range(order + 1) for a1 in range(n, -1, -1)]


def norm_weighted_hs(grid: Grid, omega: np.ndarray, p: NormParams, max_x_order: int | None = None,
                     ymax: float | None = None) -> float:
    """(sum_{|alpha|<=s} ||(1+y)^(gamma+alpha_2) D^alpha w||^2)^(1/2), optionally over y <= ymax."""
    total = 0.0
    for a in multi_indices(p.s):
        if max_x_order is not None and a[0] > max_x_order:
            continue
        total += weighted_l2(grid, deriv(grid, omega, a), p.gamma + a[1], ymax) ** 2
    return float(np.sqrt(total))


def _require_monotone(omega: np.ndarray) -> None:
    if not np.all(omega > 0):
        node = np.unravel_index(int(np.argmin(omega)), omega.shape)
        raise MonotonicityViolated(tuple(int(i) for i in node), float(omega[node]))


def compute_a(grid: Grid, omega: np.ndarray, **ykw) -> np.ndarray:
    """a = dy w / w; refuses nonpositive vorticity rather than flooring it."""
    omega = np.asarray(omega, dtype=float)
    _require_monotone(omega)
    return deriv_y(grid, omega, 1, **ykw) / omega


def compute_g(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, k: int,
              a: np.ndarray | None = None) -> np.ndarray:
    """g_k = dx^k w - a dx^k (u - U)."""
    if a is None:
        a = compute_a(grid, omega)
    return deriv_x(grid, omega, k) - a * deriv_x(grid, u - np.asarray(U)[:, None], k)


def compute_g_dual(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, k: int) -> np.ndarray:
    """Quotient form w dy(dx^k(u - U) / w) of g_k."""
    _require_monotone(omega)
    return omega * deriv_y(grid, deriv_x(grid, u - np.asarray(U)[:, None], k) / omega, 1)


def norm_hs_g(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, p: NormParams,
              ymax: float | None = None) -> float:
    """Weighted H^s norm with the dx^s w term replaced by g_s."""
    gs = compute_g(grid, omega, u, U, p.s)
    rest = norm_weighted_hs(grid, omega, p, max_x_order=p.s - 1, ymax=ymax)
    return float(np.sqrt(weighted_l2(grid, gs, p.gamma, ymax) ** 2 + rest**2))


def u_minus_U_norm(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, p: NormParams) -> float:
    """||u - U||_{H^{s, gamma-1}}; y-derivatives of u are taken from w one order lower."""
    w = u - np.asarray(U)[:, None]
    total = 0.0
    for a in multi_indices(p.s):
        if a[1] == 0:
            d = deriv(grid, w, a)
        else:
            d = deriv(grid, omega, (a[0], a[1] - 1))
        total += weighted_l2(grid, d, p.gamma - 1 + a[1]) ** 2
    return float(np.sqrt(total))


@dataclass(frozen=True)
class MembershipReport:
    min_weighted_omega: float
    sup_I: float
    in_class: bool
    delta: float
    argmin: tuple[int, int]
    argmax_I: tuple[int, int]


def pointwise_I(grid: Grid, omega: np.ndarray, sigma: float) -> np.ndarray:
    """sum_{|alpha|<=2} |(1+y)^(sigma+alpha_2) D^alpha w|^2 at every node."""
    out = np.zeros(np.shape(omega))
    for a in multi_indices(2):
        out += (grid.weight(sigma + a[1]) * deriv(grid, omega, a)) ** 2
    return out


def membership(grid: Grid, omega: np.ndarray, p: NormParams, delta: float | None = None,
               ymax: float | None = None) -> MembershipReport:
    """Class test: (1+y)^sigma w >= delta and sup I <= 1/delta^2 (over y <= ymax if given)."""
    d = p.delta if delta is None else delta
    H = grid.weight(p.sigma) * omega
    I = pointwise_I(grid, omega, p.sigma)
    if ymax is not None:
        keep = grid.y <= ymax
        H = np.where(keep, H, np.inf)
        I = np.where(keep, I, -np.inf)
    imin = np.unravel_index(int(np.argmin(H)), H.shape)
    imax = np.unravel_index(int(np.argmax(I)), I.shape)
    mn, sI = float(H[imin]), float(I[imax])
    return MembershipReport(mn, sI, bool(mn >= d and sI <= 1.0 / d**2), d,
                            tuple(int(i) for i in imin), tuple(int(i) for i in imax))


@dataclass(frozen=True)
class NormReport:
    hs_gamma: float
    hs_gamma_g: float
    u_minus_U: float
    min_sigma_omega: float
    sup_I: float
    in_class: bool
    low_margin: bool

    def to_dict(self) -> dict:
        return asdict(self)


def norm_report(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, p: NormParams) -> NormReport:
    m = membership(grid, omega, p)
    return NormReport(norm_weighted_hs(grid, omega, p), norm_hs_g(grid, omega, u, U, p),
                      u_minus_U_norm(grid, omega, u, U, p), m.min_weighted_omega, m.sup_I,
                      m.in_class, p.low_margin)


@dataclass(frozen=True)
class EquivalenceRatios:
    lower_ratio: float
    upper_ratio: float


def almost_equiv_report(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, p: NormParams,
                        wall_tol: float = 1e-3) -> EquivalenceRatios:
    """Ratios of ||w||_{H^{s,gamma}} + ||u-U||_{H^{s,gamma-1}} to the g-norm (lower)
    and to the g-norm plus ||dx^s U|| (upper)."""
    m = membership(grid, omega, p)
    if not m.in_class:
        raise NotInClassError(f"field outside the class (min {m.min_weighted_omega:.3g}, sup I {m.sup_I:.3g})")
    if np.max(np.abs(u[:, 0])) > wall_tol:
        raise NotInClassError("u does not vanish at the wall")
    mid = norm_weighted_hs(grid, omega, p) + u_minus_U_norm(grid, omega, u, U, p)
    ng = norm_hs_g(grid, omega, u, U, p)
    dU = l2_x(deriv_x(grid, np.asarray(U)[:, None], p.s)[:, 0])
    return EquivalenceRatios(mid / ng, mid / (ng + dU))


def g_bracket(grid: Grid, omega: np.ndarray, u: np.ndarray, U: np.ndarray, k: int,
              p: NormParams) -> InequalityCheck:
    """||(1+y)^gamma g_k|| <= ||(1+y)^gamma dx^k w|| + delta^-2 ||(1+y)^(gamma-1) dx^k (u-U)||."""
    gk = compute_g(grid, omega, u, U, k)
    lhs = weighted_l2(grid, gk, p.gamma)
    rhs = (weighted_l2(grid, deriv_x(grid, omega, k), p.gamma)
           + weighted_l2(grid, deriv_x(grid, u - np.asarray(U)[:, None], k), p.gamma - 1) / p.delta**2)
    tol = 1e-6 + discretization_slack(grid)
    return InequalityCheck(lhs, rhs, bool(lhs <= rhs * (1 + tol)), tol)
