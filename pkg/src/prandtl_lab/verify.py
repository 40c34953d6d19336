"""Structural identity checks, the L2 comparison harness and limit studies."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from .grid import Grid, deriv_x, deriv_y, integrate_y_lower, weighted_l2
from .norms import NormParams, compute_a, compute_g, membership
from .prandtl import (SchemeConfig, SolverState, Trajectory, make_state,
                      regularized_px, simulate, step)


class StencilError(ValueError):
    pass


class StructureError(RuntimeError):
    """Raised when an assembly asks for a derivative it must not use."""


class ComparisonAborted(RuntimeError):
    def __init__(self, msg: str, record: "ComparisonRecord"):
        super().__init__(msg)
        self.record = record


LEVELS = ("k0", "k1", "k2")
MIN_WALL_NODES = 12


# ------------------------------------------------------------ boundary identities

def boundary_reduction_residual(state: SolverState, level: str, dpx_dt: np.ndarray | None = None,
                                stencil: str = "one_sided") -> float:
    """max_x |LHS - RHS| at y = 0 for the wall identities

    k0: dy w = px
    k1: dy^3 w = (dt - eps^2 dxx) px + w dx w
    k2: dy^5 w = eps^4 dx^4 px + 4 w dx dyy w + 2 px dx px - dx w dyy w - 2 eps^2 dx w dxx w
        (stationary px, every time derivative substituted).

    ``stencil="ghost"`` evaluates k0 with the same ghost closure the solver imposes.
    """
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    g = state.grid
    if g.ny < MIN_WALL_NODES:
        raise StencilError(f"need at least {MIN_WALL_NODES} y-nodes for one-sided wall stencils")
    w, px, eps = state.omega, state.px, state.eps
    if level == "k0":
        if stencil == "ghost":
            lhs = deriv_y(g, w, 1, "ghost", px)[:, 0]
        else:
            lhs = deriv_y(g, w, 1)[:, 0]
        return float(np.max(np.abs(lhs - px)))
    w0 = w[:, 0]
    wx0 = deriv_x(g, w, 1)[:, 0]
    if level == "k1":
        lhs = deriv_y(g, w, 3)[:, 0]
        rhs = -eps**2 * deriv_x(g, px, 2) + w0 * wx0
        if dpx_dt is not None:
            rhs = rhs + dpx_dt
        return float(np.max(np.abs(lhs - rhs)))
    if dpx_dt is not None and np.any(dpx_dt != 0):
        raise ValueError("the k2 identity is implemented for stationary px only")
    wyy = deriv_y(g, w, 2)
    lhs = deriv_y(g, w, 5)[:, 0]
    rhs = (eps**4 * deriv_x(g, px, 4) + 4 * w0 * deriv_x(g, wyy, 1)[:, 0]
           + 2 * px * deriv_x(g, px, 1) - wx0 * wyy[:, 0]
           - 2 * eps**2 * wx0 * deriv_x(g, w, 2)[:, 0])
    return float(np.max(np.abs(lhs - rhs)))


# ------------------------------------------------------------ snapshots

def triplet_steps(n_steps: int, n_samples: int = 4, window=(0.5, 1.0)) -> list[int]:
    """Step indices n-1, n, n+1 around ``n_samples`` sample steps in the window."""
    lo = max(1, int(np.ceil(window[0] * n_steps)))
    hi = min(n_steps - 1, int(np.floor(window[1] * n_steps)) - 1)
    centers = np.unique(np.linspace(lo, hi, n_samples).round().astype(int))
    return sorted({c + d for c in centers for d in (-1, 0, 1)})


def _triplets(traj: Trajectory):
    """Yield (i, dt) for snapshots with neighbours exactly one step away on both sides."""
    t = np.asarray(traj.times)
    for i in range(1, len(t) - 1):
        a, b = t[i] - t[i - 1], t[i + 1] - t[i]
        if abs(a - traj.dt) < 1e-9 * max(1.0, t[i]) and abs(b - traj.dt) < 1e-9 * max(1.0, t[i]):
            yield i, traj.dt


def wall_velocity(g: Grid, omega: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """u = int_0^y w, v = -int_0^y dx u.

    Anchored at the wall so that u(x, 0) = 0 holds exactly; on a truncated
    domain this form satisfies the integrated vorticity balance on [0, y]
    without any model of the mass above y = Y.
    """
    u = integrate_y_lower(g, omega)
    v = -integrate_y_lower(g, deriv_x(g, u, 1))
    return u, v


def _fields(traj: Trajectory, i: int):
    u, v = wall_velocity(traj.grid, traj.omegas[i])
    return traj.omegas[i], u, v


def _transport_op(g: Grid, f: np.ndarray, df_dt: np.ndarray, u, v, eps: float) -> np.ndarray:
    """(dt + u dx + v dy - eps^2 dxx - dyy) f."""
    out = df_dt + u * deriv_x(g, f, 1) + v * deriv_y(g, f, 1) - deriv_y(g, f, 2)
    if eps:
        out -= eps**2 * deriv_x(g, f, 2)
    return out


def _residual_norm(g: Grid, r: np.ndarray, lam: float) -> float:
    return weighted_l2(g, r, lam, ymax=g.Y / 2)


# ------------------------------------------------------------ a equation

def _a(g: Grid, w: np.ndarray, px: np.ndarray) -> np.ndarray:
    return compute_a(g, w, boundary="ghost", neumann_value=px)


def a_evolution_residual(traj: Trajectory) -> np.ndarray:
    """(dt + u dx + v dy - eps^2 dxx - dyy) a - [2 eps^2 (dx w / w) dx a + 2 a dy a - g_1 + a dx U],
    weighted by (1+y)^gamma on y <= Y/2, at every snapshot triplet."""
    g, eps, p = traj.grid, traj.eps, traj.params
    Ux = deriv_x(g, traj.U, 1)
    out = []
    for i, dt in _triplets(traj):
        w, u, v = _fields(traj, i)
        a = _a(g, w, traj.px)
        da = (_a(g, traj.omegas[i + 1], traj.px) - _a(g, traj.omegas[i - 1], traj.px)) / (2 * dt)
        lhs = _transport_op(g, a, da, u, v, eps)
        g1 = compute_g(g, w, u, traj.U, 1, a=a)
        rhs = 2 * a * deriv_y(g, a, 1) - g1 + a * Ux[:, None]
        if eps:
            rhs += 2 * eps**2 * deriv_x(g, w, 1) / w * deriv_x(g, a, 1)
        out.append(_residual_norm(g, lhs - rhs, p.gamma))
    return np.array(out)


# ------------------------------------------------------------ g_s equation

class DerivativeCache:
    """Lazily computed derivatives of one snapshot.

    ``omega_x(k)`` refuses k > ``max_omega_x``: the g_s right-hand side is
    assembled through this cache, so asking for the (s+1)-th x-derivative of
    w is a hard error rather than a silent term.
    """

    def __init__(self, g: Grid, omega, u, v, U, px, s: int):
        self.g, self.omega, self.u, self.v = g, omega, u, v
        self.U = np.asarray(U)
        self.px = px
        self.max_omega_x = s
        self.requests: list[tuple[str, int]] = []
        self._c: dict = {}

    def _get(self, key, fn):
        if key not in self._c:
            self._c[key] = fn()
        return self._c[key]

    def omega_x(self, k: int) -> np.ndarray:
        self.requests.append(("omega_x", k))
        if k > self.max_omega_x:
            raise StructureError(f"assembly requested dx^{k} w beyond the allowed order {self.max_omega_x}")
        return self.omega if k == 0 else self._get(("wx", k), lambda: deriv_x(self.g, self.omega, k))

    def omega_xy(self, k: int) -> np.ndarray:
        self.requests.append(("omega_xy", k))
        if k > self.max_omega_x - 1:
            raise StructureError(f"assembly requested dx^{k} dy w beyond the allowed order")
        return self._get(("wxy", k), lambda: deriv_y(self.g, self.omega_x(k), 1))

    def umU_x(self, k: int) -> np.ndarray:
        f = self.u - self.U[:, None]
        return f if k == 0 else self._get(("ux", k), lambda: deriv_x(self.g, f, k))

    def u_x(self, k: int) -> np.ndarray:
        return self._get(("uxx", k), lambda: deriv_x(self.g, self.u, k))

    def v_x(self, k: int) -> np.ndarray:
        return self._get(("vx", k), lambda: deriv_x(self.g, self.v, k))

    def U_x(self, k: int) -> np.ndarray:
        return self._get(("Ux", k), lambda: deriv_x(self.g, self.U[:, None], k))

    def a(self) -> np.ndarray:
        return self._get("a", lambda: _a(self.g, self.omega, self.px))

    def gk(self, k: int) -> np.ndarray:
        return self._get(("g", k), lambda: self.omega_x(k) - self.a() * self.umU_x(k))


def gs_rhs(c: DerivativeCache, s: int, eps: float) -> np.ndarray:
    """Right-hand side of the g_s transport-diffusion equation.

    Every w-derivative goes through ``c.omega_x`` / ``c.omega_xy`` with
    x-order at most s, which is the cancellation the quantity g_s provides.
    """
    g = c.g
    a = c.a()
    ay = deriv_y(g, a, 1)
    rhs = 2 * c.gk(s) * ay - c.gk(1) * c.U_x(s)
    if eps:
        ax = deriv_x(g, a, 1)
        rhs += 2 * eps**2 * (c.umU_x(s + 1) - c.omega_x(1) / c.omega * c.umU_x(s)) * ax
    for j in range(1, s):
        C = comb(s, j)
        rhs -= C * c.gk(j + 1) * c.u_x(s - j)
        rhs -= C * c.v_x(s - j) * (c.omega_xy(j) - a * c.omega_x(j))
    for j in range(s):
        rhs += a * comb(s, j) * c.umU_x(j) * c.U_x(s - j + 1)
    return rhs


def gs_evolution_residual(traj: Trajectory, p: NormParams | None = None) -> np.ndarray:
    """Weighted L2 mismatch of the g_s equation at every snapshot triplet."""
    g, eps = traj.grid, traj.eps
    p = p or traj.params
    s = p.s
    out = []
    for i, dt in _triplets(traj):
        w, u, v = _fields(traj, i)
        cache = DerivativeCache(g, w, u, v, traj.U, traj.px, s)
        gs = cache.gk(s)

        def gs_at(j):
            wj, uj, _ = _fields(traj, j)
            return compute_g(g, wj, uj, traj.U, s, a=_a(g, wj, traj.px))

        dgs = (gs_at(i + 1) - gs_at(i - 1)) / (2 * dt)
        lhs = _transport_op(g, gs, dgs, u, v, eps)
        out.append(_residual_norm(g, lhs - gs_rhs(cache, s, eps), p.gamma))
    return np.array(out)


# ------------------------------------------------------------ momentum form

def momentum_residual(traj: Trajectory) -> np.ndarray:
    """dt u + u dx u + v dy u - eps^2 dxx u - dyy u + px, weighted (1+y)^(gamma-1) on y <= Y/2."""
    g, eps, p = traj.grid, traj.eps, traj.params
    out = []
    for i, dt in _triplets(traj):
        w, u, v = _fields(traj, i)
        _, up, _ = _fields(traj, i + 1)
        _, um, _ = _fields(traj, i - 1)
        r = ((up - um) / (2 * dt) + u * deriv_x(g, u, 1) + v * w
             - deriv_y(g, w, 1, "ghost", traj.px) + traj.px[:, None])
        if eps:
            r -= eps**2 * deriv_x(g, u, 2)
        out.append(_residual_norm(g, r, p.gamma - 1))
    return np.array(out)


# ------------------------------------------------------------ comparison

@dataclass
class ComparisonRecord:
    times: list = field(default_factory=list)
    g_tilde_l2: list = field(default_factory=list)
    dy_g_tilde_l2: list = field(default_factory=list)
    fitted_C: float = float("nan")
    validation_ratio: float = float("nan")
    holds: bool = False


def g_tilde(g: Grid, w1, u1, w2, u2, px2) -> np.ndarray:
    """w1 - w2 - (dy w2 / w2)(u1 - u2), equal to w2 dy((u1 - u2) / w2)."""
    return w1 - w2 - _a(g, w2, px2) * (u1 - u2)


def g_tilde_dual(g: Grid, u1, w2, u2) -> np.ndarray:
    """Quotient form w2 dy((u1 - u2) / w2)."""
    return w2 * deriv_y(g, (u1 - u2) / w2, 1)


def fit_gronwall_constant(times, gl2, dygl2) -> float:
    """Smallest C >= 0 with |g(t)|^2 + int |dy g|^2 - |g(0)|^2 <= C int |g|^2 at every sample."""
    t = np.asarray(times)
    a2 = np.asarray(gl2) ** 2
    d2 = np.asarray(dygl2) ** 2
    int_d = np.concatenate([[0.0], np.cumsum(0.5 * (d2[1:] + d2[:-1]) * np.diff(t))])
    int_g = np.concatenate([[0.0], np.cumsum(0.5 * (a2[1:] + a2[:-1]) * np.diff(t))])
    lhs = a2 + int_d - a2[0]
    ok = int_g > 0
    if not np.any(ok):
        return 0.0
    return float(max(0.0, np.max(lhs[ok] / int_g[ok])))


def comparison_run(grid: Grid, omega0_a, omega0_b, U, cfg: SchemeConfig, T_end: float,
                   params: NormParams, eps: float = 0.0, sample_every: int = 1,
                   slack: float = 1.2) -> ComparisonRecord:
    """Evolve two data in lock-step and track g~ = w1 - w2 - (dy w2/w2)(u1 - u2).

    ``U`` is either one outer flow shared by both runs or a pair (U_a, U_b).
    The Gronwall constant is fitted on [0, T/2] and validated on (T/2, T] in the
    form |g~(t)| <= |g~(0)| e^{C t} * slack.
    """
    Ua, Ub = (U, U) if np.ndim(U) == 1 else U
    s1 = make_state(grid, omega0_a, Ua, eps, params)
    s2 = make_state(grid, omega0_b, Ub, eps, params)
    rec = ComparisonRecord()
    n_steps = int(round(T_end / cfg.dt))

    def record(a: SolverState, b: SolverState):
        gt = g_tilde(grid, a.omega, a.u, b.omega, b.u, b.px)
        rec.times.append(a.t)
        rec.g_tilde_l2.append(weighted_l2(grid, gt))
        rec.dy_g_tilde_l2.append(weighted_l2(grid, deriv_y(grid, gt, 1)))

    record(s1, s2)
    for n in range(1, n_steps + 1):
        s1, s2 = step(s1, cfg), step(s2, cfg)
        if n % sample_every == 0 or n == n_steps:
            for s in (s1, s2):
                if not (np.all(s.omega > 0)
                        and membership(grid, s.omega, params, ymax=0.75 * grid.Y).in_class):
                    raise ComparisonAborted(f"class membership lost at t = {s.t:g}", rec)
            record(s1, s2)
    t = np.asarray(rec.times)
    half = t <= 0.5 * T_end + 1e-12
    rec.fitted_C = fit_gronwall_constant(t[half], np.asarray(rec.g_tilde_l2)[half],
                                         np.asarray(rec.dy_g_tilde_l2)[half])
    g0 = rec.g_tilde_l2[0]
    val = ~half
    if g0 == 0.0:
        rec.validation_ratio = 0.0 if max(rec.g_tilde_l2) == 0.0 else np.inf
    else:
        bound = g0 * np.exp(rec.fitted_C * t[val]) * slack
        rec.validation_ratio = float(np.max(np.asarray(rec.g_tilde_l2)[val] / bound))
    rec.holds = bool(rec.validation_ratio <= 1.0)
    return rec


# ------------------------------------------------------------ limit studies

@dataclass
class StudyResult:
    diffs: list
    order: float = float("nan")


def eps_convergence_study(grid: Grid, omega0, U, eps_list, T_end: float, cfg: SchemeConfig,
                          params: NormParams) -> StudyResult:
    """diffs[i] = |w^{eps_i} - w^{eps_{i+1}}| at T_end; order from the first two diffs."""
    finals = []
    for e in eps_list:
        tr = simulate(make_state(grid, omega0, U, e, params), cfg, T_end, record_every=10**9)
        finals.append(tr.omegas[-1])
    diffs = [weighted_l2(grid, a - b) for a, b in zip(finals[:-1], finals[1:])]
    order = float("nan")
    if len(diffs) >= 2 and diffs[0] > 0 and diffs[1] > 0:
        order = float(np.log(diffs[0] / diffs[1]) / np.log(eps_list[0] / eps_list[1]))
    return StudyResult(diffs, order)


def truncation_convergence_study(state0: SolverState, R_list, cfg: SchemeConfig, T_end: float) -> StudyResult:
    """diffs[i] = |w_{R_i} - w_untruncated| at T_end."""
    from dataclasses import replace
    ref = simulate(state0, replace(cfg, R=None), T_end, record_every=10**9).omegas[-1]
    diffs = []
    for R in R_list:
        w = simulate(state0, replace(cfg, R=R), T_end, record_every=10**9).omegas[-1]
        diffs.append(weighted_l2(state0.grid, w - ref))
    return StudyResult(diffs)


def observed_orders(values, ratio: float = 2.0, floor: float = 1e-13) -> list[float]:
    """log_ratio(v_i / v_{i+1}); pairs already at roundoff count as converged (inf)."""
    out = []
    for a, b in zip(values[:-1], values[1:]):
        if a <= floor and b <= floor:
            out.append(np.inf)
        elif b <= 0:
            out.append(np.inf)
        else:
            out.append(float(np.log(a / b) / np.log(ratio)))
    return out
