"""Runtime checks of the a priori estimates: energy growth, weighted sup
bounds, the lower bound, lifespan, and parabolic max/min principles.

Every check returns a report; none of them stops a run.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .calculus import sobolev_ratio
from .grid import Grid, deriv_x, l2_x, weighted_l2
from .norms import NormParams, NormReport, compute_g, membership, norm_hs_g, norm_weighted_hs
from .prandtl import SolverState, Trajectory

# Monitors look at y <= MONITOR_WINDOW * Y: the homogeneous Neumann row at the
# truncation height leaves a thin layer whose second y-derivative is inflated
# by the (1+y)^(sigma+2) weight.
MONITOR_WINDOW = 0.75


@dataclass
class EnergyTrace:
    times: list = field(default_factory=list)
    e_g: list = field(default_factory=list)
    e_hs: list = field(default_factory=list)
    I_sup: list = field(default_factory=list)
    min_sigma_omega: list = field(default_factory=list)
    F_vals: list = field(default_factory=list)
    wall_sup_u: list = field(default_factory=list)
    boundary_residuals: dict = field(default_factory=dict)
    sup_U_s: float = 0.0  # sup_t ||dx^s U||, enters G(t)

    def __len__(self) -> int:
        return len(self.times)

    def head(self, n: int) -> "EnergyTrace":
        """First n samples (a truncated trace, as from an interrupted run)."""
        return EnergyTrace(self.times[:n], self.e_g[:n], self.e_hs[:n], self.I_sup[:n],
                           self.min_sigma_omega[:n], self.F_vals[:n], self.wall_sup_u[:n],
                           {k: v[:n] for k, v in self.boundary_residuals.items()}, self.sup_U_s)

    def omega_sup(self) -> np.ndarray:
        """Omega(t): running supremum of the g-norm."""
        return np.maximum.accumulate(np.asarray(self.e_g, dtype=float))

    def G(self) -> np.ndarray:
        return self.omega_sup() + self.sup_U_s


@dataclass
class FittedConstants:
    C_energy: float
    C_linf: float
    lam: float
    C_sobolev: float = 1.0

    def __post_init__(self):
        for k in ("C_energy", "C_linf", "lam", "C_sobolev"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")


# ------------------------------------------------------------ F(t)

def hs_norm_x(f: np.ndarray, order: int) -> float:
    """H^order(T) norm of a periodic row via Fourier multipliers."""
    f = np.asarray(f, dtype=float)
    n = f.size
    k = 2 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    c = np.fft.rfft(f) / n
    w = np.full(c.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    mult = sum(k ** (2 * j) for j in range(order + 1))
    return float(np.sqrt(np.sum(w * mult * np.abs(c) ** 2)))


def compute_F(grid: Grid, U: np.ndarray, px, p: NormParams, C_fit: float = 1.0) -> np.ndarray:
    """F = C (1 + ||dx^{s+1} U||_inf^4) + C ||dx p||_{H^s}^2 for stationary U.

    ``px`` may be one row or an array of rows (one per sample).
    """
    px = np.atleast_2d(np.asarray(px, dtype=float))
    dU = deriv_x(grid, np.asarray(U)[:, None], p.s + 1)[:, 0]
    base = 1.0 + np.max(np.abs(dU)) ** 4
    return np.array([C_fit * (base + hs_norm_x(row, p.s) ** 2) for row in px])


# ------------------------------------------------------------ trace

def build_trace(traj: Trajectory, p: NormParams | None = None, residuals: bool = True,
                window: float = MONITOR_WINDOW) -> EnergyTrace:
    """Evaluate every monitored quantity on the stored snapshots, over y <= window * Y."""
    from .verify import LEVELS, MIN_WALL_NODES, boundary_reduction_residual
    p = p or traj.params
    g = traj.grid
    ymax = window * g.Y
    tr = EnergyTrace()
    tr.sup_U_s = l2_x(deriv_x(g, np.asarray(traj.U)[:, None], p.s)[:, 0])
    F1 = float(compute_F(g, traj.U, traj.px, p, 1.0)[0])
    stride = max(1, int(round((traj.times[1] - traj.times[0]) / traj.dt))) if len(traj.times) > 1 else 1
    want_res = residuals and g.ny >= MIN_WALL_NODES
    if want_res:
        tr.boundary_residuals = {k: [] for k in LEVELS}
    for i, t in enumerate(traj.times):
        st = traj.state(i)
        m = membership(g, st.omega, p, ymax=ymax)
        tr.times.append(float(t))
        tr.e_g.append(norm_hs_g(g, st.omega, st.u, st.U, p, ymax))
        tr.e_hs.append(norm_weighted_hs(g, st.omega, p, ymax=ymax))
        tr.I_sup.append(m.sup_I)
        tr.min_sigma_omega.append(m.min_weighted_omega)
        tr.F_vals.append(F1)
        j = min(i * stride, len(traj.wall_sup_u) - 1)
        tr.wall_sup_u.append(float(traj.wall_sup_u[j]) if traj.wall_sup_u else st.matching_error())
        if want_res:
            for k in LEVELS:
                tr.boundary_residuals[k].append(boundary_reduction_residual(st, k))
    return tr


# ------------------------------------------------------------ energy

@dataclass
class EnergyReport:
    violated_at: float | None
    margin: np.ndarray
    blowup_time: float | None
    bound: np.ndarray


def energy_ode_bound(trace: EnergyTrace, consts: FittedConstants, s: int, tol: float = 0.2,
                     start: int = 0) -> EnergyReport:
    """Integrate E' = C E^{s/2} + C F from E(t0) = e_g(t0)^2 and compare with e_g^2.

    F is the unit-constant sample series, scaled by C_energy (one generic constant).
    """
    t = np.asarray(trace.times, dtype=float)[start:]
    e2 = np.asarray(trace.e_g, dtype=float)[start:] ** 2
    F = np.asarray(trace.F_vals, dtype=float)[start:]
    C = consts.C_energy

    def rhs(tt, E):
        Fi = np.interp(tt, t, F)
        return C * np.maximum(E, 0.0) ** (s / 2) + C * Fi

    def blow(tt, E):
        return E[0] - 1e12 * max(1.0, e2[0])
    blow.terminal = True

    sol = solve_ivp(rhs, (t[0], t[-1]), [e2[0]], t_eval=t, events=blow, rtol=1e-10, atol=1e-14,
                    method="LSODA")
    E = np.full(t.shape, np.inf)
    E[:sol.y.shape[1]] = sol.y[0]
    blowup = float(sol.t_events[0][0]) if sol.t_events[0].size else None
    margin = E * (1 + tol) - e2
    bad = np.nonzero(margin < 0)[0]
    return EnergyReport(float(t[bad[0]]) if bad.size else None, margin, blowup, E)


def _bisect_min(ok, lo: float = 0.0, hi: float = 1.0, iters: int = 60, floor: float = 1e-12) -> float:
    """Smallest c in [lo, inf) with ok(c); ok must be monotone in c."""
    if ok(max(lo, floor)):
        return max(lo, floor)
    while not ok(hi):
        hi *= 4.0
        if hi > 1e30:
            raise RuntimeError("no admissible constant found")
    a = max(lo, floor)
    for _ in range(iters):
        mid = np.sqrt(a * hi)
        if ok(mid):
            hi = mid
        else:
            a = mid
    return float(hi)


def _split(trace: EnergyTrace, frac: float) -> int:
    t = np.asarray(trace.times)
    return int(np.searchsorted(t, t[0] + frac * (t[-1] - t[0]), side="right"))


def fit_energy_constant(trace: EnergyTrace, s: int, frac: float = 0.5) -> float:
    """Smallest C_energy for which the comparison ODE dominates e_g^2 on the calibration window."""
    n = _split(trace, frac)
    cal = trace.head(n)

    def ok(c):
        r = energy_ode_bound(cal, FittedConstants(c, 1.0, 1.0), s, tol=0.0)
        return r.violated_at is None
    return _bisect_min(ok)


# ------------------------------------------------------------ sup bounds

@dataclass
class BoundReport:
    holds: bool
    lhs: np.ndarray
    rhs: np.ndarray
    first_violation: float | None
    suspended_from: float | None = None
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lhs"] = list(map(float, self.lhs))
        d["rhs"] = list(map(float, self.rhs))
        return d


def _report(t, lhs, rhs, tol, sign=+1, valid=None) -> BoundReport:
    t = np.asarray(t)
    valid = np.ones(t.shape, bool) if valid is None else valid
    with np.errstate(invalid="ignore", over="ignore"):
        if sign > 0:
            bad = valid & (lhs > rhs * (1 + tol))
        else:
            bad = valid & (lhs < rhs - tol * np.abs(rhs))
    idx = np.nonzero(bad)[0]
    susp = np.nonzero(~valid)[0]
    return BoundReport(not idx.size, lhs, rhs, float(t[idx[0]]) if idx.size else None,
                       float(t[susp[0]]) if susp.size else None,
                       "check suspended after the first factor changed sign" if susp.size else "")


def linf_rhs(trace: EnergyTrace, consts: FittedConstants) -> np.ndarray:
    t = np.asarray(trace.times) - trace.times[0]
    Om, G = trace.omega_sup(), trace.G()
    return (np.maximum(trace.I_sup[0], 6 * consts.C_sobolev**2 * Om**2)
            * np.exp(consts.C_linf * (1 + G) * t))


def linf_bounds_check(trace: EnergyTrace, consts: FittedConstants, s: int, tol: float = 0.2) -> BoundReport:
    """I_sup(t) <= max{I(0), 6 C_sob^2 Omega^2} exp(C (1+G) t)."""
    return _report(trace.times, np.asarray(trace.I_sup), linf_rhs(trace, consts), tol)


def lower_rhs(trace: EnergyTrace, C: float) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(trace.times) - trace.times[0]
    Om, G = trace.omega_sup(), trace.G()
    with np.errstate(over="ignore", invalid="ignore"):
        first = 1 - C * (1 + G) * t * np.exp(C * (1 + G) * t)
        second = trace.min_sigma_omega[0] - C * Om * t
        return first * second, (first >= 0) & (second >= 0)


def lower_bound_check(trace: EnergyTrace, consts: FittedConstants, tol: float = 0.0) -> BoundReport:
    """min (1+y)^sigma w (t) >= (1 - C(1+G)t e^{C(1+G)t}) (min_0 - C Omega t)
    while both factors are nonnegative."""
    rhs, valid = lower_rhs(trace, consts.C_linf)
    return _report(trace.times, np.asarray(trace.min_sigma_omega), rhs, tol, sign=-1, valid=valid)


def measured_sobolev_constant(grid: Grid, fields) -> float:
    return float(max(sobolev_ratio(grid, f) for f in fields))


def fit_linf_constant(trace: EnergyTrace, C_sobolev: float, frac: float = 0.5) -> float:
    """Smallest C for which both the I bound and the lower bound hold on the
    calibration window (both are monotone in C)."""
    cal = trace.head(_split(trace, frac))

    def ok(c):
        k = FittedConstants(1.0, c, 1.0, C_sobolev)
        return linf_bounds_check(cal, k, 0, tol=0.0).holds and lower_bound_check(cal, k).holds
    return _bisect_min(ok)


def coefficient_lambda(traj: Trajectory, sigma: float) -> float:
    """sup |sigma v/(1+y) + sigma(sigma+1)/(1+y)^2| over the run: the zeroth-order
    coefficient of the equation for H = (1+y)^sigma w."""
    g = traj.grid
    base = sigma * (sigma + 1) / (1 + g.y) ** 2
    lam = 0.0
    for i in range(len(traj.times)):
        v = traj.state(i).v
        lam = max(lam, float(np.max(np.abs(sigma * v / (1 + g.y) + base))))
    return lam


def fit_constants(traj: Trajectory, trace: EnergyTrace, p: NormParams, frac: float = 0.5) -> FittedConstants:
    """Split-sample fit: every constant calibrated on the first ``frac`` of the trace."""
    n = _split(trace, frac)
    csob = measured_sobolev_constant(traj.grid, traj.omegas[:n])
    return FittedConstants(fit_energy_constant(trace, p.s, frac), fit_linf_constant(trace, csob, frac),
                           max(coefficient_lambda(traj, p.sigma), 1e-12), csob)


# ------------------------------------------------------------ lifespan

def outer_flow_MU(grid: Grid, U: np.ndarray, s: int) -> float:
    """M_U = (1 + ||U||_{H^{s+2}}^2)^2 for stationary U."""
    return float((1.0 + hs_norm_x(np.asarray(U), s + 2) ** 2) ** 2)


@dataclass
class Lifespan:
    T1: float
    T2: float
    T3: float
    T: float
    K: float
    M_U: float
    s4_hypothesis_ratio: float


def lifespan_estimate(norms: NormReport, grid: Grid, U: np.ndarray, consts: FittedConstants,
                      p: NormParams) -> Lifespan:
    """T1 from the energy constant; T2, T3 from the sup-bound constant."""
    w = norms.hs_gamma_g
    s, d = p.s, p.delta
    MU = outer_flow_MU(grid, U, s)
    Ce, Cl = consts.C_energy, consts.C_linf
    T1 = min(3 * w**2 / (Ce * MU), (1 - 2.0 ** (-s + 2)) / (2.0 ** (s - 2) * Ce * w ** (s - 2)))
    K = 4 * w + MU
    T2 = min(T1, 1.0 / (64 * d**2 * Cl * (1 + 4 * w) * w**2), np.log(2) / (Cl * (1 + K)))
    T3 = min(T1, d / (8 * Cl * w), 1.0 / (6 * Cl * (1 + K)), np.log(2) / (Cl * (1 + K)))
    return Lifespan(T1, T2, T3, min(T1, T2, T3), K, MU, w * d / consts.C_sobolev)


# ------------------------------------------------------------ max/min principles

@dataclass
class PrincipleReport:
    sup_holds: bool
    min_holds: bool
    min_vacuous_from: float | None
    sup_lhs: np.ndarray
    sup_rhs: np.ndarray
    min_lhs: np.ndarray
    min_rhs: np.ndarray


def max_principle_bound(times, H, lam: float, wall=None, tol: float = 1e-3) -> PrincipleReport:
    """sup H(t) <= max{e^{lam t} |H(0)|_inf, max_tau e^{lam(t-tau)} |H(tau)|_0|_inf},
    min H(t) >= (1 - lam t e^{lam t}) kappa(t), kappa the running min of initial and wall minima.

    ``H`` is a sequence of fields; ``wall`` defaults to their y = 0 traces.
    """
    t = np.asarray(times, dtype=float) - times[0]
    H = [np.asarray(h) for h in H]
    wall = [h[:, 0] for h in H] if wall is None else [np.asarray(w) for w in wall]
    sup = np.array([np.max(h) for h in H])
    mn = np.array([np.min(h) for h in H])
    wsup = np.array([np.max(np.abs(w)) for w in wall])
    wmin = np.array([np.min(w) for w in wall])
    sup_rhs = np.empty_like(t)
    kappa = np.empty_like(t)
    for i, ti in enumerate(t):
        sup_rhs[i] = max(np.exp(lam * ti) * np.max(np.abs(H[0])),
                         np.max(np.exp(lam * (ti - t[:i + 1])) * wsup[:i + 1]))
        kappa[i] = min(mn[0], np.min(wmin[:i + 1]))
    fac = 1 - lam * t * np.exp(lam * t)
    min_rhs = fac * kappa
    valid = fac >= 0
    scale = max(np.max(np.abs(sup)), 1e-300)
    sup_ok = bool(np.all(sup <= sup_rhs + tol * scale))
    min_ok = bool(np.all((mn >= min_rhs - tol * scale) | ~valid))
    vac = np.nonzero(~valid)[0]
    return PrincipleReport(sup_ok, min_ok, float(times[vac[0]]) if vac.size else None,
                           sup, sup_rhs, mn, min_rhs)


# ------------------------------------------------------------ u, v, w controls

def uvw_control_report(state: SolverState) -> dict:
    """Ratios of the weighted u, v, w quantities to ||w||_{H^{s,gamma}_g} + ||dx^s U||."""
    g, p = state.grid, state.params
    w, u, v, U = state.omega, state.u, state.v, np.asarray(state.U)
    ng = norm_hs_g(g, w, u, U, p)  # raises on nonpositive w
    rhs = ng + l2_x(deriv_x(g, U[:, None], p.s)[:, 0])
    s = p.s
    umU = u - U[:, None]
    y = g.y
    out = {"rhs": rhs, "norm_g": ng}
    out["L2_u"] = max(weighted_l2(g, deriv_x(g, umU, k) if k else umU, p.gamma - 1) for k in range(s + 1)) / rhs
    out["L2_v"] = max(weighted_l2(g, ((deriv_x(g, v, k) if k else v) + y * deriv_x(g, U[:, None], k + 1))
                                  / (1 + y)) for k in range(s)) / rhs
    out["Linf_u"] = max(float(np.max(np.abs(deriv_x(g, u, k) if k else u))) for k in range(s)) / rhs
    out["Linf_v"] = max(float(np.max(np.abs((deriv_x(g, v, k) if k else v) / (1 + y))))
                        for k in range(s - 1)) / rhs
    from .grid import deriv
    from .norms import multi_indices
    out["Linf_w"] = max(float(np.max(np.abs(g.weight(p.gamma + a[1]) * deriv(g, w, a))))
                        for a in multi_indices(s - 2)) / ng
    out["L2_gk"] = max(weighted_l2(g, compute_g(g, w, u, U, k), p.gamma) for k in range(1, s + 1)) / rhs
    return out
