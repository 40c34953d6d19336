"""Time integration of the regularized vorticity system on the periodic strip.

The solved variable is the vorticity w = dy u.  Velocities are reconstructed
from w and the outer flow U, the wall condition dy w = px (the regularized
Bernoulli pressure gradient) is imposed through a ghost node, and diffusion
eps^2 dxx + dyy is treated implicitly mode by mode in x.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lapack

from .grid import Grid, deriv_x, deriv_y, integrate_y_lower, integrate_y_upper, weighted_l2
from .norms import NormParams, membership


class UnstableStepError(RuntimeError):
    pass


class SolverError(RuntimeError):
    pass


class CannotSatisfyClassError(ValueError):
    pass


class PicardDivergedError(RuntimeError):
    pass


# ------------------------------------------------------------------ cutoff

@dataclass(frozen=True)
class CutoffChi:
    """Smooth step equal to 1 on [0, 1] and 0 on [2, inf).

    chi(y) = psi(2-y) / (psi(2-y) + psi(y-1)) with psi(t) = exp(-c/t) for t > 0;
    the steepest slope is 2c, so c < 1 keeps chi' within [-2, 0].
    """
    profile: str = "exp_smoothstep"
    c: float = 0.9

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.clip(r - 1.0, 0.0, 1.0)
        inner = (t > 0) & (t < 1)
        out = np.where(r <= 1.0, 1.0, 0.0)
        ti = t[inner]
        # 1 / (1 + exp(c/(1-t) - c/t)), written to avoid overflow
        z = self.c / (1.0 - ti) - self.c / ti
        out[inner] = 0.5 * (1.0 - np.tanh(0.5 * z))
        return out

    def derivative(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.clip(r - 1.0, 0.0, 1.0)
        inner = (t > 0) & (t < 1)
        out = np.zeros_like(r)
        ti = t[inner]
        z = self.c / (1.0 - ti) - self.c / ti
        dz = self.c / (1.0 - ti) ** 2 + self.c / ti**2
        e = np.exp(-np.abs(z))
        out[inner] = -0.25 * dz * 4.0 * e / (1.0 + e) ** 2
        return out

    def check(self, n: int = 200001, margin: float = 1e-6) -> dict:
        """Numerical verification of the four structural bounds on [0, 3]."""
        r = np.linspace(0.0, 3.0, n)
        chi, d = self(r), self.derivative(r)
        res = {
            "range": bool(np.all((chi >= 0) & (chi <= 1))),
            "plateau": bool(np.all(chi[r <= 1] == 1.0)),
            "support": bool(np.all(chi[r >= 2] == 0.0)),
            "slope": bool(np.all(d <= 0) and np.min(d) >= -2.0 + margin),
            "min_slope": float(np.min(d)),
        }
        res["ok"] = all(res[k] for k in ("range", "plateau", "support", "slope"))
        return res


def chi_R(cutoff: CutoffChi, y: np.ndarray, R: float | None) -> np.ndarray:
    if R is None:
        return np.ones_like(y)
    return cutoff(y / R)


# ------------------------------------------------------------------ config

INTEGRATORS = ("imex_euler", "strang")


@dataclass(frozen=True)
class SchemeConfig:
    integrator: str = "imex_euler"
    dt: float = 1e-3
    R: float | None = None
    matching_tol: float = 1e-3
    cutoff: CutoffChi = field(default_factory=CutoffChi)

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.R is not None and self.R < 1:
            raise ValueError("truncation radius R must be >= 1")


@dataclass
class SolverState:
    grid: Grid
    t: float
    omega: np.ndarray
    u: np.ndarray
    v: np.ndarray
    U: np.ndarray
    px: np.ndarray
    eps: float
    params: NormParams

    def with_omega(self, omega: np.ndarray, t: float) -> "SolverState":
        u, v = reconstruct_velocity(self.grid, omega, self.U, self.params.sigma)
        return replace(self, omega=omega, u=u, v=v, t=t)

    def matching_error(self) -> float:
        """max_x |U - int_0^inf w dy| (equal to max |u(., 0)|)."""
        return float(np.max(np.abs(self.u[:, 0])))


def regularized_px(grid: Grid, U: np.ndarray, eps: float, dU_dt: np.ndarray | None = None) -> np.ndarray:
    """px = -(dt U + U dx U - eps^2 dxx U)."""
    U = np.asarray(U, dtype=float)
    Ux = deriv_x(grid, U, 1)
    Uxx = deriv_x(grid, U, 2)
    px = -(U * Ux - eps**2 * Uxx)
    if dU_dt is not None:
        px = px - dU_dt
    return px


def reconstruct_velocity(grid: Grid, omega: np.ndarray, U: np.ndarray, decay: float):
    """u = U - int_y^inf w, v = -int_0^y dx u."""
    u = np.asarray(U, dtype=float)[:, None] - integrate_y_upper(grid, omega, decay)
    v = -integrate_y_lower(grid, deriv_x(grid, u, 1))
    return u, v


def make_state(grid: Grid, omega: np.ndarray, U: np.ndarray, eps: float, params: NormParams,
               t: float = 0.0) -> SolverState:
    U = np.asarray(U, dtype=float)
    u, v = reconstruct_velocity(grid, omega, U, params.sigma)
    return SolverState(grid, t, np.asarray(omega, dtype=float), u, v, U,
                       regularized_px(grid, U, eps), eps, params)


# ---------------------------------------------------------- standard datum

def _wall_basis(ell: float, n_deriv: int = 5, targets=(1, 3, 5)):
    """Profiles phi_n(y) = sum_k c_k y^k e^{-y/ell}, k = 1..n_deriv+1, with
    phi_n^(m)(0) = [m == n] for m = 1..n_deriv and zero integral."""
    K = np.arange(1, n_deriv + 2)
    rows = []
    for m in range(1, n_deriv + 1):
        # m-th derivative at 0 of y^k e^{-y/ell} = m!/(m-k)! (-1/ell)^(m-k) for k <= m
        rows.append([math.factorial(m) / math.factorial(m - k) * (-1.0 / ell) ** (m - k) if k <= m else 0.0
                     for k in K])
    rows.append([math.factorial(k) * ell ** (k + 1) for k in K])
    A = np.array(rows)
    out = {}
    for n in targets:
        rhs = np.zeros(len(K))
        rhs[n - 1] = 1.0
        out[n] = np.linalg.solve(A, rhs)
    return K, out


def _wall_profile(y: np.ndarray, ell: float, K: np.ndarray, coef: np.ndarray) -> np.ndarray:
    return np.exp(-y / ell) * sum(c * y**k for k, c in zip(K, coef))


@dataclass(frozen=True)
class StandardDatum:
    omega0: np.ndarray
    U0: np.ndarray
    amplitude: float
    requested_amplitude: float
    halvings: int


def datum_profile(y: np.ndarray, sigma: float) -> np.ndarray:
    """(1+y^2)^(-sigma/2): even in y, decays like (1+y)^-sigma."""
    return (1.0 + y**2) ** (-0.5 * sigma)


def datum_mode(y: np.ndarray, sigma: float, mode_mass: float = 0.2):
    """Even x-mode profile (y^2 - lam y^4) sech y, normalized to max 1.

    It vanishes to second order at the wall; lam is chosen so that its
    integral against the base profile is ``mode_mass`` times that of y^2 sech y,
    which sets the size of the outer-flow variation.  Returns (mode, 1/max).
    """
    f = datum_profile(y, sigma)
    m2 = y**2 / np.cosh(y)
    m4 = y**4 / np.cosh(y)
    lam = (1.0 - mode_mass) * np.trapezoid(f * m2, y) / np.trapezoid(f * m4, y)
    yf = np.linspace(0.0, 40.0, 40001)
    norm = 1.0 / np.max(np.abs(yf**2 / np.cosh(yf) - lam * yf**4 / np.cosh(yf)))
    return (m2 - lam * m4) * norm, norm


def _build_datum(grid: Grid, p: NormParams, a: float, eps: float, b: float, ell: float, mode_mass: float):
    y = grid.y
    s = p.sigma
    # fine auxiliary grid so the mode does not depend on the solver grid
    yf = np.linspace(0.0, max(grid.Y, 40.0), 80001)
    _, norm = datum_mode(yf, s, mode_mass)
    f = datum_profile(y, s)
    lam = (1.0 - mode_mass) * (np.trapezoid(datum_profile(yf, s) * yf**2 / np.cosh(yf), yf)
                               / np.trapezoid(datum_profile(yf, s) * yf**4 / np.cosh(yf), yf))
    mode = (y**2 - lam * y**4) / np.cosh(y) * norm
    cx = np.cos(2 * np.pi * grid.x)
    sx = np.sin(2 * np.pi * grid.x)
    base = b * f * (1.0 + a * np.outer(cx, mode))
    U_base = integrate_y_upper(grid, base, s)[:, 0]
    px = regularized_px(grid, U_base, eps)
    # wall values of the base: w = b, dx w = 0, odd y-derivatives vanish
    w0 = b
    wxyy0 = -2 * np.pi * a * b * sx * 2.0 * norm
    t1 = px
    t3 = -eps**2 * deriv_x(grid, px, 2)
    t5 = eps**4 * deriv_x(grid, px, 4) + 2 * px * deriv_x(grid, px, 1) + 4 * w0 * wxyy0
    K, coefs = _wall_basis(ell)
    omega = base.copy()
    for t, n in ((t1, 1), (t3, 3), (t5, 5)):
        omega += np.outer(t, _wall_profile(y, ell, K, coefs[n]))
    U0 = integrate_y_upper(grid, omega, s)[:, 0]
    return omega, U0


def make_standard_datum(grid: Grid, p: NormParams, amplitude: float = 0.2, eps: float = 0.1,
                        scale: float = 0.3, wall_length: float = 0.25, mode_mass: float = 0.2,
                        max_halvings: int = 5) -> StandardDatum:
    """b (1+y^2)^(-sigma/2) (1 + a cos(2 pi x) m(y)) plus zero-integral wall corrections.

    m is the wall-flat mode of :func:`datum_mode`.  The corrections make the
    wall identities for dy w, dy^3 w and dy^5 w hold at t = 0, so no initial
    boundary layer forms.  U0 = int_0^inf w0.  The amplitude is halved until
    the datum lies in the class with lower bound 2 delta.
    """
    a = amplitude
    for k in range(max_halvings + 1):
        omega, U0 = _build_datum(grid, p, a, eps, scale, wall_length, mode_mass)
        if np.all(omega > 0) and membership(grid, omega, p, delta=2 * p.delta).in_class:
            return StandardDatum(omega, U0, a, amplitude, k)
        a *= 0.5
    raise CannotSatisfyClassError(
        f"no amplitude <= {amplitude} puts the datum in the class after {max_halvings} halvings")


# ---------------------------------------------------------- linear algebra

def _second_derivative_tridiag(grid: Grid):
    """Tridiagonal dyy with ghost-node Neumann rows at both ends.

    Returns (lower, diag, upper, wall_coeff); the wall Neumann value g enters
    row 0 as wall_coeff * g.
    """
    y = grid.y
    n = grid.ny
    lo = np.zeros(n - 1)
    di = np.zeros(n)
    up = np.zeros(n - 1)
    h0 = y[1] - y[0]
    di[0], up[0] = -2.0 / h0**2, 2.0 / h0**2
    for j in range(1, n - 1):
        hm, hp = y[j] - y[j - 1], y[j + 1] - y[j]
        lo[j - 1] = 2.0 / (hm * (hm + hp))
        di[j] = -2.0 / (hm * hp)
        up[j] = 2.0 / (hp * (hm + hp))
    hN = y[-1] - y[-2]
    lo[-1], di[-1] = 2.0 / hN**2, -2.0 / hN**2
    return lo, di, up, -2.0 / h0


class _ImplicitSolver:
    """Factored (I - c (eps^2 dxx + dyy)) for every x-mode, cached per (c, eps)."""

    def __init__(self, grid: Grid):
        self.grid = grid
        self.lo, self.di, self.up, self.wall = _second_derivative_tridiag(grid)
        self.k2 = (2 * np.pi * np.fft.rfftfreq(grid.nx, d=1.0 / grid.nx)) ** 2
        self._factors: dict = {}

    def apply_dyy(self, f: np.ndarray) -> np.ndarray:
        out = self.di * f
        out[..., :-1] += self.up * f[..., 1:]
        out[..., 1:] += self.lo * f[..., :-1]
        return out

    def _factor(self, c: float, shift: float):
        key = (c, shift)
        fac = self._factors.get(key)
        if fac is None:
            dl = -c * self.lo
            d = 1.0 + c * shift - c * self.di
            du = -c * self.up
            dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
            if info != 0:
                raise SolverError(f"tridiagonal factorization failed (info={info})")
            fac = (dl, d, du, du2, ipiv)
            self._factors[key] = fac
        return fac

    def _solve(self, fac, rhs: np.ndarray) -> np.ndarray:
        dl, d, du, du2, ipiv = fac
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise SolverError(f"tridiagonal solve failed (info={info})")
        return x

    def solve(self, rhs: np.ndarray, c: float, eps: float) -> np.ndarray:
        """Solve (I - c(eps^2 dxx + dyy)) w = rhs for a field rhs of shape (nx, ny)."""
        if eps == 0.0:
            return self._solve(self._factor(c, 0.0), np.ascontiguousarray(rhs.T)).T
        rh = np.fft.rfft(rhs, axis=0)
        out = np.empty_like(rh)
        for m in range(rh.shape[0]):
            fac = self._factor(c, eps**2 * self.k2[m])
            pair = np.stack([rh[m].real, rh[m].imag], axis=1)
            sol = self._solve(fac, pair)
            out[m] = sol[:, 0] + 1j * sol[:, 1]
        return np.fft.irfft(out, n=self.grid.nx, axis=0)

    def apply_L(self, f: np.ndarray, eps: float) -> np.ndarray:
        """(eps^2 dxx + dyy) f without the wall affine term."""
        out = self.apply_dyy(f)
        if eps != 0.0:
            out = out + eps**2 * deriv_x(self.grid, f, 2)
        return out


def _implicit_solver(grid: Grid) -> _ImplicitSolver:
    s = grid._ops.get("implicit")
    if s is None:
        s = _ImplicitSolver(grid)
        grid._ops["implicit"] = s
    return s


def advance_linear(grid: Grid, omega: np.ndarray, source: np.ndarray, px: np.ndarray, eps: float,
                   dt: float, theta: float = 1.0) -> np.ndarray:
    """theta-scheme for dt w = eps^2 dxx w + dyy w + source, dy w|_0 = px, dy w|_Y = 0."""
    S = _implicit_solver(grid)
    rhs = omega + dt * source
    rhs[:, 0] += dt * S.wall * px
    if theta != 1.0:
        rhs = rhs + (1.0 - theta) * dt * S.apply_L(omega, eps)
    return S.solve(rhs, theta * dt, eps)


# -------------------------------------------------------------- stepping

def _wall_flux(state: SolverState) -> np.ndarray:
    """Neumann value imposed at the wall (patched in fault-injection tests)."""
    return state.px


def transport(state: SolverState, omega: np.ndarray | None = None, u=None, v=None,
              wall=None) -> np.ndarray:
    """u dx w + v dy w with the ghost wall value in dy."""
    g = state.grid
    w = state.omega if omega is None else omega
    u = state.u if u is None else u
    v = state.v if v is None else v
    wall = state.px if wall is None else wall
    return u * deriv_x(g, w, 1) + v * deriv_y(g, w, 1, "ghost", wall)


def rhs_vorticity(state: SolverState, R: float | None = None, cutoff: CutoffChi | None = None) -> np.ndarray:
    """-chi_R (u dx w + v dy w) + eps^2 dxx w + dyy w."""
    g = state.grid
    chi = chi_R(cutoff or CutoffChi(), g.y, R)
    out = -chi * transport(state)
    out += deriv_y(g, state.omega, 2, "ghost", state.px)
    if state.eps:
        out += state.eps**2 * deriv_x(g, state.omega, 2)
    return out


def cfl_limit(state: SolverState) -> float:
    g = state.grid
    umax = float(np.max(np.abs(state.u)))
    vmax = float(np.max(np.abs(state.v)))
    lim = np.inf
    if umax > 0:
        lim = min(lim, g.hx / umax)
    if vmax > 0:
        lim = min(lim, float(np.min(g.dy)) / vmax)
    return 0.5 * lim


def step(state: SolverState, cfg: SchemeConfig) -> SolverState:
    dt = cfg.dt
    if dt > cfl_limit(state):
        raise UnstableStepError(f"dt = {dt:g} exceeds the advective limit {cfl_limit(state):.3g} at t = {state.t:g}")
    g = state.grid
    chi = chi_R(cfg.cutoff, g.y, cfg.R)
    wall = _wall_flux(state)
    if cfg.integrator == "imex_euler":
        src = -chi * transport(state, wall=wall)
        w = advance_linear(g, state.omega, src, wall, state.eps, dt, theta=1.0)
    else:
        w = advance_linear(g, state.omega, np.zeros(g.shape), wall, state.eps, 0.5 * dt, theta=0.5)
        s1 = state.with_omega(w, state.t)
        k1 = -chi * transport(s1, wall=wall)
        s2 = state.with_omega(w + dt * k1, state.t)
        k2 = -chi * transport(s2, wall=wall)
        w = w + 0.5 * dt * (k1 + k2)
        w = advance_linear(g, w, np.zeros(g.shape), wall, state.eps, 0.5 * dt, theta=0.5)
    if not np.all(np.isfinite(w)):
        raise SolverError(f"non-finite vorticity after step at t = {state.t:g}")
    return state.with_omega(w, state.t + dt)


@dataclass
class Trajectory:
    """Snapshots of a run; ``omegas[i]`` is the vorticity at ``times[i]``."""
    grid: Grid
    params: NormParams
    eps: float
    U: np.ndarray
    px: np.ndarray
    dt: float
    times: list = field(default_factory=list)
    omegas: list = field(default_factory=list)
    wall_sup_u: list = field(default_factory=list)
    membership_warnings: list = field(default_factory=list)

    def state(self, i: int) -> SolverState:
        return make_state(self.grid, self.omegas[i], self.U, self.eps, self.params, self.times[i])

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(np.asarray(self.times) - t)))


def simulate(state: SolverState, cfg: SchemeConfig, T_end: float, record_every: int = 1,
             record_steps=None, check_membership: bool = False) -> Trajectory:
    """March to T_end, storing snapshots every ``record_every`` steps (and at
    any step index listed in ``record_steps``)."""
    n_steps = int(round(T_end / cfg.dt))
    extra = set(record_steps or ())
    traj = Trajectory(state.grid, state.params, state.eps, state.U, state.px, cfg.dt)
    traj.times.append(state.t)
    traj.omegas.append(state.omega)
    traj.wall_sup_u.append(state.matching_error())
    for n in range(1, n_steps + 1):
        state = step(state, cfg)
        traj.wall_sup_u.append(state.matching_error())
        if n % record_every == 0 or n in extra or n == n_steps:
            traj.times.append(state.t)
            traj.omegas.append(state.omega)
            if check_membership and not membership(state.grid, state.omega, state.params).in_class:
                traj.membership_warnings.append(state.t)
    return traj


def wall_burgers_residual(wall_trace) -> float:
    """sup over the run of ||u(., 0)||_inf; the wall velocity solves a viscous
    Burgers equation from zero data and must stay zero."""
    vals = list(wall_trace)
    return float(max(vals)) if vals else 0.0


# -------------------------------------------------------------- Picard

@dataclass
class PicardResult:
    times: np.ndarray
    iterates: list
    cauchy_gaps: list


def frozen_source(state: SolverState, omega: np.ndarray, chi: np.ndarray) -> np.ndarray:
    """-chi (u dx w + v dy w) for a frozen iterate w."""
    s = state.with_omega(omega, state.t)
    return -chi * transport(s)


def picard_solve(state0: SolverState, cfg: SchemeConfig, n_iters: int, T_end: float) -> PicardResult:
    """Linearized iteration: w^{n+1} solves the heat problem with the frozen
    transport of w^n as source; w^0 is the initial datum held constant."""
    if not state0.eps > 0:
        raise ValueError("the linearized iteration needs eps > 0")
    if cfg.R is None:
        raise ValueError("the linearized iteration needs a truncation radius R")
    g = state0.grid
    n_steps = int(round(T_end / cfg.dt))
    times = state0.t + cfg.dt * np.arange(n_steps + 1)
    chi = chi_R(cfg.cutoff, g.y, cfg.R)
    theta = 1.0 if cfg.integrator == "imex_euler" else 0.5
    current = [state0.omega] * (n_steps + 1)
    iterates = [current]
    gaps: list[float] = []
    growth = 0
    for _ in range(n_iters):
        src = [frozen_source(state0, w, chi) for w in current]
        nxt = [state0.omega]
        w = state0.omega
        for k in range(n_steps):
            s = src[k] if theta == 1.0 else 0.5 * (src[k] + src[k + 1])
            w = advance_linear(g, w, s, state0.px, state0.eps, cfg.dt, theta)
            nxt.append(w)
        gap = max(weighted_l2(g, a - b) for a, b in zip(nxt, current))
        if gaps and gap > gaps[-1]:
            growth += 1
        else:
            growth = 0
        gaps.append(gap)
        iterates.append(nxt)
        current = nxt
        if growth >= 3:
            raise PicardDivergedError(f"Cauchy gaps grew three times in a row: {gaps}")
    return PicardResult(times, iterates, gaps)
