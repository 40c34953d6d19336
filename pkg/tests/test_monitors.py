import copy

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from prandtl_lab.grid import GridSpec, build_grid
from prandtl_lab.norms import MonotonicityViolated, NormParams, NormReport, norm_report
from prandtl_lab.prandtl import (SchemeConfig, datum_profile, make_standard_datum, make_state,
                                 regularized_px, simulate)
from prandtl_lab.monitors import (FittedConstants, build_trace, compute_F, energy_ode_bound,
                                  fit_constants, lifespan_estimate, linf_rhs, linf_bounds_check, lower_bound_check,
                                  max_principle_bound, uvw_control_report)

T_RUN = 0.2


def standard_run(params, nx, ny):
    g = build_grid(GridSpec(nx, ny, 30.0, 1e-3, "exponential", 4.0))
    d = make_standard_datum(g, params)
    st_ = make_state(g, d.omega0, d.U0, 0.1, params)
    traj = simulate(st_, SchemeConfig(dt=1e-3), T_RUN, record_every=10)
    trace = build_trace(traj, params, residuals=False)
    return traj, trace, fit_constants(traj, trace, params)


@pytest.fixture(scope="module")
def runs(params):
    return [standard_run(params, 32, 256), standard_run(params, 64, 512)]


@pytest.fixture(scope="module")
def heat_run(params):
    g = build_grid(GridSpec(8, 256, 30.0, 1e-3, "exponential", 4.0))
    w = np.broadcast_to(0.3 * datum_profile(g.y, params.sigma), g.shape).copy()
    st_ = make_state(g, w, np.full(g.nx, 0.7), 0.1, params)
    traj = simulate(st_, SchemeConfig(dt=1e-3), T_RUN, record_every=10)
    return traj, build_trace(traj, params, residuals=False)


# ------------------------------------------------------------------ F

def test_F_constant_outer_flow(std_grid, params):
    assert np.all(compute_F(std_grid, np.ones(std_grid.nx), np.zeros(std_grid.nx), params, 0.7) == 0.7)


def test_F_quadrature(params):
    g = build_grid(GridSpec(64, 16))
    U = 1 + 0.1 * np.sin(2 * np.pi * g.x)
    F = compute_F(g, U, regularized_px(g, U, 0.0), params)
    k = 2 * np.pi
    # px = -U U' = -0.2 pi cos(kx) - 0.01 pi sin(2kx)
    h4 = sum(quad(lambda x, j=j: (0.2 * np.pi * k**j * np.cos(k * x + j * np.pi / 2)
                                  + 0.01 * np.pi * (2 * k) ** j * np.sin(2 * k * x + j * np.pi / 2)) ** 2,
                  0, 1, limit=200)[0] for j in range(params.s + 1))
    exact = 1 + (0.1 * k**5) ** 4 + h4
    # the fifth spectral derivative amplifies roundoff by k_max^5
    assert F[0] == pytest.approx(exact, rel=1e-6)
    assert compute_F(g, U, regularized_px(g, U, 0.0), params, 2.0)[0] == pytest.approx(2 * F[0], rel=1e-14)


# ------------------------------------------------------------- energy

def test_energy_pure_heat_holds(heat_run, params):
    _, tr = heat_run
    assert tr.e_g[-1] < tr.e_g[0]
    for C in (1e-12, 1e-3, 1.0):
        assert energy_ode_bound(tr, FittedConstants(C, 1.0, 1.0), params.s).violated_at is None


def test_energy_degenerate_bound_flags_growth(heat_run, params):
    tr = copy.deepcopy(heat_run[1])
    tr.e_g = list(tr.e_g[0] * (1 + 0.5 * np.asarray(tr.times)))
    tr.F_vals = [0.0] * len(tr.times)
    r = energy_ode_bound(tr, FittedConstants(1e-300, 1.0, 1.0), params.s)
    assert r.violated_at is not None and r.violated_at > 0


def test_energy_split_sample(runs, params):
    for _, tr, k in runs:
        assert energy_ode_bound(tr, k, params.s, tol=0.2).violated_at is None


# -------------------------------------------------------- sup/lower bounds

def test_bounds_at_initial_time(runs, params):
    _, tr, k = runs[0]
    first = tr.head(1)
    assert linf_bounds_check(first, k, params.s, tol=0.0).holds
    assert lower_bound_check(first, k).holds


def test_linf_and_lower_hold(runs, params):
    for _, tr, k in runs:
        assert linf_bounds_check(tr, k, params.s).holds
        assert lower_bound_check(tr, k).holds


def test_linf_spike_flagged(runs, params):
    _, tr, k = runs[0]
    bad = copy.deepcopy(tr)
    # the bound is led by 6 C^2 Omega^2, well above I(t); the spike must clear it
    bad.I_sup[-3] = 2.0 * linf_rhs(tr, k)[-3]
    r = linf_bounds_check(bad, k, params.s)
    assert not r.holds and r.first_violation == pytest.approx(tr.times[-3])


def test_lower_check_suspends(runs):
    _, tr, k = runs[0]
    big = FittedConstants(k.C_energy, 50.0, k.lam, k.C_sobolev)
    r = lower_bound_check(tr, big)
    assert r.suspended_from is not None and r.holds and "suspended" in r.note


@given(t1=st.floats(0.0, 1.0), t2=st.floats(0.0, 1.0), c=st.floats(1e-4, 1e-1))
def test_tolerance_monotone(runs, params, t1, t2, c):
    _, tr, k = runs[0]
    lo, hi = sorted((t1, t2))
    kk = FittedConstants(c, c, k.lam, k.C_sobolev)
    if linf_bounds_check(tr, kk, params.s, lo).holds:
        assert linf_bounds_check(tr, kk, params.s, hi).holds
    if energy_ode_bound(tr, kk, params.s, lo).violated_at is None:
        assert energy_ode_bound(tr, kk, params.s, hi).violated_at is None
    if lower_bound_check(tr, kk, lo).holds:
        assert lower_bound_check(tr, kk, hi).holds


def test_running_suprema_nondecreasing(runs):
    for _, tr, _ in runs:
        assert np.all(np.diff(tr.omega_sup()) >= 0) and np.all(np.diff(tr.G()) >= 0)


def test_constants_refinement_stable(runs):
    (_, _, a), (_, _, b) = runs
    for name in ("C_energy", "C_linf", "lam"):
        x, y = getattr(a, name), getattr(b, name)
        assert abs(x - y) <= 0.5 * max(x, y), name


def test_constants_positive():
    with pytest.raises(ValueError):
        FittedConstants(0.0, 1.0, 1.0)


# ------------------------------------------------------------- lifespan

def lifespan_for(w, Ce, params, g, U):
    nr = NormReport(w, w, 0.0, 0.1, 1.0, True, False)
    return lifespan_estimate(nr, g, U, FittedConstants(Ce, 1.0, 1.0), params)


def test_lifespan_scaling(params):
    g = build_grid(GridSpec(16, 16))
    U = np.ones(g.nx)
    a, b = lifespan_for(2.0, 1.0, params, g, U), lifespan_for(4.0, 1.0, params, g, U)
    assert b.T1 == pytest.approx(a.T1 / 4, rel=1e-12)
    assert lifespan_for(2.0, 1e-300, params, g, U).T1 > 1e250


def test_lifespan_standard(runs, params):
    traj, tr, k = runs[0]
    s0 = traj.state(0)
    L = lifespan_estimate(norm_report(traj.grid, s0.omega, s0.u, s0.U, params), traj.grid, traj.U, k, params)
    assert 0 < L.T <= min(L.T1, L.T2, L.T3)
    # the run covers [0, T] and stays in the class
    assert traj.times[-1] >= L.T and min(tr.min_sigma_omega) >= params.delta


# -------------------------------------------------------- max principle

def test_max_principle_heat(heat_run):
    traj, _ = heat_run
    r = max_principle_bound(traj.times, traj.omegas, 0.0)
    assert r.sup_holds and r.min_holds and r.min_vacuous_from is None
    assert np.all(np.diff(r.sup_lhs) <= 1e-12)


def test_max_principle_standard(runs, params):
    traj, _, k = runs[0]
    H = [traj.grid.weight(params.sigma) * w for w in traj.omegas]
    r = max_principle_bound(traj.times, H, k.lam)
    assert r.sup_holds and r.min_holds


def test_max_principle_vacuous(heat_run):
    traj, _ = heat_run
    r = max_principle_bound(traj.times, traj.omegas, 50.0)
    assert r.min_vacuous_from is not None and r.min_vacuous_from > 0


# ----------------------------------------------------------- u, v, w

def test_uvw_x_independent(params):
    g = build_grid(GridSpec(8, 256, 30.0, 1e-3, "exponential", 4.0))
    w = np.broadcast_to(0.3 * datum_profile(g.y, params.sigma), g.shape).copy()
    r = uvw_control_report(make_state(g, w, np.full(g.nx, 0.7), 0.1, params))
    assert r["L2_v"] == 0.0 and r["Linf_v"] == 0.0


def test_uvw_zero_vorticity(std_grid, params):
    with pytest.raises(MonotonicityViolated):
        uvw_control_report(make_state(std_grid, std_grid.zeros(), np.ones(std_grid.nx), 0.1, params))


def test_uvw_refinement_stable(runs):
    a, b = (uvw_control_report(tr.state(0)) for tr, _, _ in runs)
    for key in ("L2_u", "L2_v", "Linf_u", "Linf_v", "Linf_w", "L2_gk"):
        assert np.isfinite(a[key]) and abs(a[key] - b[key]) <= 0.15 * max(a[key], b[key]), key
