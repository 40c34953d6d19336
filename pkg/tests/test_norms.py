import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from prandtl_lab.grid import GridSpec, build_grid, weighted_l2
from prandtl_lab.norms import (InvalidParamsError, MonotonicityViolated, NormParams, NotInClassError,
                               almost_equiv_report, compute_a, compute_g, compute_g_dual, g_bracket,
                               membership, multi_indices, norm_hs_g, norm_report, norm_weighted_hs)
from prandtl_lab.prandtl import reconstruct_velocity


@pytest.fixture(scope="module")
def g():
    return build_grid(GridSpec(32, 256, 30.0, grading="exponential", beta=3.0))


def power(g, q, amp=0.0):
    return (1 + g.YY) ** -q * (1 + amp * np.cos(2 * np.pi * g.X))


def test_params_validation():
    with pytest.raises(InvalidParamsError, match="empty"):
        NormParams(sigma=1.5, gamma=1.0)
    for kw in (dict(s=3), dict(s=2), dict(gamma=0.5), dict(delta=1.0), dict(delta=0.0)):
        with pytest.raises(InvalidParamsError):
            NormParams(**kw)
    assert NormParams(sigma=1.9).low_margin and not NormParams().low_margin


def test_multi_indices():
    assert len(multi_indices(4)) == 15
    assert (4, 0) in multi_indices(4) and (0, 4) in multi_indices(4)


def test_norm_power_profile(g):
    p = NormParams()
    w = power(g, 3.0)
    terms = []
    for k in range(p.s + 1):
        c = np.prod([-(3.0 + i) for i in range(k)]) if k else 1.0
        terms.append(c**2 * quad(lambda y: (1 + y) ** (2 * (p.gamma + k) - 2 * (3.0 + k)), 0, 30, limit=200)[0])
    exact = np.sqrt(sum(terms))
    assert norm_weighted_hs(g, w, p) == pytest.approx(exact, rel=5e-3)
    assert norm_weighted_hs(g, g.zeros(), p) == 0.0
    assert norm_weighted_hs(g, power(g, 3.0, 0.1), p) > norm_weighted_hs(g, w, p)


def test_compute_a(g):
    # e^-y falls to roundoff near Y, so only the lower half is meaningful
    lo = g.y <= g.Y / 2
    a = compute_a(g, np.exp(-g.YY))
    h = np.diff(g.y)[lo[1:]].max()
    assert np.max(np.abs(a + 1)[:, lo]) <= h**2 / 4
    g2 = build_grid(GridSpec(32, 512, 30.0, grading="exponential", beta=3.0))
    a2 = compute_a(g2, np.exp(-g2.YY))
    ratio = np.max(np.abs(a + 1)[:, lo]) / np.max(np.abs(a2 + 1)[:, g2.y <= g2.Y / 2])
    assert ratio > 3.5
    errs = [np.max(np.abs(compute_a(q, power(q, 2.6)) + 2.6 / (1 + q.YY))) for q in (g, g2)]
    assert errs[0] < 5e-3 and errs[0] / errs[1] > 3.5
    w = power(g, 2.6)
    w[3, 7] = 0.0
    with pytest.raises(MonotonicityViolated) as e:
        compute_a(g, w)
    assert e.value.node == (3, 7)


def test_g_vanishes_exactly_x_independent(g):
    w = power(g, 2.6)
    U = np.full(g.nx, 1 / 1.6)
    u, _ = reconstruct_velocity(g, w, U, 2.6)
    for k in range(1, 5):
        assert np.all(compute_g(g, w, u, U, k) == 0.0)
    p = NormParams()
    assert norm_hs_g(g, w, u, U, p) == norm_weighted_hs(g, w, p)


def test_g1_closed_form(g):
    """For w = (1+y)^-s (1 + e cos 2 pi x) the x-factor cancels in a = -s/(1+y), and
    dx(u - U) = 2 pi e sin (1+y)^(1-s)/(s-1), so g_1 = -2 pi e sin (1+y)^-s (1 - s/(s-1))."""
    s, e = 2.6, 1e-4
    w = power(g, s, e)
    U = np.full(g.nx, 1 / (s - 1)) * (1 + e * np.cos(2 * np.pi * g.x))
    u, _ = reconstruct_velocity(g, w, U, s)
    g1 = compute_g(g, w, u, U, 1)
    expect = -2 * np.pi * e * np.sin(2 * np.pi * g.X) * (1 + g.YY) ** -s * (1 - s / (s - 1))
    mask = g.y <= 15
    assert np.max(np.abs(g1 - expect)[:, mask]) <= 5e-3 * np.max(np.abs(expect))


def test_dual_formula(g):
    from prandtl_lab.prandtl import datum_profile
    w = 0.3 * np.broadcast_to(datum_profile(g.y, 2.6), g.shape) * (1 + 0.2 * np.cos(2 * np.pi * g.X) * np.exp(-g.YY))
    U = np.full(g.nx, 0.3)
    u, _ = reconstruct_velocity(g, w, U, 2.6)
    for k in (1, 2, 4):
        a, b = compute_g(g, w, u, U, k), compute_g_dual(g, w, u, U, k)
        assert weighted_l2(g, a - b) <= 1e-3 * weighted_l2(g, a)


def test_norm_hs_g_guard_precedes_value(g):
    with pytest.raises(MonotonicityViolated):
        norm_hs_g(g, g.zeros(), g.zeros(), np.zeros(g.nx), NormParams())


def test_membership_examples(g):
    p = NormParams(delta=0.05)
    m = membership(g, 2 * p.delta * power(g, p.sigma), p)
    assert m.in_class and m.min_weighted_omega == pytest.approx(0.1)
    m = membership(g, g.zeros(), p)
    assert not m.in_class and m.min_weighted_omega == 0.0
    assert not membership(g, 0.5 * p.delta * power(g, p.sigma), p).in_class


@given(scale=st.floats(0.01, 2.0), delta=st.floats(0.01, 0.2))
def test_membership_invariant(g, scale, delta):
    p = NormParams(delta=delta)
    m = membership(g, scale * power(g, p.sigma, 0.1), p)
    assert m.in_class == (m.min_weighted_omega >= delta and m.sup_I <= delta**-2)


def test_norm_report_std(std_grid, std_state, params):
    r = norm_report(std_grid, std_state.omega, std_state.u, std_state.U, params)
    d = r.to_dict()
    assert set(d) >= {"hs_gamma", "hs_gamma_g", "min_sigma_omega", "sup_I"}
    assert all(np.isfinite(v) and v >= 0 for v in (r.hs_gamma, r.hs_gamma_g, r.u_minus_U))
    assert r.in_class


def test_almost_equiv(std_grid, std_state, params):
    st_ = std_state
    r = almost_equiv_report(std_grid, st_.omega, st_.u, st_.U, params)
    assert 0 < r.upper_ratio <= r.lower_ratio < np.inf
    c = 1.5
    u2, _ = reconstruct_velocity(std_grid, c * st_.omega, c * st_.U, params.sigma)
    p2 = NormParams(delta=params.delta / 2)
    r2 = almost_equiv_report(std_grid, c * st_.omega, u2, c * st_.U, p2)
    assert r2.lower_ratio == pytest.approx(r.lower_ratio, rel=1e-10)
    assert r2.upper_ratio == pytest.approx(r.upper_ratio, rel=1e-10)
    with pytest.raises(NotInClassError):
        almost_equiv_report(std_grid, 1e-4 * st_.omega, st_.u, st_.U, params)


def test_almost_equiv_x_independent(std_grid, params):
    from prandtl_lab.prandtl import make_standard_datum
    d = make_standard_datum(std_grid, params, amplitude=0.0)
    u, _ = reconstruct_velocity(std_grid, d.omega0, d.U0, params.sigma)
    from prandtl_lab.norms import u_minus_U_norm
    r = almost_equiv_report(std_grid, d.omega0, u, d.U0, params)
    w = norm_weighted_hs(std_grid, d.omega0, params)
    assert r.lower_ratio == pytest.approx(1 + u_minus_U_norm(std_grid, d.omega0, u, d.U0, params) / w, rel=1e-12)


def test_g_bracket(std_grid, std_state, params):
    for k in range(1, params.s + 1):
        assert g_bracket(std_grid, std_state.omega, std_state.u, std_state.U, k, params).holds
