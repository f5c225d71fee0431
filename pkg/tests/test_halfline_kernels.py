import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from tqmbv.bf_theory import bf_space
from tqmbv.halfline_kernels import (
    ALTERNATE_CUTOFF,
    DEFAULT_CUTOFF,
    Branch,
    CutoffFunction,
    GluingError,
    HalfLineChart,
    IntervalKernels,
    KernelDomainError,
    alpha_covector,
    bv_kernel,
    extended_propagator,
    gauge_fixing_apply,
    gauss,
    gauss_slope_t_integral,
    gauss_t_integral,
    heat_form,
    interval_splitting,
    kernel_identity_battery,
    propagator,
    splitting_theta,
)

SPACE = bf_space(3, 0)
SPACE1 = bf_space(3, 1)
CUTOFFS = [DEFAULT_CUTOFF, ALTERNATE_CUTOFF]
CHARTS = {c: HalfLineChart.from_space(SPACE, c) for c in CUTOFFS}


def sympy_cutoff(c):
    u = sp.Symbol("u", positive=True)
    s = (u - c.r1) / (c.r2 - c.r1)
    h = lambda z: sp.exp(-1 / z)
    phi = 1 - h(s) / (h(s) + h(1 - s))
    return u, phi


@pytest.mark.parametrize("c", CUTOFFS, ids=str)
def test_cutoff_derivatives_match_symbolic(c):
    u, phi = sympy_cutoff(c)
    d1, d2 = sp.diff(phi, u), sp.diff(phi, u, 2)
    for x in np.linspace(c.r1, c.r2, 9)[1:-1]:
        assert float(c(x)) == pytest.approx(float(phi.subs(u, x)), abs=1e-13)
        assert float(c.d1(x)) == pytest.approx(float(d1.subs(u, x)), rel=1e-10, abs=1e-10)
        assert float(c.d2(x)) == pytest.approx(float(d2.subs(u, x)), rel=1e-9, abs=1e-8)
        # evenness
        assert float(c.d1(-x)) == pytest.approx(-float(c.d1(x)))
        assert float(c.d2(-x)) == pytest.approx(float(c.d2(x)))


@pytest.mark.parametrize("c", CUTOFFS, ids=str)
def test_cutoff_plateau_and_support(c):
    u = np.linspace(-0.3, 0.3, 601)
    v = c(u)
    assert np.all(v[np.abs(u) <= c.r1] == 1.0)
    assert np.all(v[np.abs(u) >= c.r2] == 0.0)
    assert np.all((v >= 0) & (v <= 1))
    right = v[u >= 0]
    assert np.all(np.diff(right) <= 1e-15)


def test_cutoff_validation():
    with pytest.raises(ValueError):
        CutoffFunction(0.1, 0.05)


def _w_quad(g, T, u):
    # after s = w^2 the integrands below are bounded and peak near w ~ |u|
    W = np.sqrt(T)
    pts = sorted({min(W, k * abs(u)) for k in (0.1, 0.5, 1.0, 3.0)} - {0.0, W})
    edges = [0.0, *pts, W]
    return sum(integrate.quad(g, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0] for a, b in zip(edges, edges[1:]))


@given(st.floats(1e-3, 5.0), st.floats(-3.0, 3.0).filter(lambda u: u == 0 or abs(u) > 1e-8))
def test_gaussian_t_integrals_against_quadrature(T, u):
    # int_0^T G_s(u) ds  ->  int_0^sqrt(T) exp(-u^2 / 4w^2) / sqrt(pi) dw
    # below w = |u| / 1000 the exponentials are exactly zero in double precision
    F = _w_quad(lambda w: np.exp(-(u * u) / (4 * w * w)) / np.sqrt(np.pi) if w > abs(u) * 1e-3 else float(u == 0) / np.sqrt(np.pi), T, u)
    assert float(gauss_t_integral(T, u)) == pytest.approx(F, abs=1e-10)
    if abs(u) > 1e-6:
        E = _w_quad(lambda w: -u * np.exp(-(u * u) / (4 * w * w)) / (2 * np.sqrt(np.pi) * w * w) if w > abs(u) * 1e-3 else 0.0, T, u)
        assert float(gauss_slope_t_integral(T, u)) == pytest.approx(E, abs=1e-9)


@pytest.mark.parametrize("c", CUTOFFS, ids=str)
@pytest.mark.parametrize("x,y", [(0.3, 0.34), (0.01, 0.06), (0.07, 0.02), (0.0, 0.05), (0.5, 0.5), (1.2, 0.2)])
@pytest.mark.parametrize("eps,lam", [(1e-3, 0.1), (0.01, 1.0), (0.1, 10.0)])
def test_three_propagator_routes_agree(c, x, y, eps, lam):
    ch = CHARTS[c]
    closed = propagator(ch, eps, lam, x, y).form0
    quad = propagator(ch, eps, lam, x, y, method="quad").form0
    tg = propagator(ch, eps, lam, x, y, method="tgauss").form0
    assert np.abs(closed - quad).max() < 1e-9
    assert np.abs(closed - tg).max() < 1e-9


@given(st.floats(1e-4, 0.05), st.floats(1.0, 4.0), st.floats(0.2, 20.0), st.floats(0, 1.5), st.floats(0, 1.5))
def test_propagator_is_additive_in_scale(eps, m1, m2, x, y):
    ch = CHARTS[DEFAULT_CUTOFF]
    mid, lam = eps * m1, eps * m1 * m2
    a = ch.propagator_matrix(eps, mid, x, y) + ch.propagator_matrix(mid, lam, x, y)
    assert np.abs(a - ch.propagator_matrix(eps, lam, x, y)).max() < 1e-12


@pytest.mark.parametrize("c", CUTOFFS, ids=str)
@given(x=st.floats(0.0, 3.0), lam=st.floats(0.05, 20.0))
def test_branch_jump_and_corners(c, x, lam):
    ch = CHARTS[c]
    jump = ch.propagator_matrix(0.0, lam, x, x, Branch.C1) - ch.propagator_matrix(0.0, lam, x, x, Branch.C2)
    assert np.abs(jump + ch.K / 2).max() < 1e-8
    assert np.abs(ch.propagator_matrix(0.0, lam, 0, 0, Branch.C1) + ch.K_minus / 2).max() < 1e-8
    assert np.abs(ch.propagator_matrix(0.0, lam, 0, 0, Branch.C2) - ch.K_plus / 2).max() < 1e-8
    assert np.abs(ch.propagator_matrix(lam / 10, lam, 0, 0)).max() == 0.0


def test_extended_limit_off_diagonal():
    ch = CHARTS[DEFAULT_CUTOFF]
    target = ch.propagator_matrix(0.0, 1.0, 0.2, 0.23, Branch.C1)
    gaps = [np.abs(ch.propagator_matrix(e, 1.0, 0.2, 0.23) - target).max() for e in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-5


def test_exterior_derivative_identity_on_plateau():
    ch = CHARTS[DEFAULT_CUTOFF]
    x, y, eps, lam, h = 0.31, 0.33, 0.01, 1.0, 1e-5
    gx = (ch.propagator_matrix(eps, lam, x + h, y) - ch.propagator_matrix(eps, lam, x - h, y)) / (2 * h)
    gy = (ch.propagator_matrix(eps, lam, x, y + h) - ch.propagator_matrix(eps, lam, x, y - h)) / (2 * h)
    kl, ke = bv_kernel(ch, lam, x, y), bv_kernel(ch, eps, x, y)
    assert np.abs(gx - (kl.dx - ke.dx)).max() < 1e-6
    assert np.abs(gy - (kl.dy - ke.dy)).max() < 1e-6


def test_heat_form():
    with pytest.raises(KernelDomainError):
        heat_form(0.0, 0.1, 0.2)
    hx, hy = heat_form(0.1, 0.3, 0.2)
    a, b = gauss(0.1, 0.1), gauss(0.1, 0.5)
    assert (hx, hy) == pytest.approx((-a - b, a - b))
    # the mollifier is invisible where both separations sit on the plateau
    assert heat_form(0.1, 0.01, 0.02, mollified=True) == pytest.approx(heat_form(0.1, 0.01, 0.02))
    mx, my = heat_form(0.1, 0.5, 0.1, mollified=True)
    assert (mx, my) == (0.0, 0.0) or (abs(mx) < 1e-300 and abs(my) < 1e-300)


def test_gauge_fixing_apply_on_polynomials():
    form = lambda x, y: (x**2 * y, x * y**3)
    out = gauge_fixing_apply(form, h=1e-4)
    for x, y in [(0.3, 0.7), (1.0, -2.0), (0.0, 0.5)]:
        assert out(x, y) == pytest.approx(-2 * x * y - 3 * x * y**2, abs=1e-7)


def test_splitting_boundary_value_and_linearity():
    ch = CHARTS[DEFAULT_CUTOFF]
    a = np.zeros(SPACE.dim)
    b = np.zeros(SPACE.dim)
    a[3], b[4], b[5] = 1.0, 2.0, -0.5
    for t in (0.01, 1.0):
        assert np.abs(splitting_theta(ch, SPACE, t, a, 0.0) - a).max() < 1e-12
        for x in (0.0, 0.03, 0.2):
            lhs = splitting_theta(ch, SPACE, t, 2 * a + b, x)
            rhs = 2 * splitting_theta(ch, SPACE, t, a, x) + splitting_theta(ch, SPACE, t, b, x)
            assert np.abs(lhs - rhs).max() < 1e-13
    # far outside the cutoff the splitting is extension by zero
    assert np.abs(splitting_theta(ch, SPACE, 1.0, a, 0.3)).max() == 0.0
    with pytest.raises(KernelDomainError):
        alpha_covector(SPACE, np.eye(SPACE.dim)[0])


def test_interval_rules():
    with pytest.raises(GluingError):
        IntervalKernels.from_spaces(SPACE, SPACE1, CutoffFunction(0.1, 0.2))
    ik = IntervalKernels.from_spaces(SPACE, SPACE1, ALTERNATE_CUTOFF)
    with pytest.raises(KernelDomainError):
        ik.propagator_matrix(0.01, 1.0, 1.2, 0.3)
    l0, l1 = np.zeros(SPACE.dim), np.zeros(SPACE.dim)
    l0[3] = 1.0
    l1[0] = 1.0
    assert np.abs(interval_splitting(ik, SPACE, SPACE1, 0.5, l0, l1, 0.0) - l0).max() < 1e-12
    assert np.abs(interval_splitting(ik, SPACE, SPACE1, 0.5, l0, l1, 1.0) - l1).max() < 1e-12


def test_domain_errors():
    ch = CHARTS[DEFAULT_CUTOFF]
    with pytest.raises(KernelDomainError):
        propagator(ch, 1.0, 0.1, 0.2, 0.3)
    with pytest.raises(KernelDomainError):
        extended_propagator(ch, 1.0, Branch.C1, 0.5, 0.2)
    with pytest.raises(KernelDomainError):
        ch.propagator_matrix(0.0, 1.0, 0.2, 0.3)
    with pytest.raises(KernelDomainError):
        bv_kernel(ch, 0.0, 0.1, 0.1)


def test_reduced_battery_has_no_failures():
    items = kernel_identity_battery(SPACE, ALTERNATE_CUTOFF, lams=(1.0,), fd_points=((0.3, 0.32), (0.02, 0.035)),
                                    fd_scales=((0.01, 1.0),), space1=SPACE1)
    assert items and all(i.verdict(1e-8 if i.route == "closed-form" else 1e-5) != "fail" for i in items)
