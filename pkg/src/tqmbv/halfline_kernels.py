"""Heat-kernel forms, BV kernels, propagators and renormalized splittings on the
half-line and on the unit interval.

Scalar conventions.  With G_t(u) = (4 pi t)^{-1/2} exp(-u^2/4t) and psi_t = phi * G_t,
the gauge-fixing operator applied to the mollified heat form is
2 (psi_t'(x-y) + psi_t'(x+y)).  The t-integral of psi_t' has a closed form because
phi does not depend on t:

    int_eps^lam psi_t'(u) dt = phi'(u) (F_lam - F_eps)(u) + phi(u) (E_lam - E_eps)(u)

with F_T(u) = sqrt(T/pi) e^{-u^2/4T} - |u|/2 erfc(|u|/sqrt(4T)) and
E_T(u) = F_T'(u) = -sign(u)/2 erfc(|u|/sqrt(4T)).  At eps = 0 and u = 0 the sign is
taken from the branch of the two-point configuration space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import integrate
from scipy.special import erfc

from .graded_core import SymplecticSpace


class KernelDomainError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


class GluingError(RuntimeError):
    pass


class Branch(Enum):
    C1 = "C1"  # x <= y
    C2 = "C2"  # y <= x


@dataclass(frozen=True)
class QuadratureSpec:
    rule: str = "quadpack"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 400
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("quadrature tolerances must be positive")


# --- cutoff ---------------------------------------------------------------------------


def _h(s):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)


def _h1(s):
    with np.errstate(divide="ignore", invalid="ignore"):
        ss = np.where(s > 0, s, 1.0)
        return np.where(s > 0, _h(s) / ss**2, 0.0)


def _h2(s):
    with np.errstate(divide="ignore", invalid="ignore"):
        ss = np.where(s > 0, s, 1.0)
        return np.where(s > 0, _h(s) * (1 - 2 * ss) / ss**4, 0.0)


@dataclass(frozen=True)
class CutoffFunction:
    """Even smooth plateau: 1 on [-r1, r1], 0 outside (-r2, r2), exponential glue between."""

    r1: float = 0.05
    r2: float = 0.1

    def __post_init__(self):
        if not 0 < self.r1 < self.r2:
            raise ValueError("cutoff needs 0 < r1 < r2")

    def _s(self, u):
        return np.clip((np.abs(u) - self.r1) / (self.r2 - self.r1), 0.0, 1.0)

    def _parts(self, u):
        s = self._s(u)
        A, B = _h(s), _h(1 - s)
        A1, B1 = _h1(s), -_h1(1 - s)
        A2, B2 = _h2(s), _h2(1 - s)
        return s, A, B, A1, B1, A2, B2

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        _, A, B, *_ = self._parts(u)
        return 1.0 - A / (A + B)

    def d1(self, u):
        u = np.asarray(u, dtype=float)
        _, A, B, A1, B1, _, _ = self._parts(u)
        D = A + B
        S1 = (A1 * B - A * B1) / D**2
        return -np.sign(u) * S1 / (self.r2 - self.r1)

    def d2(self, u):
        u = np.asarray(u, dtype=float)
        _, A, B, A1, B1, A2, B2 = self._parts(u)
        D = A + B
        N = A1 * B - A * B1
        S2 = (A2 * B - A * B2) / D**2 - 2 * N * (A1 + B1) / D**3
        return -S2 / (self.r2 - self.r1) ** 2


DEFAULT_CUTOFF = CutoffFunction()
ALTERNATE_CUTOFF = CutoffFunction(0.02, 0.04)


# --- Gaussian building blocks -----------------------------------------------------------


def gauss(t, u):
    u = np.asarray(u, dtype=float)
    return np.exp(-(u**2) / (4 * t)) / np.sqrt(4 * np.pi * t)


def gauss_t_integral(T, u):
    """F_T(u) = int_0^T G_s(u) ds."""
    u = np.abs(np.asarray(u, dtype=float))
    if T == 0:
        return np.zeros_like(u)
    return np.sqrt(T / np.pi) * np.exp(-(u**2) / (4 * T)) - 0.5 * u * erfc(u / np.sqrt(4 * T))


def gauss_slope_t_integral(T, u, side=0):
    """E_T(u) = int_0^T d/du G_s(u) ds; ``side`` gives the sign used at u = 0."""
    u = np.asarray(u, dtype=float)
    if T == 0:
        return np.zeros_like(u)
    sg = np.where(u > 0, 1.0, np.where(u < 0, -1.0, float(side)))
    return -0.5 * sg * erfc(np.abs(u) / np.sqrt(4 * T))


def psi_prime_t_integral(eps, lam, u, cutoff: CutoffFunction, side=0):
    """int_eps^lam d/du (phi G_t)(u) dt in closed form."""
    u = np.asarray(u, dtype=float)
    dF = gauss_t_integral(lam, u) - gauss_t_integral(eps, u)
    dE = gauss_slope_t_integral(lam, u, side) - gauss_slope_t_integral(eps, u, side)
    return cutoff.d1(u) * dF + cutoff(u) * dE


def psi_prime(t, u, cutoff: CutoffFunction):
    """d/du (phi G_t)(u), analytically pre-differentiated."""
    u = np.asarray(u, dtype=float)
    g = gauss(t, u)
    return cutoff.d1(u) * g + cutoff(u) * (-u / (2 * t)) * g


# --- forms ----------------------------------------------------------------------------


def heat_form(t, x, y, mollified: bool = False, cutoff: CutoffFunction = DEFAULT_CUTOFF, mirror: float = 0.0):
    """(dx, dy) components of H_t or its mollified version.

    ``mirror`` is the image-charge center: 0 for the half-line, 2 for the chart at x = 1.
    """
    if t <= 0:
        raise KernelDomainError("heat form needs t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    s = x + y - mirror
    a = gauss(t, d)
    b = gauss(t, s)
    if mollified:
        a = a * cutoff(d)
        b = b * cutoff(s)
    return -a - b, a - b


def gauge_fixing_apply(one_form, h: float = 1e-4):
    """Return (x, y) -> -d/dx A - d/dy B for a 1-form (x, y) -> (A, B), by central differences."""

    def out(x, y):
        ax1, _ = one_form(x + h, y)
        ax0, _ = one_form(x - h, y)
        _, by1 = one_form(x, y + h)
        _, by0 = one_form(x, y - h)
        return -(ax1 - ax0) / (2 * h) - (by1 - by0) / (2 * h)

    return out


@dataclass
class FieldKernelValue:
    """Form-graded V (x) V valued value at a point: components along 1, dx, dy, dx^dy."""

    point: tuple
    form0: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxdy: np.ndarray
    path: str = "closed-form"

    @classmethod
    def zero_form(cls, point, m, path="closed-form"):
        z = np.zeros_like(m)
        return cls(point, m, z, z.copy(), z.copy(), path)

    @classmethod
    def one_form(cls, point, mdx, mdy, path="closed-form"):
        z = np.zeros_like(mdx)
        return cls(point, z, mdx, mdy, z.copy(), path)

    def is_pure_zero_form(self, tol=0.0) -> bool:
        return max(np.abs(self.dx).max(), np.abs(self.dy).max(), np.abs(self.dxdy).max()) <= tol

    def is_pure_one_form(self, tol=0.0) -> bool:
        return max(np.abs(self.form0).max(), np.abs(self.dxdy).max()) <= tol


# --- kernel families ------------------------------------------------------------------


def _mat(kt) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in kt.matrix()])


@dataclass
class HalfLineChart:
    """Kernels for one boundary point.  ``mirror`` = 0 models R>=0, 2 models R<=1."""

    K_plus: np.ndarray
    K_minus: np.ndarray
    cutoff: CutoffFunction = DEFAULT_CUTOFF
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    mirror: float = 0.0

    @classmethod
    def from_space(cls, space: SymplecticSpace, cutoff=DEFAULT_CUTOFF, quad=None, mirror=0.0):
        return cls(_mat(space.K_plus), _mat(space.K_minus), cutoff, quad or QuadratureSpec(), mirror)

    @property
    def K(self):
        return self.K_plus + self.K_minus

    @property
    def image_side(self) -> int:
        # sign of x + y - mirror as it approaches 0 from inside the domain
        return 1 if self.mirror == 0 else -1

    # scalar propagator coefficient p(x, y) = -1/2 [Psi(x - y) + Psi(x + y - mirror)]
    def p_scalar(self, eps, lam, x, y, diag_side=0):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = self.cutoff
        return -0.5 * (
            psi_prime_t_integral(eps, lam, x - y, c, diag_side)
            + psi_prime_t_integral(eps, lam, x + y - self.mirror, c, self.image_side)
        )

    def p_scalar_quad(self, eps, lam, x, y):
        """Same coefficient by adaptive quadrature of the pre-differentiated t-integrand."""
        if eps <= 0:
            raise KernelDomainError("quadrature route needs eps > 0")
        c = self.cutoff
        q = self.quad

        def f(t):
            return -0.5 * float(psi_prime(t, x - y, c) + psi_prime(t, x + y - self.mirror, c))

        # split the t-range geometrically so narrow early peaks are resolved
        edges = np.geomspace(eps, lam, max(2, int(np.log10(lam / eps) * 4) + 2))
        total, err = 0.0, 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(f, a, b, epsabs=q.abs_tol, epsrel=q.rel_tol, limit=q.max_subdivisions)
            total += v
            err += e
        if err > 100 * max(q.abs_tol, q.rel_tol * abs(total)):
            raise QuadratureError(f"t-integral did not converge: error estimate {err:.3e}")
        return total

    def p_scalar_tgauss(self, eps, lam, x, y, per_decade: int = 6, order: int = 24):
        """Vectorized t-quadrature: Gauss-Legendre on geometric panels of [eps, lam]."""
        if eps <= 0:
            raise KernelDomainError("quadrature route needs eps > 0")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        nodes, weights = np.polynomial.legendre.leggauss(order)
        edges = np.geomspace(eps, lam, max(2, int(np.ceil(np.log10(lam / eps) * per_decade)) + 1))
        total = np.zeros(np.broadcast(x, y).shape)
        for a, b in zip(edges[:-1], edges[1:]):
            for tn, wn in zip(0.5 * (a + b) + 0.5 * (b - a) * nodes, 0.5 * (b - a) * weights):
                total += wn * (psi_prime(tn, x - y, self.cutoff) + psi_prime(tn, x + y - self.mirror, self.cutoff))
        return -0.5 * total

    def assemble(self, p_xy, p_yx):
        """P = p(x,y) K_+ - p(y,x) K_-; scalars may be arrays (broadcast to leading dims)."""
        p_xy = np.asarray(p_xy, dtype=float)[..., None, None]
        p_yx = np.asarray(p_yx, dtype=float)[..., None, None]
        return p_xy * self.K_plus - p_yx * self.K_minus

    def branch_sides(self, branch: Branch):
        # side of x - y (and of y - x) as it reaches the diagonal
        return (-1, 1) if branch is Branch.C1 else (1, -1)

    def propagator_matrix(self, eps, lam, x, y, branch: Branch | None = None):
        if eps == 0:
            if branch is None:
                raise KernelDomainError("extended propagator needs a branch")
            s_xy, s_yx = self.branch_sides(branch)
        else:
            s_xy = s_yx = 0
        return self.assemble(self.p_scalar(eps, lam, x, y, s_xy), self.p_scalar(eps, lam, y, x, s_yx))

    # BV kernel pieces
    def _dprime(self, t, u):
        c = self.cutoff
        return c.d2(u) * gauss_t_integral(t, u) + 2 * c.d1(u) * gauss_slope_t_integral(t, u) + (c(u) - 1) * gauss(t, u)

    def k_components(self, t, x, y):
        """dx and dy components of H_t - 1/2 d (d^GF (x) 1 + 1 (x) d^GF) int_0^t (H~ - H)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        d, s = x - y, x + y - self.mirror
        hx, hy = heat_form(t, x, y, mirror=self.mirror)
        Dd, Ds = self._dprime(t, d), self._dprime(t, s)
        return hx - (Dd + Ds), hy - (-Dd + Ds)

    def bv_kernel_matrices(self, t, x, y):
        kx, ky = self.k_components(t, x, y)
        sx, sy = self.k_components(t, y, x)
        # sigma pulls back along the swap, exchanging dx and dy
        mdx = 0.5 * np.asarray(kx)[..., None, None] * self.K_plus - 0.5 * np.asarray(sy)[..., None, None] * self.K_minus
        mdy = 0.5 * np.asarray(ky)[..., None, None] * self.K_plus - 0.5 * np.asarray(sx)[..., None, None] * self.K_minus
        return mdx, mdy


# --- public operations ------------------------------------------------------------------


def propagator(chart: HalfLineChart, eps, lam, x, y, method: str = "closed") -> FieldKernelValue:
    if not 0 < eps < lam:
        raise KernelDomainError("propagator needs 0 < eps < lam")
    if method == "closed":
        m = chart.propagator_matrix(eps, lam, x, y)
    elif method == "quad":
        m = chart.assemble(chart.p_scalar_quad(eps, lam, x, y), chart.p_scalar_quad(eps, lam, y, x))
    elif method == "tgauss":
        m = chart.assemble(chart.p_scalar_tgauss(eps, lam, x, y), chart.p_scalar_tgauss(eps, lam, y, x))
    else:
        raise ValueError(f"unknown method {method!r}")
    return FieldKernelValue.zero_form((x, y), m, path=method)


def extended_propagator(chart: HalfLineChart, lam, branch: Branch, x, y) -> FieldKernelValue:
    """eps = 0 propagator on one sheet of the two-point configuration space."""
    if lam <= 0:
        raise KernelDomainError("need lam > 0")
    inside = x <= y + 1e-15 if branch is Branch.C1 else y <= x + 1e-15
    if not inside:
        raise KernelDomainError(f"point {(x, y)} is not in branch {branch.value}")
    return FieldKernelValue.zero_form((x, y), chart.propagator_matrix(0.0, lam, x, y, branch))


def bv_kernel(chart: HalfLineChart, t, x, y) -> FieldKernelValue:
    if t <= 0:
        raise KernelDomainError("BV kernel needs t > 0")
    mdx, mdy = chart.bv_kernel_matrices(t, x, y)
    return FieldKernelValue.one_form((x, y), mdx, mdy)


def alpha_covector(space: SymplecticSpace, lprime) -> np.ndarray:
    """a -> omega(l', e_a) for l' in L'; components outside L' are rejected."""
    lp = np.asarray(lprime, dtype=float)
    for i, s in enumerate(space.sides):
        if s != "Lprime" and lp[i] != 0:
            raise KernelDomainError("splitting input must lie in L'")
    W = np.array([[float(v) for v in row] for row in space.omega_matrix()])
    return lp @ W


def splitting_theta(chart: HalfLineChart, space: SymplecticSpace, t, lprime, x) -> np.ndarray:
    """theta_t(l')(x) = 2 (alpha(l' (x) -) (x) 1) Pbar(0, t)|_C1 (0, x)."""
    if t <= 0 or x < 0:
        raise KernelDomainError("splitting needs t > 0 and x >= 0")
    m = chart.propagator_matrix(0.0, t, 0.0, x, Branch.C1)
    return 2.0 * alpha_covector(space, lprime) @ m


# --- interval ---------------------------------------------------------------------------


@dataclass
class IntervalKernels:
    """Glued kernels on [0, 1]: chart 0 is the half-line at 0, chart 1 the mirror chart at 1."""

    chart0: HalfLineChart
    chart1: HalfLineChart
    gluing_tol: float = 1e-10

    @classmethod
    def from_spaces(cls, space0: SymplecticSpace, space1: SymplecticSpace, cutoff=DEFAULT_CUTOFF, quad=None):
        if cutoff.r2 > 0.1:
            raise GluingError("cutoff support radius must not exceed 0.1 for the interval")
        q = quad or QuadratureSpec()
        return cls(
            HalfLineChart.from_space(space0, cutoff, q, 0.0),
            HalfLineChart.from_space(space1, cutoff, q, 2.0),
        )

    @staticmethod
    def _near0(x, y):
        return x <= 0.1 and y <= 0.1

    @staticmethod
    def _near1(x, y):
        return x >= 0.9 and y >= 0.9

    def propagator_matrix(self, eps, lam, x, y, branch: Branch | None = None, check=True):
        if not (0 <= x <= 1 and 0 <= y <= 1):
            raise KernelDomainError("interval kernels live on [0,1]^2")
        if self._near1(x, y):
            return self.chart1.propagator_matrix(eps, lam, x, y, branch)
        m0 = self.chart0.propagator_matrix(eps, lam, x, y, branch)
        if check and not self._near0(x, y):
            m1 = self.chart1.propagator_matrix(eps, lam, x, y, branch)
            if np.abs(m0 - m1).max() > self.gluing_tol:
                raise GluingError(f"charts disagree at {(x, y)} by {np.abs(m0 - m1).max():.3e}")
        return m0

    def bv_kernel_matrices(self, t, x, y):
        chart = self.chart1 if self._near1(x, y) else self.chart0
        return chart.bv_kernel_matrices(t, x, y)


def glued_propagator_interval(ik: IntervalKernels, eps, lam, x, y, branch: Branch | None = None) -> FieldKernelValue:
    if eps == 0 and branch is None:
        raise KernelDomainError("extended interval propagator needs a branch")
    return FieldKernelValue.zero_form((x, y), ik.propagator_matrix(eps, lam, x, y, branch))


def interval_splitting(ik: IntervalKernels, space0: SymplecticSpace, space1: SymplecticSpace, t, l0, l1, y) -> np.ndarray:
    """2 (alpha_0(l0 (x) -) (x) 1) Pbar|_C1(0, y) - 2 (alpha_1(l1 (x) -) (x) 1) Pbar|_C2(1, y)."""
    if not 0 <= y <= 1:
        raise KernelDomainError("interval splitting is sampled on [0,1]")
    m0 = ik.propagator_matrix(0.0, t, 0.0, y, Branch.C1, check=False)
    m1 = ik.propagator_matrix(0.0, t, 1.0, y, Branch.C2, check=False)
    return 2.0 * alpha_covector(space0, l0) @ m0 - 2.0 * alpha_covector(space1, l1) @ m1


# --- identity battery -------------------------------------------------------------------


def richardson_derivative(f, x, h):
    """Central difference with one Richardson step (error O(h^4))."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


@dataclass
class BatteryItem:
    label: str
    residual: float
    floor: float  # accuracy limit of the evaluation route
    route: str

    def verdict(self, tol):
        limit = max(tol, self.floor)
        if self.residual > limit:
            return "fail"
        return "limited" if self.residual > tol else "pass"


def _fd_pair(fx, fy, x, y, h, target=1e-7, h_min=1e-6):
    """(d/dx, d/dy) of matrix-valued f at (x, y): Richardson differences, halving h until
    two successive estimates agree to ``target``.  Returns (gx, gy, step change, h used)."""
    prev = None
    while True:
        g = (richardson_derivative(lambda s: fx(s, y), x, h), richardson_derivative(lambda s: fy(x, s), y, h))
        if prev is not None:
            change = max(np.abs(g[0] - prev[0]).max(), np.abs(g[1] - prev[1]).max())
            if change < target or h / 2 < h_min:
                return g[0], g[1], change, h
        prev = g
        h /= 2


def kernel_identity_battery(
    space: SymplecticSpace,
    cutoff: CutoffFunction = DEFAULT_CUTOFF,
    lams=(0.1, 1.0, 10.0),
    xs=(0.0, 0.3, 1.0, 2.5),
    eps_seq=(1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    fd_points=((0.3, 0.32), (0.05, 0.12), (0.5, 0.45), (0.02, 0.035), (0.15, 0.07)),
    fd_scales=((0.01, 1.0), (0.1, 10.0), (0.001, 0.1)),
    fd_step: float = 2e-3,
    fd_floor: float = 1e-5,
    space1: SymplecticSpace | None = None,
):
    """Evaluate the free-theory identities; returns a list of BatteryItem."""
    ch = HalfLineChart.from_space(space, cutoff)
    K, Kp, Km = ch.K, ch.K_plus, ch.K_minus
    items = []

    def add(label, res, floor, route):
        items.append(BatteryItem(label, float(res), floor, route))

    for lam in lams:
        c1 = ch.propagator_matrix(0.0, lam, 0.0, 0.0, Branch.C1)
        c2 = ch.propagator_matrix(0.0, lam, 0.0, 0.0, Branch.C2)
        add(f"corner C1 lam={lam}", np.abs(c1 + Km / 2).max(), 1e-12, "closed-form")
        add(f"corner C2 lam={lam}", np.abs(c2 - Kp / 2).max(), 1e-12, "closed-form")
        add(f"P(eps,lam)(0,0) lam={lam}", np.abs(ch.propagator_matrix(1e-3, lam, 0.0, 0.0)).max(), 1e-12, "closed-form")
        for x in xs:
            j = ch.propagator_matrix(0.0, lam, x, x, Branch.C1) - ch.propagator_matrix(0.0, lam, x, x, Branch.C2)
            add(f"branch jump x={x} lam={lam}", np.abs(j + K / 2).max(), 1e-12, "closed-form")

    # eps -> 0 limits: off-diagonal, open diagonal, corner
    lam = 1.0
    for label, (x, y), target in (
        ("off-diagonal", (0.3, 0.34), ch.propagator_matrix(0.0, lam, 0.3, 0.34, Branch.C1)),
        ("open diagonal", (0.3, 0.3), 0.5 * (ch.propagator_matrix(0.0, lam, 0.3, 0.3, Branch.C1)
                                             + ch.propagator_matrix(0.0, lam, 0.3, 0.3, Branch.C2))),
        ("corner", (0.0, 0.0), np.zeros_like(K)),
    ):
        vals = [ch.propagator_matrix(e, lam, x, y) for e in eps_seq]
        gaps = [np.abs(v - target).max() for v in vals]
        # Richardson on the last two members, assuming the leading error is linear in eps
        e1, e2 = eps_seq[-2], eps_seq[-1]
        extrap = (e1 * vals[-1] - e2 * vals[-2]) / (e1 - e2)
        add(f"limit {label} (eps={eps_seq[-1]})", gaps[-1], 1e-10, "closed-form")
        add(f"limit {label} Richardson", np.abs(extrap - target).max(), 1e-10, "closed-form")
        add(f"limit {label} monotone", 0.0 if all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:])) else 1.0, 0.0, "closed-form")

    # exterior-derivative identities
    for eps, lam in fd_scales:
        for x, y in fd_points:
            f = lambda a, b: ch.propagator_matrix(eps, lam, a, b)
            gx, gy, _, _ = _fd_pair(f, f, x, y, fd_step)
            kl = ch.bv_kernel_matrices(lam, x, y)
            ke = ch.bv_kernel_matrices(eps, x, y)
            res = max(np.abs(gx - (kl[0] - ke[0])).max(), np.abs(gy - (kl[1] - ke[1])).max())
            add(f"dP(eps,lam)=K_lam-K_eps at {(x, y)} eps={eps} lam={lam}", res, fd_floor, "finite-difference")
            br = Branch.C1 if x < y else Branch.C2
            fb = lambda a, b: ch.propagator_matrix(0.0, lam, a, b, br)
            gx, gy, _, _ = _fd_pair(fb, fb, x, y, fd_step)
            res = max(np.abs(gx - kl[0]).max(), np.abs(gy - kl[1]).max())
            add(f"dPbar(0,lam)=K_lam at {(x, y)} lam={lam}", res, fd_floor, "finite-difference")
            # dK = (d/dx K_dy - d/dy K_dx) dx^dy
            kdy = lambda a, b: ch.bv_kernel_matrices(lam, a, b)[1]
            kdx = lambda a, b: ch.bv_kernel_matrices(lam, a, b)[0]
            ddx, ddy, _, _ = _fd_pair(kdy, kdx, x, y, fd_step)
            add(f"dK_lam=0 at {(x, y)} lam={lam}", np.abs(ddx - ddy).max(), fd_floor, "finite-difference")

    # splitting: boundary value, and agreement with the erfc profile where the cutoff is flat
    lp = np.zeros(space.dim)
    lprime_idx = space.side_indices("Lprime")
    lp[lprime_idx] = np.arange(1, len(lprime_idx) + 1)
    for t in (0.01, 0.1, 1.0):
        add(f"theta_t(l')(0) = (0, l') t={t}", np.abs(splitting_theta(ch, space, t, lp, 0.0) - lp).max(), 1e-12, "closed-form")
        for x in np.linspace(0.0, cutoff.r1 / 2, 6)[1:]:
            # inside the plateau both Gaussian images combine into erfc(x / sqrt(4t))
            prof = lp * float(erfc(x / np.sqrt(4 * t)))
            add(f"theta erfc profile x={x:.4f} t={t}", np.abs(splitting_theta(ch, space, t, lp, x) - prof).max(), 1e-12, "closed-form")

    if space1 is not None:
        ik = IntervalKernels.from_spaces(space, space1, cutoff)
        K1p, K1m = ik.chart1.K_plus, ik.chart1.K_minus
        for a, b in ((0.2, 0.25), (0.5, 0.5), (0.8, 0.3), (0.33, 0.71)):
            for br in (Branch.C1, Branch.C2) if a == b else (Branch.C1 if a < b else Branch.C2,):
                m0 = ik.chart0.propagator_matrix(0.0, 1.0, a, b, br)
                m1 = ik.chart1.propagator_matrix(0.0, 1.0, a, b, br)
                free = ch.assemble(-0.5 * psi_prime_t_integral(0.0, 1.0, a - b, cutoff, -1 if br is Branch.C1 else 1),
                                   -0.5 * psi_prime_t_integral(0.0, 1.0, b - a, cutoff, 1 if br is Branch.C1 else -1))
                add(f"gluing overlap {(a, b)}", np.abs(m0 - m1).max(), 1e-10, "closed-form")
                add(f"free-line reduction {(a, b)}", np.abs(m0 - free).max(), 1e-10, "closed-form")
        for lam in lams:
            add(f"interval corner (0,0) C1 lam={lam}",
                np.abs(ik.propagator_matrix(0.0, lam, 0.0, 0.0, Branch.C1) + Km / 2).max(), 1e-12, "closed-form")
            add(f"interval corner (1,1) C1 lam={lam}",
                np.abs(ik.propagator_matrix(0.0, lam, 1.0, 1.0, Branch.C1) + K1p / 2).max(), 1e-12, "closed-form")
            add(f"interval corner (1,1) C2 lam={lam}",
                np.abs(ik.propagator_matrix(0.0, lam, 1.0, 1.0, Branch.C2) - K1m / 2).max(), 1e-12, "closed-form")
    return items
