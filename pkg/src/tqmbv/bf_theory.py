"""One-dimensional BF theory built from Lie-algebra structure constants.

The boundary space is g*[-1] + g[1] with generators eps_a (degree 1) and eta_a
(degree -1).  Their duals are B_a and A_a.  Endpoint 0 uses L0 = span(eps) and
endpoint 1 uses L1 = span(eta).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .bvbfv_check import CheckReport, IntervalTheory, check_qme_interval
from .graded_core import Generator, Series, SymplecticSpace, TruncationCaps, ValidationError
from .weyl_moyal import BoundaryAlgebraContext

BF_CAPS = TruncationCaps(max_hbar=3, max_degree=6, max_bracket_depth=8)


@dataclass
class LieAlgebraData:
    name: str
    dim: int
    f: dict  # (a, b, c) -> f^{ab}_c, zero entries omitted

    def __post_init__(self):
        self.f = {k: Fraction(v) for k, v in self.f.items() if v}
        for (a, b, c), v in self.f.items():
            if not all(0 <= i < self.dim for i in (a, b, c)):
                raise ValidationError(f"structure constant index out of range: {(a, b, c)}")
            if self.f.get((b, a, c), 0) != -v:
                raise ValidationError(f"structure constants not antisymmetric at {(a, b, c)}")

    def bracket_coeff(self, a, b, c) -> Fraction:
        return self.f.get((a, b, c), Fraction(0))


def _from_brackets(name, dim, brackets):
    f = {}
    for (a, b), out in brackets.items():
        for c, v in out.items():
            f[(a, b, c)] = Fraction(v)
            f[(b, a, c)] = -Fraction(v)
    return LieAlgebraData(name, dim, f)


def abelian(dim: int) -> LieAlgebraData:
    return LieAlgebraData(f"abelian{dim}", dim, {})


def sl2() -> LieAlgebraData:
    # basis (e, f, h)
    return _from_brackets("sl2", 3, {(0, 1): {2: 1}, (2, 0): {0: 2}, (2, 1): {1: -2}})


def so3() -> LieAlgebraData:
    return _from_brackets("so3", 3, {(0, 1): {2: 1}, (1, 2): {0: 1}, (2, 0): {1: 1}})


def heisenberg() -> LieAlgebraData:
    return _from_brackets("heisenberg", 3, {(0, 1): {2: 1}})


def affine2() -> LieAlgebraData:
    """Two-dimensional non-abelian algebra [t0, t1] = t1 (not unimodular)."""
    return _from_brackets("affine2", 2, {(0, 1): {1: 1}})


def solvable3() -> LieAlgebraData:
    """[t0,t1]=t1, [t0,t2]=2 t2: non-unimodular, dimension 3."""
    return _from_brackets("solvable3", 3, {(0, 1): {1: 1}, (0, 2): {2: 2}})


def affine2_plus_center() -> LieAlgebraData:
    return _from_brackets("affine2+u1", 4, {(0, 1): {1: 1}})


BUILTIN = {
    "abelian1": lambda: abelian(1),
    "abelian2": lambda: abelian(2),
    "abelian3": lambda: abelian(3),
    "abelian4": lambda: abelian(4),
    "sl2": sl2,
    "so3": so3,
    "heisenberg": heisenberg,
    "affine2": affine2,
    "solvable3": solvable3,
    "affine2+u1": affine2_plus_center,
}


def builtin_algebra(name: str) -> LieAlgebraData:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise ValidationError(f"unknown algebra {name!r}; choose from {sorted(BUILTIN)}") from None


def check_jacobi(g: LieAlgebraData) -> CheckReport:
    """Brute-force cyclic sum of f^{ab}_{b'} f^{a'b'}_{c'} over every index triple."""
    n = g.dim
    bad = []
    for a in range(n):
        for b in range(n):
            for e in range(n):
                for out in range(n):
                    s = Fraction(0)
                    # [[a,b],e] + [[b,e],a] + [[e,a],b]
                    for (x, y, z) in ((a, b, e), (b, e, a), (e, a, b)):
                        for m in range(n):
                            s += g.bracket_coeff(x, y, m) * g.bracket_coeff(m, z, out)
                    if s:
                        bad.append(((a, b, e, out), s))
    rep = CheckReport("jacobi", not bad)
    rep.residuals = [(f"jacobi{idx}", str(v)) for idx, v in bad[:10]]
    return rep


def unimodularity_vector(g: LieAlgebraData) -> list[Fraction]:
    """(f^{cb}_c)_b, the trace of ad."""
    return [sum((g.bracket_coeff(c, b, c) for c in range(g.dim)), Fraction(0)) for b in range(g.dim)]


def bf_space(dim: int, endpoint: int = 0) -> SymplecticSpace:
    side_eps, side_eta = ("L", "Lprime") if endpoint == 0 else ("Lprime", "L")
    gens = [Generator(f"eps{a}", 1, side_eps, a, f"B{a}") for a in range(dim)]
    gens += [Generator(f"eta{a}", -1, side_eta, dim + a, f"A{a}") for a in range(dim)]
    omega = {}
    for a in range(dim):
        omega[(a, dim + a)] = 1  # omega(eps_a, eta^a) = 1
        omega[(dim + a, a)] = 1  # graded antisymmetry between two odd vectors
    return SymplecticSpace(gens, omega)


def bf_interaction(g: LieAlgebraData, ctx: BoundaryAlgebraContext) -> Series:
    """1/2 f^{ab}_c B^c A_a A_b."""
    return ctx.series([(v / 2, 0, [f"B{c}", f"A{a}", f"A{b}"]) for (a, b, c), v in g.f.items()])


def build_bf_theory(g: LieAlgebraData, caps: TruncationCaps = BF_CAPS, require_jacobi: bool = True) -> IntervalTheory:
    if require_jacobi:
        jac = check_jacobi(g)
        if not jac.passed:
            raise ValidationError(f"{g.name}: structure constants violate the Jacobi identity")
    sp0 = bf_space(g.dim, 0)
    ctx0 = BoundaryAlgebraContext(sp0, caps)
    ctx1 = BoundaryAlgebraContext(sp0.repolarized(bf_space(g.dim, 1).sides), caps)
    I = bf_interaction(g, ctx0)
    return IntervalTheory(ctx0, ctx1, I, H0=-I, H1=I)


def anomaly_closed_form(g: LieAlgebraData, ctx: BoundaryAlgebraContext) -> Series:
    """-1/2 f^{cb}_c A_b, at first order in hbar."""
    u = unimodularity_vector(g)
    return ctx.series([(-v / 2, 1, [f"A{b}"]) for b, v in enumerate(u) if v])


def bf_anomaly_report(g: LieAlgebraData, caps: TruncationCaps = BF_CAPS) -> CheckReport:
    th = build_bf_theory(g, caps)
    qme = check_qme_interval(th)
    end0 = qme.residual("endpoint 0")
    end1 = qme.residual("endpoint 1")
    closed = anomaly_closed_form(g, th.ctx0)
    agree = end1 == closed and end0.is_zero()
    unimodular = not any(unimodularity_vector(g))
    rep = CheckReport("bf-anomaly", agree)
    rep.residuals = [("endpoint 0", end0), ("endpoint 1", end1), ("closed form", closed)]
    rep.details.update(
        unimodular=unimodular,
        anomaly_free=end1.is_zero() and end0.is_zero(),
        engine_matches_closed_form=agree,
        flatness=qme.residual("I*I").is_zero(),
    )
    if not agree:
        rep.flags.append("engine and closed-form anomaly disagree")
    return rep
