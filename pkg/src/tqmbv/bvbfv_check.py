"""Checkers for boundary master equations: flatness, generic BFV solutions, QME on
restricted fields, nilpotency of Weyl-quantized operators and the effective boundary
differential.  Every verdict is exact; a pass means every residual is the zero series.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement

from .graded_core import Series, SymplecticSpace, TruncationCaps, ValidationError
from .weyl_moyal import (
    BoundaryAlgebraContext,
    conjugate,
    moyal,
    own,
    weyl_left,
    weyl_right,
)

STRICT_QME_NOTE = "strict QME only (central-element relaxation not implemented)"


@dataclass
class CheckReport:
    name: str
    passed: bool
    residuals: list = field(default_factory=list)  # (label, Series | str)
    flags: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def residual(self, label):
        for lab, r in self.residuals:
            if lab == label:
                return r
        raise KeyError(label)


class CheckRefused(RuntimeError):
    def __init__(self, report: CheckReport):
        super().__init__(f"{report.name} refused: precondition failed")
        self.report = report


def _report(name, items, flags=()):
    """Build a report from (label, residual Series) pairs."""
    ok = all(r.is_zero() for _, r in items)
    return CheckReport(name, ok, [(lab, r) for lab, r in items], list(flags))


@dataclass
class HalfLineTheory:
    ctx: BoundaryAlgebraContext
    I_boundary: Series
    J_boundary: Series | None = None
    H_boundary: Series | None = None

    def __post_init__(self):
        c = self.ctx
        self.I_boundary = own(c, self.I_boundary)
        self.J_boundary = c.zero() if self.J_boundary is None else own(c, self.J_boundary)
        if self.H_boundary is not None:
            self.H_boundary = own(c, self.H_boundary)
        _check_interaction(self.I_boundary)
        if not self.J_boundary.supported_on("L"):
            raise ValidationError("boundary term J must be a function of L only")
        _check_gauge_class(self.J_boundary)


@dataclass
class IntervalTheory:
    """Two polarizations of one symplectic space: ``ctx0`` labels (L0, L0'), ``ctx1`` labels (L1, L1')."""

    ctx0: BoundaryAlgebraContext
    ctx1: BoundaryAlgebraContext
    I_boundary: Series
    J0: Series | None = None
    J1: Series | None = None
    H0: Series | None = None
    H1: Series | None = None

    def __post_init__(self):
        if not self.ctx0.space.compatible(self.ctx1.space) or self.ctx0.caps != self.ctx1.caps:
            raise ValidationError("interval endpoints must share generators and caps")
        self.I_boundary = own(self.ctx0, self.I_boundary)
        _check_interaction(self.I_boundary)
        self.J0 = self.ctx0.zero() if self.J0 is None else own(self.ctx0, self.J0)
        self.J1 = self.ctx1.zero() if self.J1 is None else own(self.ctx1, self.J1)
        if not self.J0.supported_on("L"):
            raise ValidationError("J0 must be a function of L0")
        if not self.J1.supported_on("L"):
            raise ValidationError("J1 must be a function of L1")
        _check_gauge_class(self.J0)
        _check_gauge_class(self.J1)
        # left action at the far end swaps the roles of the two halves
        flipped = ["Lprime" if s == "L" else "L" for s in self.ctx1.space.sides]
        self.ctx1_left = BoundaryAlgebraContext(self.ctx1.space.repolarized(flipped), self.ctx1.caps)

    def endpoint(self, which: int) -> HalfLineTheory:
        ctx, J = (self.ctx0, self.J0) if which == 0 else (self.ctx1, self.J1)
        return HalfLineTheory(ctx, own(ctx, self.I_boundary), J)


def _check_interaction(I: Series):
    if I.is_zero():
        return
    if I.degree() != 1:
        raise ValidationError(f"boundary interaction must have degree 1, got {I.degree()}")
    for (h, w) in I.terms:
        if h == 0 and len(w) < 2:
            raise ValidationError("boundary interaction has an hbar^0 part of word length < 2")


def _check_gauge_class(J: Series):
    if J.is_zero():
        return
    if J.degree() != 0:
        raise ValidationError(f"boundary term J must have degree 0, got {J.degree()}")
    for (h, w) in J.terms:
        if h == 0 and len(w) < 2:
            raise ValidationError("boundary term J has a nonzero hbar^0 part of word length < 2")


# --- flatness and generic solutions ---------------------------------------------------


def check_flatness(ctx: BoundaryAlgebraContext, I: Series) -> CheckReport:
    _check_interaction(own(ctx, I))
    return _report("flatness", [("I*I", moyal(ctx, I, I))])


def _conj(ctx, J, I, flags):
    c = conjugate(ctx, J, I)
    if not c.exact:
        flags.append(f"conjugation truncated at bracket depth {c.depth_used}")
    return c.value


def bfv_from_solution(th: HalfLineTheory) -> Series:
    """H = -e^{J/hbar} * I * e^{-J/hbar}."""
    rep = check_flatness(th.ctx, th.I_boundary)
    if not rep.passed:
        raise CheckRefused(rep)
    return -_conj(th.ctx, th.J_boundary, th.I_boundary, [])


def bfv_pair_interval(th: IntervalTheory):
    """(H0, H1) with H0 = -e^{J0/hbar} * I * e^{-J0/hbar}, H1 = e^{-J1/hbar} * I * e^{J1/hbar}."""
    rep = check_flatness(th.ctx0, th.I_boundary)
    if not rep.passed:
        raise CheckRefused(rep)
    H0 = -_conj(th.ctx0, th.J0, th.I_boundary, [])
    H1 = _conj(th.ctx1, -th.J1, own(th.ctx1, th.I_boundary), [])
    return H0, H1


def check_mqme(th: HalfLineTheory) -> CheckReport:
    """Algebraic form of the modified master equation on the half-line."""
    flags: list = []
    flat = moyal(th.ctx, th.I_boundary, th.I_boundary)
    expected = -_conj(th.ctx, th.J_boundary, th.I_boundary, flags)
    items = [("I*I", flat)]
    if th.H_boundary is None:
        if not flat.is_zero():
            flags.append("H not supplied and I is not flat")
        items.append(("H", th.ctx.zero()))
        rep = _report("mqme", items, flags)
        rep.details["H"] = expected
        return rep
    items.append(("H + conj(J, I)", th.H_boundary - expected))
    rep = _report("mqme", items, flags)
    rep.details["H_expected"] = expected
    return rep


def check_mqme_interval(th: IntervalTheory) -> CheckReport:
    flags: list = []
    flat = moyal(th.ctx0, th.I_boundary, th.I_boundary)
    H0e = -_conj(th.ctx0, th.J0, th.I_boundary, flags)
    H1e = _conj(th.ctx1, -th.J1, own(th.ctx1, th.I_boundary), flags)
    items = [("I*I", flat)]
    if th.H0 is not None:
        items.append(("H0 - expected", own(th.ctx0, th.H0) - H0e))
    if th.H1 is not None:
        items.append(("H1 - expected", own(th.ctx0, th.H1) - own(th.ctx0, H1e)))
    rep = _report("mqme-interval", items, flags)
    rep.details.update(H0_expected=H0e, H1_expected=H1e)
    return rep


# --- QME on the restricted field space ------------------------------------------------


def qme_residual_right(ctx: BoundaryAlgebraContext, J: Series, I: Series, flags) -> Series:
    """e^{-J/hbar} Omega^right_L(e^{J/hbar}, I) = Omega^right_L(1, e^{J/hbar} * I * e^{-J/hbar})."""
    return weyl_right(ctx, ctx.one(), _conj(ctx, J, I, flags))


def qme_residual_left(ctx_left: BoundaryAlgebraContext, J: Series, I: Series, flags) -> Series:
    """e^{-J/hbar} Omega^left(I, e^{J/hbar}) = Omega^left(e^{-J/hbar} * I * e^{J/hbar}, 1)."""
    return weyl_left(ctx_left, _conj(ctx_left, -own(ctx_left, J), I, flags), ctx_left.one())


def check_qme_halfline(th: HalfLineTheory) -> CheckReport:
    flags = [STRICT_QME_NOTE]
    items = [
        ("I*I", moyal(th.ctx, th.I_boundary, th.I_boundary)),
        ("right action", qme_residual_right(th.ctx, th.J_boundary, th.I_boundary, flags)),
    ]
    return _report("qme-halfline", items, flags)


def check_qme_interval(th: IntervalTheory) -> CheckReport:
    flags = [STRICT_QME_NOTE]
    items = [
        ("I*I", moyal(th.ctx0, th.I_boundary, th.I_boundary)),
        ("endpoint 0", qme_residual_right(th.ctx0, th.J0, th.I_boundary, flags)),
        ("endpoint 1", qme_residual_left(th.ctx1_left, th.J1, th.I_boundary, flags)),
    ]
    return _report("qme-interval", items, flags)


# --- nilpotency -----------------------------------------------------------------------


def basis_words(space: SymplecticSpace, side: str, max_len: int):
    """Canonical words in dual generators of one half, up to a length."""
    idx = space.side_indices(side)
    par = space.parity
    out = []
    for n in range(max_len + 1):
        for w in combinations_with_replacement(idx, n):
            if any(w[i] == w[i + 1] and par[w[i]] for i in range(len(w) - 1)):
                continue
            out.append(tuple(w))
    return out


def _wide(ctx: BoundaryAlgebraContext, extra_deg: int, extra_hbar: int = 0) -> BoundaryAlgebraContext:
    c = ctx.caps
    return BoundaryAlgebraContext(
        ctx.space, TruncationCaps(c.max_hbar + extra_hbar, c.max_degree + extra_deg, c.max_bracket_depth)
    )


def bfv_nilpotency(ctx: BoundaryAlgebraContext, H: Series, side: str = "Lprime") -> CheckReport:
    """Square of the Weyl action of H on every basis word of one half, within caps."""
    H = own(ctx, H)
    if not H.is_zero() and H.degree() != 1:
        raise ValidationError("BFV operator symbol must have degree 1")
    if side not in ("L", "Lprime"):
        raise ValidationError("side must be 'L' or 'Lprime'")
    longest = max((len(w) for (_, w) in H.terms), default=0)
    wide = _wide(ctx, 2 * longest)
    Hw = H.with_caps(wide.caps)
    witness = None
    for w in basis_words(ctx.space, side, ctx.caps.max_degree):
        g = Series(ctx.space, {(0, w): Fraction(1)}, wide.caps)
        if side == "Lprime":
            sq = weyl_left(wide, Hw, weyl_left(wide, Hw, g))
        else:
            sq = weyl_right(wide, weyl_right(wide, g, Hw), Hw)
        sq = sq.with_caps(ctx.caps)
        if not sq.is_zero():
            witness = (ctx.space.describe_word(w), sq)
            break
    square = moyal(ctx, H, H)
    rep = CheckReport("bfv-nilpotency", witness is None)
    if witness:
        rep.residuals.append(("square on " + "*".join(witness[0] or ["1"]), witness[1]))
    rep.details["H*H"] = square
    rep.details["equivalence_consistent"] = (witness is None) == square.is_zero()
    return rep


# --- effective boundary differential --------------------------------------------------


@dataclass
class EffectiveDifferential:
    ctx: BoundaryAlgebraContext
    images: dict  # word -> Series
    report: CheckReport

    def apply(self, f: Series) -> Series:
        out = self.ctx.zero()
        for (h, w), c in own(self.ctx, f).terms.items():
            img = self.images.get(w)
            if img is None:
                raise ValidationError(f"word {w} outside the materialized basis")
            out = out + img.shift_hbar(h).scale(c).with_caps(self.ctx.caps)
        return out


def effective_boundary_differential(th: HalfLineTheory) -> EffectiveDifferential:
    """(1/hbar) Omega^right_L(-, e^{J/hbar} * I * e^{-J/hbar}) on O(L)[[hbar]]."""
    gate = check_qme_halfline(th)
    if not gate.passed:
        raise CheckRefused(gate)
    ctx = th.ctx
    flags: list = []
    X = _conj(ctx, th.J_boundary, th.I_boundary, flags)
    wide = _wide(ctx, 0, 1)
    Xw = X.with_caps(wide.caps)
    images = {}
    divisible = True
    for w in basis_words(ctx.space, "L", ctx.caps.max_degree):
        f = Series(ctx.space, {(0, w): Fraction(1)}, wide.caps)
        r = weyl_right(wide, f, Xw)
        if not r.hbar_part(0).is_zero():
            divisible = False
            images[w] = r.with_caps(ctx.caps)
            continue
        images[w] = r.shift_hbar(-1).with_caps(ctx.caps)
    D = EffectiveDifferential(ctx, images, CheckReport("effective-differential", False, flags=flags))
    bad = []
    for w, img in images.items():
        sq = D.apply(img)
        if not sq.is_zero():
            bad.append(("square on " + "*".join(ctx.space.describe_word(w)), sq))
    D.report.passed = divisible and not bad
    D.report.residuals = bad
    D.report.details["hbar_divisible"] = divisible
    D.report.details["basis_size"] = len(images)
    return D
