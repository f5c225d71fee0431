"""Moyal product, Weyl actions, boundary pairing and hbar-divided conjugation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .graded_core import (
    Series,
    SymplecticSpace,
    TruncationCaps,
    ValidationError,
    cross_contract_exp,
    exp_contract,
    multiply,
)

# The ordering transform contracts a symmetric product f_i f_j against a symmetric
# tensor; with the factorial-weighted pairing this is twice the slotwise value.
ORDERING_PAIR_WEIGHT = 2


@dataclass
class BoundaryAlgebraContext:
    space: SymplecticSpace
    caps: TruncationCaps = field(default_factory=TruncationCaps)

    def __post_init__(self):
        sp = self.space
        self.half_K = sp.K.scaled(Fraction(1, 2))
        self.K_minus = sp.K_minus
        # (K_+ - K_-)/4 is graded symmetric
        self.ordering_kernel = sp.K_plus.plus(sp.K_minus.scaled(-1), parity="symmetric").scaled(Fraction(1, 4))

    def series(self, items) -> Series:
        return Series.from_terms(self.space, items, self.caps)

    def one(self) -> Series:
        return Series.one(self.space, self.caps)

    def zero(self) -> Series:
        return Series.zero(self.space, self.caps)

    def to_normal_order(self, J: Series, sign: int = 1) -> Series:
        return exp_contract(self.ordering_kernel, J, scale=sign, weight=ORDERING_PAIR_WEIGHT, hbar_per_pair=1)


def _same(ctx: BoundaryAlgebraContext, *xs: Series):
    for x in xs:
        if not isinstance(x, Series):
            raise ValidationError("expected a Series")
        if not ctx.space.compatible(x.space):
            raise ValidationError("series does not belong to this boundary algebra")
        if x.caps != ctx.caps:
            raise ValidationError("series caps differ from the context caps")


def own(ctx: BoundaryAlgebraContext, x: Series) -> Series:
    """Rebind a series to this context's polarization labels."""
    return x if x.space is ctx.space else Series(ctx.space, x.terms, x.caps)


def moyal(ctx: BoundaryAlgebraContext, J: Series, F: Series) -> Series:
    _same(ctx, J, F)
    J, F = own(ctx, J), own(ctx, F)
    return cross_contract_exp(ctx.half_K, J, F, scale=-1, hbar_per_pair=1)


def weyl_left(ctx: BoundaryAlgebraContext, J: Series, g: Series) -> Series:
    """Left action of (O(V)[[hbar]], moyal) on functions of L'."""
    _same(ctx, J, g)
    J, g = own(ctx, J), own(ctx, g)
    if not g.supported_on("Lprime"):
        raise ValidationError("left Weyl action needs a function of the L' half")
    t = ctx.to_normal_order(J)
    return cross_contract_exp(ctx.K_minus, t, g, scale=-1, hbar_per_pair=1).project("Lprime")


def weyl_right(ctx: BoundaryAlgebraContext, f: Series, J: Series) -> Series:
    """Right action on functions of L."""
    _same(ctx, f, J)
    f, J = own(ctx, f), own(ctx, J)
    if not f.supported_on("L"):
        raise ValidationError("right Weyl action needs a function of the L half")
    t = ctx.to_normal_order(J)
    return cross_contract_exp(ctx.K_minus, f, t, scale=-1, hbar_per_pair=1).project("L")


def pairing(ctx: BoundaryAlgebraContext, f: Series, g: Series) -> Series:
    """Scalar hbar-series; only fully matched words survive both projections."""
    _same(ctx, f, g)
    f, g = own(ctx, f), own(ctx, g)
    if not f.supported_on("L"):
        raise ValidationError("left argument of the pairing must be a function of L")
    if not g.supported_on("Lprime"):
        raise ValidationError("right argument of the pairing must be a function of L'")
    x = cross_contract_exp(ctx.K_minus, f, g, scale=-1, hbar_per_pair=1)
    return x.copy_like({k: v for k, v in x.terms.items() if not k[1]})


def graded_commutator(ctx, J: Series, X: Series) -> Series:
    _same(ctx, J, X)
    return _commutator(ctx, own(ctx, J), own(ctx, X))


def _commutator(ctx, J: Series, X: Series) -> Series:
    out = cross_contract_exp(ctx.half_K, J, X, scale=-1, hbar_per_pair=1)
    if J.is_zero() or X.is_zero():
        return out
    sJ = J.parity()
    # split X by parity so inhomogeneous inputs still get the right sign
    for par in (0, 1):
        Xp = X.copy_like({k: c for k, c in X.terms.items() if ctx.space.word_parity(k[1]) == par})
        if Xp.is_zero():
            continue
        back = cross_contract_exp(ctx.half_K, Xp, J, scale=-1, hbar_per_pair=1)
        out = out - back if (sJ * par) % 2 == 0 else out + back
    return out


def moyal_commutator_div_hbar(ctx: BoundaryAlgebraContext, J: Series, X: Series) -> Series:
    """(J*X - (-1)^{|J||X|} X*J)/hbar; the hbar^0 part cancels identically."""
    _same(ctx, J, X)
    c = ctx.caps
    # one extra hbar order so the top order of the quotient is complete
    wide = TruncationCaps(c.max_hbar + 1, c.max_degree, c.max_bracket_depth)
    out = _commutator(ctx, own(ctx, J).with_caps(wide), own(ctx, X).with_caps(wide))
    if not out.hbar_part(0).is_zero():
        raise AssertionError(f"hbar^0 part of a Moyal commutator did not cancel: {out.hbar_part(0)}")
    return out.shift_hbar(-1).with_caps(c)


@dataclass
class Conjugation:
    value: Series
    exact: bool
    depth_used: int


def check_admissible_gauge(J: Series):
    """Degree 0, and no hbar^0 words of length below 2."""
    for (h, w) in J.terms:
        if h == 0 and len(w) < 2:
            raise ValidationError("gauge term has an hbar^0 part of word length < 2")
    if not J.is_zero() and J.degree() != 0:
        raise ValidationError(f"gauge term must have degree 0, got {J.degree()}")


def conjugate(ctx: BoundaryAlgebraContext, J: Series, I: Series, depth: int | None = None) -> Conjugation:
    """exp(ad_J / hbar) I, i.e. e^{J/hbar} * I * e^{-J/hbar} without negative hbar powers."""
    _same(ctx, J, I)
    check_admissible_gauge(J)
    J, I = own(ctx, J), own(ctx, I)
    depth = ctx.caps.max_bracket_depth if depth is None else depth
    total = I
    term = I
    n = 0
    while n < depth:
        n += 1
        term = moyal_commutator_div_hbar(ctx, J, term).scale(Fraction(1, n))
        if term.is_zero():
            return Conjugation(total, True, n - 1)
        total = total + term
    # one more step decides whether the series really stopped
    nxt = moyal_commutator_div_hbar(ctx, J, term)
    return Conjugation(total, nxt.is_zero(), n)


def star_power(ctx, x: Series, n: int) -> Series:
    out = ctx.one()
    for _ in range(n):
        out = moyal(ctx, out, x)
    return out


def classical_product(x: Series, y: Series) -> Series:
    return multiply(x, y)
