from fractions import Fraction

import pytest

from families import extended_bf_space, mqme_family
from tqmbv.bf_theory import BF_CAPS, LieAlgebraData, build_bf_theory, heisenberg, sl2, so3
from tqmbv.bvbfv_check import (
    CheckRefused,
    HalfLineTheory,
    IntervalTheory,
    bfv_from_solution,
    bfv_nilpotency,
    check_flatness,
    check_mqme,
    check_mqme_interval,
    check_qme_halfline,
    check_qme_interval,
    effective_boundary_differential,
)
from tqmbv.graded_core import Series, ValidationError
from tqmbv.weyl_moyal import BoundaryAlgebraContext, moyal

FAMILY = mqme_family()


def _bump(s: Series, key, delta=Fraction(1, 7)):
    terms = dict(s.terms)
    terms[key] = terms.get(key, Fraction(0)) + delta
    return Series(s.space, {k: v for k, v in terms.items() if v}, s.caps)


@pytest.mark.parametrize("g", [sl2(), so3(), heisenberg()], ids=lambda g: g.name)
def test_bf_flatness_and_bfv_pair(g):
    th = build_bf_theory(g)
    assert moyal(th.ctx0, th.I_boundary, th.I_boundary).is_zero()
    rep = check_mqme_interval(th)
    assert rep.passed
    assert rep.details["H0_expected"] == -th.I_boundary
    assert rep.details["H1_expected"].terms == th.I_boundary.terms


@pytest.mark.parametrize("label,ctx,I,J", FAMILY, ids=[f[0] for f in FAMILY])
def test_mqme_equivalence_family(label, ctx, I, J):
    th = HalfLineTheory(ctx, I, J)
    H = bfv_from_solution(th)
    assert check_flatness(ctx, I).passed
    assert check_mqme(HalfLineTheory(ctx, I, J, H)).passed
    assert check_qme_halfline(th).passed


def test_family_size_and_variety():
    assert len(FAMILY) >= 50
    assert any(any(h > 0 for (h, _) in I.terms) for (_, _, I, _) in FAMILY)
    assert any(not J.is_zero() for (*_, J) in FAMILY)


@pytest.mark.parametrize("label,ctx,I,J", FAMILY[::7], ids=[f[0] for f in FAMILY[::7]])
def test_single_coefficient_mutations_flip_the_verdict(label, ctx, I, J):
    H = bfv_from_solution(HalfLineTheory(ctx, I, J))
    for key in H.terms:
        assert not check_mqme(HalfLineTheory(ctx, I, J, _bump(H, key))).passed
    for key in I.terms:
        mutated = _bump(I, key)
        assert not check_mqme(HalfLineTheory(ctx, mutated, J, H)).passed
    for key in J.terms:
        assert not check_mqme(HalfLineTheory(ctx, I, _bump(J, key), H)).passed


def test_nonflat_interaction_is_refused():
    bad = LieAlgebraData("bad", 3, {(0, 1, 2): 1, (1, 0, 2): -1, (1, 2, 0): 1, (2, 1, 0): -1, (0, 2, 2): 1, (2, 0, 2): -1})
    th = build_bf_theory(bad, require_jacobi=False)
    assert not check_flatness(th.ctx0, th.I_boundary).passed
    with pytest.raises(CheckRefused):
        bfv_from_solution(th.endpoint(0))
    rep = check_mqme(HalfLineTheory(th.ctx0, th.I_boundary, None, -th.I_boundary))
    assert not rep.passed
    assert not rep.residual("I*I").is_zero()


def test_qme_residuals_for_the_non_unimodular_algebra():
    from tqmbv.bf_theory import affine2

    th = build_bf_theory(affine2())
    rep = check_qme_interval(th)
    assert not rep.passed
    assert rep.residual("endpoint 0").is_zero()
    end1 = rep.residual("endpoint 1")
    assert end1 == th.ctx0.series([(Fraction(1, 2), 1, ["A0"])])


def test_nilpotency_equivalence_on_family():
    for label, ctx, I, J in FAMILY[::5]:
        H = bfv_from_solution(HalfLineTheory(ctx, I, J))
        rep = bfv_nilpotency(ctx, H)
        assert rep.passed and rep.details["H*H"].is_zero(), label
        assert rep.details["equivalence_consistent"]


def test_nilpotency_detects_a_nonflat_symbol():
    bad = LieAlgebraData("bad", 3, {(0, 1, 2): 1, (1, 0, 2): -1, (1, 2, 0): 1, (2, 1, 0): -1, (0, 2, 2): 1, (2, 0, 2): -1})
    th = build_bf_theory(bad, require_jacobi=False)
    rep = bfv_nilpotency(th.ctx0, th.I_boundary)
    assert not rep.passed
    assert not rep.details["H*H"].is_zero()
    assert rep.details["equivalence_consistent"]


def test_nilpotency_rejects_wrong_degree():
    ctx = build_bf_theory(sl2()).ctx0
    with pytest.raises(ValidationError):
        bfv_nilpotency(ctx, ctx.series([(1, 0, ["B0", "A0"])]))
    with pytest.raises(ValidationError):
        bfv_nilpotency(ctx, build_bf_theory(sl2()).I_boundary, side="middle")


def test_theory_validation():
    ctx = BoundaryAlgebraContext(extended_bf_space(1), BF_CAPS)
    with pytest.raises(ValidationError):
        HalfLineTheory(ctx, ctx.series([(1, 0, ["C"])]))  # hbar^0 part too short
    with pytest.raises(ValidationError):
        HalfLineTheory(ctx, ctx.series([(1, 0, ["X", "X"])]))  # degree 0
    I = ctx.series([(1, 0, ["C", "P"])])
    with pytest.raises(ValidationError):
        HalfLineTheory(ctx, I, ctx.series([(1, 0, ["P", "P"])]))  # J not a function of L
    with pytest.raises(ValidationError):
        HalfLineTheory(ctx, I, ctx.series([(1, 0, ["X"])]))  # linear classical J


def test_effective_differential_squares_to_zero():
    th = build_bf_theory(sl2()).endpoint(0)
    D = effective_boundary_differential(th)
    assert D.report.passed
    ctx = th.ctx
    nonzero = 0
    for w in D.images:
        f = Series(ctx.space, {(0, w): Fraction(1)}, ctx.caps)
        image = D.apply(f)
        nonzero += not image.is_zero()
        assert D.apply(image).is_zero()
    assert nonzero > 0


def test_effective_differential_refuses_without_qme():
    bad = LieAlgebraData("bad", 3, {(0, 1, 2): 1, (1, 0, 2): -1, (1, 2, 0): 1, (2, 1, 0): -1, (0, 2, 2): 1, (2, 0, 2): -1})
    th = build_bf_theory(bad, require_jacobi=False)
    with pytest.raises(CheckRefused):
        effective_boundary_differential(th.endpoint(0))
