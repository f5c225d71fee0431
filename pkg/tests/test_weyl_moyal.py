import random
from fractions import Fraction

import pytest
from hypothesis import given

import tqmbv.weyl_moyal as wm
from families import WIDE, extended_bf_space, random_series, series_strategy
from tqmbv.bf_theory import build_bf_theory, sl2
from tqmbv.graded_core import Series, ValidationError, multiply
from tqmbv.weyl_moyal import (
    BoundaryAlgebraContext,
    check_admissible_gauge,
    conjugate,
    graded_commutator,
    moyal,
    moyal_commutator_div_hbar,
    pairing,
    star_power,
    weyl_left,
    weyl_right,
)

SPACE = extended_bf_space(2)
CTX = BoundaryAlgebraContext(SPACE, WIDE)
DUALS = [g.dual_name for g in SPACE.generators]
L_DUALS = [g.dual_name for g in SPACE.generators if g.side == "L"]
LP_DUALS = [g.dual_name for g in SPACE.generators if g.side == "Lprime"]


@given(series_strategy(CTX), series_strategy(CTX), series_strategy(CTX))
def test_moyal_associative(a, b, c):
    assert moyal(CTX, moyal(CTX, a, b), c) == moyal(CTX, a, moyal(CTX, b, c))


@given(series_strategy(CTX))
def test_moyal_unit(a):
    assert moyal(CTX, CTX.one(), a) == a
    assert moyal(CTX, a, CTX.one()) == a


@given(series_strategy(CTX), series_strategy(CTX))
def test_moyal_classical_limit(a, b):
    lhs = moyal(CTX, a, b).hbar_part(0)
    rhs = multiply(a.hbar_part(0), b.hbar_part(0))
    assert lhs == rhs


@given(series_strategy(CTX), series_strategy(CTX), series_strategy(CTX, pool=LP_DUALS))
def test_left_action_is_a_module_action(J, F, g):
    assert weyl_left(CTX, moyal(CTX, J, F), g) == weyl_left(CTX, J, weyl_left(CTX, F, g))


@given(series_strategy(CTX, pool=L_DUALS), series_strategy(CTX), series_strategy(CTX))
def test_right_action_is_a_module_action(f, J, F):
    assert weyl_right(CTX, f, moyal(CTX, J, F)) == weyl_right(CTX, weyl_right(CTX, f, J), F)


@given(series_strategy(CTX, pool=L_DUALS), series_strategy(CTX), series_strategy(CTX, pool=LP_DUALS))
def test_pairing_intertwines_the_actions(f, J, g):
    assert pairing(CTX, weyl_right(CTX, f, J), g) == pairing(CTX, f, weyl_left(CTX, J, g))


@given(series_strategy(CTX, pool=LP_DUALS), series_strategy(CTX, pool=LP_DUALS))
def test_functions_of_lprime_act_by_multiplication(h, g):
    assert weyl_left(CTX, h, g) == multiply(h, g)


def test_ordering_weight_is_pinned_by_the_module_property(monkeypatch):
    rng = random.Random(3)
    monkeypatch.setattr(wm, "ORDERING_PAIR_WEIGHT", 1)
    ctx = BoundaryAlgebraContext(SPACE, WIDE)
    failures = 0
    for _ in range(20):
        J, F = random_series(rng, ctx), random_series(rng, ctx)
        g = random_series(rng, ctx, pool=LP_DUALS)
        failures += weyl_left(ctx, moyal(ctx, J, F), g) != weyl_left(ctx, J, weyl_left(ctx, F, g))
    assert failures > 0


def test_actions_require_the_right_half():
    x = CTX.series([(1, 0, ["X"])])
    p = CTX.series([(1, 0, ["P"])])
    with pytest.raises(ValidationError):
        weyl_left(CTX, p, x)
    with pytest.raises(ValidationError):
        weyl_right(CTX, p, x)
    with pytest.raises(ValidationError):
        pairing(CTX, p, x)


def test_canonical_commutator():
    # [P, X] / hbar is a nonzero constant, and X, X commute
    x = CTX.series([(1, 0, ["X"])])
    p = CTX.series([(1, 0, ["P"])])
    c = moyal_commutator_div_hbar(CTX, p, x)
    assert set(c.terms) == {(0, ())}
    assert moyal_commutator_div_hbar(CTX, x, x).is_zero()
    assert graded_commutator(CTX, x, p).terms[(1, ())] == -graded_commutator(CTX, p, x).terms[(1, ())]


def test_conjugation_round_trip():
    rng = random.Random(11)
    J = CTX.series([(1, 0, ["X", "X"]), (Fraction(1, 2), 1, ["X"])])
    for _ in range(10):
        I = random_series(rng, CTX, max_len=2)
        there = conjugate(CTX, J, I)
        back = conjugate(CTX, -J, there.value)
        assert there.exact and back.exact
        assert back.value == I


def test_conjugation_by_a_quadratic_shifts_the_momentum():
    J = CTX.series([(1, 0, ["X", "X"])])
    p = CTX.series([(1, 0, ["P"])])
    out = conjugate(CTX, J, p).value
    assert out.hbar_part(0) - p == moyal_commutator_div_hbar(CTX, J, p)
    assert {len(w) for (_, w) in (out - p).terms} == {1}


def test_gauge_admissibility():
    with pytest.raises(ValidationError):
        check_admissible_gauge(CTX.series([(1, 0, ["X"])]))
    with pytest.raises(ValidationError):
        check_admissible_gauge(CTX.series([(1, 0, ["X", "C"])]))
    check_admissible_gauge(CTX.series([(1, 1, ["X"]), (2, 0, ["X", "X"])]))


def test_star_power_and_nilpotent_bf_interaction():
    th = build_bf_theory(sl2())
    I = th.I_boundary
    assert star_power(th.ctx0, I, 2).is_zero()
    assert star_power(th.ctx0, I, 1) == I


def test_caps_mismatch_rejected():
    other = BoundaryAlgebraContext(SPACE)
    with pytest.raises(ValidationError):
        moyal(CTX, other.one(), CTX.one())
