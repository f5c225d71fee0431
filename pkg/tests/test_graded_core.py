import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from families import WIDE, extended_bf_space, series_strategy
from tqmbv.bf_theory import bf_space
from tqmbv.graded_core import (
    Generator,
    GradedSpace,
    PolarizationError,
    Series,
    SymplecticSpace,
    TruncationCaps,
    ValidationError,
    contract,
    koszul_sign,
    multiply,
    normalize_monomial,
    omega_from_kernel,
    series_exp,
    series_log,
)
from tqmbv.weyl_moyal import BoundaryAlgebraContext

SPACE = extended_bf_space(2)
CTX = BoundaryAlgebraContext(SPACE, WIDE)


def bubble_sign(perm, degrees):
    """Oracle: bubble-sort the arrangement, flipping on every odd-odd swap."""
    arr = list(perm)
    sign = 1
    for i in range(len(arr)):
        for j in range(len(arr) - 1 - i):
            if arr[j] > arr[j + 1]:
                if degrees[arr[j] - 1] % 2 and degrees[arr[j + 1] - 1] % 2:
                    sign = -sign
                arr[j], arr[j + 1] = arr[j + 1], arr[j]
    return sign


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=7).flatmap(
    lambda d: st.tuples(st.just(d), st.permutations(list(range(1, len(d) + 1))))))
def test_koszul_sign_matches_bubble_sort(args):
    degrees, perm = args
    assert koszul_sign(perm, degrees) == bubble_sign(perm, degrees)


def test_koszul_sign_rejects_non_permutations():
    with pytest.raises(ValidationError):
        koszul_sign([1, 1], [1, 1])


def test_koszul_sign_small_cases():
    assert koszul_sign([2, 1], [1, 1]) == -1
    assert koszul_sign([2, 1], [1, 2]) == 1
    assert koszul_sign([3, 1, 2], [1, 1, 1]) == 1


def test_odd_square_vanishes_and_even_square_survives():
    assert normalize_monomial(SPACE, ["A0", "A0"]) is None
    assert normalize_monomial(SPACE, ["X", "X"]) == (1, (SPACE.dual_index("X"),) * 2)


def test_normalize_sign_agrees_with_koszul():
    names = ["A1", "B0", "C", "A0"]
    idx = [SPACE.dual_index(n) for n in names]
    sign, word = normalize_monomial(SPACE, names)
    order = sorted(range(4), key=lambda k: idx[k])
    degrees = [SPACE.parity[i] for i in idx]
    assert word == tuple(sorted(idx))
    assert sign == koszul_sign([k + 1 for k in order], degrees)


@given(series_strategy(CTX), series_strategy(CTX), series_strategy(CTX))
def test_product_is_associative(a, b, c):
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))


def _homogeneous(s, parity):
    return s.copy_like({k: v for k, v in s.terms.items() if s.space.word_parity(k[1]) == parity})


@given(series_strategy(CTX), series_strategy(CTX), st.integers(0, 1), st.integers(0, 1))
def test_product_is_graded_commutative(a, b, pa, pb):
    a, b = _homogeneous(a, pa), _homogeneous(b, pb)
    sign = -1 if pa and pb else 1
    assert multiply(a, b) == multiply(b, a).scale(sign)


@given(series_strategy(CTX, max_len=2))
def test_exp_log_round_trip(f):
    f = f.copy_like({k: v for k, v in f.terms.items() if k != (0, ())})
    assert series_log(series_exp(f)) == f.with_caps(f.caps)


def test_truncation_caps_drop_high_orders():
    caps = TruncationCaps(1, 2, 3)
    s = Series.from_terms(SPACE, [(1, 2, ["X"]), (1, 0, ["X", "X", "X"]), (1, 1, ["X", "X"])], caps)
    assert list(s.terms) == [(1, (SPACE.dual_index("X"),) * 2)]


def test_caps_and_coefficients_validated():
    with pytest.raises(ValidationError):
        TruncationCaps(0, 1, 1)
    with pytest.raises(ValidationError):
        Series.from_terms(SPACE, [(0.5, 0, ["X"])])
    with pytest.raises(ValidationError):
        Series.from_terms(SPACE, [(1, -1, ["X"])])
    with pytest.raises(ValidationError):
        normalize_monomial(SPACE, ["nope"])


def test_generator_and_space_validation():
    with pytest.raises(ValidationError):
        Generator("a", 0, "middle", 0)
    with pytest.raises(ValidationError):
        GradedSpace([Generator("a", 0, "L", 0), Generator("a", 0, "L", 1)])
    gens = [Generator("x", 0, "L", 0, "X"), Generator("y", 0, "L", 1, "Y")]
    with pytest.raises(PolarizationError):
        SymplecticSpace(gens, {(0, 1): 1, (1, 0): -1})
    gens = [Generator("x", 0, "L", 0, "X"), Generator("p", 0, "Lprime", 1, "P")]
    with pytest.raises(ValidationError):
        SymplecticSpace(gens, {(0, 1): 1, (1, 0): 1})  # even pair must be antisymmetric


@pytest.mark.parametrize("space", [bf_space(3, 0), bf_space(2, 1), SPACE])
def test_inverse_tensor_round_trips_to_omega(space):
    back = omega_from_kernel(space, space.K)
    assert back == {k: v for k, v in space.omega.items() if v}


@pytest.mark.parametrize("space", [bf_space(3, 0), SPACE])
def test_polarized_split_of_inverse(space):
    K, Km, Kp = space.K, space.K_minus, space.K_plus
    assert K.entries == {**Km.entries, **Kp.entries}
    for (a, b) in Km.entries:
        assert space.sides[a] == "L" and space.sides[b] == "Lprime"
    for (a, b) in Kp.entries:
        assert space.sides[a] == "Lprime" and space.sides[b] == "L"
    assert Km.flip().entries == {k: -v for k, v in Kp.entries.items()}


def test_contract_removes_one_pair():
    sp = SPACE
    ctx = BoundaryAlgebraContext(sp, WIDE)
    xp = ctx.series([(1, 0, ["X", "P"])])
    out = contract(sp.K, xp, weight=1, hbar_per_pair=1)
    assert all(len(w) == 0 and h == 1 for (h, w) in out.terms)
    assert not out.is_zero()
    # a word without a K-paired couple contracts to zero
    assert contract(sp.K, ctx.series([(1, 0, ["X", "X"])]), weight=1).is_zero()


def test_random_words_normalize_consistently():
    rng = random.Random(7)
    names = [g.dual_name for g in SPACE.generators]
    for _ in range(200):
        w = rng.choices(names, k=rng.randint(0, 5))
        n1 = normalize_monomial(SPACE, w)
        perm = list(range(len(w)))
        rng.shuffle(perm)
        w2 = [w[p] for p in perm]
        n2 = normalize_monomial(SPACE, w2)
        if n1 is None:
            assert n2 is None
            continue
        degrees = [SPACE.parity[SPACE.dual_index(x)] for x in w]
        rel = koszul_sign([p + 1 for p in perm], degrees)
        assert n2 == (n1[0] * rel, n1[1])
