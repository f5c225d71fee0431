"""Test-side theory families and random series generators."""

import random
from fractions import Fraction

from hypothesis import strategies as st

from tqmbv.bf_theory import BF_CAPS, BUILTIN, builtin_algebra
from tqmbv.graded_core import Generator, Series, SymplecticSpace, TruncationCaps
from tqmbv.weyl_moyal import BoundaryAlgebraContext


def extended_bf_space(dim):
    """BF generators plus a bosonic pair (x, p) and an odd pair (anti, ghost)."""
    gens = [Generator(f"eps{a}", 1, "L", a, f"B{a}") for a in range(dim)]
    gens += [Generator(f"eta{a}", -1, "Lprime", dim + a, f"A{a}") for a in range(dim)]
    n = 2 * dim
    gens += [
        Generator("x", 0, "L", n, "X"),
        Generator("p", 0, "Lprime", n + 1, "P"),
        Generator("anti", 1, "L", n + 2, "Cbar"),
        Generator("ghost", -1, "Lprime", n + 3, "C"),
    ]
    om = {}
    for a in range(dim):
        om[(a, dim + a)] = 1
        om[(dim + a, a)] = 1
    om[(n, n + 1)] = 1
    om[(n + 1, n)] = -1
    om[(n + 2, n + 3)] = 1
    om[(n + 3, n + 2)] = 1
    return SymplecticSpace(gens, om)


def extended_interaction(ctx, g, d):
    items = [(v / 2, 0, [f"B{c}", f"A{a}", f"A{b}"]) for (a, b, c), v in g.f.items()]
    items += [(1, 0, ["C", "P"])]
    if d:
        items.append((d, 1, ["C", "X"]))
    return ctx.series(items)


J_CHOICES = [
    [],
    [(1, 0, ["X", "X"])],
    [(Fraction(-3, 2), 0, ["X", "X"]), (Fraction(1, 2), 1, ["X"])],
    [(2, 0, ["X", "X", "X"])],
    [(1, 1, ["X", "X"]), (Fraction(1, 5), 0, ["X", "X", "X", "X"])],
    [(Fraction(2, 7), 2, ["X"]), (1, 0, ["X", "X"])],
]
D_CHOICES = [0, Fraction(1, 3), -2, 0, Fraction(5, 4), 1]


def mqme_family():
    """(label, ctx, I, J) for every built-in algebra and J/d choice: 10 x 6 = 60 pairs."""
    out = []
    for name in sorted(BUILTIN):
        g = builtin_algebra(name)
        ctx = BoundaryAlgebraContext(extended_bf_space(g.dim), BF_CAPS)
        for k, (jt, d) in enumerate(zip(J_CHOICES, D_CHOICES)):
            I = extended_interaction(ctx, g, d)
            J = ctx.series(jt) if jt else ctx.zero()
            out.append((f"{name}/J{k}", ctx, I, J))
    return out


def random_series(rng: random.Random, ctx, pool=None, n_terms=3, max_len=2, max_hbar=1):
    pool = pool if pool is not None else [g.dual_name for g in ctx.space.generators]
    items = []
    for _ in range(n_terms):
        k = rng.randint(0, max_len)
        items.append((Fraction(rng.randint(-4, 4), rng.randint(1, 3)), rng.randint(0, max_hbar), rng.choices(pool, k=k)))
    return ctx.series(items)


@st.composite
def series_strategy(draw, ctx, pool=None, max_terms=3, max_len=2, max_hbar=1):
    pool = pool if pool is not None else [g.dual_name for g in ctx.space.generators]
    n = draw(st.integers(0, max_terms))
    items = []
    for _ in range(n):
        coeff = Fraction(draw(st.integers(-4, 4)), draw(st.integers(1, 3)))
        h = draw(st.integers(0, max_hbar))
        word = draw(st.lists(st.sampled_from(pool), max_size=max_len))
        items.append((coeff, h, word))
    return ctx.series(items)


WIDE = TruncationCaps(4, 8, 8)
