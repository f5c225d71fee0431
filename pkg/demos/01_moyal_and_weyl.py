# %% [markdown]
# # Moyal products and Weyl actions
#
# A symplectic space with one bosonic pair (x in L, p in L') and one odd pair.
# Functions are exact rational series in the dual letters X, P, Cbar, C and hbar.

# %%
from fractions import Fraction

from tqmbv.graded_core import Generator, SymplecticSpace, TruncationCaps
from tqmbv.weyl_moyal import BoundaryAlgebraContext, conjugate, moyal, moyal_commutator_div_hbar, weyl_left, weyl_right

gens = [
    Generator("x", 0, "L", 0, "X"),
    Generator("p", 0, "Lprime", 1, "P"),
    Generator("anti", 1, "L", 2, "Cbar"),
    Generator("ghost", -1, "Lprime", 3, "C"),
]
space = SymplecticSpace(gens, {(0, 1): 1, (1, 0): -1, (2, 3): 1, (3, 2): 1})
ctx = BoundaryAlgebraContext(space, TruncationCaps(3, 6, 8))
X = ctx.series([(1, 0, ["X"])])
P = ctx.series([(1, 0, ["P"])])

# %% The star product deforms the commutative product; its commutator is hbar times the bracket.
print("X * P =", moyal(ctx, X, P))
print("P * X =", moyal(ctx, P, X))
print("[P, X] / hbar =", moyal_commutator_div_hbar(ctx, P, X))

# %% Associativity is exact, so it can be tested by equality.
a = ctx.series([(1, 0, ["X", "X"]), (Fraction(1, 2), 1, ["P"])])
b = ctx.series([(2, 0, ["P", "P"]), (1, 0, ["C", "Cbar"])])
c = ctx.series([(1, 0, ["X", "P"])])
print("associative:", moyal(ctx, moyal(ctx, a, b), c) == moyal(ctx, a, moyal(ctx, b, c)))

# %% Weyl quantization: the Moyal algebra acts on functions of L' from the left and on functions of L from the right.
g = ctx.series([(1, 0, ["P", "P"])])
print("X acting on P^2:", weyl_left(ctx, X, g))
f = ctx.series([(1, 0, ["X", "X"])])
print("X^2 acted on by P:", weyl_right(ctx, f, P))
print("module law:", weyl_left(ctx, moyal(ctx, X, P), g) == weyl_left(ctx, X, weyl_left(ctx, P, g)))

# %% Conjugating by exp(J/hbar) uses brackets only, so no negative hbar powers appear.
J = ctx.series([(1, 0, ["X", "X"])])
print("exp(J/hbar) P exp(-J/hbar) =", conjugate(ctx, J, P).value)
