"""Exact graded-commutative symmetric algebra on the dual of a finite graded space.

Elements are truncated power series in hbar whose coefficients are polynomials
in dual generators.  A monomial is a sorted tuple of generator indices; odd
generators appear at most once.  All coefficients are ``Fraction``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import sympy


class ValidationError(ValueError):
    """Malformed input to an algebraic operation."""


class PolarizationError(ValidationError):
    """Symplectic form pairs a Lagrangian half with itself."""


SIDES = ("L", "Lprime")


@dataclass(frozen=True)
class Generator:
    name: str
    degree: int
    side: str
    index: int
    dual_name: str = ""

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValidationError(f"generator {self.name}: side must be one of {SIDES}")
        if not self.dual_name:
            object.__setattr__(self, "dual_name", self.name + "*")

    @property
    def dual_degree(self) -> int:
        return -self.degree


@dataclass(frozen=True)
class TruncationCaps:
    max_hbar: int = 3
    max_degree: int = 6
    max_bracket_depth: int = 8

    def __post_init__(self):
        for k in ("max_hbar", "max_degree", "max_bracket_depth"):
            v = getattr(self, k)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"caps.{k} must be an integer >= 1, got {v!r}")

    def admits(self, hbar: int, word_len: int) -> bool:
        return hbar <= self.max_hbar and word_len <= self.max_degree


def _to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise ValidationError("floating point coefficients are not allowed; use Fraction or 'p/q'")
    try:
        return Fraction(x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"bad rational {x!r}: {exc}") from None


class GradedSpace:
    """Ordered list of generators.  The list order is the canonical monomial order."""

    def __init__(self, generators: Iterable[Generator]):
        gens = tuple(generators)
        names = [g.name for g in gens]
        if len(set(names)) != len(names):
            raise ValidationError("generator names must be unique")
        duals = [g.dual_name for g in gens]
        if len(set(duals)) != len(duals):
            raise ValidationError("dual generator names must be unique")
        for i, g in enumerate(gens):
            if g.index != i:
                raise ValidationError(f"generator {g.name} has index {g.index}, expected {i}")
        self.generators = gens
        self.degrees = tuple(g.degree for g in gens)
        self.parity = tuple(g.degree & 1 for g in gens)
        self.sides = tuple(g.side for g in gens)
        self._by_dual = {g.dual_name: g.index for g in gens}
        self._by_name = {g.name: g.index for g in gens}

    @property
    def dim(self) -> int:
        return len(self.generators)

    def signature(self):
        return tuple((g.name, g.degree, g.dual_name) for g in self.generators)

    def compatible(self, other: "GradedSpace") -> bool:
        return self is other or self.signature() == other.signature()

    def dual_index(self, name: str) -> int:
        try:
            return self._by_dual[name]
        except KeyError:
            raise ValidationError(f"unknown dual generator {name!r}") from None

    def gen_index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValidationError(f"unknown generator {name!r}") from None

    def word_degree(self, word) -> int:
        return -sum(self.degrees[i] for i in word)

    def word_parity(self, word) -> int:
        return sum(self.parity[i] for i in word) & 1

    def describe_word(self, word) -> list[str]:
        return [self.generators[i].dual_name for i in word]

    def side_indices(self, side: str) -> list[int]:
        return [g.index for g in self.generators if g.side == side]


# --- signs and monomials -------------------------------------------------------------


def koszul_sign(permutation, degrees) -> int:
    """Sign of reordering graded objects.

    ``permutation[k]`` (1-based) names the original object placed at position k.
    ``degrees[i-1]`` is the degree of original object i.
    """
    n = len(degrees)
    perm = list(permutation)
    if sorted(perm) != list(range(1, n + 1)):
        raise ValidationError(f"{permutation!r} is not a permutation of 1..{n}")
    odd = [d & 1 for d in degrees]
    sign = 1
    for a in range(n):
        if not odd[perm[a] - 1]:
            continue
        for b in range(a + 1, n):
            if perm[a] > perm[b] and odd[perm[b] - 1]:
                sign = -sign
    return sign


def _sort_sign(word, parity) -> tuple[int, tuple] | None:
    """Insertion sort with Koszul sign; None when an odd letter repeats."""
    w = list(word)
    sign = 1
    for i in range(1, len(w)):
        j = i
        while j > 0 and w[j - 1] > w[j]:
            if parity[w[j]] and parity[w[j - 1]]:
                sign = -sign
            w[j - 1], w[j] = w[j], w[j - 1]
            j -= 1
    for i in range(1, len(w)):
        if w[i] == w[i - 1] and parity[w[i]]:
            return None
    return sign, tuple(w)


def normalize_monomial(space: GradedSpace, word) -> tuple[int, tuple] | None:
    """Canonical form of a product of dual generators.

    ``word`` may hold dual-generator names or indices.  Returns ``(sign, sorted)``
    or ``None`` if the product vanishes.
    """
    idx = []
    for w in word:
        if isinstance(w, str):
            idx.append(space.dual_index(w))
        else:
            if not 0 <= w < space.dim:
                raise ValidationError(f"generator index {w} out of range")
            idx.append(w)
    return _sort_sign(idx, space.parity)


def _merge(space: GradedSpace, a: tuple, b: tuple):
    """Product of two canonical words: (sign, word) or None."""
    if not a:
        return 1, b
    if not b:
        return 1, a
    parity = space.parity
    # odd letters of a that must hop over odd letters of b
    out = []
    sign = 1
    i = j = 0
    odd_left_a = sum(parity[x] for x in a)
    while i < len(a) and j < len(b):
        if b[j] < a[i]:
            if parity[b[j]] and odd_left_a & 1:
                sign = -sign
            out.append(b[j])
            j += 1
        elif a[i] < b[j]:
            odd_left_a -= parity[a[i]]
            out.append(a[i])
            i += 1
        else:
            if parity[a[i]]:
                return None
            odd_left_a -= parity[a[i]]
            out.append(a[i])
            i += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return sign, tuple(out)


# --- series --------------------------------------------------------------------------


class Series:
    """Truncated hbar-series with coefficients in the symmetric algebra on dual generators.

    ``terms`` maps ``(hbar_power, word)`` to a nonzero Fraction.
    """

    __slots__ = ("space", "caps", "terms")

    def __init__(self, space: GradedSpace, terms=None, caps: TruncationCaps | None = None):
        self.space = space
        self.caps = caps or TruncationCaps()
        clean = {}
        if terms:
            for (h, w), c in terms.items():
                if c and self.caps.admits(h, len(w)):
                    clean[(h, w)] = c
        self.terms = clean

    # construction helpers
    @classmethod
    def zero(cls, space, caps=None):
        return cls(space, {}, caps)

    @classmethod
    def one(cls, space, caps=None):
        return cls(space, {(0, ()): Fraction(1)}, caps)

    @classmethod
    def from_terms(cls, space, items, caps=None):
        """``items``: iterable of ``(coeff, hbar_power, [dual names or indices])``."""
        acc: dict = {}
        for coeff, h, word in items:
            if not isinstance(h, int) or h < 0:
                raise ValidationError(f"hbar power must be a natural number, got {h!r}")
            n = normalize_monomial(space, word)
            if n is None:
                continue
            s, w = n
            key = (h, w)
            acc[key] = acc.get(key, 0) + s * _to_fraction(coeff)
        return cls(space, acc, caps)

    def with_caps(self, caps):
        return Series(self.space, self.terms, caps)

    def copy_like(self, terms):
        return Series(self.space, terms, self.caps)

    # inspection
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self):
        return bool(self.terms)

    def degrees(self) -> set[int]:
        return {self.space.word_degree(w) for (_, w) in self.terms}

    def degree(self) -> int | None:
        """Homogeneous total degree, None for the zero series."""
        ds = self.degrees()
        if not ds:
            return None
        if len(ds) > 1:
            raise ValidationError(f"series is not homogeneous: degrees {sorted(ds)}")
        return ds.pop()

    def parity(self) -> int:
        d = self.degree()
        return 0 if d is None else d & 1

    def coefficient(self, hbar: int, word) -> Fraction:
        n = normalize_monomial(self.space, word)
        if n is None:
            return Fraction(0)
        s, w = n
        return s * self.terms.get((hbar, w), Fraction(0))

    def hbar_part(self, k: int) -> "Series":
        return self.copy_like({key: c for key, c in self.terms.items() if key[0] == k})

    def supported_on(self, side: str) -> bool:
        sides = self.space.sides
        return all(sides[i] == side for (_, w) in self.terms for i in w)

    def project(self, side: str) -> "Series":
        """Restriction of functions to one Lagrangian half: drop words touching the other half."""
        sides = self.space.sides
        return self.copy_like({k: c for k, c in self.terms.items() if all(sides[i] == side for i in k[1])})

    def _check(self, other: "Series"):
        if not isinstance(other, Series):
            raise ValidationError("expected a Series")
        if not self.space.compatible(other.space):
            raise ValidationError("series live over different graded spaces")
        if self.caps != other.caps:
            raise ValidationError(f"caps mismatch: {self.caps} vs {other.caps}")

    # linear structure
    def __add__(self, other: "Series") -> "Series":
        self._check(other)
        t = dict(self.terms)
        for k, c in other.terms.items():
            v = t.get(k, 0) + c
            if v:
                t[k] = v
            else:
                t.pop(k, None)
        return self.copy_like(t)

    def __neg__(self):
        return self.copy_like({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c) -> "Series":
        c = _to_fraction(c)
        return self.copy_like({k: c * v for k, v in self.terms.items()})

    def shift_hbar(self, n: int) -> "Series":
        """Multiply by hbar**n; negative n requires exact divisibility."""
        if n < 0 and any(h + n < 0 for (h, _) in self.terms):
            raise ValidationError("series is not divisible by the requested power of hbar")
        return self.copy_like({(h + n, w): c for (h, w), c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, Series):
            return multiply(self, other)
        return self.scale(other)

    __rmul__ = scale

    def __eq__(self, other):
        if not isinstance(other, Series):
            return NotImplemented
        return self.space.compatible(other.space) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def sorted_terms(self):
        return sorted(self.terms.items(), key=lambda kv: (kv[0][0], len(kv[0][1]), kv[0][1]))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for (h, w), c in self.sorted_terms():
            mono = "*".join(self.space.describe_word(w)) or "1"
            hb = "" if h == 0 else (" hbar" if h == 1 else f" hbar^{h}")
            parts.append(f"({c}){hb} {mono}")
        return " + ".join(parts)


def multiply(a: Series, b: Series) -> Series:
    """Graded-commutative product, truncated to the shared caps."""
    a._check(b)
    caps, space = a.caps, a.space
    out: dict = {}
    for (ha, wa), ca in a.terms.items():
        for (hb, wb), cb in b.terms.items():
            if not caps.admits(ha + hb, len(wa) + len(wb)):
                continue
            m = _merge(space, wa, wb)
            if m is None:
                continue
            s, w = m
            key = (ha + hb, w)
            out[key] = out.get(key, 0) + s * ca * cb
    return a.copy_like({k: v for k, v in out.items() if v})


# --- rank-2 tensors ------------------------------------------------------------------


class KernelTensor2:
    """Tensor sum_{a,b} G(a,b) e_a (x) e_b over V, stored sparsely."""

    def __init__(self, space: GradedSpace, entries: dict, parity: str = "none"):
        if parity not in ("symmetric", "antisymmetric", "none"):
            raise ValidationError(f"unknown parity label {parity!r}")
        self.space = space
        self.entries = {k: _to_fraction(v) for k, v in entries.items() if v}
        self.parity = parity
        for (a, b) in self.entries:
            if space.degrees[a] + space.degrees[b] != 0:
                raise ValidationError("kernel tensors must have degree 0")
        if parity != "none" and not self._parity_holds():
            raise ValidationError(f"declared {parity} parity does not hold under the graded flip")
        self._pair_cache = None
        self._cross_cache: dict = {}
        self._contract_cache: dict = {}

    def flip(self) -> "KernelTensor2":
        """Graded swap of the two tensor slots."""
        deg = self.space.degrees
        return KernelTensor2(
            self.space, {(b, a): (-1) ** ((deg[a] * deg[b]) & 1) * v for (a, b), v in self.entries.items()}
        )

    def _parity_holds(self) -> bool:
        f = self.flip().entries
        if self.parity == "symmetric":
            return f == self.entries
        return {k: -v for k, v in f.items()} == self.entries

    def scaled(self, c, parity=None) -> "KernelTensor2":
        c = _to_fraction(c)
        return KernelTensor2(self.space, {k: c * v for k, v in self.entries.items()}, parity or self.parity)

    def plus(self, other: "KernelTensor2", parity: str = "none") -> "KernelTensor2":
        e = dict(self.entries)
        for k, v in other.entries.items():
            e[k] = e.get(k, 0) + v
        return KernelTensor2(self.space, e, parity)

    def matrix(self):
        n = self.space.dim
        return [[self.entries.get((a, b), Fraction(0)) for b in range(n)] for a in range(n)]

    def pair_value(self, i: int, j: int) -> Fraction:
        """(x_i (x) x_j)(G) for dual generators x_i, x_j, Koszul sign included."""
        v = self.entries.get((i, j))
        if not v:
            return Fraction(0)
        deg = self.space.degrees
        return -v if (deg[i] * deg[j]) & 1 else v

    def pair_table(self):
        if self._pair_cache is None:
            tab: dict = {}
            for (i, j) in self.entries:
                tab.setdefault(i, {})[j] = self.pair_value(i, j)
            self._pair_cache = tab
        return self._pair_cache

    def __eq__(self, other):
        return isinstance(other, KernelTensor2) and self.entries == other.entries

    def __repr__(self):
        g = self.space.generators
        return " + ".join(f"({v}) {g[a].name}(x){g[b].name}" for (a, b), v in sorted(self.entries.items())) or "0"


# --- contractions --------------------------------------------------------------------


def _contract_word(G: KernelTensor2, word: tuple, weight: Fraction):
    """One application of the contraction to a single canonical word."""
    key = (word, weight)
    hit = G._contract_cache.get(key)
    if hit is not None:
        return hit
    par = G.space.parity
    tab = G.pair_table()
    out: dict = {}
    n = len(word)
    for i in range(n):
        row = tab.get(word[i])
        if not row:
            continue
        before_i = sum(par[word[k]] for k in range(i))
        for j in range(i + 1, n):
            v = row.get(word[j])
            if not v:
                continue
            before_j = sum(par[word[k]] for k in range(j) if k != i)
            s = -1 if ((par[word[i]] * before_i + par[word[j]] * before_j) & 1) else 1
            rest = word[:i] + word[i + 1:j] + word[j + 1:]
            out[rest] = out.get(rest, 0) + s * weight * v
    res = {k: v for k, v in out.items() if v}
    G._contract_cache[key] = res
    return res


def contract(G: KernelTensor2, f: Series, weight=1, hbar_per_pair: int = 0) -> Series:
    """Second-order contraction operator: sum over index pairs i<j of the pair value.

    ``weight`` multiplies each pair value; the symmetric-pairing convention uses 2.
    """
    if not G.space.compatible(f.space):
        raise ValidationError("kernel and series live over different spaces")
    weight = _to_fraction(weight)
    out: dict = {}
    caps = f.caps
    for (h, w), c in f.terms.items():
        if len(w) < 2:
            continue
        hh = h + hbar_per_pair
        if hh > caps.max_hbar:
            continue
        for rest, v in _contract_word(G, w, weight).items():
            key = (hh, rest)
            out[key] = out.get(key, 0) + c * v
    return f.copy_like({k: v for k, v in out.items() if v})


def exp_contract(G: KernelTensor2, f: Series, scale=1, weight=1, hbar_per_pair: int = 1) -> Series:
    """exp(scale * hbar^k * contraction) applied to ``f``."""
    scale = _to_fraction(scale)
    total = f
    term = f
    n = 0
    while True:
        n += 1
        term = contract(G, term, weight=weight, hbar_per_pair=hbar_per_pair).scale(scale / n)
        if term.is_zero():
            return total
        total = total + term


def _cross_word(G: KernelTensor2, a: tuple, b: tuple):
    """All partial matchings between letters of ``a`` and ``b``: {(npairs, word): coeff}."""
    key = (a, b)
    hit = G._cross_cache.get(key)
    if hit is not None:
        return hit
    space = G.space
    par = space.parity
    tab = G.pair_table()
    m = len(a)
    out: dict = {}
    used = [False] * len(b)

    def emit(pairs, value):
        # final order: a_l1 b_r1 a_l2 b_r2 ... rest_a rest_b ; pairs are even blocks
        order = []
        pa = {l for l, _ in pairs}
        pb = {r for _, r in pairs}
        for l, r in pairs:
            order.append(l)
            order.append(m + r)
        order.extend(i for i in range(m) if i not in pa)
        order.extend(m + j for j in range(len(b)) if j not in pb)
        full = a + b
        odd = [par[full[p]] for p in order]
        sign = 1
        for x in range(len(order)):
            if not odd[x]:
                continue
            for y in range(x + 1, len(order)):
                if odd[y] and order[x] > order[y]:
                    sign = -sign
        ra = tuple(a[i] for i in range(m) if i not in pa)
        rb = tuple(b[j] for j in range(len(b)) if j not in pb)
        mg = _merge(space, ra, rb)
        if mg is None:
            return
        s2, w = mg
        k = (len(pairs), w)
        out[k] = out.get(k, 0) + sign * s2 * value

    def rec(pos, pairs, value):
        if pos == m:
            emit(pairs, value)
            return
        rec(pos + 1, pairs, value)
        row = tab.get(a[pos])
        if not row:
            return
        for r in range(len(b)):
            if used[r]:
                continue
            v = row.get(b[r])
            if not v:
                continue
            used[r] = True
            rec(pos + 1, pairs + [(pos, r)], value * v)
            used[r] = False

    rec(0, [], Fraction(1))
    res = {k: v for k, v in out.items() if v}
    G._cross_cache[key] = res
    return res


def cross_contract_exp(G: KernelTensor2, a: Series, b: Series, scale=1, hbar_per_pair: int = 0) -> Series:
    """Exponentiated cross contraction between the letters of ``a`` and those of ``b``.

    Each contracted pair contributes ``scale * (j (x) f)(G) * hbar**hbar_per_pair``.
    """
    a._check(b)
    if not G.space.compatible(a.space):
        raise ValidationError("kernel and series live over different spaces")
    scale = _to_fraction(scale)
    caps = a.caps
    out: dict = {}
    for (ha, wa), ca in a.terms.items():
        for (hb, wb), cb in b.terms.items():
            base = ha + hb
            if base > caps.max_hbar:
                continue
            for (s, w), v in _cross_word(G, wa, wb).items():
                h = base + s * hbar_per_pair
                if not caps.admits(h, len(w)):
                    continue
                key = (h, w)
                out[key] = out.get(key, 0) + ca * cb * v * scale ** s
    return a.copy_like({k: v for k, v in out.items() if v})


# --- symplectic inversion ------------------------------------------------------------


class SymplecticSpace(GradedSpace):
    """Graded space with a degree-0 nondegenerate pairing between the two halves."""

    def __init__(self, generators, omega: dict):
        GradedSpace.__init__(self, generators)
        self.omega = {k: _to_fraction(v) for k, v in omega.items() if v}
        self.K, self.K_minus, self.K_plus = invert_symplectic(self, self.omega)

    def repolarized(self, sides) -> "SymplecticSpace":
        """Same generators and form, different Lagrangian labeling."""
        gens = [Generator(g.name, g.degree, s, g.index, g.dual_name) for g, s in zip(self.generators, sides)]
        return SymplecticSpace(gens, self.omega)

    def omega_matrix(self):
        n = self.dim
        return [[self.omega.get((a, b), Fraction(0)) for b in range(n)] for a in range(n)]

    __hash__ = object.__hash__
    __eq__ = object.__eq__


def invert_symplectic(space: GradedSpace, omega: dict):
    """Inverse tensor of a graded symplectic form, split along the polarization.

    Returns ``(K, K_minus, K_plus)`` with ``K_minus`` in L (x) L', ``K_plus`` in L' (x) L.
    K is defined by (phi (x) phi)(K) = omega where phi(v) = omega(v, -).
    """
    n = space.dim
    deg, side = space.degrees, space.sides
    W = [[_to_fraction(omega.get((a, b), 0)) for b in range(n)] for a in range(n)]
    for a in range(n):
        for b in range(n):
            if W[a][b] == 0:
                continue
            if deg[a] + deg[b] != 0:
                raise ValidationError(f"omega({a},{b}) pairs degrees {deg[a]} and {deg[b]}; must have degree 0")
            if side[a] == side[b]:
                raise PolarizationError(
                    f"omega pairs {space.generators[a].name} and {space.generators[b].name} on the same side"
                )
            # graded antisymmetry: w(b,a) = -(-1)^{|a||b|} w(a,b)
            if W[b][a] != -((-1) ** ((deg[a] * deg[b]) & 1)) * W[a][b]:
                raise ValidationError("omega is not graded antisymmetric")
    M = sympy.Matrix(n, n, lambda i, j: sympy.Rational(W[i][j].numerator, W[i][j].denominator))
    if M.det() == 0:
        raise ValidationError("omega is degenerate")
    Minv = M.inv()
    G1 = Minv.T * M * Minv
    full, minus, plus = {}, {}, {}
    for a in range(n):
        for b in range(n):
            v = G1[a, b]
            if v == 0:
                continue
            val = Fraction(int(v.p), int(v.q)) * (-1) ** ((deg[a] * deg[b]) & 1)
            full[(a, b)] = val
            (minus if side[a] == "L" else plus)[(a, b)] = val
    K = KernelTensor2(space, full, "antisymmetric")
    Km = KernelTensor2(space, minus)
    Kp = KernelTensor2(space, plus)
    if Km.flip().entries != {k: -v for k, v in Kp.entries.items()}:
        raise ValidationError("split of the inverse tensor violates flip(K_minus) = -K_plus")
    return K, Km, Kp


def omega_from_kernel(space: GradedSpace, K: KernelTensor2) -> dict:
    """Push K back through v -> omega(v,-) twice; used to check the round trip."""
    n = space.dim
    deg = space.degrees
    W = space.omega
    out = {}
    for (a, b), g in K.entries.items():
        for c in range(n):
            wac = W.get((a, c))
            if not wac:
                continue
            for d in range(n):
                wbd = W.get((b, d))
                if wbd:
                    out[(c, d)] = out.get((c, d), 0) + g * (-1) ** ((deg[b] * deg[c]) & 1) * wac * wbd
    return {k: v for k, v in out.items() if v}


# --- exp / log ------------------------------------------------------------------------


def series_exp(f: Series) -> Series:
    """Exponential under the commutative product; f must have no scalar hbar^0 term."""
    if f.terms.get((0, ())):
        raise ValidationError("exp needs a vanishing scalar hbar^0 term")
    total = Series.one(f.space, f.caps)
    term = total
    n = 0
    while True:
        n += 1
        term = multiply(term, f).scale(Fraction(1, n))
        if term.is_zero():
            return total
        total = total + term


def series_log(g: Series) -> Series:
    """Inverse of series_exp; the scalar hbar^0 term of g must equal 1."""
    if g.terms.get((0, ())) != 1:
        raise ValidationError("log needs unit leading term")
    u = g - Series.one(g.space, g.caps)
    total = Series.zero(g.space, g.caps)
    power = Series.one(g.space, g.caps)
    n = 0
    while True:
        n += 1
        power = multiply(power, u)
        if power.is_zero():
            return total
        total = total + power.scale(Fraction((-1) ** (n + 1), n))
