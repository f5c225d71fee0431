"""Small Feynman-graph engine for effective interactions on the half-line and the interval.

A graph has bulk vertices (integrated over the domain) carrying the boundary interaction I,
boundary vertices pinned at an endpoint carrying J, internal edges carrying a propagator,
and external legs bound to test fields.  An amplitude is

    (1/|Aut|) sum over vertex terms and slot assignments of
        Koszul sign * coefficients * prod_edges 2 (x_A (x) x_B)(P(x_v, x_w)) * prod_legs x_a(phi)

integrated over the ordered sectors 0 <= x_s(1) <= ... <= x_s(n).  Every propagator is a
sum of scalar channels times a constant tensor, so the exact tensor algebra is done once
per graph and the numerics only see scalar kernels.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import integrate

from .bvbfv_check import CheckReport
from .graded_core import KernelTensor2, Series, SymplecticSpace, ValidationError, contract, koszul_sign
from .halfline_kernels import (
    Branch,
    HalfLineChart,
    IntervalKernels,
    KernelDomainError,
    alpha_covector,
    splitting_theta,
)
from .weyl_moyal import BoundaryAlgebraContext, own, weyl_left, weyl_right

EDGE_WEIGHT = 2  # symmetric pairing of the two contracted letters


class GraphValidationError(ValidationError):
    pass


# --- test fields ------------------------------------------------------------------------


@dataclass(frozen=True)
class SmoothBump:
    """height * exp(1 - 1/(1 - s^2)) with s = (x - center)/halfwidth; peak value = height."""

    center: float
    halfwidth: float
    height: float = 1.0

    @property
    def support(self):
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def __call__(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        inside = np.abs(s) < 1
        q = np.where(inside, 1 - s * s, 1.0)
        return np.where(inside, self.height * np.exp(1 - 1 / q), 0.0)

    def deriv(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        inside = np.abs(s) < 1
        q = np.where(inside, 1 - s * s, 1.0)
        return np.where(inside, self(x) * (-2 * s / q**2) / self.halfwidth, 0.0)


@dataclass(frozen=True)
class PolyBump:
    """height * (1 - s^2)^3 with s = (x - center)/halfwidth: C^2, polynomial on its support.

    Panels are clipped at the support ends, so Gauss rules integrate it without edge error.
    """

    center: float
    halfwidth: float
    height: float = 1.0

    @property
    def support(self):
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def __call__(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        return np.where(np.abs(s) < 1, self.height * (1 - s * s) ** 3, 0.0)

    def deriv(self, x):
        s = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        return np.where(np.abs(s) < 1, self.height * 3 * (1 - s * s) ** 2 * (-2 * s) / self.halfwidth, 0.0)


class SplineBump:
    """Cubic B-spline bump on [a, b] with peak ``height`` (C^2, knots at quarter points)."""

    def __init__(self, a, b, height=1.0):
        from scipy.interpolate import BSpline

        self._b = BSpline.basis_element(np.linspace(a, b, 5), extrapolate=False)
        self._d = self._b.derivative()
        self._scale = height / float(self._b(0.5 * (a + b)))
        self.support = (a, b)

    def __call__(self, x):
        return np.nan_to_num(self._b(np.asarray(x, dtype=float))) * self._scale

    def deriv(self, x):
        return np.nan_to_num(self._d(np.asarray(x, dtype=float))) * self._scale


@dataclass
class TestField:
    """phi = profile(x) e_direction, as a 0-form (form=0) or as profile(x) dx (form=1)."""

    __test__ = False  # not a pytest class

    name: str
    direction: int
    form: int
    profile: object

    @property
    def support(self):
        return self.profile.support

    def sample(self, grid_points: int = 512, domain=(0.0, 1.0)):
        x = np.linspace(domain[0], domain[1], grid_points)
        return x, self.profile(x)


PRESET_CENTERS = {
    # every propagator has range 0.1 (cutoff support), so interacting presets overlap
    "overlap": [0.42, 0.5, 0.58, 0.46, 0.54, 0.5],
    "disjoint": [0.2, 0.5, 0.8, 1.1, 1.4, 1.7],
}
PRESET_HALFWIDTH = {"overlap": 0.15, "disjoint": 0.1}


def preset_fields(kind: str, directions, forms, offset: float = 0.0, halfwidth: float | None = None):
    if kind not in PRESET_CENTERS:
        raise ValidationError(f"unknown field preset {kind!r}")
    cs = PRESET_CENTERS[kind]
    hw = PRESET_HALFWIDTH[kind] if halfwidth is None else halfwidth
    out = []
    for i, (d, f) in enumerate(zip(directions, forms)):
        c = cs[i % len(cs)] + offset
        out.append(TestField(f"phi{i}", d, f, PolyBump(c, hw, 1.0 + 0.1 * i)))
    return out


# --- graphs -----------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphSpec:
    """``vertices``: ('bulk', valence) or ('boundary', endpoint, valence).
    ``edges``: sorted vertex pairs (self-loops allowed on bulk vertices).
    ``legs``: vertex of each external leg, in binding order."""

    vertices: tuple
    edges: tuple
    legs: tuple
    symmetry_factor: Fraction = Fraction(1)

    @property
    def bulk(self):
        return [i for i, v in enumerate(self.vertices) if v[0] == "bulk"]

    @property
    def boundary(self):
        return [i for i, v in enumerate(self.vertices) if v[0] == "boundary"]

    @property
    def loops(self):
        return len(self.edges) - len(self.vertices) + 1

    def valence(self, v):
        return self.vertices[v][-1]

    def degree(self, v):
        return sum((a == v) + (b == v) for a, b in self.edges)

    def legs_at(self, v):
        return [i for i, w in enumerate(self.legs) if w == v]

    @property
    def gid(self):
        vs = ",".join("b%d" % v[1] if v[0] == "bulk" else "J%d@%s" % (v[2], v[1]) for v in self.vertices)
        es = ",".join(f"{a}-{b}" for a, b in self.edges)
        return f"[{vs}|{es}|legs:{','.join(map(str, self.legs))}]"

    def validate(self):
        n = len(self.vertices)
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n):
                raise GraphValidationError("edge endpoint out of range")
            if self.vertices[a][0] == "boundary" and self.vertices[b][0] == "boundary":
                raise GraphValidationError("two boundary vertices cannot be joined by a propagator")
        for v in range(n):
            if self.degree(v) + len(self.legs_at(v)) != self.valence(v):
                raise GraphValidationError(f"vertex {v}: slots do not match valence")
            if self.vertices[v][0] == "bulk" and not self.legs_at(v):
                raise GraphValidationError(f"bulk vertex {v} has no external leg")
        if not _connected(n, self.edges):
            raise GraphValidationError("graph is not connected")


def _connected(n, edges):
    if n == 0:
        return False
    seen = {0}
    stack = [0]
    adj = {i: set() for i in range(n)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    while stack:
        v = stack.pop()
        for w in adj[v] - seen:
            seen.add(w)
            stack.append(w)
    return len(seen) == n


def _adjacency(n, edges):
    A = [[0] * n for _ in range(n)]
    for a, b in edges:
        if a == b:
            A[a][a] += 1
        else:
            A[a][b] += 1
            A[b][a] += 1
    return A


def _canonical_key(vertices, edges):
    n = len(vertices)
    A = _adjacency(n, edges)
    best = None
    for p in itertools.permutations(range(n)):
        vt = tuple(vertices[p[i]] for i in range(n))
        M = tuple(tuple(A[p[i]][p[j]] for j in range(n)) for i in range(n))
        key = (vt, M)
        if best is None or key < best:
            best = key
    return best


def _from_key(key):
    vt, M = key
    n = len(vt)
    edges = []
    for i in range(n):
        for j in range(i, n):
            edges += [(i, j)] * M[i][j]
    legs = []
    for v in range(n):
        deg = sum(2 * M[v][v] if w == v else M[v][w] for w in range(n))
        legs += [v] * (vt[v][-1] - deg)
    return vt, tuple(edges), tuple(legs)


def _vertex_perms(vertices):
    n = len(vertices)
    return [p for p in itertools.permutations(range(n)) if all(vertices[p[i]] == vertices[i] for i in range(n))]


def symmetry_order_formula(g: GraphSpec) -> int:
    """|Aut| with unlabeled legs: vertex symmetries times edge/loop/leg permutations."""
    n = len(g.vertices)
    A = _adjacency(n, g.edges)
    vp = sum(1 for p in _vertex_perms(g.vertices) if all(A[p[i]][p[j]] == A[i][j] for i in range(n) for j in range(n)))
    out = vp
    for i in range(n):
        out *= 2 ** A[i][i] * math.factorial(A[i][i])
        out *= math.factorial(len(g.legs_at(i)))
        for j in range(i + 1, n):
            out *= math.factorial(A[i][j])
    return out


def _wiring(g: GraphSpec):
    """Concrete half-edge wiring: slot lists per vertex, edge pairs, leg slots (in leg order)."""
    nxt = [0] * len(g.vertices)
    pairs = []
    for a, b in g.edges:
        sa = (a, nxt[a])
        nxt[a] += 1
        sb = (b, nxt[b])
        nxt[b] += 1
        pairs.append(frozenset((sa, sb)))
    legs = []
    for v in g.legs:
        legs.append((v, nxt[v]))
        nxt[v] += 1
    return pairs, legs


def symmetry_order_bruteforce(g: GraphSpec, labeled_legs: bool = False) -> int:
    """Count vertex-and-slot permutations preserving the wiring (legs fixed when labeled)."""
    pairs, legs = _wiring(g)
    pairset = set(pairs)
    legset = set(legs)
    n = len(g.vertices)
    count = 0
    slot_perms = [list(itertools.permutations(range(g.valence(v)))) for v in range(n)]
    for p in _vertex_perms(g.vertices):
        for sp in itertools.product(*slot_perms):
            def m(s):
                v, k = s
                return (p[v], sp[v][k])

            if {frozenset(map(m, pr)) for pr in pairs} != pairset:
                continue
            if labeled_legs:
                if any(m(s) != s for s in legs):
                    continue
            elif {m(s) for s in legs} != legset:
                continue
            count += 1
    return count


def enumerate_graphs(
    bulk_valences,
    boundary_types=(),
    max_bulk: int = 2,
    max_boundary: int = 0,
    max_loops: int = 1,
    min_edges: int = 0,
    max_edges: int | None = None,
):
    """All connected graphs within the caps, one per isomorphism class, in canonical order.

    ``bulk_valences``: allowed word lengths of I; ``boundary_types``: (endpoint, length) of J words.
    """
    if max_bulk > 3 or max_boundary > 2 or max_loops > 1:
        raise ValidationError("graph caps are limited to 3 bulk, 2 boundary vertices and one loop")
    bulk_valences = sorted(set(bulk_valences))
    boundary_types = sorted(set(boundary_types))
    found = {}
    for nb in range(0, max_bulk + 1):
        for nd in range(0, max_boundary + 1):
            if nb + nd == 0:
                continue
            for bv in itertools.combinations_with_replacement(bulk_valences, nb):
                for dv in itertools.combinations_with_replacement(boundary_types, nd):
                    verts = [("bulk", k) for k in bv] + [("boundary", e, k) for e, k in dv]
                    for edges in _edge_sets(verts, max_loops, max_edges):
                        if len(edges) < min_edges:
                            continue
                        key = _canonical_key(verts, edges)
                        if key in found:
                            continue
                        vt, es, legs = _from_key(key)
                        g = GraphSpec(vt, es, legs)
                        try:
                            g.validate()
                        except GraphValidationError:
                            continue
                        found[key] = GraphSpec(vt, es, legs, Fraction(1, symmetry_order_formula(g)))
    return [found[k] for k in sorted(found, key=lambda k: (len(k[0]), sum(map(sum, k[1])), k))]


def _edge_sets(verts, max_loops, max_edges):
    n = len(verts)
    cap = n - 1 + max_loops
    if max_edges is not None:
        cap = min(cap, max_edges)
    room = [v[-1] - (1 if v[0] == "bulk" else 0) for v in verts]
    slots = [
        (i, j)
        for i in range(n)
        for j in range(i, n)
        if not (verts[i][0] == "boundary" and verts[j][0] == "boundary")
    ]

    def rec(k, left, used, acc):
        if k == len(slots):
            yield tuple(acc)
            return
        i, j = slots[k]
        m = 0
        u = list(used)
        while True:
            yield from rec(k + 1, left - m, tuple(u), acc + [(i, j)] * m)
            m += 1
            if m > left:
                return
            if i == j:
                u[i] += 2
            else:
                u[i] += 1
                u[j] += 1
            if u[i] > room[i] or u[j] > room[j]:
                return

    yield from rec(0, cap, (0,) * n, [])


# --- exact tensor coefficients --------------------------------------------------------


def _slot_layout(g: GraphSpec):
    """Target position of every half-edge: edge e -> (2e, 2e+1), leg l -> 2E + l."""
    E = len(g.edges)
    at = [[] for _ in g.vertices]
    for e, (a, b) in enumerate(g.edges):
        at[a].append(2 * e)
        at[b].append(2 * e + 1)
    for l, v in enumerate(g.legs):
        at[v].append(2 * E + l)
    return at


def graph_coefficients(space, g: GraphSpec, vertex_series, edge_channels, leg_forms):
    """Exact coefficients of the scalar channel integrals.

    ``vertex_series[v]``: Series carried by vertex v (its words of length valence(v) are used).
    ``edge_channels[e]``: list of KernelTensor2, one per scalar channel of edge e.
    ``leg_forms[l]``: 0 or 1.  Returns {(leg directions, channel tuple, hbar): Fraction},
    already divided by the leg-labelled automorphism order.
    """
    g.validate()
    par = space.parity
    deg = space.degrees
    E = len(g.edges)
    layout = _slot_layout(g)
    per_vertex = []
    for v in range(len(g.vertices)):
        k = g.valence(v)
        opts = []
        for (h, w), c in vertex_series[v].terms.items():
            if len(w) != k:
                continue
            for perm in itertools.permutations(range(k)):
                placed = {layout[v][perm[i]]: (w[i], i) for i in range(k)}
                opts.append((h, c, placed))
        per_vertex.append(opts)
    offsets = list(itertools.accumulate([0] + [g.valence(v) for v in range(len(g.vertices))]))
    total_slots = offsets[-1]
    aut = symmetry_order_bruteforce(g, labeled_legs=True)
    one_form_legs = [l for l in range(len(g.legs)) if leg_forms[l] == 1]
    # dx factors appear in leg order; integration wants them in vertex order
    dx_perm = sorted(range(len(one_form_legs)), key=lambda i: (g.legs[one_form_legs[i]], i))
    dx_sign = koszul_sign([p + 1 for p in dx_perm], [1] * len(dx_perm)) if dx_perm else 1
    out: dict = {}
    for choice in itertools.product(*per_vertex):
        letters = [None] * total_slots
        perm = [0] * total_slots
        coeff = Fraction(1)
        hb = g.loops
        for v, (h, c, placed) in enumerate(choice):
            coeff *= c
            hb += h
            for pos, (letter, i) in placed.items():
                letters[pos] = letter
                perm[pos] = offsets[v] + i + 1
        src_par = [0] * total_slots
        for pos, src in enumerate(perm):
            src_par[src - 1] = par[letters[pos]]
        sign = koszul_sign(perm, src_par)
        legs = tuple(letters[2 * E + l] for l in range(len(g.legs)))
        # pair letters with fields: phi_i moves left past the letters after it
        for i in range(len(legs)):
            fpar = (deg[legs[i]] + leg_forms[i]) & 1
            if fpar and sum(par[legs[j]] for j in range(i + 1, len(legs))) & 1:
                sign = -sign
        base = coeff * sign * dx_sign
        for chans in itertools.product(*[range(len(c)) for c in edge_channels]):
            val = base
            for e, ch in enumerate(chans):
                val *= EDGE_WEIGHT * edge_channels[e][ch].pair_value(letters[2 * e], letters[2 * e + 1])
                if not val:
                    break
            if val:
                key = (legs, chans, hb)
                out[key] = out.get(key, 0) + val
    return {k: v / aut for k, v in out.items() if v}


# --- edge kernels -----------------------------------------------------------------------


class EdgeKernel:
    """Scalar channels s_c(x_v, x_w) with constant tensors T_c:  P(x_v, x_w) = sum_c s_c T_c."""

    tensors: list
    layer: float = 0.01

    def scalars(self, xv, xw, order):
        """``order``: -1 if x_v <= x_w on this sector (branch C1), +1 if x_w <= x_v, 0 on a self-loop."""
        raise NotImplementedError


def _exact_kplus_kminus(space: SymplecticSpace):
    return [space.K_plus, space.K_minus]


class HalfLineKernel(EdgeKernel):
    """P(eps, lam) for eps > 0, or the extended Pbar(0, lam) when eps == 0."""

    def __init__(self, space: SymplecticSpace, chart: HalfLineChart, eps: float, lam: float):
        if eps < 0 or lam <= eps:
            raise KernelDomainError("need 0 <= eps < lam")
        self.space, self.chart, self.eps, self.lam = space, chart, eps, lam
        self.tensors = _exact_kplus_kminus(space)
        self.layer = math.sqrt(4 * eps) if eps > 0 else math.sqrt(4 * lam)

    def _p(self, x, y, side):
        return self.chart.p_scalar(self.eps, self.lam, x, y, side)

    def scalars(self, xv, xw, order):
        if self.eps > 0:
            return [self._p(xv, xw, 0), -self._p(xw, xv, 0)]
        if order == 0:
            return [
                0.5 * (self._p(xv, xw, -1) + self._p(xv, xw, 1)),
                -0.5 * (self._p(xw, xv, -1) + self._p(xw, xv, 1)),
            ]
        return [self._p(xv, xw, order), -self._p(xw, xv, -order)]


class IntervalKernel(EdgeKernel):
    """Glued kernel on [0,1]: chart-1 channels inside [0.9,1]^2, chart-0 channels elsewhere."""

    def __init__(self, space0, space1, ik: IntervalKernels, eps: float, lam: float):
        if eps < 0 or lam <= eps:
            raise KernelDomainError("need 0 <= eps < lam")
        self.h0 = HalfLineKernel(space0, ik.chart0, eps, lam)
        self.h1 = HalfLineKernel(space1, ik.chart1, eps, lam)
        self.eps, self.lam = eps, lam
        self.tensors = self.h0.tensors + self.h1.tensors
        self.layer = self.h0.layer

    def scalars(self, xv, xw, order):
        xv = np.asarray(xv, dtype=float)
        xw = np.asarray(xw, dtype=float)
        near1 = (xv >= 0.9) & (xw >= 0.9)
        a = self.h0.scalars(xv, xw, order)
        b = self.h1.scalars(xv, xw, order)
        return [np.where(near1, 0.0, s) for s in a] + [np.where(near1, s, 0.0) for s in b]


# --- sector quadrature ------------------------------------------------------------------


_GL_CACHE: dict = {}


def _gauss(q):
    if q not in _GL_CACHE:
        _GL_CACHE[q] = np.polynomial.legendre.leggauss(q)
    return _GL_CACHE[q]


def _panel_nodes(lo, hi, edges, q):
    """Gauss nodes on the panels ``edges`` clipped to [lo, hi] (lo, hi arrays of length N).
    ``edges`` is shared (1-D) or per node (N x m, rows sorted)."""
    t, w = _gauss(q)
    edges = np.atleast_2d(edges)
    a = np.clip(edges[:, :-1], lo[:, None], hi[:, None])
    b = np.clip(edges[:, 1:], lo[:, None], hi[:, None])
    half = 0.5 * (b - a)
    nodes = (a + half)[:, :, None] + half[:, :, None] * t[None, None, :]
    weights = half[:, :, None] * w[None, None, :] * np.ones_like(nodes)
    return nodes.reshape(len(lo), -1), weights.reshape(len(lo), -1)


@dataclass(frozen=True)
class SectorQuadrature:
    """Gauss order per panel; three-point sectors use ``order_three`` to keep cost desk-sized.
    The error estimate reruns at order + ``refine`` (resp. + ``refine_three``)."""

    order: int = 20
    panel: float = 0.05
    cutoff_breaks: tuple = (0.05, 0.075, 0.1)
    order_three: int = 12
    refine: int = 10
    refine_three: int = 4

    def order_for(self, n):
        return self.order_three if n >= 3 else self.order

    def refined(self, n):
        return replace(self, order=self.order + self.refine, order_three=self.order_three + self.refine_three)


def _gap_edges(span, layer, sq: SectorQuadrature):
    pts = {0.0, span}
    for k in range(-4, 5):
        s = layer * 2.0**k
        if s < span:
            pts.add(s)
    for c in sq.cutoff_breaks:
        if c < span:
            pts.add(c)
    x = 0.0
    while x < span:
        pts.add(x)
        x += sq.panel
    return np.array(sorted(pts))


def _abs_edges(lo, hi, layer, sq: SectorQuadrature):
    pts = {lo, hi}
    x = lo
    while x < hi:
        pts.add(x)
        x += sq.panel
    for k in range(-4, 5):  # corner layer when a support reaches the boundary
        s = layer * 2.0**k
        if lo < s < hi:
            pts.add(s)
    return np.array(sorted(pts))


def sector_integrate(supports, integrand, layer=0.01, sq: SectorQuadrature = SectorQuadrature()):
    """Sum over the n! ordered sectors of prod_i supports[i].

    ``integrand(xs, order)`` gets a list of node arrays and the sector order (a permutation).
    """
    n = len(supports)
    if n == 0:
        return float(integrand([], ()))
    total = 0.0
    for order in itertools.permutations(range(n)):
        lo0, hi0 = supports[order[0]]
        q = sq.order_for(n)
        # later support ends put kinks into the outer integrands; break panels there
        later = sorted({e for j in order[1:] for e in supports[j]})
        e0 = np.union1d(_abs_edges(lo0, hi0, layer, sq), [e for e in later if lo0 < e < hi0])
        x, w = _panel_nodes(np.array([lo0]), np.array([hi0]), e0, q)
        cols = [x.reshape(-1)]
        wt = w.reshape(-1)
        keep = wt > 0
        cols, wt = [c[keep] for c in cols], wt[keep]
        for k in range(1, n):
            lo, hi = supports[order[k]]
            prev = cols[-1]
            glo = np.maximum(0.0, lo - prev)
            ghi = np.maximum(glo, hi - prev)
            span = float(ghi.max()) if len(ghi) else 0.0
            if span <= 0:
                wt = np.zeros(0)
                cols = [c[:0] for c in cols]
                break
            common = _gap_edges(span, layer, sq)
            later = sorted({e for j in order[k + 1:] for e in supports[j]} - {lo, hi})
            if later:
                extra = np.clip(np.array(later)[None, :] - prev[:, None], 0.0, span)
                edges = np.sort(np.concatenate([np.broadcast_to(common, (len(prev), len(common))), extra], axis=1), axis=1)
            else:
                edges = common
            gn, gw = _panel_nodes(glo, ghi, edges, q)
            m = gn.shape[1]
            cols = [np.repeat(c, m) for c in cols] + [(prev[:, None] + gn).reshape(-1)]
            wt = (wt[:, None] * gw).reshape(-1)
            keep = wt > 0
            cols, wt = [c[keep] for c in cols], wt[keep]
        if len(wt) == 0:
            continue
        xs = [None] * n
        for pos, v in enumerate(order):
            xs[v] = cols[pos]
        total += float(np.sum(wt * integrand(xs, order)))
    return total


# --- amplitudes -------------------------------------------------------------------------


@dataclass
class AmplitudeResult:
    value: dict  # hbar power -> float
    error_estimate: float
    graph_id: str
    t: float
    flags: list = field(default_factory=list)

    def at(self, h):
        return self.value.get(h, 0.0)


@dataclass
class GraphTheory:
    """Data the engine needs: exact space, vertex series and where boundary vertices sit."""

    space: SymplecticSpace
    I: Series
    J: dict = field(default_factory=dict)  # endpoint -> Series
    domain: tuple = (0.0, math.inf)

    def vertex_series(self, g: GraphSpec):
        out = []
        for v in g.vertices:
            if v[0] == "bulk":
                out.append(self.I)
            else:
                if v[1] not in self.J:
                    raise GraphValidationError(f"no boundary term at endpoint {v[1]}")
                out.append(self.J[v[1]])
        return out


def _check_binding(g: GraphSpec, fields, domain):
    if len(fields) != len(g.legs):
        raise GraphValidationError(f"{len(g.legs)} legs but {len(fields)} fields bound")
    for l, f in enumerate(fields):
        a, b = f.support
        if a < domain[0] - 1e-15 or b > domain[1] + 1e-15:
            raise GraphValidationError(f"field {f.name} support {f.support} leaves the domain {domain}")
        v = g.legs[l]
        if g.vertices[v][0] == "boundary" and f.form == 1:
            raise GraphValidationError("a 1-form cannot be restricted to a boundary point")
    for v in g.bulk:
        ones = sum(fields[l].form == 1 for l in g.legs_at(v))
        if ones != 1:
            raise GraphValidationError(f"bulk vertex {v} needs exactly one 1-form leg, got {ones}")


def amplitude(theory: GraphTheory, g: GraphSpec, kernels, fields, sq: SectorQuadrature = SectorQuadrature(), estimate_error=True):
    """Evaluate graph ``g`` with ``kernels[e]`` on edge e and ``fields[l]`` bound to leg l."""
    _check_binding(g, fields, theory.domain)
    if len(kernels) != len(g.edges):
        raise GraphValidationError("one kernel per edge is required")
    forms = [f.form for f in fields]
    coeffs = graph_coefficients(theory.space, g, theory.vertex_series(g), [k.tensors for k in kernels], forms)
    dirs = tuple(f.direction for f in fields)
    table: dict = {}
    for (legs, chans, hb), c in coeffs.items():
        if legs == dirs:
            table.setdefault(hb, {})[chans] = float(c)
    bulk = g.bulk
    pos = {v: i for i, v in enumerate(bulk)}
    supports = []
    for v in bulk:
        lo, hi = theory.domain[0], theory.domain[1]
        for l in g.legs_at(v):
            a, b = fields[l].support
            lo, hi = max(lo, a), min(hi, b)
        if lo >= hi:
            return AmplitudeResult({h: 0.0 for h in table}, 0.0, g.gid, kernels[0].lam if kernels else 0.0)
        supports.append((lo, hi))
    layer = min([k.layer for k in kernels], default=0.01)

    def make(hb):
        chan_coeffs = table[hb]

        def integrand(xs, order):
            npts = len(xs[0]) if xs else 1
            coord = {}
            rank = {}
            for v in range(len(g.vertices)):
                if v in pos:
                    coord[v] = xs[pos[v]]
                    rank[v] = order.index(pos[v])
                else:
                    endpoint = g.vertices[v][1]
                    coord[v] = np.full(npts, float(endpoint))
                    rank[v] = -1 if endpoint == 0 else len(bulk)
            legs_val = np.ones(npts)
            for l, f in enumerate(fields):
                legs_val = legs_val * f.profile(coord[g.legs[l]])
            chan_vals = []
            for e, (a, b) in enumerate(g.edges):
                o = 0 if a == b else (-1 if rank[a] < rank[b] else 1)
                chan_vals.append(kernels[e].scalars(coord[a], coord[b], o))
            acc = np.zeros(npts)
            for chans, c in chan_coeffs.items():
                term = np.full(npts, c)
                for e, ch in enumerate(chans):
                    term = term * chan_vals[e][ch]
                acc += term
            return acc * legs_val

        return integrand

    value, err = {}, 0.0
    for hb in sorted(table):
        f = make(hb)
        v = sector_integrate(supports, f, layer, sq)
        if estimate_error:
            v2 = sector_integrate(supports, f, layer, sq.refined(len(supports)))
            err = max(err, abs(v2 - v))
            v = v2
        value[hb] = v
    lam = kernels[0].lam if kernels else 0.0
    return AmplitudeResult(value, err, g.gid, lam)


def nonzero_bindings(theory: GraphTheory, g: GraphSpec, tensors_per_edge=None):
    """Leg direction/form assignments with a nonzero exact coefficient, canonical order.

    Forms: the first leg of each bulk vertex is the 1-form leg.
    """
    forms = [0] * len(g.legs)
    for v in g.bulk:
        forms[g.legs_at(v)[0]] = 1
    if tensors_per_edge is None:
        tensors_per_edge = [_exact_kplus_kminus(theory.space) for _ in g.edges]
    coeffs = graph_coefficients(theory.space, g, theory.vertex_series(g), tensors_per_edge, forms)
    dirs = sorted({k[0] for k in coeffs})
    return [(d, forms) for d in dirs]


def bind_preset(theory: GraphTheory, g: GraphSpec, preset: str = "overlap", which: int = 0, offset: float = 0.0,
                tensors_per_edge=None, halfwidth: float | None = None):
    opts = nonzero_bindings(theory, g, tensors_per_edge)
    if not opts:
        return None
    d, forms = opts[which % len(opts)]
    return preset_fields(preset, d, forms, offset, halfwidth)


def graph_functional(theory: GraphTheory, g: GraphSpec, kernels, fields, sq: SectorQuadrature = SectorQuadrature()):
    """Contribution of ``g`` to the effective functional evaluated on ``fields``.

    Sums over every assignment of fields to legs, which makes the result graded symmetric;
    assignments putting two 1-forms (or none) on a bulk vertex vanish.
    """
    aut_free = symmetry_order_formula(g)
    aut_lab = symmetry_order_bruteforce(g, labeled_legs=True)
    total: dict = {}
    err = 0.0
    for perm in itertools.permutations(range(len(fields))):
        fs = [fields[p] for p in perm]
        try:
            _check_binding(g, fs, theory.domain)
        except GraphValidationError as exc:
            if "1-form" in str(exc):
                continue
            raise
        r = amplitude(theory, g, kernels, fs, sq)
        fpar = [(theory.space.degrees[f.direction] + f.form) & 1 for f in fields]
        sgn = koszul_sign([p + 1 for p in perm], fpar)
        for h, v in r.value.items():
            total[h] = total.get(h, 0.0) + sgn * v * aut_lab / aut_free
        err += r.error_estimate
    lam = kernels[0].lam if kernels else 0.0
    return AmplitudeResult(total, err, g.gid, lam)


# --- UV finiteness ----------------------------------------------------------------------


def uv_finiteness_check(
    theory: GraphTheory,
    g: GraphSpec,
    fields,
    make_kernel,
    lam: float,
    eps_seq=(1e-3, 1e-4, 1e-5),
    cauchy_tol: float = 1e-6,
    limit_tol: float = 1e-5,
    symmetrize: bool = False,
    sq: SectorQuadrature = SectorQuadrature(),
) -> CheckReport:
    """Amplitudes with P(eps, lam) edges along ``eps_seq`` against the Pbar(0, lam) evaluation.

    ``make_kernel(eps, lam)`` builds one edge kernel (eps = 0 gives the extended propagator).
    """
    g.validate()
    eps_seq = list(eps_seq)
    if any(b >= a for a, b in zip(eps_seq, eps_seq[1:])) or eps_seq[-1] <= 0:
        raise ValidationError("eps sequence must decrease strictly and stay positive")
    run = graph_functional if symmetrize else amplitude
    ref = run(theory, g, [make_kernel(0.0, lam) for _ in g.edges], fields, sq)
    seq = [run(theory, g, [make_kernel(e, lam) for _ in g.edges], fields, sq) for e in eps_seq]
    powers = sorted(set(ref.value) | {h for r in seq for h in r.value})
    rows, ok = [], True
    for h in powers:
        vals = [r.at(h) for r in seq]
        diffs = [abs(a - b) for a, b in zip(vals, vals[1:])]
        gaps = [abs(v - ref.at(h)) for v in vals]
        # observed order from the last two gaps to the extended evaluation
        rate = None
        if len(gaps) >= 2 and gaps[-1] > 0 and gaps[-2] > 0:
            rate = math.log(gaps[-2] / gaps[-1]) / math.log(eps_seq[-2] / eps_seq[-1])
        ok_h = all(d < cauchy_tol for d in diffs) and gaps[-1] < limit_tol
        ok = ok and ok_h
        rows.append(dict(hbar=h, values=vals, successive_differences=diffs, distance_to_extended=gaps,
                         extended=ref.at(h), observed_order=rate, passed=ok_h))
    rep = CheckReport("uv-finiteness", ok)
    rep.details.update(graph=g.gid, eps=eps_seq, lam=lam, table=rows,
                       quadrature_error=max([ref.error_estimate] + [r.error_estimate for r in seq]))
    if not ok:
        rep.flags.append("divergence profile: see table (successive differences and observed order)")
    rep.residuals = [(f"hbar^{r['hbar']}", f"max diff {max(r['successive_differences'], default=0):.3e}") for r in rows]
    return rep


# --- RG consistency ---------------------------------------------------------------------


def rg_consistency_check(
    theory: GraphTheory,
    graphs,
    fields_for,
    make_kernel,
    eps: float,
    lam: float,
    tol: float = 1e-5,
    sq: SectorQuadrature = SectorQuadrature(),
) -> CheckReport:
    """Compare I_lam with hbar log(exp(hbar d_P(eps,lam)) exp(I_eps/hbar)) graph by graph.

    A connected graph of I_lam with E edges carries Pbar(0,lam) = Pbar(0,eps) + P(eps,lam)
    on every edge; the right side produces the same graph once for every labelling of its
    edges by 'inside I_eps' (Pbar(0,eps)) or 'new contraction' (P(eps,lam)).
    """
    if not 0 < eps < lam:
        raise ValidationError("need 0 < eps < lam")
    rows, ok = [], True
    by_order: dict = {}
    for g in graphs:
        fields = fields_for(g)
        if fields is None:
            continue
        E = len(g.edges)
        lhs = amplitude(theory, g, [make_kernel(0.0, lam) for _ in range(E)], fields, sq)
        rhs: dict = {}
        err = lhs.error_estimate
        for labels in itertools.product((0, 1), repeat=E):
            ks = [make_kernel(0.0, eps) if lab == 0 else make_kernel(eps, lam) for lab in labels]
            r = amplitude(theory, g, ks, fields, sq)
            err += r.error_estimate
            for h, v in r.value.items():
                rhs[h] = rhs.get(h, 0.0) + v
        for h in sorted(set(lhs.value) | set(rhs)):
            d = abs(lhs.at(h) - rhs.get(h, 0.0))
            good = d <= tol
            ok = ok and good
            rows.append(dict(graph=g.gid, edges=E, hbar=h, lhs=lhs.at(h), rhs=rhs.get(h, 0.0), diff=d,
                             quadrature_error=err, passed=good))
            acc = by_order.setdefault((E, h), [0.0, 0.0])
            acc[0] += lhs.at(h)
            acc[1] += rhs.get(h, 0.0)
    rep = CheckReport("rg-consistency", ok)
    rep.details.update(eps=eps, lam=lam, table=rows,
                       order_totals=[dict(edges=E, hbar=h, lhs=v[0], rhs=v[1]) for (E, h), v in sorted(by_order.items())])
    rep.residuals = [(r["graph"] + f" hbar^{r['hbar']}", f"{r['diff']:.3e}") for r in rows if not r["passed"]]
    return rep


# --- splitting diagram ------------------------------------------------------------------


@dataclass
class Coform:
    """V*-valued 1-form profile(x) dx x^direction, paired with the 0-form part of a field."""

    direction: int
    profile: object
    support: tuple


def _line_nodes(lo, hi, q=30, breaks=(0.0125, 0.025, 0.05, 0.075, 0.1)):
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi], *np.arange(lo, hi, 0.05)[1:]})
    t, w = _gauss(q)
    xs, ws = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * t)
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _pair_matrix(space):
    deg = np.array(space.degrees)
    return np.where((deg[:, None] * deg[None, :]) % 2 == 1, -1.0, 1.0)


def splitting_diagram_check(
    space: SymplecticSpace,
    chart: HalfLineChart,
    eps: float,
    lam: float,
    lprime,
    coforms,
    field_L: TestField | None = None,
    tol_linear: float = 1e-10,
    tol_quadratic: float = 1e-6,
) -> CheckReport:
    """Both composites of the splitting square on the functional prod_i f_i (rank <= 2).

    Path A: I_{theta_lam} after exp(hbar d_P(eps,lam)).
    Path B: e^{-I(alpha)/hbar} (1 (x) e^{hbar d_P(eps,lam)}) e^{I(alpha)/hbar} after I_{theta_eps},
    with the alpha contractions computed from P(eps,lam)(0, x) by t-quadrature.
    Values are hbar-series on the pair (l', field_L).
    """
    if not 0 < eps < lam:
        raise ValidationError("need 0 < eps < lam")
    if len(coforms) > 2:
        raise ValidationError("functionals of rank at most 2 are supported")
    sgn = _pair_matrix(space)
    av = alpha_covector(space, lprime)

    def nodes(c):
        return _line_nodes(max(0.0, c.support[0]), c.support[1])

    def f_on_theta(c, t):
        x, w = nodes(c)
        th = np.array([splitting_theta(chart, space, t, lprime, xi)[c.direction] for xi in x])
        return float(np.sum(w * c.profile(x) * th))

    def f_on_alpha_route(c):
        x, w = nodes(c)
        m = chart.assemble(chart.p_scalar_tgauss(eps, lam, 0.0, x), chart.p_scalar_tgauss(eps, lam, x, 0.0))
        vals = 2.0 * np.einsum("i,nij->nj", av, m)[:, c.direction]
        return float(np.sum(w * c.profile(x) * vals))

    def f_on_field(c):
        if field_L is None or field_L.form != 0 or field_L.direction != c.direction:
            return 0.0
        x, w = nodes(c)
        return float(np.sum(w * c.profile(x) * field_L.profile(x)))

    def contraction(c1, c2, split_scales=False):
        x1, w1 = nodes(c1)
        x2, w2 = nodes(c2)
        X, Y = np.meshgrid(x1, x2, indexing="ij")
        if split_scales:
            # P(eps, lam) = Pbar(0, lam) - Pbar(0, eps); the branch only matters on x = y
            m = chart.propagator_matrix(0.0, lam, X, Y, Branch.C1) - chart.propagator_matrix(0.0, eps, X, Y, Branch.C1)
        else:
            m = chart.propagator_matrix(eps, lam, X, Y)
        s = 2.0 * sgn[c1.direction, c2.direction] * m[..., c1.direction, c2.direction]
        return float(np.einsum("i,j,ij->", w1 * c1.profile(x1), w2 * c2.profile(x2), s))

    m00 = chart.propagator_matrix(eps, lam, 0.0, 0.0)
    alpha_alpha = float(av @ m00 @ av)  # coefficient of hbar^{-1}
    A_parts = [f_on_theta(c, lam) + f_on_field(c) for c in coforms]
    B_parts = [f_on_theta(c, eps) + f_on_alpha_route(c) + f_on_field(c) for c in coforms]
    A = {0: float(np.prod(A_parts)) if coforms else 1.0}
    B = {0: float(np.prod(B_parts)) if coforms else 1.0, -1: alpha_alpha}
    if len(coforms) == 2:
        A[1] = contraction(*coforms)
        B[1] = contraction(*coforms, split_scales=True)
    tol = tol_quadratic if len(coforms) == 2 else tol_linear
    rows, ok = [], True
    for h in sorted(set(A) | set(B)):
        d = abs(A.get(h, 0.0) - B.get(h, 0.0))
        good = d <= tol
        ok = ok and good
        rows.append(dict(hbar=h, path_A=A.get(h, 0.0), path_B=B.get(h, 0.0), diff=d, passed=good))
    rep = CheckReport("splitting-diagram", ok)
    rep.details.update(eps=eps, lam=lam, rank=len(coforms), table=rows,
                       per_term=dict(theta_lam=A_parts, theta_eps_plus_alpha=B_parts, alpha_alpha=alpha_alpha))
    rep.residuals = [(f"hbar^{r['hbar']}", f"{r['diff']:.3e}") for r in rows if not r["passed"]]
    return rep


# --- Stokes anomaly probe ---------------------------------------------------------------


def _evaluate_on_directions(space, series: Series, directions):
    """Exact value of the length-r part of ``series`` on 0-form fields along ``directions``."""
    r = len(directions)
    g = GraphSpec((("boundary", 0, r),), (), (0,) * r)
    co = graph_coefficients(space, g, [series], [], [0] * r)
    out: dict = {}
    for (legs, _, h), c in co.items():
        if legs == tuple(directions):
            out[h] = out.get(h, 0) + c
    return out


def _project(M, Kd):
    a = np.einsum("...ij,ij->...", M, Kd) / np.sum(Kd * Kd)
    res = np.abs(M - np.asarray(a)[..., None, None] * Kd).max()
    return a, res


class _ProbeGeometry:
    def __init__(self, chart=None, ik=None):
        self.chart, self.ik = chart, ik
        self.domain = (0.0, math.inf) if ik is None else (0.0, 1.0)

    def avg_diag(self, t, x):
        src = self.chart if self.ik is None else self.ik
        if self.ik is None:
            m1 = src.propagator_matrix(0.0, t, x, x, Branch.C1)
            m2 = src.propagator_matrix(0.0, t, x, x, Branch.C2)
        else:
            m1 = src.propagator_matrix(0.0, t, x, x, Branch.C1, check=False)
            m2 = src.propagator_matrix(0.0, t, x, x, Branch.C2, check=False)
        return 0.5 * (m1 + m2)

    def kernel_diag(self, t, x):
        mdx, mdy = (self.chart if self.ik is None else self.ik).bv_kernel_matrices(t, x, x)
        return mdx + mdy


def anomaly_probe(
    ctx: BoundaryAlgebraContext,
    I: Series,
    fields,
    t: float,
    chart: HalfLineChart | None = None,
    interval: tuple | None = None,
    tol: float = 1e-5,
    max_contractions: int = 6,
) -> CheckReport:
    """One-bulk-vertex order of (hbar d + hbar^2 d_{K_t}) e^{I_t/hbar} on 0-form test fields.

    At this order I_t = int e^{hbar d_{Pbar(x,x)}} I with Pbar on the diagonal taken as the
    branch average, a(x) (K_+ - K_-).  The numerical side integrates the d-term and the
    K_t-term over the domain; the algebraic side evaluates the Weyl-ordered interaction on
    the boundary values of the fields (right action at 0, left action at 1 for the interval).
    ``interval``: (IntervalKernels, ctx1_left) for the unit interval.
    """
    if any(f.form != 0 for f in fields):
        raise ValidationError("the probe evaluates on 0-form fields")
    space = ctx.space
    geom = _ProbeGeometry(chart, interval[0] if interval else None)
    lo_dom, hi_dom = geom.domain
    dirs = [f.direction for f in fields]
    # boundary conditions of the restricted field space
    ends = [(0.0, space)] + ([(1.0, interval[1].space)] if interval else [])
    for f in fields:
        for pt, sp in ends:
            if abs(float(f.profile(pt))) > 0 and sp.sides[f.direction] != ("L" if pt == 0.0 else "Lprime"):
                raise ValidationError(f"field {f.name} violates the boundary condition at {pt}")
    Kd_exact = space.K_plus.plus(space.K_minus.scaled(-1), parity="symmetric")
    Kd = np.array([[float(v) for v in row] for row in Kd_exact.matrix()])
    # C_n = d_{K_+ - K_-}^n I / n!
    Cs = [I]
    while len(Cs) <= max_contractions:
        nxt = contract(Kd_exact, Cs[-1], weight=2, hbar_per_pair=1).scale(Fraction(1, len(Cs)))
        if nxt.is_zero():
            break
        Cs.append(nxt)
    W = [_evaluate_on_directions(space, C, dirs) for C in Cs]

    def prod(x):
        out = np.ones_like(np.asarray(x, dtype=float))
        for f in fields:
            out = out * f.profile(x)
        return out

    def dprod(x):
        x = np.asarray(x, dtype=float)
        tot = np.zeros_like(x)
        for i, f in enumerate(fields):
            term = f.profile.deriv(x)
            for j, h in enumerate(fields):
                if j != i:
                    term = term * h.profile(x)
            tot += term
        return tot

    lo = max(lo_dom, min(f.support[0] for f in fields))
    hi = min(hi_dom, max(f.support[1] for f in fields))
    x, w = _line_nodes(lo, hi, q=40, breaks=(0.0125, 0.025, 0.05, 0.075, 0.1, 0.9, 0.925, 0.95, 0.975))
    a, res_a = _project(np.array([geom.avg_diag(t, xi) for xi in x]), Kd)
    k, res_k = _project(np.array([geom.kernel_diag(t, xi) for xi in x]), Kd)
    P, dP = prod(x), dprod(x)
    numeric: dict = {}
    for n, Wn in enumerate(W):
        integrand = a**n * dP + (n * a ** (n - 1) * k * P if n else 0.0)
        val = float(np.sum(w * integrand))
        for h, c in Wn.items():
            numeric[h] = numeric.get(h, 0.0) + float(c) * val
    # algebraic side from the Weyl actions
    faces = {}
    right0 = weyl_right(ctx, ctx.one(), own(ctx, I))
    faces[0.0] = (-1, _evaluate_on_directions(space, right0, dirs), float(prod(0.0)))
    if interval:
        ctx1_left = interval[1]
        left1 = weyl_left(ctx1_left, own(ctx1_left, I), ctx1_left.one())
        faces[1.0] = (1, _evaluate_on_directions(space, left1, dirs), float(prod(1.0)))
    algebraic: dict = {}
    for pt, (orient, Wf, pv) in faces.items():
        for h, c in Wf.items():
            algebraic[h] = algebraic.get(h, 0.0) + orient * float(c) * pv
    rows, ok = [], True
    for h in sorted(set(numeric) | set(algebraic)):
        d = abs(numeric.get(h, 0.0) - algebraic.get(h, 0.0))
        good = d <= tol
        ok = ok and good
        rows.append(dict(hbar=h, numeric=numeric.get(h, 0.0), algebraic=algebraic.get(h, 0.0), diff=d, passed=good))
    rep = CheckReport("anomaly-probe", ok)
    rep.details.update(
        t=t,
        table=rows,
        faces={str(pt): dict(orientation=o, coefficients={h: str(c) for h, c in Wf.items()}, field_product=pv)
               for pt, (o, Wf, pv) in faces.items()},
        diagonal_projection_residual=max(res_a, res_k),
        boundary_average=float(geom.avg_diag(t, 0.0).ravel() @ Kd.ravel() / np.sum(Kd * Kd)),
    )
    rep.residuals = [(f"hbar^{r['hbar']}", f"{r['diff']:.3e}") for r in rows if not r["passed"]]
    return rep
