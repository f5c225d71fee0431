"""Command-line front end: theory documents in, report documents out.

Exit codes: 0 every verdict passed, 1 some verdict failed, 2 the input was rejected.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import re
import sys
import time
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .bf_theory import (
    BF_CAPS,
    BUILTIN,
    LieAlgebraData,
    bf_anomaly_report,
    build_bf_theory,
    builtin_algebra,
    check_jacobi,
    unimodularity_vector,
)
from .bvbfv_check import (
    CheckReport,
    HalfLineTheory,
    IntervalTheory,
    check_flatness,
    check_mqme,
    check_mqme_interval,
    check_qme_halfline,
    check_qme_interval,
)
from .graded_core import Generator, Series, SymplecticSpace, TruncationCaps, ValidationError
from .halfline_kernels import (
    ALTERNATE_CUTOFF,
    DEFAULT_CUTOFF,
    Branch,
    CutoffFunction,
    HalfLineChart,
    IntervalKernels,
    KernelDomainError,
    kernel_identity_battery,
)
from .weyl_moyal import BoundaryAlgebraContext

SCHEMA_VERSION = 1
CAPS_ENV = "TQMBV_CAPS"
DEFAULT_SEED = 20240611
BUNDLED = ("bf_sl2", "bf_nonunimodular")


class SchemaError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# --- rationals and line anchoring ------------------------------------------------------

_RATIONAL = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")


def parse_rational(value, where="", text=None) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise SchemaError(f"{where}: rationals must be strings 'p/q' or integers, got {value!r}", _line_of(text, value))
    if isinstance(value, int):
        return Fraction(value)
    if not isinstance(value, str):
        raise SchemaError(f"{where}: expected a rational string, got {type(value).__name__}", _line_of(text, value))
    m = _RATIONAL.match(value)
    if not m:
        raise SchemaError(f"{where}: malformed rational {value!r}", _line_of(text, value))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise SchemaError(f"{where}: zero denominator in {value!r}", _line_of(text, value))
    return Fraction(int(m.group(1)), den)


def format_rational(q: Fraction) -> str:
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _line_of(text, value):
    if text is None:
        return None
    needle = json.dumps(value) if not isinstance(value, str) else '"' + value + '"'
    idx = text.find(needle)
    return None if idx < 0 else text.count("\n", 0, idx) + 1


def _need(obj, key, kind, where, text):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing key {key!r}", _line_of(text, where.split(".")[-1]) if text else None)
    v = obj[key]
    if not isinstance(v, kind):
        raise SchemaError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}", _line_of(text, key))
    return v


# --- theory documents ------------------------------------------------------------------


def caps_from_env(default: TruncationCaps = BF_CAPS) -> TruncationCaps:
    raw = os.environ.get(CAPS_ENV)
    if not raw:
        return default
    try:
        a, b, c = (int(p) for p in raw.split(","))
    except ValueError:
        raise ValidationError(f"{CAPS_ENV} must look like 'max_hbar,max_degree,max_bracket_depth', got {raw!r}") from None
    return TruncationCaps(a, b, c)


class TheoryDocument:
    """Parsed theory description: one symplectic space with one or two polarizations."""

    def __init__(self, name, spaces, omega, interaction, boundary, bfv, caps, numerics):
        self.name = name
        self.spaces = spaces  # polarization index -> SymplecticSpace
        self.omega = omega
        self.interaction = interaction  # list of (coeff, hbar, names)
        self.boundary = boundary  # label -> list of terms
        self.bfv = bfv
        self.caps = caps
        self.numerics = numerics

    # construction from text
    @classmethod
    def parse(cls, text: str, caps_default: TruncationCaps | None = None) -> "TheoryDocument":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc.msg}", exc.lineno) from None
        if not isinstance(doc, dict):
            raise SchemaError("top level must be an object", 1)
        ver = doc.get("schema_version")
        if ver != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema_version {ver!r} (expected {SCHEMA_VERSION})", _line_of(text, "schema_version"))
        space = _need(doc, "space", dict, "document", text)
        gens = _need(space, "generators", list, "space", text)
        if not gens:
            raise SchemaError("space.generators is empty", _line_of(text, "generators"))
        n_pol = None
        rows = []
        for i, g in enumerate(gens):
            where = f"space.generators[{i}]"
            name = _need(g, "name", str, where, text)
            deg = _need(g, "degree", int, where, text)
            dual = g.get("dual", name + "*")
            sides = _need(g, "sides", list, where, text)
            if n_pol is None:
                n_pol = len(sides)
            if len(sides) != n_pol or n_pol not in (1, 2):
                raise SchemaError(f"{where}: every generator needs the same number (1 or 2) of sides", _line_of(text, name))
            for s in sides:
                if s not in ("L", "Lprime"):
                    raise SchemaError(f"{where}: side must be 'L' or 'Lprime', got {s!r}", _line_of(text, name))
            rows.append((name, deg, dual, sides))
        names = {r[0]: i for i, r in enumerate(rows)}
        omega = {}
        for k, entry in enumerate(_need(space, "omega", list, "space", text)):
            where = f"space.omega[{k}]"
            a, b = _need(entry, "row", str, where, text), _need(entry, "col", str, where, text)
            for nm in (a, b):
                if nm not in names:
                    raise SchemaError(f"{where}: unknown generator {nm!r}", _line_of(text, nm))
            omega[(names[a], names[b])] = parse_rational(entry.get("value"), where + ".value", text)
        spaces = {}
        for p in range(n_pol):
            g_list = [Generator(nm, deg, sides[p], i, dual) for i, (nm, deg, dual, sides) in enumerate(rows)]
            try:
                spaces[p] = SymplecticSpace(g_list, omega)
            except ValidationError as exc:
                raise SchemaError(f"space: {exc}", _line_of(text, "omega")) from None
        duals = {r[2] for r in rows}

        def terms(lst, where):
            if not isinstance(lst, list):
                raise SchemaError(f"{where}: expected a list of terms", _line_of(text, where.split(".")[-1]))
            out = []
            for k, t in enumerate(lst):
                w = f"{where}[{k}]"
                c = parse_rational(t.get("coeff") if isinstance(t, dict) else None, w + ".coeff", text)
                h = t.get("hbar", 0)
                if not isinstance(h, int) or isinstance(h, bool) or h < 0:
                    raise SchemaError(f"{w}.hbar: must be a natural number", _line_of(text, "hbar"))
                mono = _need(t, "monomial", list, w, text)
                for nm in mono:
                    if nm not in duals:
                        raise SchemaError(f"{w}: unknown dual generator {nm!r}", _line_of(text, nm))
                out.append((c, h, list(mono)))
            return out

        interaction = terms(_need(doc, "interaction", list, "document", text), "interaction")
        boundary = {k: terms(v, f"boundary_terms.{k}") for k, v in doc.get("boundary_terms", {}).items()}
        bfv = {k: terms(v, f"bfv.{k}") for k, v in doc.get("bfv", {}).items()}
        for label in list(boundary) + list(bfv):
            if label not in ("J", "J0", "J1", "H", "H0", "H1"):
                raise SchemaError(f"unknown boundary/bfv label {label!r}", _line_of(text, label))
        cj = doc.get("caps")
        if cj is None:
            caps = caps_default or caps_from_env()
        else:
            try:
                caps = TruncationCaps(int(cj["max_hbar"]), int(cj["max_degree"]), int(cj["max_bracket_depth"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"caps: {exc}", _line_of(text, "caps")) from None
        numerics = doc.get("numerics", {})
        if not isinstance(numerics, dict):
            raise SchemaError("numerics must be an object", _line_of(text, "numerics"))
        return cls(doc.get("name", ""), spaces, omega, interaction, boundary, bfv, caps, numerics)

    # views
    def _series(self, ctx, items):
        return ctx.series(items) if items else ctx.zero()

    def _get(self, table, *labels):
        for lab in labels:
            if lab in table:
                return table[lab]
        return None

    def halfline(self, polarization: int = 0) -> HalfLineTheory:
        ctx = BoundaryAlgebraContext(self.spaces[polarization], self.caps)
        j_lab = ("J", "J0") if polarization == 0 else ("J1",)
        h_lab = ("H", "H0") if polarization == 0 else ("H1",)
        J = self._get(self.boundary, *j_lab)
        H = self._get(self.bfv, *h_lab)
        return HalfLineTheory(
            ctx,
            self._series(ctx, self.interaction),
            self._series(ctx, J) if J is not None else None,
            self._series(ctx, H) if H is not None else None,
        )

    def interval(self) -> IntervalTheory:
        if len(self.spaces) != 2:
            raise ValidationError("interval geometry needs two polarizations (sides per generator)")
        c0 = BoundaryAlgebraContext(self.spaces[0], self.caps)
        c1 = BoundaryAlgebraContext(self.spaces[1], self.caps)
        J0 = self._get(self.boundary, "J0", "J")
        J1 = self._get(self.boundary, "J1")
        H0 = self._get(self.bfv, "H0", "H")
        H1 = self._get(self.bfv, "H1")
        return IntervalTheory(
            c0,
            c1,
            self._series(c0, self.interaction),
            self._series(c0, J0) if J0 is not None else None,
            self._series(c1, J1) if J1 is not None else None,
            self._series(c0, H0) if H0 is not None else None,
            self._series(c1, H1) if H1 is not None else None,
        )

    # canonical serialization
    def to_json(self) -> dict:
        sp = self.spaces[0]
        n_pol = len(self.spaces)
        gens = [
            dict(name=g.name, degree=g.degree, dual=g.dual_name, sides=[self.spaces[p].sides[i] for p in range(n_pol)])
            for i, g in enumerate(sp.generators)
        ]
        omega = [
            dict(row=sp.generators[a].name, col=sp.generators[b].name, value=format_rational(v))
            for (a, b), v in sorted(self.omega.items())
            if v
        ]
        ctx = BoundaryAlgebraContext(sp, self.caps)

        def canon(items):
            return series_terms(self._series(ctx, items))

        out = dict(
            schema_version=SCHEMA_VERSION,
            name=self.name,
            space=dict(generators=gens, omega=omega),
            interaction=canon(self.interaction),
            caps=dict(max_hbar=self.caps.max_hbar, max_degree=self.caps.max_degree,
                      max_bracket_depth=self.caps.max_bracket_depth),
        )
        if self.boundary:
            out["boundary_terms"] = {k: canon(v) for k, v in sorted(self.boundary.items())}
        if self.bfv:
            out["bfv"] = {k: canon(v) for k, v in sorted(self.bfv.items())}
        if self.numerics:
            out["numerics"] = self.numerics
        return out


def series_terms(s: Series) -> list:
    return [
        dict(coeff=format_rational(c), hbar=h, monomial=s.space.describe_word(w))
        for (h, w), c in s.sorted_terms()
    ]


def theory_document_for_bf(name: str, g: LieAlgebraData, caps: TruncationCaps = BF_CAPS) -> dict:
    """Document for the BF interval theory of ``g`` with H0 = -I, H1 = I and no boundary terms."""
    th = build_bf_theory(g, caps)
    sp0, sp1 = th.ctx0.space, th.ctx1.space
    gens = [dict(name=x.name, degree=x.degree, dual=x.dual_name, sides=[sp0.sides[i], sp1.sides[i]])
            for i, x in enumerate(sp0.generators)]
    omega = [dict(row=sp0.generators[a].name, col=sp0.generators[b].name, value=format_rational(v))
             for (a, b), v in sorted(sp0.omega.items())]
    return dict(
        schema_version=SCHEMA_VERSION,
        name=name,
        space=dict(generators=gens, omega=omega),
        interaction=series_terms(th.I_boundary),
        bfv=dict(H0=series_terms(th.H0), H1=series_terms(th.H1)),
        caps=dict(max_hbar=caps.max_hbar, max_degree=caps.max_degree, max_bracket_depth=caps.max_bracket_depth),
        numerics=dict(cutoff=[DEFAULT_CUTOFF.r1, DEFAULT_CUTOFF.r2]),
    )


def bundled_text(name: str) -> str:
    return resources.files("tqmbv").joinpath("data", f"{name}.json").read_text()


def load_document_text(path: str) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text()
    stem = p.stem if p.suffix == ".json" else p.name
    if stem in BUNDLED:
        return bundled_text(stem)
    raise ValidationError(f"no such theory document: {path}")


# --- report documents -----------------------------------------------------------------


def _plain(x):
    if isinstance(x, Series):
        return series_terms(x)
    if isinstance(x, Fraction):
        return format_rational(x)
    if isinstance(x, CheckReport):
        return report_json(x)
    if isinstance(x, Enum):
        return x.value
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


def report_json(rep: CheckReport) -> dict:
    res = []
    for label, r in rep.residuals:
        if isinstance(r, Series):
            res.append(dict(label=label, terms=series_terms(r), zero=r.is_zero()))
        else:
            res.append(dict(label=label, value=_plain(r)))
    return dict(name=rep.name, passed=bool(rep.passed), residuals=res, flags=list(rep.flags), details=_plain(rep.details))


def dumps(obj, indent=2, _level=0) -> str:
    """JSON with sorted keys and floats written with 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return json.dumps(str(obj))
        return format(obj, ".17g") if obj != int(obj) or abs(obj) >= 1e16 else format(obj, ".1f")
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def make_report(command, reports, tolerances=None, extra=None) -> dict:
    checks = [report_json(r) for r in reports]
    out = dict(
        schema_version=SCHEMA_VERSION,
        engine_version=__version__,
        command=command,
        verdict="pass" if all(c["passed"] for c in checks) else "fail",
        checks=checks,
        tolerances=tolerances or {},
        truncation_flags=sorted({f for r in reports for f in r.flags if "truncat" in f}),
    )
    if extra:
        out.update(extra)
    return out


def exit_code(report_doc: dict) -> int:
    return 0 if report_doc["verdict"] == "pass" else 1


def _emit(doc, out_path):
    text = dumps(_plain(doc)) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


# --- commands ------------------------------------------------------------------------


def cmd_check_mqme(args):
    doc = TheoryDocument.parse(load_document_text(args.document))
    if args.qme:
        return cmd_check_qme(args, doc)
    if args.geometry == "interval":
        rep = check_mqme_interval(doc.interval())
    else:
        rep = check_mqme(doc.halfline(0))
    return make_report("check-mqme", [rep], extra=dict(geometry=args.geometry, theory=doc.name))


def cmd_check_qme(args, doc=None):
    doc = doc or TheoryDocument.parse(load_document_text(args.document))
    if args.geometry == "interval":
        rep = check_qme_interval(doc.interval())
    else:
        rep = check_qme_halfline(doc.halfline(0))
    return make_report("check-qme", [rep], extra=dict(geometry=args.geometry, theory=doc.name))


def load_constants(path: str) -> LieAlgebraData:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    dim = _need(doc, "dim", int, "constants", text)
    f = {}
    for k, e in enumerate(_need(doc, "brackets", list, "constants", text)):
        where = f"brackets[{k}]"
        a, b, c = (_need(e, key, int, where, text) for key in ("a", "b", "c"))
        v = parse_rational(e.get("value"), where + ".value", text)
        for key, val in (((a, b, c), v), ((b, a, c), -v)):
            if key in f and f[key] != val:
                raise SchemaError(f"{where}: conflicts with an earlier entry", _line_of(text, "brackets"))
            f[key] = val
    return LieAlgebraData(doc.get("name", Path(path).stem), dim, f)


def random_constants(dim: int, seed: int) -> LieAlgebraData:
    rng = random.Random(seed)
    f = {}
    for a in range(dim):
        for b in range(a + 1, dim):
            for c in range(dim):
                v = rng.randint(-2, 2)
                if v:
                    f[(a, b, c)] = Fraction(v)
                    f[(b, a, c)] = -Fraction(v)
    return LieAlgebraData(f"random{dim}-seed{seed}", dim, f)


def bf_battery(g: LieAlgebraData):
    jac = check_jacobi(g)
    reports = [jac]
    if not jac.passed:
        return reports, dict(algebra=g.name, unimodular=None)
    th = build_bf_theory(g)
    reports.append(check_flatness(th.ctx0, th.I_boundary))
    reports.append(check_mqme_interval(th))
    reports.append(bf_anomaly_report(g))
    uni = not any(unimodularity_vector(g))
    return reports, dict(algebra=g.name, unimodular=uni, trace_of_ad=[format_rational(v) for v in unimodularity_vector(g)])


def cmd_bf(args):
    if args.constants:
        g = load_constants(args.constants)
    elif args.random_constants:
        g = random_constants(args.random_constants, args.seed)
    else:
        g = builtin_algebra(args.algebra)
    reports, extra = bf_battery(g)
    return make_report("bf", reports, extra=extra)


def _parse_cutoff(vals):
    if not vals:
        return DEFAULT_CUTOFF
    try:
        return CutoffFunction(float(vals[0]), float(vals[1]))
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def cmd_propagator_verify(args):
    g = builtin_algebra(args.algebra)
    th = build_bf_theory(g)
    cutoff = _parse_cutoff(args.cutoff)
    lams = tuple(args.lam) if args.lam else (0.1, 1.0, 10.0)
    items = kernel_identity_battery(th.ctx0.space, cutoff, lams=lams, space1=th.ctx1.space if args.interval else None)
    tol = args.tol
    rows, flags, ok = [], [], True
    for it in items:
        v = it.verdict(tol)
        ok = ok and v != "fail"
        if v == "limited":
            flags.append(f"{it.label}: residual {it.residual:.3e} above tol {tol:.1e}, within the {it.route} floor {it.floor:.1e}")
        rows.append(dict(label=it.label, residual=it.residual, floor=it.floor, route=it.route, verdict=v))
    rep = CheckReport("kernel-identities", ok, flags=flags)
    rep.details["items"] = rows
    rep.residuals = [(r["label"], f"{r['residual']:.3e}") for r in rows if r["verdict"] == "fail"]
    extra = dict(cutoff=[cutoff.r1, cutoff.r2])
    if args.grid:
        ch = HalfLineChart.from_space(th.ctx0.space, cutoff)
        xs = np.linspace(0.0, args.grid_max, args.grid)
        lam = lams[0]
        table = []
        for x in xs:
            m1 = ch.propagator_matrix(0.0, lam, 0.0, float(x), Branch.C1)
            table.append(dict(x=float(x), p_xy=float(ch.p_scalar(0.0, lam, 0.0, x, -1)),
                              p_yx=float(ch.p_scalar(0.0, lam, x, 0.0, 1)), pbar_C1_0x=m1))
        extra["table"] = dict(lam=lam, rows=table)
    return make_report("propagator-verify", [rep], tolerances=dict(tol=tol), extra=extra)


def _parse_caps_triple(s):
    try:
        b, bd, lp = (int(p) for p in s.split(","))
    except ValueError:
        raise ValidationError(f"--caps must look like 'bulk,boundary,loops', got {s!r}") from None
    if b > 3 or bd > 2 or lp > 1 or min(b, bd, lp) < 0:
        raise ValidationError("graph caps are limited to 3 bulk, 2 boundary, 1 loop")
    return b, bd, lp


def cmd_rg_flow(args):
    from . import rg_flow as rf

    g = builtin_algebra(args.algebra)
    th = build_bf_theory(g)
    sp0, sp1 = th.ctx0.space, th.ctx1.space
    max_bulk, _, max_loops = _parse_caps_triple(args.caps)
    batteries = set(args.battery.split(",")) if args.battery != "all" else {"uv", "rg", "diagram"}
    unknown = batteries - {"uv", "rg", "diagram"}
    if unknown:
        raise ValidationError(f"unknown battery {sorted(unknown)}")
    reports = []
    if args.geometry == "interval":
        ik = IntervalKernels.from_spaces(sp0, sp1)
        gt = rf.GraphTheory(sp0, th.I_boundary, domain=(0.0, 1.0))
        make_kernel = lambda e, l: rf.IntervalKernel(sp0, sp1, ik, e, l)
    else:
        ch = HalfLineChart.from_space(sp0)
        gt = rf.GraphTheory(sp0, th.I_boundary)
        make_kernel = lambda e, l: rf.HalfLineKernel(sp0, ch, e, l)
    graphs = rf.enumerate_graphs([3], max_bulk=max_bulk, max_loops=max_loops, max_edges=2)
    fields_for = lambda gr: rf.bind_preset(gt, gr, args.fields)
    if "uv" in batteries:
        for gr in graphs:
            if not gr.edges or len(gr.bulk) > 2:
                continue
            f = fields_for(gr)
            if f is None:
                continue
            reports.append(rf.uv_finiteness_check(gt, gr, f, make_kernel, args.lam, tuple(args.eps_seq)))
    if "rg" in batteries:
        reports.append(rf.rg_consistency_check(gt, graphs, fields_for, make_kernel, args.eps, args.lam))
    if "diagram" in batteries:
        reports.extend(diagram_battery(sp0, [(args.eps, args.lam)]))
    return make_report("rg-flow", reports, extra=dict(algebra=g.name, geometry=args.geometry, fields=args.fields))


def diagram_battery(space, scales):
    from . import rg_flow as rf

    ch = HalfLineChart.from_space(space)
    n = space.dim // 2
    lp = np.zeros(space.dim)
    lp[n] = 1.0
    lp[-1] = 0.5
    b1, b2 = rf.PolyBump(0.05, 0.1), rf.PolyBump(0.08, 0.1)
    c1 = rf.Coform(n, b1, b1.support)
    c2 = rf.Coform(0, b2, b2.support)
    field_L = rf.TestField("phi_L", 0, 0, rf.PolyBump(0.1, 0.2))
    out = []
    for eps, lam in scales:
        for cs in ([], [c1], [c1, c2]):
            r = rf.splitting_diagram_check(space, ch, eps, lam, lp, cs, field_L)
            r.name = f"splitting-diagram rank {len(cs)} eps={eps} lam={lam}"
            out.append(r)
    return out


def anomaly_battery(g: LieAlgebraData, side: str, t: float):
    """B side: half-line at the eps polarization; A side: the interval end at 1 (and the
    half-line at the eta polarization, where the orientation of the boundary is reversed)."""
    from . import rg_flow as rf

    th = build_bf_theory(g)
    n = g.dim
    out = []
    if side in ("B", "both"):
        ch = HalfLineChart.from_space(th.ctx0.space)
        for b in range(n):
            for fields in (
                [rf.TestField(f"eta{b}", n + b, 0, rf.PolyBump(0.06, 0.06))],
                [rf.TestField(f"eps{b}", b, 0, rf.PolyBump(0.0, 0.09))],
            ):
                r = rf.anomaly_probe(th.ctx0, th.I_boundary, fields, t, chart=ch)
                r.name = f"anomaly-probe B-side {fields[0].name}"
                out.append(r)
    if side in ("A", "both"):
        ik = IntervalKernels.from_spaces(th.ctx0.space, th.ctx1.space)
        for b in range(n):
            fields = [rf.TestField(f"eta{b}", n + b, 0, rf.PolyBump(1.0, 0.08))]
            r = rf.anomaly_probe(th.ctx0, th.I_boundary, fields, t, interval=(ik, th.ctx1_left))
            r.name = f"anomaly-probe A-side interval {fields[0].name}"
            out.append(r)
    return out


def cmd_anomaly_probe(args):
    g = builtin_algebra(args.algebra)
    reports = anomaly_battery(g, args.side, args.t)
    closed = [format_rational(-v / 2) for v in unimodularity_vector(g)]
    return make_report("anomaly-probe", reports, tolerances=dict(tol=1e-5),
                       extra=dict(algebra=g.name, closed_form_A_coefficients=closed))


def cmd_selftest(args):
    from .bvbfv_check import bfv_nilpotency
    from .weyl_moyal import moyal

    reports = []
    for name in ("sl2", "affine2"):
        reps, _ = bf_battery(builtin_algebra(name))
        reports.extend(reps)
    th = build_bf_theory(builtin_algebra("sl2"))
    reports.append(bfv_nilpotency(th.ctx0, th.H0))
    # associativity on seeded random series
    rng = random.Random(args.seed)
    ctx = th.ctx0
    duals = [x.dual_name for x in ctx.space.generators]
    bad = 0
    for _ in range(10):
        xs = [ctx.series([(Fraction(rng.randint(-3, 3), rng.randint(1, 3)), rng.randint(0, 1),
                           rng.sample(duals, rng.randint(0, 2))) for _ in range(3)]) for _ in range(3)]
        a = moyal(ctx, moyal(ctx, xs[0], xs[1]), xs[2])
        b = moyal(ctx, xs[0], moyal(ctx, xs[1], xs[2]))
        bad += a != b
    reports.append(CheckReport("moyal-associativity (10 seeded triples)", bad == 0, details=dict(seed=args.seed)))
    items = kernel_identity_battery(th.ctx0.space, lams=(1.0,), xs=(0.0, 0.3), fd_scales=((0.01, 1.0),),
                                    fd_points=((0.3, 0.32),))
    reports.append(CheckReport("kernel-identities (subset)", all(i.verdict(1e-8) != "fail" for i in items),
                               details=dict(items=[dict(label=i.label, residual=i.residual) for i in items])))
    return make_report("selftest", reports)


# --- entry point --------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="tqmbv", description="Exact and numerical BV-BFV checks for topological quantum mechanics.")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check-mqme", help="modified master equation for a theory document")
    s.add_argument("document", help="path, or a bundled name: " + ", ".join(BUNDLED))
    s.add_argument("--geometry", choices=("halfline", "interval"), default="interval")
    s.add_argument("--qme", action="store_true", help="check the QME on the restricted field space instead")
    s.set_defaults(func=cmd_check_mqme)

    s = sub.add_parser("check-qme", help="QME on the restricted field space")
    s.add_argument("document")
    s.add_argument("--geometry", choices=("halfline", "interval"), default="interval")
    s.set_defaults(func=cmd_check_qme)

    s = sub.add_parser("bf", help="BF theory battery for a Lie algebra")
    grp = s.add_mutually_exclusive_group()
    grp.add_argument("--algebra", default="sl2", choices=sorted(BUILTIN))
    grp.add_argument("--constants", help="JSON file with dim and brackets [{a, b, c, value}]")
    grp.add_argument("--random-constants", type=int, metavar="DIM")
    s.set_defaults(func=cmd_bf)

    s = sub.add_parser("propagator-verify", help="heat-kernel, propagator and splitting identities")
    s.add_argument("--lambda", dest="lam", type=float, action="append")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--cutoff", nargs=2, metavar=("R1", "R2"))
    s.add_argument("--grid", type=int, default=0, help="tabulate Pbar(0, lambda)|C1(0, x) on this many points")
    s.add_argument("--grid-max", type=float, default=1.0)
    s.add_argument("--algebra", default="sl2", choices=sorted(BUILTIN))
    s.add_argument("--no-interval", dest="interval", action="store_false")
    s.set_defaults(func=cmd_propagator_verify)

    s = sub.add_parser("rg-flow", help="UV finiteness, RG consistency and splitting-diagram batteries")
    s.add_argument("--eps", type=float, default=0.01)
    s.add_argument("--lambda", dest="lam", type=float, default=0.1)
    s.add_argument("--eps-seq", type=float, nargs="+", default=[1e-3, 1e-4, 1e-5])
    s.add_argument("--caps", default="2,0,1", help="bulk,boundary,loops")
    s.add_argument("--fields", default="overlap", choices=("overlap", "disjoint"))
    s.add_argument("--geometry", choices=("halfline", "interval"), default="interval")
    s.add_argument("--battery", default="rg", help="comma list of uv, rg, diagram, or 'all'")
    s.add_argument("--algebra", default="sl2", choices=sorted(BUILTIN))
    s.set_defaults(func=cmd_rg_flow)

    s = sub.add_parser("anomaly-probe", help="one-vertex Stokes probe against the Weyl-ordered boundary terms")
    s.add_argument("--algebra", default="affine2", choices=sorted(BUILTIN))
    s.add_argument("--side", choices=("A", "B", "both"), default="both")
    s.add_argument("--t", type=float, default=0.05)
    s.set_defaults(func=cmd_anomaly_probe)

    s = sub.add_parser("selftest", help="quick end-to-end smoke run")
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        t0 = time.perf_counter()
        doc = args.func(args)
        doc["elapsed_seconds"] = round(time.perf_counter() - t0, 3)
    except (ValidationError, KernelDomainError, OSError) as exc:
        err = dict(schema_version=SCHEMA_VERSION, engine_version=__version__, command=args.command,
                   verdict="error", error=str(exc))
        if isinstance(exc, SchemaError) and exc.line:
            err["line"] = exc.line
        _emit(err, args.out)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(doc, args.out)
    return exit_code(doc)


if __name__ == "__main__":
    sys.exit(main())
