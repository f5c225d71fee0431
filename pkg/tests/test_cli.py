import json
from fractions import Fraction

import pytest

from tqmbv import cli
from tqmbv.bf_theory import BF_CAPS, builtin_algebra
from tqmbv.bvbfv_check import CheckReport
from tqmbv.graded_core import TruncationCaps, ValidationError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out)


@pytest.mark.parametrize("name", cli.BUNDLED)
def test_bundled_documents_round_trip(name):
    text = cli.bundled_text(name)
    doc = cli.TheoryDocument.parse(text)
    once = cli.dumps(doc.to_json())
    twice = cli.dumps(cli.TheoryDocument.parse(once).to_json())
    assert once == twice
    assert json.loads(once) == json.loads(text)


@pytest.mark.parametrize("name,alg", [("bf_sl2", "sl2"), ("bf_nonunimodular", "affine2")])
def test_bundled_documents_are_the_generated_ones(name, alg):
    bundled = json.loads(cli.bundled_text(name))
    generated = json.loads(cli.dumps(cli.theory_document_for_bf(bundled["name"], builtin_algebra(alg))))
    assert bundled == generated


def test_rational_parsing():
    assert cli.parse_rational("-3/4") == Fraction(-3, 4)
    assert cli.parse_rational(" 7 ") == Fraction(7)
    assert cli.parse_rational(5) == Fraction(5)
    for bad in ("1/0", "0.5", "x", None, True, "1/-2"):
        with pytest.raises(ValidationError):
            cli.parse_rational(bad)
    assert cli.format_rational(Fraction(6, 4)) == "3/2"


def test_exit_codes(capsys, tmp_path):
    code, doc = run(capsys, "check-mqme", "bf_sl2")
    assert code == 0 and doc["verdict"] == "pass"
    code, doc = run(capsys, "check-mqme", "bf_nonunimodular", "--qme")
    assert code == 1 and doc["verdict"] == "fail"
    code, doc = run(capsys, "bf", "--random-constants", "3")
    assert code == 1
    bad = json.loads(cli.bundled_text("bf_sl2"))
    bad["space"]["omega"][0]["value"] = "1/0"
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad, indent=2))
    code, doc = run(capsys, "check-mqme", str(p))
    assert code == 2 and doc["verdict"] == "error" and isinstance(doc.get("line"), int)
    assert p.read_text().splitlines()[doc["line"] - 1].strip().startswith('"value": "1/0"')
    code, doc = run(capsys, "check-qme", str(tmp_path / "missing.json"))
    assert code == 2


def test_anomaly_residual_reported(capsys):
    code, doc = run(capsys, "check-qme", "bf_nonunimodular")
    assert code == 1
    (rep,) = doc["checks"]
    res = {r["label"]: r for r in rep["residuals"]}
    assert res["endpoint 0"]["zero"] and res["I*I"]["zero"]
    assert res["endpoint 1"]["terms"] == [{"coeff": "1/2", "hbar": 1, "monomial": ["A0"]}]


def test_caps_from_environment(monkeypatch):
    monkeypatch.setenv(cli.CAPS_ENV, "2,5,4")
    assert cli.caps_from_env() == TruncationCaps(2, 5, 4)
    doc = json.loads(cli.bundled_text("bf_sl2"))
    del doc["caps"]
    assert cli.TheoryDocument.parse(json.dumps(doc)).caps == TruncationCaps(2, 5, 4)
    monkeypatch.setenv(cli.CAPS_ENV, "nope")
    with pytest.raises(ValidationError):
        cli.caps_from_env()
    monkeypatch.delenv(cli.CAPS_ENV)
    assert cli.caps_from_env() == BF_CAPS


def test_report_keys_are_sorted_and_stable(capsys):
    _, a = run(capsys, "bf", "--algebra", "so3")
    _, b = run(capsys, "bf", "--algebra", "so3")
    a.pop("elapsed_seconds"), b.pop("elapsed_seconds")
    assert a == b
    text = cli.dumps(a)
    assert list(json.loads(text)) == sorted(a)
    assert {"schema_version", "engine_version", "command", "verdict", "checks"} <= set(a)


def test_exit_code_depends_only_on_verdicts():
    good = CheckReport("x", True, flags=["truncated"], details=dict(note="anything"))
    bad = CheckReport("y", False)
    assert cli.exit_code(cli.make_report("t", [good])) == 0
    assert cli.exit_code(cli.make_report("t", [good, bad])) == 1
    assert cli.exit_code(cli.make_report("t", [bad], extra=dict(verdict_hint="pass"))) == 1


def test_schema_errors_carry_lines():
    doc = json.loads(cli.bundled_text("bf_sl2"))
    doc["schema_version"] = 9
    with pytest.raises(cli.SchemaError) as e:
        cli.TheoryDocument.parse(json.dumps(doc, indent=2))
    assert e.value.line
    doc = json.loads(cli.bundled_text("bf_sl2"))
    doc["interaction"][0]["monomial"] = ["Q7"]
    with pytest.raises(cli.SchemaError):
        cli.TheoryDocument.parse(json.dumps(doc, indent=2))
    with pytest.raises(cli.SchemaError):
        cli.TheoryDocument.parse("{not json")


def test_selftest_and_propagator_verify(capsys):
    code, doc = run(capsys, "selftest")
    assert code == 0
    code, doc = run(capsys, "propagator-verify", "--lambda", "1.0", "--cutoff", "0.02", "0.04", "--grid", "5", "--no-interval")
    assert code == 0
