from __future__ import annotations

import json
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lienorm.cli import main, parse_problem, run
from lienorm.errors import ParseError

NONRES = """\
vars: x y
lambda: 2 5
order: 5
field:
  1 * x^2 d/dx
  -3/2 * x * y d/dy
  2 * y^3 d/dx
"""


def toy_problem(toy_path):
    return parse_problem(toy_path.read_text())


def test_parse_toy(toy_path):
    p = toy_problem(toy_path)
    assert p.names == ("x", "y") and len(p.terms) == 3
    assert (p.order, p.eps_order, p.tau_order) == (8, 10, 3)
    assert p.delta is None


def test_arity_error():
    with pytest.raises(ParseError) as err:
        parse_problem("vars: x y z\nlambda: 1 0\nfield:\n  1 * x^2 d/dx\n")
    assert err.value.line == 2


def test_linear_term_error():
    with pytest.raises(ParseError) as err:
        parse_problem("vars: x y\nlambda: 1 0\nfield:\n  y d/dy\n")
    assert "linear" in str(err.value) and err.value.line == 4


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("vars: x y\nlambda: 1 zero\nfield:\n  y^2 d/dy\n", 2, 11),
        ("vars: x y\nlambda: 1 0\nfield:\n  2 * w^2 d/dy\n", 4, 7),
        ("vars: x y\nlambda: 1 0\nfield:\n  2 * y^2 d/dw\n", 4, 14),
        ("vars: x y\nlambda: 1 0\ncolour: red\nfield:\n  y^2 d/dy\n", 3, 1),
        ("vars: x y\nlambda: 1 0\nfield:\n  2 * y^2\n", 4, 10),
    ],
)
def test_syntax_errors_are_located(text, line, column):
    with pytest.raises(ParseError) as err:
        parse_problem(text)
    assert (err.value.line, err.value.column) == (line, column)
    assert str(err.value).startswith(f"line {line}, column {column}: ")


def test_diag_delta_and_duplicates_merge():
    p = parse_problem("vars: x y\nlambda: 1 -1\ndelta: diag 1 2\nfield:\n  x^2 d/dx\n  2 * x^2 d/dx\n")
    assert p.delta == (1, 2)
    assert len(p.terms) == 1 and p.terms[0].coefficient == 3


def test_serialize_round_trip(toy_path):
    p = toy_problem(toy_path)
    assert parse_problem(p.serialize()) == p
    q = parse_problem(NONRES)
    assert parse_problem(q.serialize()) == q


names = st.sampled_from(["x", "y"])
terms = st.lists(
    st.tuples(st.integers(0, 3), st.integers(0, 3), names, st.integers(-9, 9), st.integers(1, 5)).filter(
        lambda t: t[0] + t[1] >= 2 and t[3] != 0
    ),
    min_size=1,
    max_size=5,
)


@given(terms)
@settings(max_examples=40, deadline=None)
def test_round_trip_property(ts):
    body = "\n".join(f"  {a}/{b} * x^{i} * y^{j} d/d{v}".replace(" * x^0", "").replace("x^0 * ", "").replace(" * y^0", "")
                     for i, j, v, a, b in ts)
    p = parse_problem(f"vars: x y\nlambda: 1 -1\norder: 4\nfield:\n{body}\n")
    assert parse_problem(p.serialize()) == p


def test_renorm_report(toy_path):
    report = run("normalize", toy_problem(toy_path), "renorm")
    assert report["exit"] == 0
    assert report["birkhoff"]["beta"] == ["2 * y^2 d/dy"]
    assert report["birkhoff"]["local"] is True
    assert report["normal_form"] == ["2 * y^2 d/dy"]
    assert all(c["passed"] for c in report["checks"])


def test_other_schemes_and_commands(toy_path):
    p = toy_problem(toy_path)
    for scheme in ("direct", "ev"):
        report = run("normalize", p, scheme)
        assert report["exit"] == 0 and report["normal_form"] == ["2 * y^2 d/dy"]
    assert run("correct", p)["correction"] == ["2 * y^2 d/dy"]
    assert run("birkhoff", p)["birkhoff"]["residue"] == ["2 * y^2 d/dy"]
    report = run("check", p)
    assert report["exit"] == 0 and len(report["checks"]) > 10


def test_linearize_nonresonant():
    report = run("linearize", parse_problem(NONRES))
    assert report["exit"] == 0 and report["normal_form"] == []


def test_linearize_resonant_exit_code(toy_path):
    report = run("linearize", toy_problem(toy_path))
    assert report["exit"] == 3
    assert "y^2 d/dy" in report["resonant"]
    assert report["checks"] == []


def test_validity_exhaustion_exit_code(toy_path):
    report = run("normalize", toy_problem(toy_path), "renorm", eps_order=1)
    assert report["exit"] == 4 and "e-order" in report["error"]


def test_main_exit_codes(toy_path, tmp_path, capsys):
    assert main(["normalize", str(toy_path), "--scheme", "renorm", "--json", "--quiet"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["command"] == "normalize" and out["scheme"] == "renorm"
    bad = tmp_path / "bad.prob"
    bad.write_text("vars: x y\nlambda: 1\nfield:\n  y^2 d/dy\n")
    assert main(["check", str(bad), "--json", "--quiet"]) == 2
    out = json.loads(capsys.readouterr().out)
    assert out["error"].endswith("line 2, column 8: lambda has 1 entries for 2 variables")
    assert main(["linearize", str(toy_path)]) == 3
    text = capsys.readouterr()
    assert "y^2 d/dy" in text.out and "elapsed" in text.err


def test_order_flag_overrides_file(toy_path):
    report = run("normalize", toy_problem(toy_path), "direct", order=3)
    assert report["input"]["order"] == 3
    assert all(len(v.split("+")) <= 4 for v in report["conjugator"].values())


def test_json_is_byte_identical_across_processes(toy_path):
    cmd = [sys.executable, "-m", "lienorm", "normalize", "--scheme", "renorm", str(toy_path), "--json", "--quiet"]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and first
