"""Problem files, command dispatch and JSON reports.

A problem file is line oriented::

    vars: x y
    lambda: 1 0
    delta: grading
    order: 8
    eps-order: 10
    tau-order: 3
    field:
      2 * y^2 d/dy
      3 * x * y^2 d/dy

``#`` starts a comment.  ``delta`` is ``grading`` or ``diag`` followed by one
rational per variable.  Only ``vars``, ``lambda`` and ``field`` are required.
"""
from __future__ import annotations

import argparse
import json
import re
import sys
import time
from dataclasses import dataclass, field as dc_field
from typing import Sequence

from .birkhoff import beta_and_residue, birkhoff_decompose, check_locality, factor_membership
from .checks import Check, all_passed
from .coeff import EXACT, Coefficient, Rational, format_rational, rational
from .diffeo import Diffeo, log_d_magnus
from .errors import InvariantError, ParseError, ResonanceError, ValidityError
from .normalforms import (
    ConjugacyCertificate,
    check_conjugacy,
    correction,
    correction_additive,
    exp_d_solve,
    linearize,
    normal_form_direct,
    normal_form_ecalle_vallet,
    renormalized_normal_form,
)
from .regularize import DiagonalAd, Grading, Scheme, image_part, validate_scheme
from .vfield import Monomial, Spectrum, VectorField, render_direction, render_monomial

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_RESONANCE = 3
EXIT_VALIDITY = 4
EXIT_INVARIANT = 5

COMMANDS = ("normalize", "correct", "linearize", "birkhoff", "check")
SCHEMES = ("direct", "renorm", "ev")

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_COEFF_TOKEN = re.compile(
    r"\s*(?:(?P<big_o>O\(\s*e\s*\^\s*(?P<o_exp>-?\d+)\s*\))"
    r"|(?P<num>\d+(?:/\d+)?)"
    r"|(?P<name>" + _NAME + r")(?:\s*\^\s*(?P<exp>-?\d+))?"
    r"|(?P<op>[+\-*]))"
)


# -- coefficients -------------------------------------------------------------

def parse_coefficient(text: str, aux: Sequence[tuple[str, int]] = (), line: int = 0, column: int = 1
                      ) -> Coefficient:
    """Inverse of ``str(Coefficient)``; ``aux`` declares parameter names and orders."""
    aux = tuple(sorted(aux))
    names = [n for n, _ in aux]
    pos, end = 0, len(text.rstrip())
    terms: dict = {}
    validity = EXACT
    sign = None
    expect_term = True
    current = None  # [value, e, aux exponents]

    def fail(msg, at):
        raise ParseError(msg, line, column + at)

    def flush():
        if current is None:
            return
        key = (current[1], tuple(current[2]))
        terms[key] = terms.get(key, 0) + current[0]

    while pos < end:
        m = _COEFF_TOKEN.match(text, pos)
        if not m or m.end() == pos:
            fail(f"unexpected character {text[pos]!r}", pos)
        start = m.start() + len(m.group(0)) - len(m.group(0).lstrip())
        pos = m.end()
        if m.group("op") in ("+", "-"):
            if current is None and sign is None and not terms and validity == EXACT:
                sign = m.group("op")
                continue
            if expect_term:
                fail(f"unexpected {m.group('op')!r}", start)
            flush()
            current = None
            sign = m.group("op")
            expect_term = True
            continue
        if m.group("op") == "*":
            if expect_term or current is None:
                fail("unexpected '*'", start)
            expect_term = True
            continue
        if not expect_term:
            fail("missing operator", start)
        expect_term = False
        if m.group("big_o"):
            flush()
            current = None
            validity = min(validity, int(m.group("o_exp")) - 1)
            continue
        if current is None:
            current = [rational(-1 if sign == "-" else 1), 0, [0] * len(aux)]
            sign = None
        if m.group("num"):
            current[0] = current[0] * rational(m.group("num"))
        elif m.group("name") == "e":
            current[1] += int(m.group("exp") or 1)
        elif m.group("name") in names:
            k = names.index(m.group("name"))
            power = int(m.group("exp") or 1)
            if power < 0:
                fail(f"negative power of {m.group('name')}", start)
            current[2][k] += power
        else:
            fail(f"unknown symbol {m.group('name')!r}", start)
    if expect_term:
        fail("incomplete coefficient", end)
    flush()
    if validity != EXACT:
        terms = {k: c for k, c in terms.items() if k[0] <= validity}
    for name, order in aux:
        k = names.index(name)
        if any(key[1][k] > order for key in terms):
            fail(f"power of {name} exceeds its order {order}", 0)
    return Coefficient({k: c for k, c in terms.items() if c}, validity, aux)


# -- problem files ------------------------------------------------------------

@dataclass(frozen=True)
class FieldTerm:
    exponents: Monomial
    direction: int
    coefficient: Rational


@dataclass(frozen=True)
class ProblemFile:
    names: tuple[str, ...]
    lam: tuple[Rational, ...]
    delta: tuple[Rational, ...] | None  # None means the grading
    order: int = 8
    eps_order: int | None = None
    tau_order: int = 3
    terms: tuple[FieldTerm, ...] = dc_field(default=())

    @property
    def nu(self) -> int:
        return len(self.names)

    def scheme(self, order=None, eps_order=None, tau_order=None) -> Scheme:
        order = self.order if order is None else order
        if eps_order is None:
            eps_order = self.eps_order
        delta = Grading() if self.delta is None else DiagonalAd(Spectrum(self.delta))
        return Scheme(
            Spectrum(self.lam), delta, order, eps_order,
            self.tau_order if tau_order is None else tau_order,
        )

    def field(self, order=None) -> VectorField:
        order = self.order if order is None else order
        return VectorField(self.nu, order, {(t.exponents, t.direction): t.coefficient for t in self.terms})

    def serialize(self) -> str:
        lines = [
            "vars: " + " ".join(self.names),
            "lambda: " + " ".join(format_rational(q) for q in self.lam),
            "delta: grading" if self.delta is None else "delta: diag " + " ".join(format_rational(q) for q in self.delta),
            f"order: {self.order}",
        ]
        if self.eps_order is not None:
            lines.append(f"eps-order: {self.eps_order}")
        lines.append(f"tau-order: {self.tau_order}")
        lines.append("field:")
        for t in self.terms:
            mono = render_monomial(t.exponents, self.names)
            lines.append(f"  {format_rational(t.coefficient)} * {mono} d/d{self.names[t.direction]}")
        return "\n".join(lines) + "\n"


_KEYS = ("vars", "lambda", "delta", "order", "eps-order", "tau-order", "field")


def _parse_rationals(text: str, line: int, col: int) -> list[Rational]:
    out = []
    for m in re.finditer(r"\S+", text):
        try:
            out.append(rational(m.group(0)))
        except (ValueError, TypeError, ZeroDivisionError):
            raise ParseError(f"not a rational: {m.group(0)!r}", line, col + m.start()) from None
    return out


def _parse_int(text: str, key: str, line: int, col: int) -> int:
    value = text.strip()
    if not re.fullmatch(r"\d+", value):
        raise ParseError(f"{key} must be a nonnegative integer, got {value!r}", line, col)
    return int(value)


def _parse_term(raw: str, names: Sequence[str], line: int) -> FieldTerm:
    indent = len(raw) - len(raw.lstrip())
    text = raw.strip()
    m = re.search(r"\s*d/d(" + _NAME + r")\s*$", text)
    if not m:
        raise ParseError("field term must end with d/dVAR", line, indent + len(text) + 1)
    var = m.group(1)
    if var not in names:
        raise ParseError(f"unknown variable {var!r}", line, indent + m.start(1) + 1)
    body = text[: m.start()]
    coeff = rational(1)
    exps = [0] * len(names)
    factors = []
    for f in re.finditer(r"[^*]+", body):
        factors.append((f.start(), f.group(0).strip()))
    if not factors or any(not s for _, s in factors):
        raise ParseError("malformed product", line, indent + 1)
    for start, s in factors:
        col = indent + start + (len(body[start:]) - len(body[start:].lstrip())) + 1
        vm = re.fullmatch(r"(" + _NAME + r")(?:\s*\^\s*(\d+))?", s)
        if vm:
            if vm.group(1) not in names:
                raise ParseError(f"unknown variable {vm.group(1)!r}", line, col)
            exps[names.index(vm.group(1))] += int(vm.group(2) or 1)
            continue
        if any(exps):
            raise ParseError("coefficient must precede the monomial", line, col)
        try:
            coeff = coeff * rational(s.replace(" ", ""))
        except (ValueError, TypeError, ZeroDivisionError):
            raise ParseError(f"bad coefficient {s!r}", line, col) from None
    degree = sum(exps)
    if degree < 2:
        kind = "constant" if degree == 0 else "linear"
        raise ParseError(f"{kind} field term; the linear part is given by lambda", line, indent + 1)
    return FieldTerm(tuple(exps), names.index(var), coeff)


def parse_problem(text: str) -> ProblemFile:
    values: dict = {}
    where: dict = {}
    raw_terms = []
    in_field = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if in_field and line[:1].isspace():
            raw_terms.append((lineno, line))
            continue
        in_field = False
        m = re.match(r"\s*([A-Za-z-]+)\s*:", line)
        if not m:
            raise ParseError("expected 'key: value'", lineno, 1)
        key = m.group(1)
        if key not in _KEYS:
            raise ParseError(f"unknown key {key!r}", lineno, m.start(1) + 1)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", lineno, m.start(1) + 1)
        values[key] = line[m.end():]
        where[key] = (lineno, m.end() + 1)
        if key == "field":
            if values[key].strip():
                raise ParseError("field terms go on the following indented lines", lineno, m.end() + 1)
            in_field = True

    for key in ("vars", "lambda", "field"):
        if key not in values:
            raise ParseError(f"missing '{key}:'", len(text.splitlines()) or 1, 1)

    line, col = where["vars"]
    names = values["vars"].split()
    if not names:
        raise ParseError("no variables declared", line, col)
    for n in names:
        if not re.fullmatch(_NAME, n) or n in ("e", "d", "O"):
            raise ParseError(f"invalid variable name {n!r}", line, col)
    if len(set(names)) != len(names):
        raise ParseError("repeated variable name", line, col)

    line, col = where["lambda"]
    lam = _parse_rationals(values["lambda"], line, col)
    if len(lam) != len(names):
        raise ParseError(f"lambda has {len(lam)} entries for {len(names)} variables", line, col)

    delta = None
    if "delta" in values:
        line, col = where["delta"]
        words = values["delta"].split()
        if words == ["grading"]:
            delta = None
        elif words and words[0] == "diag":
            delta = tuple(_parse_rationals(values["delta"].split("diag", 1)[1], line, col))
            if len(delta) != len(names):
                raise ParseError(f"delta has {len(delta)} entries for {len(names)} variables", line, col)
        else:
            raise ParseError("delta must be 'grading' or 'diag' followed by rationals", line, col)

    ints = {}
    for key in ("order", "eps-order", "tau-order"):
        if key in values:
            ints[key] = _parse_int(values[key], key, *where[key])
    order = ints.get("order", 8)
    if order < 1:
        raise ParseError("order must be at least 1", *where["order"])

    merged: dict = {}
    for lineno, raw in raw_terms:
        t = _parse_term(raw, names, lineno)
        key = (t.exponents, t.direction)
        merged[key] = merged.get(key, 0) + t.coefficient
    terms = tuple(
        FieldTerm(n, j, c)
        for (n, j), c in sorted(merged.items(), key=lambda kv: (sum(kv[0][0]), tuple(-e for e in kv[0][0]), kv[0][1]))
        if c
    )
    return ProblemFile(tuple(names), tuple(lam), delta, order, ints.get("eps-order"), ints.get("tau-order", 3), terms)


# -- reports ------------------------------------------------------------------

def _terms(X: VectorField | None, names) -> list[str] | None:
    return None if X is None else X.render_terms(names)


def _components(phi: Diffeo | None, names) -> dict | None:
    return None if phi is None else phi.render(names)


def _empty_report(command: str, scheme_name: str | None, problem: ProblemFile | None, s: Scheme | None) -> dict:
    return {
        "command": command,
        "scheme": scheme_name,
        "input": None if problem is None or s is None else {
            "vars": list(problem.names),
            **s.describe(),
            "field": problem.field(s.order).render_terms(problem.names),
        },
        "normal_form": None,
        "conjugator": None,
        "birkhoff": None,
        "correction": None,
        "checks": [],
        "resonant": None,
        "error": None,
        "exit": EXIT_OK,
    }


def _certificate_checks(cert: ConjugacyCertificate, names) -> list[Check]:
    checks = check_conjugacy(cert, names).as_checks()
    im = image_part(cert.v, cert.scheme)
    checks.append(Check("normal form lies in ker d", im.is_zero(), im.render(names) if not im.is_zero() else ""))
    return checks


def _birkhoff_block(u: VectorField, s: Scheme, names, with_locality: bool = True):
    phi = exp_d_solve(u, s, regularized=True)
    pair = birkhoff_decompose(phi, s)
    checks = [Check("minus * plus reproduces phi", pair.recompose() == phi, "")]
    checks += factor_membership(pair)
    beta, residue = beta_and_residue(pair, s)
    checks.append(Check("beta e-free, in ker d, equal to delta(Res minus)", True, ""))
    local = None
    if with_locality:
        report = check_locality(phi, s)
        local = report.local
        checks.append(report.as_check())
    block = {
        "minus": _components(pair.minus, names),
        "plus": _components(pair.plus, names),
        "beta": _terms(beta, names),
        "residue": _terms(residue, names),
        "local": local,
    }
    return block, checks


def _run_normalize(report, u, s, names, scheme_name):
    if scheme_name == "renorm":
        cert, _pair = renormalized_normal_form(u, s)
        block, checks = _birkhoff_block(u, s, names)
        report["birkhoff"] = block
        checks = checks + _certificate_checks(cert, names)
    elif scheme_name == "ev":
        cert = normal_form_ecalle_vallet(u, s)
        checks = _certificate_checks(cert, names)
    else:
        cert = normal_form_direct(u, s)
        checks = _certificate_checks(cert, names)
    report["normal_form"] = _terms(cert.v, names)
    report["conjugator"] = _components(cert.phi, names)
    return checks


def _run_correct(report, u, s, names):
    u_c, phi = correction(u, s)
    report["correction"] = _terms(u_c, names)
    report["normal_form"] = _terms(u_c, names)
    report["conjugator"] = _components(phi, names)
    residual = (log_d_magnus(phi, s.d) - (u - u_c)).drop_zeros()
    checks = [
        Check("correction lies in ker d", image_part(u_c, s).is_zero(), ""),
        Check("log_d(phi) = u - u_c", residual.is_zero(), residual.render(names) if not residual.is_zero() else ""),
    ]
    if all(c.passed for c in validate_scheme(s)):
        gamma = correction_additive(u, s)
        checks.append(Check("additive splitting recovers the correction", gamma == u_c, gamma.render(names)))
    return checks


def _run_linearize(report, u, s, names):
    cert = linearize(u, s)
    report["normal_form"] = _terms(cert.v, names)
    report["conjugator"] = _components(cert.phi, names)
    return _certificate_checks(cert, names)


def _run_birkhoff(report, u, s, names):
    block, checks = _birkhoff_block(u, s, names)
    report["birkhoff"] = block
    return checks


def _run_check(report, u, s, names):
    checks = list(validate_scheme(s))
    for kind, fn in (("direct", normal_form_direct), ("ev", normal_form_ecalle_vallet)):
        cert = fn(u, s)
        checks += [Check(f"{kind}: {c.name}", c.passed, c.detail) for c in _certificate_checks(cert, names)]
    cert, _pair = renormalized_normal_form(u, s)
    checks += [Check(f"renorm: {c.name}", c.passed, c.detail) for c in _certificate_checks(cert, names)]
    block, bchecks = _birkhoff_block(u, s, names)
    report["birkhoff"] = block
    report["normal_form"] = _terms(cert.v, names)
    report["conjugator"] = _components(cert.phi, names)
    checks += bchecks
    checks += _run_correct(dict(report), u, s, names)
    u_c, _ = correction(u, s)
    report["correction"] = _terms(u_c, names)
    zero = normal_form_direct((u - u_c).drop_zeros(), s).v
    checks.append(Check("u - u_c has normal form 0", zero.is_zero(), zero.render(names)))
    return checks


def run(command: str, problem: ProblemFile, scheme_name: str | None = None,
        order=None, eps_order=None, tau_order=None) -> dict:
    """Execute one command and return the report (exit code included)."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    if command == "normalize":
        scheme_name = scheme_name or "direct"
        if scheme_name not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme_name!r}")
    else:
        scheme_name = None
    s = problem.scheme(order, eps_order, tau_order)
    names = problem.names
    report = _empty_report(command, scheme_name, problem, s)
    u = problem.field(s.order)
    try:
        if command == "normalize":
            checks = _run_normalize(report, u, s, names, scheme_name)
        elif command == "correct":
            checks = _run_correct(report, u, s, names)
        elif command == "linearize":
            checks = _run_linearize(report, u, s, names)
        elif command == "birkhoff":
            checks = _run_birkhoff(report, u, s, names)
        else:
            checks = _run_check(report, u, s, names)
    except ResonanceError as exc:
        report["error"] = str(exc)
        report["resonant"] = [render_direction(n, j, names) for n, j in exc.terms]
        report["exit"] = EXIT_RESONANCE
        return report
    except ValidityError as exc:
        report["error"] = str(exc)
        report["exit"] = EXIT_VALIDITY
        return report
    except InvariantError as exc:
        report["error"] = str(exc)
        report["exit"] = EXIT_INVARIANT
        return report
    report["checks"] = [c.as_dict() for c in checks]
    if not all_passed(checks):
        report["exit"] = EXIT_INVARIANT
        report["error"] = "failed checks: " + ", ".join(c.name for c in checks if not c.passed)
    return report


def render_report(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def _render_text(report: dict) -> str:
    out = [f"{report['command']}" + (f" ({report['scheme']})" if report["scheme"] else "")]
    if report["error"]:
        out.append(f"error: {report['error']}")
    for key in ("normal_form", "correction"):
        if report[key] is not None:
            out.append(f"{key.replace('_', ' ')}: " + (" + ".join(report[key]) or "0"))
    if report["conjugator"]:
        out.append("conjugator:")
        out += [f"  {k} -> {v}" for k, v in report["conjugator"].items()]
    if report["birkhoff"]:
        b = report["birkhoff"]
        out.append("beta: " + (" + ".join(b["beta"]) or "0"))
        out.append("residue: " + (" + ".join(b["residue"]) or "0"))
        if b["local"] is not None:
            out.append(f"local: {b['local']}")
    for c in report["checks"]:
        out.append(f"[{'ok' if c['passed'] else 'FAIL'}] {c['name']}" + (f": {c['detail']}" if c["detail"] and not c["passed"] else ""))
    out.append(f"exit {report['exit']}")
    return "\n".join(out) + "\n"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lienorm", description="Normal forms of vector fields with exact arithmetic.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("file", help="problem file ('-' for stdin)")
    parser.add_argument("--scheme", choices=SCHEMES, default=None, help="normalization scheme (normalize only)")
    parser.add_argument("--order", type=int, default=None, help="override the truncation order N")
    parser.add_argument("--eps-order", type=int, default=None, help="override the e-order K")
    parser.add_argument("--tau-order", type=int, default=None, help="override the tau-order T")
    parser.add_argument("--json", action="store_true", help="print the JSON report")
    parser.add_argument("--quiet", action="store_true", help="print nothing except the JSON report")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        text = sys.stdin.read() if args.file == "-" else open(args.file, encoding="utf-8").read()
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        problem = parse_problem(text)
    except ParseError as exc:
        report = _empty_report(args.command, args.scheme, None, None)
        report["error"] = f"{args.file}: {exc}"
        report["exit"] = EXIT_PARSE
    else:
        report = run(args.command, problem, args.scheme, args.order, args.eps_order, args.tau_order)
    if args.json:
        sys.stdout.write(render_report(report))
    elif not args.quiet:
        sys.stdout.write(_render_text(report))
    if report["error"] and not args.quiet:
        print(f"error: {report['error']}", file=sys.stderr)
    if not args.quiet:
        print(f"elapsed {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return report["exit"]


if __name__ == "__main__":
    sys.exit(main())
