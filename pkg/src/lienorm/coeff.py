"""Exact coefficient ring: truncated Laurent series in ``e`` (the regulator)
over the rationals, optionally tensored with truncated polynomials in named
auxiliary parameters such as ``tau`` or ``t``.

Every :class:`Coefficient` carries a *validity*: the largest power of ``e``
up to which its expansion is known.  Exact values have ``validity == EXACT``.
Products and inverses propagate validity so that running out of precision is
detected instead of silently producing wrong low-order terms.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping

from gmpy2 import mpq

from .errors import AuxMismatchError, NotInvertibleError, ValidityError

Rational = type(mpq(0))
EXACT = math.inf

_ZERO = mpq(0)
_ONE = mpq(1)


def rational(value) -> Rational:
    """Coerce ints, fractions, mpq and ``"p/q"`` strings to an exact rational."""
    if isinstance(value, Rational):
        return value
    if isinstance(value, bool) or isinstance(value, float):
        raise TypeError(f"refusing inexact/boolean value {value!r}")
    if isinstance(value, (int, Fraction)):
        return mpq(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return mpq(text)
        except ValueError:
            raise ValueError(f"not a rational literal: {value!r}") from None
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def format_rational(q: Rational) -> str:
    q = mpq(q)
    if q.denominator == 1:
        return str(q.numerator)
    return f"{q.numerator}/{q.denominator}"


def _merge_aux(a: tuple, b: tuple) -> tuple:
    if a == b:
        return a
    orders = dict(a)
    for name, order in b:
        if orders.setdefault(name, order) != order:
            raise AuxMismatchError(
                f"parameter {name!r} declared with truncation {orders[name]} and {order}"
            )
    return tuple(sorted(orders.items()))


def _remap(terms: dict, src: tuple, dst: tuple) -> dict:
    if src == dst:
        return terms
    names = [name for name, _ in dst]
    index = [names.index(name) for name, _ in src]
    width = len(dst)
    out = {}
    for (e, exps), c in terms.items():
        new = [0] * width
        for k, v in zip(index, exps):
            new[k] = v
        out[(e, tuple(new))] = c
    return out


class Coefficient:
    """Immutable truncated Laurent series ``sum c[k, m] e^k * params^m``.

    ``terms`` maps ``(e_exponent, aux_exponents)`` to nonzero rationals.
    ``aux`` is a sorted tuple of ``(name, order)``; exponents above ``order``
    are dropped on construction.
    """

    __slots__ = ("_terms", "validity", "aux")

    def __init__(self, terms: Mapping | None = None, validity=EXACT, aux: Iterable = ()):
        aux = tuple(sorted((str(n), int(o)) for n, o in aux))
        if len({n for n, _ in aux}) != len(aux):
            raise AuxMismatchError(f"duplicate auxiliary parameter in {aux}")
        if validity != EXACT:
            validity = int(validity)
        orders = [o for _, o in aux]
        clean = {}
        for key, c in (terms or {}).items():
            e, exps = key
            exps = tuple(exps)
            if len(exps) != len(aux):
                raise AuxMismatchError(f"exponent vector {exps} does not match {aux}")
            if any(m < 0 for m in exps):
                raise ValueError(f"negative auxiliary exponent in {exps}")
            if e > validity or any(m > o for m, o in zip(exps, orders)):
                continue
            c = rational(c)
            if c:
                k = (int(e), exps)
                c = clean.get(k, _ZERO) + c
                if c:
                    clean[k] = c
                else:
                    clean.pop(k, None)
        self._terms = clean
        self.validity = validity
        self.aux = aux

    @classmethod
    def _raw(cls, terms: dict, validity, aux: tuple) -> Coefficient:
        # trusted constructor: terms already clean and truncated
        obj = object.__new__(cls)
        obj._terms = terms
        obj.validity = validity
        obj.aux = aux
        return obj

    # -- constructors ------------------------------------------------------
    @classmethod
    def const(cls, value, aux: Iterable = ()) -> Coefficient:
        aux = tuple(sorted(aux))
        q = rational(value)
        return cls._raw({(0, (0,) * len(aux)): q} if q else {}, EXACT, aux)

    @classmethod
    def zero(cls, validity=EXACT, aux: Iterable = ()) -> Coefficient:
        return cls._raw({}, validity, tuple(sorted(aux)))

    @classmethod
    def eps(cls, power: int = 1, value=1) -> Coefficient:
        q = rational(value)
        return cls._raw({(power, ()): q} if q else {}, EXACT, ())

    @classmethod
    def param(cls, name: str, order: int, power: int = 1, value=1) -> Coefficient:
        """``value * name^power`` with ``name`` truncated above ``order``."""
        aux = ((name, order),)
        q = rational(value)
        if power > order or not q:
            return cls._raw({}, EXACT, aux)
        return cls._raw({(0, (power,)): q}, EXACT, aux)

    @classmethod
    def coerce(cls, value) -> Coefficient:
        if isinstance(value, Coefficient):
            return value
        return cls.const(value)

    # -- inspection --------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        """True when no term is known to be nonzero (up to validity)."""
        return not self._terms

    def is_exact_zero(self) -> bool:
        return not self._terms and self.validity == EXACT

    def __bool__(self) -> bool:
        return bool(self._terms)

    @property
    def min_exponent(self):
        """Lowest ``e`` exponent; for a zero series, ``validity + 1``."""
        if not self._terms:
            return self.validity + 1
        return min(e for e, _ in self._terms)

    @property
    def max_exponent(self):
        if not self._terms:
            return -EXACT
        return max(e for e, _ in self._terms)

    def is_rational(self) -> bool:
        return all(e == 0 and not any(m) for e, m in self._terms)

    def as_rational(self) -> Rational:
        if not self.is_rational():
            raise ValueError(f"{self} is not a plain rational")
        for c in self._terms.values():
            return c
        return _ZERO

    def is_eps_free(self) -> bool:
        return all(e == 0 for e, _ in self._terms)

    def carries_aux(self) -> bool:
        return any(any(m) for _, m in self._terms)

    def depends_on(self, name: str) -> bool:
        names = [n for n, _ in self.aux]
        if name not in names:
            return False
        k = names.index(name)
        return any(m[k] for _, m in self._terms)

    def aux_coefficient(self, name: str, power: int) -> Coefficient:
        """Coefficient of ``name^power``, with ``name`` removed from ``aux``."""
        names = [n for n, _ in self.aux]
        if name not in names:
            return self if power == 0 else Coefficient.zero(self.validity, self.aux)
        k = names.index(name)
        aux = self.aux[:k] + self.aux[k + 1:]
        out = {}
        for (e, m), c in self._terms.items():
            if m[k] == power:
                out[(e, m[:k] + m[k + 1:])] = c
        return Coefficient._raw(out, self.validity, aux)

    def eps_coefficient(self, power: int) -> Coefficient:
        if power > self.validity:
            raise ValidityError(f"e^{power} requested beyond validity {self.validity}")
        out = {(0, m): c for (e, m), c in self._terms.items() if e == power}
        return Coefficient._raw(out, EXACT, self.aux)

    def truncate(self, validity) -> Coefficient:
        """Forget every term above ``e^validity``."""
        if validity >= self.validity:
            return self
        validity = int(validity)
        out = {k: c for k, c in self._terms.items() if k[0] <= validity}
        return Coefficient._raw(out, validity, self.aux)

    def promote(self, aux: tuple) -> Coefficient:
        merged = _merge_aux(self.aux, aux)
        if merged == self.aux:
            return self
        return Coefficient._raw(_remap(self._terms, self.aux, merged), self.validity, merged)

    # -- arithmetic --------------------------------------------------------
    def _align(self, other: Coefficient):
        if self.aux == other.aux:
            return self._terms, other._terms, self.aux
        aux = _merge_aux(self.aux, other.aux)
        return _remap(self._terms, self.aux, aux), _remap(other._terms, other.aux, aux), aux

    def __add__(self, other) -> Coefficient:
        if not isinstance(other, Coefficient):
            try:
                other = Coefficient.const(other)
            except TypeError:
                return NotImplemented
        a, b, aux = self._align(other)
        validity = min(self.validity, other.validity)
        out = dict(a) if validity == self.validity else {k: c for k, c in a.items() if k[0] <= validity}
        for k, c in b.items():
            if k[0] > validity:
                continue
            s = out.get(k, _ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return Coefficient._raw(out, validity, aux)

    __radd__ = __add__

    def __neg__(self) -> Coefficient:
        return Coefficient._raw({k: -c for k, c in self._terms.items()}, self.validity, self.aux)

    def __sub__(self, other) -> Coefficient:
        if not isinstance(other, Coefficient):
            try:
                other = Coefficient.const(other)
            except TypeError:
                return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> Coefficient:
        return (-self) + other

    def scale(self, q) -> Coefficient:
        q = rational(q)
        if not q:
            return Coefficient._raw({}, self.validity, self.aux)
        if q == _ONE:
            return self
        return Coefficient._raw({k: c * q for k, c in self._terms.items()}, self.validity, self.aux)

    def __mul__(self, other) -> Coefficient:
        if not isinstance(other, Coefficient):
            try:
                return self.scale(other)
            except TypeError:
                return NotImplemented
        a, b, aux = self._align(other)
        validity = min(self.validity + other.min_exponent, other.validity + self.min_exponent)
        if not aux:
            out = {}
            for (e1, _), c1 in a.items():
                for (e2, _), c2 in b.items():
                    e = e1 + e2
                    if e > validity:
                        continue
                    k = (e, ())
                    s = out.get(k, _ZERO) + c1 * c2
                    if s:
                        out[k] = s
                    else:
                        del out[k]
            return Coefficient._raw(out, validity, aux)
        orders = [o for _, o in aux]
        out = {}
        for (e1, m1), c1 in a.items():
            for (e2, m2), c2 in b.items():
                e = e1 + e2
                if e > validity:
                    continue
                m = tuple(x + y for x, y in zip(m1, m2))
                if any(x > o for x, o in zip(m, orders)):
                    continue
                k = (e, m)
                s = out.get(k, _ZERO) + c1 * c2
                if s:
                    out[k] = s
                else:
                    del out[k]
        return Coefficient._raw(out, validity, aux)

    def __rmul__(self, other) -> Coefficient:
        return self.__mul__(other)

    def invert(self, target_validity: int) -> Coefficient:
        """Exact inverse expanded up to ``e^target_validity``.

        The lowest-order term must be an aux-free nonzero rational; auxiliary
        parameters are nilpotent so the geometric series terminates.
        """
        if not self._terms:
            raise NotInvertibleError("zero coefficient is not invertible")
        m = self.min_exponent
        zero_aux = (0,) * len(self.aux)
        lead = self._terms.get((m, zero_aux))
        if lead is None:
            raise NotInvertibleError(f"lowest-order term of {self} carries an auxiliary parameter")
        # self = lead * e^m * (1 + r), r has only e^{>=0} terms, nilpotent modulo e
        rel_validity = min(int(target_validity) + m if target_validity != EXACT else EXACT,
                           self.validity - m)
        if rel_validity == EXACT:
            if len(self._terms) == 1:
                return Coefficient._raw({(-m, zero_aux): 1 / lead}, EXACT, self.aux)
            raise ValidityError("inverse of a non-monomial series needs a finite target validity")
        inv_lead = 1 / lead
        r = Coefficient._raw(
            {(e - m, mm): c * inv_lead for (e, mm), c in self._terms.items() if (e, mm) != (m, zero_aux)},
            EXACT, self.aux,
        ).truncate(rel_validity)
        total = Coefficient._raw({(0, zero_aux): _ONE}, rel_validity, self.aux)
        term = total
        while True:
            term = (-(term * r)).truncate(rel_validity)
            if term.is_zero():
                break
            total = total + term
        # total validity is rel_validity; shift by e^-m and scale
        out = {(e - m, mm): c * inv_lead for (e, mm), c in total._terms.items()}
        validity = rel_validity - m
        if target_validity != EXACT:
            validity = min(validity, int(target_validity))
        return Coefficient(out, validity, self.aux)

    def split_ms(self) -> tuple[Coefficient, Coefficient]:
        """Minimal-subtraction split into strictly-polar and regular parts."""
        neg = {k: c for k, c in self._terms.items() if k[0] < 0}
        pos = {k: c for k, c in self._terms.items() if k[0] >= 0}
        neg_validity = EXACT if self.validity >= -1 else self.validity
        return (Coefficient._raw(neg, neg_validity, self.aux),
                Coefficient._raw(pos, self.validity, self.aux))

    def eval_eps_zero(self) -> Coefficient:
        if any(e < 0 for e, _ in self._terms):
            raise ValidityError(f"pole at e=0 in {self}")
        if self.validity < 0:
            raise ValidityError(
                f"precision exhausted (validity {self.validity}); increase the e-order"
            )
        return self.eps_coefficient(0)

    def substitute_aux(self, name: str, value) -> Coefficient:
        """Replace the parameter ``name`` by a rational value."""
        q = rational(value)
        names = [n for n, _ in self.aux]
        if name not in names:
            return self
        k = names.index(name)
        aux = self.aux[:k] + self.aux[k + 1:]
        acc = {}
        for (e, m), c in self._terms.items():
            key = (e, m[:k] + m[k + 1:])
            acc[key] = acc.get(key, _ZERO) + c * q ** m[k]
        return Coefficient(acc, self.validity, aux)

    # -- comparison --------------------------------------------------------
    def agrees_with(self, other, validity=None) -> bool:
        """Equality of all terms up to the common validity (or ``validity``)."""
        other = Coefficient.coerce(other)
        limit = min(self.validity, other.validity)
        if validity is not None:
            limit = min(limit, validity)
        diff = (self.promote(other.aux) - other.promote(self.aux)).truncate(limit)
        return diff.is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Coefficient):
            try:
                other = Coefficient.const(other)
            except TypeError:
                return NotImplemented
        return self.agrees_with(other)

    __hash__ = None

    # -- rendering ---------------------------------------------------------
    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda kc: (kc[0][0], kc[0][1]))

    def __str__(self) -> str:
        pieces = []
        for (e, m), c in self.sorted_items():
            factors = []
            if e:
                factors.append("e" if e == 1 else f"e^{e}")
            for (name, _), p in zip(self.aux, m):
                if p:
                    factors.append(name if p == 1 else f"{name}^{p}")
            mag = abs(c)
            if factors and mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([format_rational(mag)] + factors)
            pieces.append(("-" if c < 0 else "+", body))
        if self.validity != EXACT:
            pieces.append(("+", f"O(e^{self.validity + 1})"))
        if not pieces:
            return "0"
        sign, body = pieces[0]
        text = ("-" if sign == "-" else "") + body
        for sign, body in pieces[1:]:
            text += f" {sign} {body}"
        return text

    def is_compound(self) -> bool:
        """True when rendering needs parentheses inside a product."""
        return len(self._terms) + (self.validity != EXACT) > 1 or not self.is_rational()

    def __repr__(self) -> str:
        return f"Coefficient({str(self)!r})"


ONE = Coefficient.const(1)
ZERO = Coefficient.zero()
EPS = Coefficient.eps(1)


def coeff_arith(a: Coefficient, b, op: str) -> Coefficient:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * Coefficient.coerce(b)
    if op == "scalar_mul":
        return a.scale(b)
    raise ValueError(f"unknown operation {op!r}")


def coeff_invert(a: Coefficient, target_validity: int) -> Coefficient:
    return a.invert(target_validity)


def split_ms(a: Coefficient) -> tuple[Coefficient, Coefficient]:
    return a.split_ms()


def eval_eps_zero(a: Coefficient) -> Coefficient:
    return a.eval_eps_zero()


def exp_series(c: Coefficient, order: int) -> Coefficient:
    """``sum_{j<=order} c^j / j!`` for a nilpotent-enough ``c``."""
    total = ONE
    power = ONE
    for j in range(1, order + 1):
        power = (power * c).scale(mpq(1, j))
        if power.is_exact_zero():
            break
        total = total + power
    return total
