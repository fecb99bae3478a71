"""Polynomial vector fields without constant or linear part.

A :class:`VectorField` stores terms ``c * x^n d/dx_j`` with ``|n| >= 2``; its
grade is ``|n| - 1``.  The diagonal linear part lives separately in a
:class:`Spectrum`.  Everything is truncated at a fixed grade ``order``:
polynomials acted on by fields are truncated at total degree ``order + 1``.

Directions are 0-based indices into the variable list.
"""
from __future__ import annotations

from itertools import combinations_with_replacement
from math import factorial
from typing import Callable, Iterable, Mapping, Sequence

from gmpy2 import mpq

from .coeff import EXACT, Coefficient, Rational, rational
from .errors import DimensionError

Monomial = tuple


def default_names(nu: int) -> tuple[str, ...]:
    if nu == 1:
        return ("y",)
    if nu <= 3:
        return ("x", "y", "z")[:nu]
    return tuple(f"x{i + 1}" for i in range(nu))


def monomials(nu: int, degree: int) -> list[Monomial]:
    """All exponent vectors of the given total degree, in lexicographic order."""
    out = []
    for combo in combinations_with_replacement(range(nu), degree):
        exps = [0] * nu
        for i in combo:
            exps[i] += 1
        out.append(tuple(exps))
    return sorted(out, reverse=True)


def render_monomial(mono: Monomial, names: Sequence[str]) -> str:
    parts = []
    for name, k in zip(names, mono):
        if k == 1:
            parts.append(name)
        elif k:
            parts.append(f"{name}^{k}")
    return " * ".join(parts) if parts else "1"


def _render_scaled(c: Coefficient, body: str) -> str:
    if c.is_compound():
        return f"({c}) * {body}" if body != "1" else f"({c})"
    text = str(c)
    return text if body == "1" else f"{text} * {body}"


def _common_aux(coeffs: Iterable[Coefficient]) -> tuple:
    aux = ()
    for c in coeffs:
        if c.aux != aux:
            aux = tuple(sorted(set(aux) | set(c.aux)))
    return aux


class Spectrum:
    """Diagonal linear part ``X0 = sum lambda_i x_i d/dx_i``."""

    __slots__ = ("values",)

    def __init__(self, values: Iterable):
        self.values = tuple(rational(v) for v in values)

    @property
    def nu(self) -> int:
        return len(self.values)

    def pair(self, n: Monomial) -> Rational:
        return sum((l * k for l, k in zip(self.values, n)), mpq(0))

    def apply(self, poly: Poly) -> Poly:
        """Action of ``X0`` on a polynomial: each monomial scales by ``<lambda, m>``."""
        out = {}
        for m, c in poly.items():
            w = self.pair(m)
            if w:
                out[m] = c.scale(w)
        return Poly._raw(poly.nu, poly.maxdeg, out)

    def __eq__(self, other) -> bool:
        return isinstance(other, Spectrum) and self.values == other.values

    def __hash__(self) -> int:
        return hash(self.values)

    def __iter__(self):
        return iter(self.values)

    def __repr__(self) -> str:
        return f"Spectrum({[str(v) for v in self.values]})"


def ad_eigenvalue(lam: Spectrum, n: Monomial, j: int) -> Rational:
    """Eigenvalue ``<lambda, n> - lambda_j`` of ``ad_X0`` on ``x^n d/dx_j``."""
    return lam.pair(n) - lam.values[j]


def resonant_set(lam: Spectrum, order: int) -> list[tuple[Monomial, int]]:
    """Every ``(n, j)`` with ``2 <= |n| <= order + 1`` and vanishing eigenvalue."""
    out = []
    for deg in range(2, order + 2):
        for n in monomials(lam.nu, deg):
            for j in range(lam.nu):
                if ad_eigenvalue(lam, n, j) == 0:
                    out.append((n, j))
    return out


_PLAIN_KEY = (0, ())


def _plain_values(terms: Mapping) -> dict | None:
    """``{monomial: rational}`` when every coefficient is an exact e-free aux-free rational."""
    out = {}
    for m, c in terms.items():
        if c.validity != EXACT or c.aux or len(c._terms) != 1:
            return None
        q = c._terms.get(_PLAIN_KEY)
        if q is None:
            return None
        out[m] = q
    return out


class Poly:
    """Polynomial in ``nu`` variables truncated above total degree ``maxdeg``."""

    __slots__ = ("nu", "maxdeg", "_terms")

    def __init__(self, nu: int, maxdeg: int, terms: Mapping | None = None):
        self.nu = nu
        self.maxdeg = maxdeg
        clean = {}
        for m, c in (terms or {}).items():
            m = tuple(m)
            if len(m) != nu:
                raise DimensionError(f"monomial {m} is not in {nu} variables")
            if sum(m) > maxdeg:
                continue
            c = Coefficient.coerce(c)
            if c or c.validity != EXACT:
                clean[m] = c
        self._terms = clean

    @classmethod
    def _raw(cls, nu, maxdeg, terms) -> Poly:
        obj = object.__new__(cls)
        obj.nu = nu
        obj.maxdeg = maxdeg
        obj._terms = terms
        return obj

    @classmethod
    def var(cls, i: int, nu: int, maxdeg: int) -> Poly:
        m = tuple(1 if k == i else 0 for k in range(nu))
        return cls._raw(nu, maxdeg, {m: Coefficient.const(1)})

    @classmethod
    def monomial(cls, m: Monomial, nu: int, maxdeg: int, c=1) -> Poly:
        return cls(nu, maxdeg, {tuple(m): Coefficient.coerce(c)})

    @classmethod
    def one(cls, nu: int, maxdeg: int) -> Poly:
        return cls._raw(nu, maxdeg, {(0,) * nu: Coefficient.const(1)})

    def items(self):
        return self._terms.items()

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def coefficient(self, m: Monomial) -> Coefficient:
        return self._terms.get(tuple(m), Coefficient.zero())

    def is_zero(self) -> bool:
        return all(not c for c in self._terms.values())

    def _check(self, other: Poly):
        if self.nu != other.nu:
            raise DimensionError(f"{self.nu} vs {other.nu} variables")

    def __add__(self, other: Poly) -> Poly:
        self._check(other)
        maxdeg = min(self.maxdeg, other.maxdeg)
        out = {m: c for m, c in self._terms.items() if sum(m) <= maxdeg}
        for m, c in other._terms.items():
            if sum(m) > maxdeg:
                continue
            s = out[m] + c if m in out else c
            if s or s.validity != EXACT:
                out[m] = s
            else:
                out.pop(m, None)
        return Poly._raw(self.nu, maxdeg, out)

    def __neg__(self) -> Poly:
        return Poly._raw(self.nu, self.maxdeg, {m: -c for m, c in self._terms.items()})

    def __sub__(self, other: Poly) -> Poly:
        return self + (-other)

    def scale(self, c) -> Poly:
        if isinstance(c, Coefficient):
            out = {}
            for m, a in self._terms.items():
                p = a * c
                if p or p.validity != EXACT:
                    out[m] = p
            return Poly._raw(self.nu, self.maxdeg, out)
        q = rational(c)
        if not q:
            return Poly._raw(self.nu, self.maxdeg, {})
        return Poly._raw(self.nu, self.maxdeg, {m: a.scale(q) for m, a in self._terms.items()})

    def __mul__(self, other) -> Poly:
        if not isinstance(other, Poly):
            return self.scale(other)
        self._check(other)
        maxdeg = min(self.maxdeg, other.maxdeg)
        left = [(m, sum(m), c) for m, c in self._terms.items()]
        right = [(m, sum(m), c) for m, c in other._terms.items()]
        a, b = _plain_values(self._terms), _plain_values(other._terms)
        if a is not None and b is not None:
            # every coefficient is an exact rational: multiply the numbers directly
            acc: dict = {}
            for m1, d1, _ in left:
                q1 = a[m1]
                for m2, d2, _ in right:
                    if d1 + d2 > maxdeg:
                        continue
                    m = tuple(x + y for x, y in zip(m1, m2))
                    acc[m] = acc.get(m, 0) + q1 * b[m2]
            return Poly._raw(self.nu, maxdeg, {m: Coefficient._raw({_PLAIN_KEY: q}, EXACT, ()) for m, q in acc.items() if q})
        out: dict = {}
        for m1, d1, c1 in left:
            for m2, d2, c2 in right:
                if d1 + d2 > maxdeg:
                    continue
                m = tuple(x + y for x, y in zip(m1, m2))
                p = c1 * c2
                out[m] = out[m] + p if m in out else p
        out = {m: c for m, c in out.items() if c or c.validity != EXACT}
        return Poly._raw(self.nu, maxdeg, out)

    __rmul__ = scale

    def deriv(self, i: int) -> Poly:
        out = {}
        for m, c in self._terms.items():
            k = m[i]
            if k:
                mm = m[:i] + (k - 1,) + m[i + 1:]
                out[mm] = c.scale(k)
        return Poly._raw(self.nu, self.maxdeg, out)

    def truncate(self, maxdeg: int) -> Poly:
        if maxdeg >= self.maxdeg:
            return self
        return Poly._raw(self.nu, maxdeg, {m: c for m, c in self._terms.items() if sum(m) <= maxdeg})

    def degree_part(self, degree: int) -> Poly:
        return Poly._raw(self.nu, self.maxdeg, {m: c for m, c in self._terms.items() if sum(m) == degree})

    def map_coefficients(self, fn: Callable[[Monomial, Coefficient], Coefficient]) -> Poly:
        out = {}
        for m, c in self._terms.items():
            r = fn(m, c)
            if r or r.validity != EXACT:
                out[m] = r
        return Poly._raw(self.nu, self.maxdeg, out)

    def substitute(self, comps: Sequence[Poly], maxdeg: int | None = None) -> Poly:
        """``A(psi(x))`` for components ``psi``; all ``psi_i`` must vanish at 0."""
        if len(comps) != self.nu:
            raise DimensionError("substitution arity mismatch")
        maxdeg = self.maxdeg if maxdeg is None else maxdeg
        nu_out = comps[0].nu
        powers = PowerCache(comps, maxdeg)
        out = Poly._raw(nu_out, maxdeg, {})
        for m, c in self._terms.items():
            out = out + powers.monomial(m).scale(c)
        return out

    @property
    def validity(self):
        return min((c.validity for c in self._terms.values()), default=EXACT)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        if self.nu != other.nu:
            return False
        for m in set(self._terms) | set(other._terms):
            if sum(m) > min(self.maxdeg, other.maxdeg):
                continue
            if not self.coefficient(m).agrees_with(other.coefficient(m)):
                return False
        return True

    __hash__ = None

    def render(self, names: Sequence[str] | None = None) -> str:
        names = names or default_names(self.nu)
        pieces = []
        for m, c in sorted(self._terms.items(), key=lambda mc: (sum(mc[0]), tuple(-k for k in mc[0]))):
            if not c:
                continue
            pieces.append(_render_scaled(c, render_monomial(m, names)))
        return " + ".join(pieces) if pieces else "0"

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"Poly({self.render()!r})"


class PowerCache:
    def __init__(self, comps: Sequence[Poly], maxdeg: int):
        self.comps = [c.truncate(maxdeg) for c in comps]
        self.maxdeg = maxdeg
        self.nu = comps[0].nu
        self.cache: dict = {}
        self.mono_cache: dict = {}

    def power(self, i: int, k: int) -> Poly:
        key = (i, k)
        if key not in self.cache:
            if k == 0:
                self.cache[key] = Poly.one(self.nu, self.maxdeg)
            else:
                self.cache[key] = self.power(i, k - 1) * self.comps[i]
        return self.cache[key]

    def monomial(self, m: Monomial) -> Poly:
        if m not in self.mono_cache:
            nz = [i for i, k in enumerate(m) if k]
            if not nz:
                result = Poly.one(self.nu, self.maxdeg)
            else:
                last = nz[-1]
                rest = m[:last] + (m[last] - 1,) + m[last + 1:]
                if sum(rest) == 0:
                    result = self.comps[last]
                else:
                    result = self.monomial(rest) * self.comps[last]
            self.mono_cache[m] = result
        return self.mono_cache[m]


class VectorField:
    """Sparse field ``sum c[n, j] x^n d/dx_j`` with ``2 <= |n| <= order + 1``."""

    __slots__ = ("nu", "order", "_terms", "_grades")

    def __init__(self, nu: int, order: int, terms: Mapping | None = None):
        self.nu = nu
        self.order = order
        clean = {}
        for (n, j), c in (terms or {}).items():
            n = tuple(n)
            if len(n) != nu or not 0 <= j < nu:
                raise DimensionError(f"term {(n, j)} does not fit {nu} variables")
            if sum(n) < 2:
                raise ValueError(f"term x^{n} d/dx_{j} has a constant or linear part")
            if sum(n) > order + 1:
                continue
            c = Coefficient.coerce(c)
            if c or c.validity != EXACT:
                clean[(n, j)] = c
        self._terms = clean
        self._grades = None

    @classmethod
    def _raw(cls, nu, order, terms) -> VectorField:
        obj = object.__new__(cls)
        obj.nu = nu
        obj.order = order
        obj._terms = terms
        obj._grades = None
        return obj

    @classmethod
    def zero(cls, nu: int, order: int) -> VectorField:
        return cls._raw(nu, order, {})

    @classmethod
    def term(cls, n: Monomial, j: int, c, order: int) -> VectorField:
        n = tuple(n)
        return cls(len(n), order, {(n, j): c})

    @classmethod
    def from_components(cls, comps: Sequence[Poly], order: int) -> VectorField:
        """Field with ``X.x_j = comps[j]``; degree-0/1 parts must vanish."""
        terms = {}
        for j, p in enumerate(comps):
            for m, c in p.items():
                if sum(m) < 2:
                    if c:
                        raise ValueError(f"component {j} has a low-degree term at {m}")
                    continue
                terms[(m, j)] = c
        return cls(len(comps), order, terms)

    # -- inspection --------------------------------------------------------
    def items(self):
        return self._terms.items()

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: (sum(kv[0][0]) - 1, tuple(-k for k in kv[0][0]), kv[0][1]))

    def coefficient(self, n: Monomial, j: int) -> Coefficient:
        return self._terms.get((tuple(n), j), Coefficient.zero())

    def is_zero(self) -> bool:
        return all(not c for c in self._terms.values())

    def _by_grade(self) -> dict:
        if self._grades is None:
            g: dict = {}
            for key, c in self._terms.items():
                g.setdefault(sum(key[0]) - 1, {})[key] = c
            self._grades = g
        return self._grades

    def grade(self, g: int) -> VectorField:
        return VectorField._raw(self.nu, self.order, dict(self._by_grade().get(g, {})))

    def grades(self) -> list[int]:
        return sorted(self._by_grade())

    def max_grade(self) -> int:
        return max((g for g, t in self._by_grade().items() if any(t.values())), default=0)

    def is_homogeneous(self, g: int) -> bool:
        return all(sum(n) - 1 == g or not c for (n, _), c in self._terms.items())

    @property
    def validity(self):
        return min((c.validity for c in self._terms.values()), default=EXACT)

    @property
    def aux(self) -> tuple:
        return _common_aux(self._terms.values())

    def component(self, j: int) -> Poly:
        return Poly._raw(self.nu, self.order + 1, {n: c for (n, jj), c in self._terms.items() if jj == j})

    def components(self) -> list[Poly]:
        return [self.component(j) for j in range(self.nu)]

    # -- linear structure --------------------------------------------------
    def _check(self, other: VectorField):
        if not isinstance(other, VectorField):
            raise TypeError(f"expected VectorField, got {type(other).__name__}")
        if self.nu != other.nu:
            raise DimensionError(f"{self.nu} vs {other.nu} variables")

    def __add__(self, other: VectorField) -> VectorField:
        self._check(other)
        order = min(self.order, other.order)
        out = {k: c for k, c in self._terms.items() if sum(k[0]) <= order + 1}
        for k, c in other._terms.items():
            if sum(k[0]) > order + 1:
                continue
            s = out[k] + c if k in out else c
            if s or s.validity != EXACT:
                out[k] = s
            else:
                out.pop(k, None)
        return VectorField._raw(self.nu, order, out)

    def __neg__(self) -> VectorField:
        return VectorField._raw(self.nu, self.order, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other: VectorField) -> VectorField:
        return self + (-other)

    def scale(self, c) -> VectorField:
        if isinstance(c, Coefficient):
            out = {}
            for k, a in self._terms.items():
                p = a * c
                if p or p.validity != EXACT:
                    out[k] = p
            return VectorField._raw(self.nu, self.order, out)
        q = rational(c)
        if not q:
            return VectorField.zero(self.nu, self.order)
        if q == 1:
            return self
        return VectorField._raw(self.nu, self.order, {k: a.scale(q) for k, a in self._terms.items()})

    __mul__ = scale
    __rmul__ = scale

    def map_terms(self, fn: Callable[[Monomial, int, Coefficient], Coefficient]) -> VectorField:
        """Apply ``fn(n, j, c)`` termwise; used for diagonal operators."""
        out = {}
        for (n, j), c in self._terms.items():
            r = fn(n, j, c)
            if r or r.validity != EXACT:
                out[(n, j)] = r
        return VectorField._raw(self.nu, self.order, out)

    def map_coefficients(self, fn: Callable[[Coefficient], Coefficient]) -> VectorField:
        return self.map_terms(lambda n, j, c: fn(c))

    def truncate_validity(self, validity) -> VectorField:
        return self.map_coefficients(lambda c: c.truncate(validity))

    def with_order(self, order: int) -> VectorField:
        return VectorField(self.nu, order, self._terms)

    def drop_zeros(self) -> VectorField:
        return VectorField._raw(self.nu, self.order, {k: c for k, c in self._terms.items() if c})

    # -- Lie structure -----------------------------------------------------
    def bracket(self, other: VectorField) -> VectorField:
        """``[X, Y] = XY - YX``; grade-additive, truncated at ``order``."""
        self._check(other)
        order = min(self.order, other.order)
        out: dict = {}
        limit = order + 2  # |n| + |m| - 1 <= order + 1

        def acc(key, c):
            out[key] = out[key] + c if key in out else c

        for (n, i), a in self._terms.items():
            dn = sum(n)
            for (m, j), b in other._terms.items():
                if dn + sum(m) > limit:
                    continue
                ab = None
                # x^n d_i (x^m) d_j
                if m[i]:
                    ab = a * b
                    key = (tuple(p + q - (k == i) for k, (p, q) in enumerate(zip(n, m))), j)
                    acc(key, ab.scale(m[i]))
                # - x^m d_j (x^n) d_i
                if n[j]:
                    if ab is None:
                        ab = a * b
                    key = (tuple(p + q - (k == j) for k, (p, q) in enumerate(zip(n, m))), i)
                    acc(key, ab.scale(-n[j]))
        out = {k: c for k, c in out.items() if c or c.validity != EXACT}
        return VectorField._raw(self.nu, order, out)

    def apply(self, poly: Poly) -> Poly:
        """Derivation action ``sum_j f_j d(poly)/dx_j``."""
        if poly.nu != self.nu:
            raise DimensionError("field and polynomial dimensions differ")
        out = Poly._raw(self.nu, poly.maxdeg, {})
        for j in range(self.nu):
            dp = poly.deriv(j)
            if dp.is_zero():
                continue
            out = out + (self.component(j).truncate(poly.maxdeg) * dp).truncate(poly.maxdeg)
        return out

    # -- comparison and rendering -----------------------------------------
    def agrees_with(self, other: VectorField, validity=None) -> bool:
        self._check(other)
        order = min(self.order, other.order)
        zero = Coefficient.zero()
        for k in set(self._terms) | set(other._terms):
            if sum(k[0]) > order + 1:
                continue
            if not self._terms.get(k, zero).agrees_with(other._terms.get(k, zero), validity):
                return False
        return True

    def __eq__(self, other) -> bool:
        if not isinstance(other, VectorField):
            return NotImplemented
        if self.nu != other.nu:
            return False
        return self.agrees_with(other)

    __hash__ = None

    def render_terms(self, names: Sequence[str] | None = None) -> list[str]:
        names = names or default_names(self.nu)
        out = []
        for (n, j), c in self.sorted_items():
            if not c:
                continue
            out.append(f"{_render_scaled(c, render_monomial(n, names))} d/d{names[j]}")
        return out

    def render(self, names: Sequence[str] | None = None) -> str:
        terms = self.render_terms(names)
        return " + ".join(terms) if terms else "0"

    def __str__(self) -> str:
        return self.render()

    def __repr__(self) -> str:
        return f"VectorField({self.render()!r})"


def render_direction(n: Monomial, j: int, names: Sequence[str] | None = None) -> str:
    names = names or default_names(len(n))
    return f"{render_monomial(n, names)} d/d{names[j]}"


def bracket(X: VectorField, Y: VectorField) -> VectorField:
    return X.bracket(Y)


def apply_derivation(X, A: Poly) -> Poly:
    """Act on ``A`` by a field or by the linear part ``X0`` of a spectrum."""
    if isinstance(X, Spectrum):
        return X.apply(A)
    return X.apply(A)


def ad_linear(lam: Spectrum, X: VectorField) -> VectorField:
    """``d(X) = [X0, X]``, diagonal on monomial terms."""
    return X.map_terms(lambda n, j, c: c.scale(ad_eigenvalue(lam, n, j)))


class NestedBrackets:
    """Graded accumulator for ``sum_s w_s ad_a^s(b)``.

    Grades of ``a`` and ``b`` are pushed in increasing order.  Before grade
    ``n`` is pushed, :meth:`correction` returns the grade-``n`` part of
    ``sum_{s>=1} w_s ad_a^s(b)``, which depends only on grades ``< n``.
    """

    def __init__(self, nu: int, order: int, weights: Callable[[int], Rational]):
        self.nu = nu
        self.order = order
        self.weights = weights
        self.a: dict[int, VectorField] = {}
        self.table: dict[tuple[int, int], VectorField] = {}
        self.pushed = 0

    def _level(self, s: int, n: int) -> VectorField:
        key = (s, n)
        if key in self.table:
            return self.table[key]
        total = VectorField.zero(self.nu, self.order)
        if n >= s + 1:
            for g in range(1, n - s + 1):
                ag = self.a.get(g)
                if ag is None or not ag._terms:
                    continue
                inner = self._level(s - 1, n - g)
                if inner._terms:
                    total = total + ag.bracket(inner)
        self.table[key] = total
        return total

    def correction(self, n: int) -> VectorField:
        if n != self.pushed + 1:
            raise ValueError(f"grade {n} requested after {self.pushed} pushes")
        total = VectorField.zero(self.nu, self.order)
        for s in range(1, n):
            level = self._level(s, n)
            if level._terms:
                total = total + level.scale(self.weights(s))
        return total

    def push(self, n: int, a_n: VectorField, b_n: VectorField) -> None:
        if n != self.pushed + 1:
            raise ValueError(f"grade {n} pushed after {self.pushed}")
        self.a[n] = a_n
        self.table[(0, n)] = b_n
        self.pushed = n


def magnus_weight(s: int) -> Rational:
    """``(-1)^s / (s+1)!``: left logarithmic derivative."""
    return mpq((-1) ** s, factorial(s + 1))


def right_magnus_weight(s: int) -> Rational:
    """``1 / (s+1)!``: right logarithmic derivative ``d(phi) phi^-1``."""
    return mpq(1, factorial(s + 1))


def conjugation_weight(s: int) -> Rational:
    """``(-1)^s / s!``: ``exp(-a) b exp(a)``."""
    return mpq((-1) ** s, factorial(s))


def homogeneous_parts(X: VectorField) -> dict[int, VectorField]:
    return {g: X.grade(g) for g in range(1, X.order + 1)}
