"""Identity-tangent formal diffeomorphisms as substitution automorphisms.

A :class:`Diffeo` ``psi`` acts on polynomials by ``F_psi . A = A(psi(x))``.
Operator products and coordinate composition are related by
``F_psi F_phi = F_{phi o psi}``; :func:`compose` follows the operator order,
so ``compose(psi, phi)`` is the diffeo with coordinates ``phi_i(psi(x))``.
"""
from __future__ import annotations

from typing import Callable, Sequence

from gmpy2 import mpq

from .coeff import EXACT, Coefficient
from .errors import DimensionError
from .vfield import (
    NestedBrackets,
    Poly,
    VectorField,
    conjugation_weight,
    default_names,
    magnus_weight,
)

Derivation = Callable[[VectorField], VectorField]


class Diffeo:
    """Components ``psi_i = x_i + O(|x|^2)`` truncated at degree ``order + 1``."""

    __slots__ = ("nu", "order", "comps")

    def __init__(self, comps: Sequence[Poly], order: int, check: bool = True):
        self.nu = len(comps)
        self.order = order
        self.comps = tuple(p.truncate(order + 1) for p in comps)
        if any(p.maxdeg < order + 1 for p in self.comps):
            self.comps = tuple(Poly._raw(p.nu, order + 1, dict(p.items())) for p in self.comps)
        if check:
            for i, p in enumerate(self.comps):
                if p.nu != self.nu:
                    raise DimensionError("component dimension mismatch")
                for m, c in p.items():
                    d = sum(m)
                    if d == 0 and c:
                        raise ValueError(f"component {i} has a constant term")
                    if d == 1:
                        want = 1 if m[i] == 1 else 0
                        if not c.agrees_with(want):
                            raise ValueError(f"component {i} is not identity-tangent")
                if not p.coefficient(tuple(int(k == i) for k in range(self.nu))).agrees_with(1):
                    raise ValueError(f"component {i} is not identity-tangent")

    @classmethod
    def identity(cls, nu: int, order: int) -> Diffeo:
        return cls([Poly.var(i, nu, order + 1) for i in range(nu)], order, check=False)

    def act(self, poly: Poly) -> Poly:
        """``F_psi . A = A(psi(x))``."""
        return poly.substitute(self.comps, poly.maxdeg)

    def minus_identity(self) -> list[Poly]:
        return [p - Poly.var(i, self.nu, self.order + 1) for i, p in enumerate(self.comps)]

    def map_coefficients(self, fn: Callable[[int, tuple, Coefficient], Coefficient]) -> Diffeo:
        """Apply ``fn(i, m, c)`` to every coefficient of every component."""
        comps = [p.map_coefficients(lambda m, c, i=i: fn(i, m, c)) for i, p in enumerate(self.comps)]
        return Diffeo(comps, self.order, check=False)

    @property
    def validity(self):
        return min((p.validity for p in self.comps), default=EXACT)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Diffeo):
            return NotImplemented
        return self.nu == other.nu and all(a == b for a, b in zip(self.comps, other.comps))

    __hash__ = None

    def render(self, names: Sequence[str] | None = None) -> dict[str, str]:
        names = names or default_names(self.nu)
        return {name: p.render(names) for name, p in zip(names, self.comps)}

    def __repr__(self) -> str:
        return f"Diffeo({self.render()})"


def _check_pair(a, b):
    if a.nu != b.nu:
        raise DimensionError(f"{a.nu} vs {b.nu} variables")


def exp_field(X: VectorField) -> Diffeo:
    """``psi_i = sum_s X^s(x_i) / s!``; finite because ``X`` raises degree."""
    nu, order = X.nu, X.order
    comps = []
    for i in range(nu):
        term = Poly.var(i, nu, order + 1)
        total = term
        for s in range(1, order + 1):
            term = X.apply(term).scale(mpq(1, s))
            if term.is_zero() and term.validity == EXACT:
                break
            total = total + term
        comps.append(total)
    return Diffeo(comps, order, check=False)


def log_diffeo(psi: Diffeo) -> VectorField:
    """``log F = sum_s (-1)^(s-1)/s (F - Id)^s`` evaluated on coordinates."""
    nu, order = psi.nu, psi.order
    for i, p in enumerate(psi.comps):
        for m, c in p.items():
            if sum(m) <= 1 and not c.agrees_with(1 if m[i] == 1 and sum(m) == 1 else 0):
                raise ValueError("log is only defined on identity-tangent diffeomorphisms")
    comps = []
    for i in range(nu):
        term = Poly.var(i, nu, order + 1)
        total = Poly._raw(nu, order + 1, {})
        for s in range(1, order + 1):
            term = psi.act(term) - term
            if term.is_zero() and term.validity == EXACT:
                break
            total = total + term.scale(mpq((-1) ** (s - 1), s))
        comps.append(total)
    return VectorField.from_components(comps, order)


def compose(psi: Diffeo, phi: Diffeo) -> Diffeo:
    """Operator product ``F_psi F_phi``: coordinates ``phi_i(psi(x))``."""
    _check_pair(psi, phi)
    order = min(psi.order, phi.order)
    comps = [p.substitute(psi.comps, order + 1) for p in phi.comps]
    return Diffeo(comps, order, check=False)


def invert(psi: Diffeo) -> Diffeo:
    """Compositional inverse, by fixed-point iteration ``chi = x - h(chi)``."""
    nu, order = psi.nu, psi.order
    h = psi.minus_identity()
    x = [Poly.var(i, nu, order + 1) for i in range(nu)]
    chi = list(x)
    for _ in range(order):
        chi = [x[i] - h[i].substitute(chi, order + 1) for i in range(nu)]
    return Diffeo(chi, order, check=False)


def _graded_series(alpha: VectorField, b_of: Callable[[int, VectorField], VectorField], weight) -> VectorField:
    order = alpha.order
    acc = NestedBrackets(alpha.nu, order, weight)
    total = VectorField.zero(alpha.nu, order)
    for n in range(1, order + 1):
        a_n = alpha.grade(n)
        b_n = b_of(n, a_n)
        total = total + b_n + acc.correction(n)
        acc.push(n, a_n, b_n)
    return total


def log_d_generator(alpha: VectorField, d: Derivation) -> VectorField:
    """``sum_s (-1)^s/(s+1)! ad_alpha^s(d(alpha))``, grade by grade."""
    return _graded_series(alpha, lambda n, a_n: d(a_n), magnus_weight)


def log_d_magnus(phi: Diffeo, d: Derivation) -> VectorField:
    """Logarithmic derivative ``phi^-1 d(phi)`` for a graded derivation ``d``."""
    return log_d_generator(log_diffeo(phi), d)


def conjugate_generator(alpha: VectorField, v: VectorField) -> VectorField:
    """``exp(-alpha) v exp(alpha) = sum_i (-1)^i/i! ad_alpha^i(v)``."""
    return _graded_series(alpha, lambda n, a_n: v.grade(n), conjugation_weight)


def conjugate_field(phi: Diffeo, v: VectorField) -> VectorField:
    """``phi^-1 v phi`` in operator terms."""
    _check_pair(phi, v)
    return conjugate_generator(log_diffeo(phi), v)
