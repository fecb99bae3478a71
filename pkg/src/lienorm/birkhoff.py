"""Minimal-subtraction Birkhoff factorization of e-dependent diffeomorphisms.

The factorization ``phi = phi_minus phi_plus`` (operator product) is computed
on coordinates, degree by degree: ``phi_i = plus_i(minus(x))``.  At each
degree the cross terms coming from lower degrees are removed and the rest is
split into its polar and regular parts.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .checks import Check
from .coeff import EXACT, Coefficient
from .diffeo import Diffeo, compose, log_d_magnus
from .errors import InvariantError, ValidityError
from .regularize import Scheme, kernel_part, image_part, theta_tau
from .vfield import Poly, VectorField


@dataclass(frozen=True)
class BirkhoffPair:
    minus: Diffeo
    plus: Diffeo
    beta: VectorField | None = None
    residue: VectorField | None = None
    checks: tuple = field(default=())

    def recompose(self) -> Diffeo:
        return compose(self.minus, self.plus)


def _identity_comps(nu, order):
    return [Poly.var(i, nu, order + 1) for i in range(nu)]


def birkhoff_decompose(phi: Diffeo, s: Scheme | None = None) -> BirkhoffPair:
    """Factor ``phi`` into a pole-only ``minus`` and a pole-free ``plus``."""
    nu, order = phi.nu, phi.order
    minus = _identity_comps(nu, order)
    plus = _identity_comps(nu, order)
    for degree in range(2, order + 2):
        # lower-degree factors, composed, give the cross terms at this degree
        current = compose(Diffeo(minus, order, check=False), Diffeo(plus, order, check=False))
        for i in range(nu):
            residual = phi.comps[i].degree_part(degree) - current.comps[i].degree_part(degree)
            neg_terms, pos_terms = {}, {}
            for m, c in residual.items():
                if c.validity < -1:
                    raise ValidityError(
                        f"pole part at degree {degree} known only to e^{c.validity}; increase the e-order"
                    )
                neg, pos = c.split_ms()
                if neg or neg.validity != EXACT:
                    neg_terms[m] = neg
                if pos or pos.validity != EXACT:
                    pos_terms[m] = pos
            minus[i] = minus[i] + Poly._raw(nu, order + 1, neg_terms)
            plus[i] = plus[i] + Poly._raw(nu, order + 1, pos_terms)
    return BirkhoffPair(Diffeo(minus, order, check=False), Diffeo(plus, order, check=False))


def factor_membership(pair: BirkhoffPair) -> list[Check]:
    """Every coefficient of ``minus - id`` is polar, of ``plus - id`` regular."""
    bad_minus, bad_plus = [], []
    for i, p in enumerate(pair.minus.minus_identity()):
        for m, c in p.items():
            if any(e >= 0 for (e, _), _c in c.items()):
                bad_minus.append((i, m))
    for i, p in enumerate(pair.plus.minus_identity()):
        for m, c in p.items():
            if any(e < 0 for (e, _), _c in c.items()):
                bad_plus.append((i, m))
    return [
        Check("minus factor is polar", not bad_minus, str(bad_minus[:5]) if bad_minus else ""),
        Check("plus factor is regular", not bad_plus, str(bad_plus[:5]) if bad_plus else ""),
    ]


def residue_field(minus: Diffeo) -> VectorField:
    """Coefficient of ``e^-1`` in ``minus - id``, read as a vector field."""
    comps = []
    for p in minus.minus_identity():
        comps.append(Poly(p.nu, p.maxdeg, {m: c.eps_coefficient(-1) for m, c in p.items()}))
    return VectorField.from_components(comps, minus.order)


def beta_and_residue(pair: BirkhoffPair, s: Scheme) -> tuple[VectorField, VectorField]:
    """``beta = log_{d + e delta}(minus)`` and the residue of ``minus``.

    Raises :class:`InvariantError` unless ``beta`` is e-free, lies in the
    kernel of ``d``, and equals ``delta`` of the residue.
    """
    beta = log_d_magnus(pair.minus, s.d_eps).drop_zeros()
    residue = residue_field(pair.minus).drop_zeros()
    not_free = [k for k, c in beta.items() if not c.is_eps_free()]
    if not_free:
        raise InvariantError(f"beta is not e-free at {not_free[:5]}: {beta}")
    if not image_part(beta, s).is_zero():
        raise InvariantError(f"beta has a nonzero image part: {image_part(beta, s)}")
    if s.delta_op(residue) != beta:
        raise InvariantError(f"delta(residue) = {s.delta_op(residue)} differs from beta = {beta}")
    return beta, residue


def with_beta(pair: BirkhoffPair, s: Scheme) -> BirkhoffPair:
    beta, residue = beta_and_residue(pair, s)
    checks = tuple(factor_membership(pair)) + (
        Check("beta e-free and in ker d", True, ""),
        Check("delta(Res minus) = beta", True, ""),
    )
    return replace(pair, beta=beta, residue=residue, checks=checks)


@dataclass(frozen=True)
class LocalityReport:
    local: bool
    offending: tuple = ()

    def as_check(self) -> Check:
        detail = "" if self.local else "tau-dependent counterterm at " + ", ".join(self.offending[:5])
        return Check("delta-locality of the counterterm", self.local, detail)


def check_locality(phi: Diffeo, s: Scheme) -> LocalityReport:
    """Twist ``phi`` by ``exp(tau e delta)`` and require a tau-free pole factor."""
    if s.tau_order < 1:
        raise ValueError("locality needs tau order >= 1")
    pair = birkhoff_decompose(theta_tau(phi, s), s)
    offending = []
    for i, p in enumerate(pair.minus.comps):
        for m, c in p.items():
            if c.depends_on("tau"):
                offending.append(f"component {i} monomial {m}")
    return LocalityReport(not offending, tuple(offending))
