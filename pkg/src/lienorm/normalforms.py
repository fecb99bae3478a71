"""Normal forms, linearization, the correction and related graded recursions.

All recursions run grade by grade.  At grade ``n`` the Lie polynomials coming
from the logarithmic derivative (weights ``(-1)^s/(s+1)!``) and from the
conjugation ``exp(-a) v exp(a)`` (weights ``(-1)^s/s!``) only involve grades
``< n``; the grade-``n`` unknown is then obtained by a termwise inverse.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .birkhoff import BirkhoffPair, birkhoff_decompose, with_beta
from .checks import Check
from .coeff import EXACT
from .diffeo import Diffeo, conjugate_field, exp_field, log_d_magnus
from .errors import InvariantError, ResonanceError, ValidityError
from .regularize import (
    Scheme,
    delta_inverse_on_kernel,
    grading,
    grading_inverse,
    i_eps,
    image_part,
    inv_on_image,
    kernel_part,
    proj_split,
)
from .vfield import (
    NestedBrackets,
    PowerCache,
    Poly,
    VectorField,
    conjugation_weight,
    magnus_weight,
    monomials,
    render_direction,
    render_monomial,
    default_names,
    right_magnus_weight,
)

KernelInjection = Callable[[int], VectorField]


@dataclass(frozen=True)
class ConjugacyCertificate:
    """``phi`` conjugates ``u`` to ``v``: ``(X0 + v) F_phi = F_phi (X0 + u)``."""

    u: VectorField
    v: VectorField
    phi: Diffeo
    scheme: Scheme
    kind: str
    alpha: VectorField | None = None


@dataclass(frozen=True)
class ConjugacyReport:
    lie_level: bool
    operator_level: bool
    violations: tuple = ()

    @property
    def passed(self) -> bool:
        return self.lie_level and self.operator_level

    def as_checks(self) -> list[Check]:
        lie = [v for v in self.violations if v.startswith("lie")]
        op = [v for v in self.violations if v.startswith("operator")]
        return [
            Check("log_d(phi) + phi^-1 v phi = u", self.lie_level, "; ".join(lie[:3])),
            Check("(X0 + v) F = F (X0 + u) on monomials", self.operator_level, "; ".join(op[:3])),
        ]


def _require_resonance_free(s: Scheme) -> None:
    res = s.resonances()
    if res:
        raise ResonanceError(
            "d is not invertible; resonant terms: " + ", ".join(render_direction(n, j) for n, j in res),
            res,
        )


def _solve_log(u: VectorField, d, inverse) -> VectorField:
    """Generator ``alpha`` with ``log_d(exp(alpha)) = u`` for an invertible ``d``."""
    nu, order = u.nu, u.order
    P = NestedBrackets(nu, order, magnus_weight)
    alpha = VectorField.zero(nu, order)
    for n in range(1, order + 1):
        a_n = inverse(u.grade(n) - P.correction(n))
        P.push(n, a_n, d(a_n))
        alpha = alpha + a_n
    return alpha


def exp_d_generator(u: VectorField, s: Scheme, regularized: bool = False) -> VectorField:
    """``alpha`` such that ``exp(alpha)`` solves ``log_d(phi) = u``.

    With ``regularized`` the derivation is ``d + e delta`` and the result has
    Laurent coefficients; otherwise ``d`` must be invertible up to the order.
    """
    if regularized:
        return _solve_log(u, s.d_eps, lambda w: i_eps(w, s))
    _require_resonance_free(s)
    return _solve_log(u, s.d, lambda w: inv_on_image(w, s))


def exp_d_solve(u: VectorField, s: Scheme, regularized: bool = False) -> Diffeo:
    return exp_field(exp_d_generator(u, s, regularized))


def _injected(kernel_injection, n, s):
    if kernel_injection is None:
        return None
    z = kernel_injection(n)
    if z is None:
        return None
    if not z.is_homogeneous(n) or not image_part(z, s).is_zero():
        raise ValueError(f"kernel injection at grade {n} must be a grade-{n} element of ker d")
    return z


def normal_form_direct(u: VectorField, s: Scheme, kernel_injection: KernelInjection | None = None
                       ) -> ConjugacyCertificate:
    """A normal form in ``ker d`` with its conjugator (free kernel parts of ``alpha`` set to zero)."""
    nu, order = u.nu, u.order
    P = NestedBrackets(nu, order, magnus_weight)
    Q = NestedBrackets(nu, order, conjugation_weight)
    alpha = VectorField.zero(nu, order)
    v = VectorField.zero(nu, order)
    for n in range(1, order + 1):
        rest = u.grade(n) - P.correction(n) - Q.correction(n)
        v_n, im = proj_split(rest, s)
        a_n = inv_on_image(im, s)
        z = _injected(kernel_injection, n, s)
        if z is not None:
            a_n = a_n + z
        P.push(n, a_n, s.d(a_n))
        Q.push(n, a_n, v_n)
        alpha = alpha + a_n
        v = v + v_n
    return ConjugacyCertificate(u, v.drop_zeros(), exp_field(alpha), s, "direct", alpha)


def normal_form_ecalle_vallet(u: VectorField, s: Scheme) -> ConjugacyCertificate:
    """The normal form singled out by ``p((delta phi) phi^-1) = 0``."""
    from .regularize import validate_scheme

    failed = [c for c in validate_scheme(s) if not c.passed]
    if failed:
        raise ValueError("invalid scheme: " + "; ".join(f"{c.name} ({c.detail})" for c in failed))
    nu, order = u.nu, u.order
    P = NestedBrackets(nu, order, magnus_weight)
    Q = NestedBrackets(nu, order, conjugation_weight)
    R = NestedBrackets(nu, order, right_magnus_weight)
    alpha = VectorField.zero(nu, order)
    v = VectorField.zero(nu, order)
    for n in range(1, order + 1):
        rest = u.grade(n) - P.correction(n) - Q.correction(n)
        v_n, im = proj_split(rest, s)
        a_n = inv_on_image(im, s)
        # grade n of (delta phi) phi^-1 is delta(a_n) + R; fix the kernel part of a_n
        target = kernel_part(s.delta_op(a_n) + R.correction(n), s)
        a_n = a_n - delta_inverse_on_kernel(target, s)
        P.push(n, a_n, s.d(a_n))
        Q.push(n, a_n, v_n)
        R.push(n, a_n, s.delta_op(a_n))
        alpha = alpha + a_n
        v = v + v_n
    return ConjugacyCertificate(u, v.drop_zeros(), exp_field(alpha), s, "ecalle_vallet", alpha)


def renormalized_normal_form(u: VectorField, s: Scheme) -> tuple[ConjugacyCertificate, BirkhoffPair]:
    """Regularize, Birkhoff-factor, and keep ``plus`` at ``e = 0``.

    The conjugator is ``phi_ren = plus|_{e=0}`` and the normal form is
    ``beta = log_{d + e delta}(minus)``.
    """
    if any(not c.is_eps_free() for _, c in u.items()):
        raise ValueError("input field must not depend on e")
    phi = exp_d_solve(u, s, regularized=True)
    pair = with_beta(birkhoff_decompose(phi, s), s)
    try:
        phi_ren = pair.plus.map_coefficients(lambda i, m, c: c.eval_eps_zero())
    except ValidityError as exc:
        raise ValidityError(f"{exc} (e-order {s.eps_order} too small for order {s.order})") from None
    cert = ConjugacyCertificate(u, pair.beta, phi_ren, s, "renormalized")
    report = check_conjugacy(cert)
    if not report.passed:
        raise InvariantError("renormalized conjugator failed verification: " + "; ".join(report.violations[:3]))
    return cert, pair


def correction(u: VectorField, s: Scheme, kernel_injection: KernelInjection | None = None
               ) -> tuple[VectorField, Diffeo]:
    """``(u_c, phi)`` with ``u_c`` in ``ker d`` and ``log_d(phi) = u - u_c``."""
    nu, order = u.nu, u.order
    P = NestedBrackets(nu, order, magnus_weight)
    alpha = VectorField.zero(nu, order)
    u_c = VectorField.zero(nu, order)
    for n in range(1, order + 1):
        c_n, im = proj_split(u.grade(n) - P.correction(n), s)
        a_n = inv_on_image(im, s)
        z = _injected(kernel_injection, n, s)
        if z is not None:
            a_n = a_n + z
        P.push(n, a_n, s.d(a_n))
        alpha = alpha + a_n
        u_c = u_c + c_n
    return u_c.drop_zeros(), exp_field(alpha)


def correction_additive(u: VectorField, s: Scheme) -> VectorField:
    """The correction recovered by splitting ``log_{d + e delta}`` additively."""
    D = s.d_eps
    nu, order = u.nu, u.order
    alpha = exp_d_generator(u, s, regularized=True)
    P = NestedBrackets(nu, order, magnus_weight)
    P_plus = NestedBrackets(nu, order, magnus_weight)
    P_minus = NestedBrackets(nu, order, magnus_weight)
    gamma = VectorField.zero(nu, order)
    for n in range(1, order + 1):
        a_n = alpha.grade(n)
        m_corr = P_minus.correction(n)
        shifted = a_n + i_eps(P.correction(n) - P_plus.correction(n) - m_corr, s)
        for (_, _), c in shifted.items():
            if c.validity < -1:
                raise ValidityError(f"grade {n} known only to e^{c.validity}; increase the e-order")
        neg_part = shifted.map_coefficients(lambda c: c.split_ms()[0])
        pos_part = shifted.map_coefficients(lambda c: c.split_ms()[1])
        gamma = gamma + D(neg_part) + m_corr
        P.push(n, a_n, D(a_n))
        P_plus.push(n, pos_part, D(pos_part))
        P_minus.push(n, neg_part, D(neg_part))
    gamma = gamma.drop_zeros()
    bad = [k for k, c in gamma.items() if not c.is_eps_free() or c.validity < 0]
    if bad:
        raise InvariantError(f"additive counterterm is not e-free at {bad[:5]}: {gamma}")
    if not image_part(gamma, s).is_zero():
        raise InvariantError(f"additive counterterm has an image part: {gamma}")
    return gamma.map_coefficients(lambda c: c.eps_coefficient(0))


def dynkin_log(phi: Diffeo) -> VectorField:
    """``log_Y(phi)`` for the grading derivation ``Y``."""
    return log_d_magnus(phi, grading)


def dynkin_exp(u: VectorField) -> Diffeo:
    return exp_field(_solve_log(u, grading, grading_inverse))


def lseries(x: VectorField, s: Scheme, n_max: int) -> list[VectorField]:
    """``L[1] = I(delta x)``, ``L[n+1] = I([L[n], x])`` for grade-1 ``x``."""
    if not x.is_homogeneous(1):
        raise ValueError("lseries needs a field homogeneous of grade 1")
    _require_resonance_free(s)
    out = [inv_on_image(s.delta_op(x), s)]
    while len(out) < n_max:
        out.append(inv_on_image(out[-1].bracket(x), s))
    return out


def _operator_violations(cert: ConjugacyCertificate, names) -> list[str]:
    s, phi, u, v = cert.scheme, cert.phi, cert.u, cert.v
    nu, order = phi.nu, phi.order
    maxdeg = order + 1
    powers = PowerCache(phi.comps, maxdeg)

    def F(poly: Poly) -> Poly:
        out = Poly._raw(nu, maxdeg, {})
        for m, c in poly.items():
            out = out + powers.monomial(m).scale(c)
        return out

    out = []
    for deg in range(1, maxdeg + 1):
        for m in monomials(nu, deg):
            A = Poly.monomial(m, nu, maxdeg)
            FA = powers.monomial(m)
            lhs = s.lam.apply(FA) + v.apply(FA)
            rhs = F(s.lam.apply(A) + u.apply(A))
            diff = lhs - rhs
            if not diff.is_zero():
                out.append(f"operator identity fails on {render_monomial(m, names)}: residual {diff.render(names)}")
    return out


def check_conjugacy(cert: ConjugacyCertificate, names=None) -> ConjugacyReport:
    """Verify a certificate at the Lie level and as an operator identity."""
    s = cert.scheme
    names = names or default_names(cert.u.nu)
    violations = []
    lhs = log_d_magnus(cert.phi, s.d) + conjugate_field(cert.phi, cert.v)
    diff = (lhs - cert.u).drop_zeros()
    lie_ok = diff.is_zero()
    if not lie_ok:
        violations.extend(f"lie identity residual at {t}" for t in diff.render_terms(names))
    op = _operator_violations(cert, names)
    violations.extend(op)
    return ConjugacyReport(lie_ok, not op, tuple(violations))


def linearize(u: VectorField, s: Scheme) -> ConjugacyCertificate:
    """Conjugate ``u`` to zero; needs a resonance-free spectrum up to the order."""
    alpha = exp_d_generator(u, s)
    return ConjugacyCertificate(u, VectorField.zero(u.nu, u.order), exp_field(alpha), s, "linearization", alpha)


def correction_certificate(u: VectorField, s: Scheme) -> ConjugacyCertificate:
    """The correction as a certificate.

    Only ``log_d(phi) = u - u_c`` is guaranteed, so the certificate states
    that ``phi`` conjugates ``u - u_c`` to zero.
    """
    u_c, phi = correction(u, s)
    return ConjugacyCertificate((u - u_c).drop_zeros(), VectorField.zero(u.nu, u.order), phi, s, "correction")
