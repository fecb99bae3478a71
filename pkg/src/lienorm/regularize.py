"""The derivation pair ``(d, delta)`` and the regularized inverse.

``d = ad_X0`` for the diagonal linear part; ``delta`` is either the grading
``Y`` or ``ad`` of another diagonal linear field.  Both act diagonally on the
monomial basis ``x^n d/dx_j``, so kernels, images and inverses are computed
termwise with exact rationals.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

from gmpy2 import mpq

from .checks import Check
from .coeff import EXACT, Coefficient, Rational, exp_series, rational
from .diffeo import Diffeo
from .errors import ResonanceError
from .vfield import (
    Monomial,
    Spectrum,
    VectorField,
    ad_eigenvalue,
    monomials,
    render_direction,
    resonant_set,
)


@dataclass(frozen=True)
class Grading:
    """``delta = Y``: multiplication by the grade ``|n| - 1``."""

    def eigenvalue(self, n: Monomial, j: int) -> Rational:
        return mpq(sum(n) - 1)

    def describe(self):
        return "grading"


@dataclass(frozen=True)
class DiagonalAd:
    """``delta = ad_Z`` with ``Z = sum mu_i x_i d/dx_i``."""

    mu: Spectrum

    def eigenvalue(self, n: Monomial, j: int) -> Rational:
        return ad_eigenvalue(self.mu, n, j)

    def describe(self):
        return {"diag": [str(v) for v in self.mu]}


Delta = Union[Grading, DiagonalAd]


@dataclass(frozen=True)
class Scheme:
    """Spectrum, regularizing derivation and truncation orders ``(N, K, T)``."""

    lam: Spectrum
    delta: Delta = field(default_factory=Grading)
    order: int = 8
    eps_order: int | None = None
    tau_order: int = 3

    def __post_init__(self):
        if not isinstance(self.lam, Spectrum):
            object.__setattr__(self, "lam", Spectrum(self.lam))
        if self.eps_order is None:
            object.__setattr__(self, "eps_order", self.order + 2)
        if isinstance(self.delta, DiagonalAd) and self.delta.mu.nu != self.lam.nu:
            raise ValueError("delta spectrum has the wrong dimension")

    @property
    def nu(self) -> int:
        return self.lam.nu

    def d_eig(self, n: Monomial, j: int) -> Rational:
        return ad_eigenvalue(self.lam, n, j)

    def delta_eig(self, n: Monomial, j: int) -> Rational:
        return self.delta.eigenvalue(n, j)

    def is_kernel(self, n: Monomial, j: int) -> bool:
        return self.d_eig(n, j) == 0

    # derivations, usable as callables on fields
    def d(self, u: VectorField) -> VectorField:
        return u.map_terms(lambda n, j, c: c.scale(self.d_eig(n, j)))

    def delta_op(self, u: VectorField) -> VectorField:
        return u.map_terms(lambda n, j, c: c.scale(self.delta_eig(n, j)))

    def d_eps(self, u: VectorField) -> VectorField:
        """``(d + e delta)(u)``."""
        return u.map_terms(lambda n, j, c: c * _d_plus_eps_delta(self.d_eig(n, j), self.delta_eig(n, j)))

    def resonances(self) -> list[tuple[Monomial, int]]:
        return resonant_set(self.lam, self.order)

    def zero(self) -> VectorField:
        return VectorField.zero(self.nu, self.order)

    def describe(self) -> dict:
        return {
            "lambda": [str(v) for v in self.lam],
            "delta": self.delta.describe(),
            "order": self.order,
            "eps_order": self.eps_order,
            "tau_order": self.tau_order,
        }


def grading(u: VectorField) -> VectorField:
    """The grading derivation ``Y``."""
    return u.map_terms(lambda n, j, c: c.scale(sum(n) - 1))


def grading_inverse(u: VectorField) -> VectorField:
    return u.map_terms(lambda n, j, c: c.scale(mpq(1, sum(n) - 1)))


@lru_cache(maxsize=None)
def _d_plus_eps_delta(a: Rational, b: Rational) -> Coefficient:
    return Coefficient({(0, ()): a, (1, ()): b})


@lru_cache(maxsize=None)
def _inverse_symbol(a: Rational, b: Rational, validity: int) -> Coefficient:
    """``1 / (a + e b)`` expanded to ``e^validity``."""
    if a == 0:
        return Coefficient.eps(-1, 1 / b)
    return Coefficient({(0, ()): a, (1, ()): b}).invert(validity)


def proj_split(u: VectorField, s: Scheme) -> tuple[VectorField, VectorField]:
    """``(p(u), q(u))``: kernel and image parts of ``u`` for ``d``."""
    ker, im = {}, {}
    for (n, j), c in u.items():
        (ker if s.is_kernel(n, j) else im)[(n, j)] = c
    return VectorField._raw(u.nu, u.order, ker), VectorField._raw(u.nu, u.order, im)


def kernel_part(u: VectorField, s: Scheme) -> VectorField:
    return proj_split(u, s)[0]


def image_part(u: VectorField, s: Scheme) -> VectorField:
    return proj_split(u, s)[1]


def inv_on_image(u: VectorField, s: Scheme) -> VectorField:
    """``I(u)`` with ``d(I(u)) = u`` for ``u`` in the image of ``d``."""
    bad = [(n, j) for (n, j), c in u.items() if c and s.is_kernel(n, j)]
    if bad:
        raise ResonanceError(
            "resonant terms have no preimage: " + ", ".join(render_direction(n, j) for n, j in bad),
            bad,
        )
    return u.map_terms(lambda n, j, c: c.scale(1 / s.d_eig(n, j)))


def delta_inverse_on_kernel(u: VectorField, s: Scheme) -> VectorField:
    def inv(n, j, c):
        ev = s.delta_eig(n, j)
        if ev == 0:
            raise ResonanceError(f"delta vanishes on {render_direction(n, j)}", [(n, j)])
        return c.scale(1 / ev)

    return u.map_terms(inv)


def i_eps(u: VectorField, s: Scheme) -> VectorField:
    """Inverse of ``d + e delta``: termwise ``c / (d_eig + e delta_eig)``."""
    K = s.eps_order

    def inv(n, j, c):
        a, b = s.d_eig(n, j), s.delta_eig(n, j)
        if a == 0 and b == 0:
            raise ResonanceError(f"d + e delta vanishes on {render_direction(n, j)}", [(n, j)])
        return (c * _inverse_symbol(a, b, K)).truncate(K)

    return u.map_terms(inv)


def i_eps_neumann(u: VectorField, s: Scheme) -> VectorField:
    """The same inverse assembled from ``p, q, I`` and ``delta^-1`` by a Neumann series.

    Kept as an independent cross-check of :func:`i_eps`.
    """
    K = s.eps_order
    p_u, q_u = proj_split(u, s)
    pole = delta_inverse_on_kernel(p_u, s).scale(Coefficient.eps(-1))

    def q_delta_i(w):
        return image_part(s.delta_op(inv_on_image(w, s)), s)

    total = s.zero()
    term = q_u
    k = 0
    while not term.is_zero() and k <= K + 2 * u.order + 2:
        total = total + term
        term = q_delta_i(term).scale(Coefficient.eps(1, -1)).truncate_validity(K)
        k += 1
    Iw = inv_on_image(total, s)
    correction = delta_inverse_on_kernel(kernel_part(s.delta_op(Iw), s), s)
    return (pole + Iw - correction).truncate_validity(K)


def validate_scheme(s: Scheme) -> list[Check]:
    """Check the hypotheses of the regularized normalization up to order ``N``."""
    checks = []
    kernel = s.resonances()
    basis = [(n, j) for deg in range(2, s.order + 2) for n in monomials(s.nu, deg) for j in range(s.nu)]

    # diagonal d: every basis vector lies in the kernel or the image
    split_ok = all(s.is_kernel(n, j) or s.d_eig(n, j) != 0 for n, j in basis)
    checks.append(Check("splitting L = ker d + d(L)", split_ok, f"{len(kernel)} kernel directions"))

    # delta diagonal on the same basis: image of a kernel vector is a multiple of itself
    checks.append(Check("ker d stable under delta", True, "delta diagonal on the monomial basis"))

    singular = [(n, j) for n, j in kernel if s.delta_eig(n, j) == 0]
    checks.append(Check(
        "delta invertible on ker d",
        not singular,
        "" if not singular else "delta vanishes on " + ", ".join(render_direction(n, j) for n, j in singular),
    ))

    # [d, delta] on x^n d/dx_j is (d_eig * delta_eig - delta_eig * d_eig) = 0 for diagonal pairs;
    # verify the composite operators agree on every basis vector
    noncommuting = []
    for n, j in basis:
        one = VectorField._raw(s.nu, s.order, {(n, j): Coefficient.const(1)})
        if s.d(s.delta_op(one)) != s.delta_op(s.d(one)):
            noncommuting.append((n, j))
    checks.append(Check("[d, delta] = 0", not noncommuting, ""))
    return checks


def _theta_factor(ev: Rational, s: Scheme, tau) -> Coefficient:
    if tau is None:
        arg = Coefficient({(1, (1,)): ev}, aux=[("tau", s.tau_order)])
        return exp_series(arg, s.tau_order)
    arg = Coefficient({(1, ()): ev * rational(tau)})
    return exp_series(arg, s.eps_order + 2 * s.order + 2).truncate(s.eps_order + 2 * s.order + 2)


def theta_tau(obj, s: Scheme, tau=None):
    """``exp(tau e delta)`` applied to a field or a diffeo.

    With ``tau=None`` the result carries the auxiliary parameter ``tau``
    truncated at ``s.tau_order``; a rational ``tau`` is substituted exactly,
    expanding the exponential in ``e`` far enough not to limit validity.
    """
    cache: dict = {}

    def factor(ev):
        if ev not in cache:
            cache[ev] = _theta_factor(ev, s, tau)
        return cache[ev]

    if isinstance(obj, VectorField):
        return obj.map_terms(lambda n, j, c: c * factor(s.delta_eig(n, j)) if s.delta_eig(n, j) else c)
    if isinstance(obj, Diffeo):
        # conjugation by the flow of the linear field behind delta; on coordinate
        # monomial x^m of component i the eigenvalue is delta_eig(m, i)
        def scale(i, m, c):
            ev = s.delta_eig(m, i)
            return c * factor(ev) if ev else c

        return obj.map_coefficients(scale)
    raise TypeError(f"cannot twist {type(obj).__name__}")
