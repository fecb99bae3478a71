from __future__ import annotations

import random

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_diffeo, random_field, toy_field
from oracles import conjugate_oracle, lie_series_exp, log_d_oracle, poly_to_sympy, symbols
from lienorm.coeff import Coefficient
from lienorm.diffeo import (
    Diffeo,
    compose,
    conjugate_field,
    exp_field,
    invert,
    log_d_magnus,
    log_diffeo,
)
from lienorm.regularize import Scheme
from lienorm.vfield import Poly, VectorField, monomials

N = 6


def flow_y(a: Coefficient, order=N) -> Diffeo:
    """``y -> y / (1 - a y) = sum_k a^k y^(k+1)`` in one variable."""
    terms = {}
    power = Coefficient.const(1)
    for k in range(order + 1):
        terms[(k + 1,)] = power
        power = power * a
    return Diffeo([Poly(1, order + 1, terms)], order)


def test_exp_zero_is_identity():
    assert exp_field(VectorField.zero(2, N)) == Diffeo.identity(2, N)


def test_exp_of_y2_is_the_flow():
    t = Coefficient.param("t", N + 1)
    assert exp_field(VectorField(1, N, {((2,), 0): t})) == flow_y(t)


def test_exp_of_toy_field_closed_form():
    a = [2, 3, -1]
    phi = exp_field(toy_field(a, N))
    x, y = sp.symbols("s0:2")
    ax = sum(c * x**n for n, c in enumerate(a))
    closed = sp.series(y / (1 - ax * y), y, 0, N + 2).removeO()
    got = poly_to_sympy(phi.comps[1], (x, y))
    diff = sp.Poly(sp.expand(got - closed), x, y)
    assert all(sum(m) > N + 1 for m, c in diff.terms() if c != 0)
    assert phi.comps[0] == Poly.var(0, 2, N + 1)


def test_log_of_flow():
    assert log_diffeo(flow_y(Coefficient.const(5))) == VectorField(1, N, {((2,), 0): 5})
    assert log_diffeo(Diffeo.identity(2, N)).is_zero()


def test_flows_compose_additively():
    assert compose(flow_y(Coefficient.const(2)), flow_y(Coefficient.const(3))) == flow_y(Coefficient.const(5))


def test_invert_flow():
    assert invert(flow_y(Coefficient.const(4))) == flow_y(Coefficient.const(-4))


def test_compose_with_identity():
    psi = random_diffeo(random.Random(1), 2, N)
    ident = Diffeo.identity(2, N)
    assert compose(psi, ident) == psi and compose(ident, psi) == psi


def test_not_identity_tangent_rejected():
    with pytest.raises(ValueError):
        Diffeo([Poly.var(0, 1, 3).scale(2)], 2)
    with pytest.raises(ValueError):
        log_diffeo(Diffeo([Poly.var(0, 1, 3).scale(2)], 2, check=False))


def test_exp_matches_lie_series_oracle():
    rng = random.Random(3)
    xs = symbols(2)
    for _ in range(5):
        X = random_field(rng, 2, 4, nterms=3)
        phi = exp_field(X)
        for got, want in zip(phi.comps, lie_series_exp(X, xs)):
            assert sp.expand(poly_to_sympy(got, xs) - want) == 0


def test_compose_convention():
    # F_{compose(psi, phi)} A = A(phi(psi(x)))
    rng = random.Random(4)
    xs = symbols(2)
    psi, phi = random_diffeo(rng, 2, 3, nterms=2), random_diffeo(rng, 2, 3, nterms=2)
    A = Poly(2, 4, {(1, 1): 1, (2, 0): 3})
    got = poly_to_sympy(compose(psi, phi).act(A), xs)
    ps = [poly_to_sympy(p, xs) for p in psi.comps]
    ph = [poly_to_sympy(p, xs) for p in phi.comps]
    inner = [e.subs(dict(zip(xs, ps)), simultaneous=True) for e in ph]
    want = poly_to_sympy(A, xs).subs(dict(zip(xs, inner)), simultaneous=True)
    diff = sp.Poly(sp.expand(got - want), *xs)
    assert all(sum(m) > 4 for m, c in diff.terms() if c != 0)


def test_log_d_of_toy_flow():
    # d = ad_{x d/dx}: log_d exp(a(x) y^2 d/dy) = x a'(x) y^2 d/dy
    s = Scheme((1, 0), order=N)
    a = [2, 3, 5, -1]
    got = log_d_magnus(exp_field(toy_field(a, N)), s.d)
    assert got == toy_field([n * c for n, c in enumerate(a)], N)


def test_conjugation_in_abelian_toy_algebra():
    phi = exp_field(VectorField(2, N, {((1, 2), 1): 1}))
    v = VectorField(2, N, {((0, 2), 1): 1})
    assert conjugate_field(phi, v) == v
    assert conjugate_field(Diffeo.identity(2, N), v) == v


seeds = st.integers(0, 10**6)
LAMS = [(2, 5), (1, -1), (1, 0)]


@given(seeds)
@settings(max_examples=25, deadline=None)
def test_exp_log_bijection(seed):
    rng = random.Random(seed)
    X = random_field(rng, 2, N, nterms=5)
    assert log_diffeo(exp_field(X)) == X
    psi = random_diffeo(rng, 2, N)
    assert exp_field(log_diffeo(psi)) == psi


@given(seeds, st.sampled_from(LAMS))
@settings(max_examples=20, deadline=None)
def test_log_d_matches_operator_oracle(seed, lam):
    rng = random.Random(seed)
    psi = random_diffeo(rng, 2, 5)
    assert log_d_magnus(psi, Scheme(lam, order=5).d) == log_d_oracle(psi, lam)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_conjugation_matches_operator_oracle(seed):
    rng = random.Random(seed)
    psi = random_diffeo(rng, 2, 5)
    v = random_field(rng, 2, 5)
    assert conjugate_field(psi, v) == conjugate_oracle(psi, v)


@given(seeds, st.sampled_from(LAMS))
@settings(max_examples=20, deadline=None)
def test_cocycle_and_inverse_identity(seed, lam):
    rng = random.Random(seed)
    d = Scheme(lam, order=5).d
    p1, p2 = random_diffeo(rng, 2, 5), random_diffeo(rng, 2, 5)
    lhs = log_d_magnus(compose(p1, p2), d)
    assert lhs == log_d_magnus(p2, d) + conjugate_field(p2, log_d_magnus(p1, d))
    inv = invert(p1)
    assert log_d_magnus(inv, d) == -conjugate_field(inv, log_d_magnus(p1, d))


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_substitution_is_multiplicative(seed):
    rng = random.Random(seed)
    psi = random_diffeo(rng, 2, 5)
    pool = [m for deg in range(0, 4) for m in monomials(2, deg)]
    A = Poly(2, 6, {m: rng.randint(-3, 3) for m in rng.sample(pool, 3)})
    B = Poly(2, 6, {m: rng.randint(-3, 3) for m in rng.sample(pool, 3)})
    assert psi.act(A * B) == psi.act(A) * psi.act(B)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_invert_is_two_sided(seed):
    psi = random_diffeo(random.Random(seed), 2, N)
    ident = Diffeo.identity(2, N)
    assert compose(psi, invert(psi)) == ident and compose(invert(psi), psi) == ident
