from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lienorm.cli import parse_coefficient
from lienorm.coeff import Coefficient, coeff_arith, coeff_invert, eval_eps_zero, rational, split_ms
from lienorm.errors import AuxMismatchError, NotInvertibleError, ValidityError

E = Coefficient.eps


def laurent(draw_terms, validity):
    return Coefficient({(e, ()): q for e, q in draw_terms}, validity)


rationals = st.builds(Fraction, st.integers(-30, 30), st.integers(1, 6))
series = st.builds(
    laurent,
    st.lists(st.tuples(st.integers(-3, 6), rationals), max_size=4),
    st.integers(4, 8),
)


def test_rational_accepts_exact_inputs_only():
    assert rational("3/6") == rational(Fraction(1, 2))
    assert rational(-4) == -4
    with pytest.raises(TypeError):
        rational(0.5)
    with pytest.raises(TypeError):
        rational(True)


def test_reduced_form():
    q = rational("-6/4")
    assert (q.numerator, q.denominator) == (-3, 2)


def test_pole_times_eps_is_one():
    assert coeff_arith(E(-1), E(1), "mul") == 1


def test_sum_example():
    a = Coefficient({(-1, ()): 2, (0, ()): 3})
    b = Coefficient({(0, ()): 1, (1, ()): 1})
    assert str(coeff_arith(a, b, "add")) == "2*e^-1 + 4 + e"


def test_aux_product_truncates_at_declared_order():
    tau = Coefficient({(1, (1,)): 1}, aux=[("tau", 2)])
    one_plus = Coefficient.const(1, aux=[("tau", 2)]) + tau
    sq = one_plus * one_plus
    assert str(sq) == "1 + 2*e*tau + e^2*tau^2"
    cube = sq * one_plus
    assert not any(m[0] > 2 for (_, m), _ in cube.items())


def test_mismatched_aux_orders_rejected():
    a = Coefficient.param("t", 2)
    b = Coefficient.param("t", 3)
    with pytest.raises(AuxMismatchError):
        a + b


def test_product_validity_rule():
    a = Coefficient({(-2, ()): 1}, validity=5)
    b = Coefficient({(0, ()): 1, (1, ()): 1}, validity=4)
    assert (a * b).validity == min(5 + 0, 4 - 2)


def test_invert_examples():
    geo = coeff_invert(1 + E(1), 5)
    assert str(geo) == "1 - e + e^2 - e^3 + e^4 - e^5 + O(e^6)"
    assert coeff_invert(E(1, 2), 3) == E(-1, Fraction(1, 2))
    inv = coeff_invert(1 + E(1, 2), 3)
    assert [inv.eps_coefficient(k).as_rational() for k in range(4)] == [1, -2, 4, -8]


def test_invert_rejects_aux_lead():
    with pytest.raises(NotInvertibleError):
        Coefficient.param("t", 2).invert(3)
    with pytest.raises(NotInvertibleError):
        Coefficient.zero().invert(3)


def test_split_examples():
    neg, pos = split_ms(Coefficient({(-2, ()): 2, (0, ()): 3, (1, ()): 1}))
    assert str(neg) == "2*e^-2" and str(pos) == "3 + e"
    neg, pos = split_ms(Coefficient.const(5))
    assert neg.is_exact_zero() and pos == 5
    tau = Coefficient({(-1, (0,)): 1, (-1, (1,)): 1}, aux=[("tau", 3)])
    neg, pos = split_ms(tau)
    assert neg == tau and pos.is_zero()


def test_eval_eps_zero_examples():
    assert eval_eps_zero(3 + E(1)) == 3
    with pytest.raises(ValidityError):
        eval_eps_zero(E(-1) + 1)
    assert eval_eps_zero((Coefficient.const(1) + E(1, 2)).invert(4).scale(3)) == 3
    with pytest.raises(ValidityError):
        eval_eps_zero(Coefficient.zero(validity=-1))


def test_eps_coefficient_beyond_validity():
    with pytest.raises(ValidityError):
        Coefficient.const(1).truncate(2).eps_coefficient(3)


def test_substitute_aux():
    c = Coefficient({(0, (0,)): 1, (1, (2,)): 3}, aux=[("tau", 3)])
    assert c.substitute_aux("tau", 2) == Coefficient({(0, ()): 1, (1, ()): 12})


@given(series, series, series)
@settings(max_examples=60, deadline=None)
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a
    assert a * b == b * a


@given(series)
@settings(max_examples=60, deadline=None)
def test_split_is_a_projection_pair(a):
    neg, pos = a.split_ms()
    assert neg + pos == a
    assert neg.split_ms()[0] == neg and neg.split_ms()[1].is_zero()
    assert pos.split_ms()[1] == pos and pos.split_ms()[0].is_zero()


@given(series, st.integers(2, 8))
@settings(max_examples=60, deadline=None)
def test_invert_is_inverse(a, target):
    if a.is_zero():
        return
    inv = a.invert(target)
    prod = a * inv
    assert prod.agrees_with(1)
    assert inv.validity <= target
    assert prod.validity >= min(target + a.min_exponent, a.validity - a.min_exponent)


@given(series)
@settings(max_examples=60, deadline=None)
def test_render_parse_round_trip(a):
    assert parse_coefficient(str(a)) == a
    assert parse_coefficient(str(a)).validity == a.validity


def test_render_parse_round_trip_with_aux():
    aux = [("t", 3), ("tau", 2)]
    c = Coefficient({(-1, (1, 0)): Fraction(-2, 3), (0, (0, 0)): 1, (2, (3, 2)): 5}, validity=4, aux=aux)
    text = str(c)
    assert text == "-2/3*e^-1*t + 1 + 5*e^2*t^3*tau^2 + O(e^5)"
    back = parse_coefficient(text, aux)
    assert back == c and back.aux == c.aux
