from __future__ import annotations

import random
from fractions import Fraction
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lienorm.coeff import Coefficient
from lienorm.diffeo import Diffeo
from lienorm.regularize import Scheme
from lienorm.vfield import Poly, VectorField, monomials

DATA = Path(__file__).parent / "data"


def random_rational(rng: random.Random, size: int = 9):
    num = rng.randint(-size, size)
    while num == 0:
        num = rng.randint(-size, size)
    return Fraction(num, rng.randint(1, 4))


def random_field(rng, nu, order, grades=None, nterms=4, kernel_of=None, image_of=None):
    """A sparse random field; ``kernel_of``/``image_of`` restrict to ker d or its complement."""
    grades = grades or range(1, order + 1)
    basis = [
        (n, j)
        for g in grades
        for n in monomials(nu, g + 1)
        for j in range(nu)
    ]
    if kernel_of is not None:
        basis = [b for b in basis if kernel_of.is_kernel(*b)]
    if image_of is not None:
        basis = [b for b in basis if not image_of.is_kernel(*b)]
    picks = rng.sample(basis, min(nterms, len(basis)))
    return VectorField(nu, order, {b: random_rational(rng) for b in picks})


def random_laurent(rng, low=-2, validity=10, nterms=3):
    exps = rng.sample(range(low, validity + 1), nterms)
    return Coefficient({(e, ()): random_rational(rng) for e in exps}, validity)


def random_diffeo(rng, nu, order, nterms=4, coeff=None):
    """``x + h`` with sparse random ``h`` of degrees ``2 .. order + 1``."""
    coeff = coeff or (lambda: Coefficient.const(random_rational(rng)))
    comps = []
    for i in range(nu):
        terms = {tuple(int(k == i) for k in range(nu)): Coefficient.const(1)}
        pool = [m for deg in range(2, order + 2) for m in monomials(nu, deg)]
        for m in rng.sample(pool, min(nterms, len(pool))):
            terms[m] = coeff()
        comps.append(Poly(nu, order + 1, terms))
    return Diffeo(comps, order)


def toy_field(coeffs, order=8):
    """``sum_n a_n x^n y^2 d/dy``."""
    return VectorField(2, order, {((n, 2), 1): a for n, a in enumerate(coeffs) if a})


@pytest.fixture
def rng():
    return random.Random(20241017)


@pytest.fixture
def toy_scheme():
    return Scheme((1, 0), order=8, eps_order=10)


@pytest.fixture
def saddle_scheme():
    return Scheme((1, -1), order=5, eps_order=12)


@pytest.fixture
def toy_path():
    return DATA / "toy.prob"
