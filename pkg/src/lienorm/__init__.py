"""Exact normal forms of formal vector fields near a fixed point.

The public entry points live in the submodules: :mod:`.coeff` (Laurent
coefficients), :mod:`.vfield` (fields and brackets), :mod:`.diffeo`
(substitution automorphisms), :mod:`.regularize`, :mod:`.birkhoff`,
:mod:`.normalforms` and :mod:`.cli`.
"""
from __future__ import annotations

from .coeff import Coefficient, rational
from .diffeo import Diffeo, compose, exp_field, invert, log_d_magnus, log_diffeo
from .errors import (
    InvariantError,
    LienormError,
    ParseError,
    ResonanceError,
    ValidityError,
)
from .regularize import DiagonalAd, Grading, Scheme
from .vfield import Spectrum, VectorField

__all__ = [
    "Coefficient",
    "DiagonalAd",
    "Diffeo",
    "Grading",
    "InvariantError",
    "LienormError",
    "ParseError",
    "ResonanceError",
    "Scheme",
    "Spectrum",
    "ValidityError",
    "VectorField",
    "compose",
    "exp_field",
    "invert",
    "log_d_magnus",
    "log_diffeo",
    "rational",
]
