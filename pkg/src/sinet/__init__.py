"""Explicit ReLU networks for bit extraction, interpolation, B-splines and
shift-invariant approximation, with exact-arithmetic verification."""

from .netcore import (
    AffineLayer,
    ParseError,
    ReluNet,
    SizeBudget,
    compose,
    deserialize,
    evaluate,
    parallel,
    serialize,
    stack,
)
from .sis import ApproxParams, Generator, SisFunction
from .splines import BsplineSpec

__version__ = "0.1.0"

__all__ = [
    "AffineLayer",
    "ApproxParams",
    "BsplineSpec",
    "Generator",
    "ParseError",
    "ReluNet",
    "SisFunction",
    "SizeBudget",
    "compose",
    "deserialize",
    "evaluate",
    "parallel",
    "serialize",
    "stack",
]
