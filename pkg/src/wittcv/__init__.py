"""Witt algebra over small finite fields and a verifier for its nilpotent
commuting varieties."""

__version__ = "0.1.0"

from .ffield import FieldCtx, Matrix, field
from .witt import WittAlgebra, WittElement, Subspace, algebra, parse_element
from .autgrp import Automorphism, rectify

__all__ = [
    "__version__",
    "FieldCtx", "Matrix", "field",
    "WittAlgebra", "WittElement", "Subspace", "algebra", "parse_element",
    "Automorphism", "rectify",
]
