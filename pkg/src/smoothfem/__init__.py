"""Arbitrary-order C^m conforming finite elements on simplicial meshes."""

from .lattice import (
    ConstraintViolation,
    SmoothnessVector,
    decompose,
    generate_lattice,
    lex_index,
    reference_set,
)

__all__ = [
    "ConstraintViolation",
    "SmoothnessVector",
    "decompose",
    "generate_lattice",
    "lex_index",
    "reference_set",
]
__version__ = "0.1.0"
