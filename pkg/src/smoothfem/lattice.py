"""Simplicial lattices, distances to faces and the layered decomposition.

A multi-index ``alpha`` of length ``d+1`` with ``sum(alpha) == k`` labels a
point of the principal lattice of a ``d``-simplex.  Faces are tuples of
vertex indices in ascending order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb, factorial, prod
from typing import Sequence

import numpy as np

MultiIndex = tuple[int, ...]


class ConstraintViolation(ValueError):
    """Raised when a smoothness vector or degree is not admissible."""


@lru_cache(maxsize=None)
def generate_lattice(k: int, d: int) -> tuple[MultiIndex, ...]:
    """All multi-indices of length ``d+1`` summing to ``k``.

    The first entry runs from ``k`` down to 0 and the tail is generated
    recursively, which is the ordering used everywhere in the package.
    """
    if k < 0 or d < 0:
        raise ValueError(f"need k >= 0 and d >= 0, got k={k}, d={d}")
    if d == 0:
        return ((k,),)
    out: list[MultiIndex] = []
    for first in range(k, -1, -1):
        for tail in generate_lattice(k - first, d - 1):
            out.append((first,) + tail)
    return tuple(out)


def lattice_size(k: int, d: int) -> int:
    return comb(k + d, d)


@lru_cache(maxsize=None)
def lattice_array(k: int, d: int) -> np.ndarray:
    arr = np.array(generate_lattice(k, d), dtype=np.int64).reshape(-1, d + 1)
    arr.setflags(write=False)
    return arr


def lex_index(alpha: Sequence[int]) -> int:
    """Position of ``alpha`` in :func:`generate_lattice` order, in closed form."""
    d = len(alpha) - 1
    idx = 0
    tail = 0
    # tail sums alpha[i:] accumulated from the back
    tails = [0] * (d + 2)
    for i in range(d, -1, -1):
        tail += alpha[i]
        tails[i] = tail
    for i in range(1, d + 1):
        idx += comb(tails[i] + d - i, d + 1 - i)
    return idx


@lru_cache(maxsize=None)
def lattice_lookup(k: int, d: int) -> dict[MultiIndex, int]:
    return {a: i for i, a in enumerate(generate_lattice(k, d))}


def multi_factorial(alpha: Sequence[int]) -> int:
    return prod(factorial(a) for a in alpha)


def multinomial(alpha: Sequence[int]) -> int:
    """``|alpha|! / alpha!`` as an exact integer."""
    return factorial(sum(alpha)) // multi_factorial(alpha)


def distance(alpha: Sequence[int], face: Sequence[int]) -> int:
    """Number of lattice layers between ``alpha`` and ``face``."""
    fs = set(face)
    return sum(a for i, a in enumerate(alpha) if i not in fs)


def complement(face: Sequence[int], d: int) -> tuple[int, ...]:
    fs = set(face)
    return tuple(i for i in range(d + 1) if i not in fs)


@lru_cache(maxsize=None)
def local_faces(d: int, ell: int) -> tuple[tuple[int, ...], ...]:
    """The ``ell``-dimensional faces of the reference ``d``-simplex, lex order."""
    return tuple(combinations(range(d + 1), ell + 1))


def restrict(alpha: Sequence[int], face: Sequence[int]) -> MultiIndex:
    return tuple(alpha[i] for i in face)


def extend(alpha_f: Sequence[int], face: Sequence[int], d: int) -> MultiIndex:
    """Inverse of :func:`restrict`: zero outside ``face``."""
    if len(alpha_f) != len(face):
        raise ValueError("alpha_f and face must have equal length")
    out = [0] * (d + 1)
    for a, i in zip(alpha_f, face):
        out[i] = a
    return tuple(out)


@dataclass(frozen=True)
class SmoothnessVector:
    """Per-dimension derivative orders ``r = (r_0, ..., r_d)`` for degree ``k``.

    ``r[ell]`` is the highest derivative order carried by DoFs on
    ``ell``-dimensional faces.  ``r[d-1]`` is the global smoothness ``m``.
    """

    r: tuple[int, ...]
    k: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "r", tuple(int(x) for x in self.r))
        r, k = self.r, self.k
        d = len(r) - 1
        if d < 1:
            raise ConstraintViolation("smoothness vector needs at least two entries")
        if r[d] != 0:
            raise ConstraintViolation(f"r_d must be 0 (got r_{d} = {r[d]})")
        if any(x < 0 for x in r):
            raise ConstraintViolation(f"negative entry in r = {r}")
        for ell in range(d - 1):
            if r[ell] < 2 * r[ell + 1]:
                raise ConstraintViolation(
                    f"r_{ell} >= 2 r_{ell + 1} violated: r_{ell} = {r[ell]}, r_{ell + 1} = {r[ell + 1]}"
                )
        if k < 2 * r[0] + 1:
            raise ConstraintViolation(f"k >= 2 r_0 + 1 violated: k = {k}, r_0 = {r[0]}")

    @property
    def d(self) -> int:
        return len(self.r) - 1

    @property
    def m(self) -> int:
        return self.r[self.d - 1]

    @classmethod
    def minimal(cls, m: int, d: int, k: int | None = None) -> "SmoothnessVector":
        """Smallest admissible vector: ``r_ell = 2**(d-1-ell) * m``."""
        r = tuple(2 ** (d - 1 - ell) * m for ell in range(d)) + (0,)
        if k is None:
            k = 2 * r[0] + 1
        return cls(r, k)


@dataclass(frozen=True)
class LatticeDecomposition:
    """Partition of ``T^d_k`` into blocks ``S_ell(f)`` indexed by local faces."""

    smoothness: SmoothnessVector
    blocks: dict[tuple[int, ...], tuple[MultiIndex, ...]] = field(repr=False)

    @property
    def d(self) -> int:
        return self.smoothness.d

    @property
    def k(self) -> int:
        return self.smoothness.k

    def block(self, face: Sequence[int]) -> tuple[MultiIndex, ...]:
        return self.blocks[tuple(face)]

    def ordered(self) -> list[tuple[tuple[int, ...], MultiIndex]]:
        """(face, alpha) pairs in canonical DoF order.

        Faces by dimension then lex; inside a block by distance then lex.
        """
        out = []
        for ell in range(self.d + 1):
            for f in local_faces(self.d, ell):
                out.extend((f, a) for a in self.blocks[f])
        return out

    def counts(self) -> dict[int, int]:
        """Block size for each face dimension (equal for all faces of a dimension)."""
        return {ell: len(self.blocks[local_faces(self.d, ell)[0]]) for ell in range(self.d + 1)}


@lru_cache(maxsize=None)
def decompose(sm: SmoothnessVector) -> LatticeDecomposition:
    d, k, r = sm.d, sm.k, sm.r
    points = generate_lattice(k, d)
    blocks: dict[tuple[int, ...], tuple[MultiIndex, ...]] = {}
    for ell in range(d + 1):
        for f in local_faces(d, ell):
            subfaces = [(i, e) for i in range(ell) for e in combinations(f, i + 1)]
            chosen = [
                a
                for a in points
                if distance(a, f) <= r[ell]
                and all(distance(a, e) > r[i] for i, e in subfaces)
            ]
            chosen.sort(key=lambda a: (distance(a, f), lex_index(a)))
            blocks[f] = tuple(chosen)
    return LatticeDecomposition(sm, blocks)


def check_partition(dec: LatticeDecomposition) -> bool:
    """True when the blocks are pairwise disjoint and cover the lattice."""
    seen: set[MultiIndex] = set()
    total = 0
    for pts in dec.blocks.values():
        seen.update(pts)
        total += len(pts)
    full = set(generate_lattice(dec.k, dec.d))
    return total == len(full) and seen == full


@dataclass(frozen=True)
class ReferenceSet:
    """Element-independent DoF labels ``(alpha_f, gamma)`` of one face.

    ``alpha_f`` is keyed to the face's vertices in ascending global order and
    ``gamma`` indexes derivatives along the face's global normal frame.
    """

    face: tuple[int, ...]
    entries: tuple[tuple[MultiIndex, MultiIndex], ...]

    def __len__(self) -> int:
        return len(self.entries)

    def index(self, alpha_f: Sequence[int], gamma: Sequence[int]) -> int:
        return _reference_lookup(self.entries)[(tuple(alpha_f), tuple(gamma))]


@lru_cache(maxsize=None)
def _reference_lookup(entries) -> dict:
    return {e: i for i, e in enumerate(entries)}


@lru_cache(maxsize=None)
def reference_entries(ell: int, sm: SmoothnessVector) -> tuple[tuple[MultiIndex, MultiIndex], ...]:
    """Reference labels for any ``ell``-face; the set is vertex-permutation invariant."""
    d, k = sm.d, sm.k
    if not 0 <= ell <= d:
        raise ValueError(f"face dimension {ell} out of range for d={d}")
    f = tuple(range(ell + 1))
    dec = decompose(sm)
    alpha_fs = sorted({restrict(a, f) for a in dec.block(f)})
    entries = []
    for af in alpha_fs:
        s = k - sum(af)
        gammas = generate_lattice(s, d - ell - 1) if ell < d else ((),)
        entries.extend((af, g) for g in gammas)
    entries.sort(key=lambda e: (sum(e[1]), lex_index(e[0]), lex_index(e[1]) if e[1] else 0))
    return tuple(entries)


def reference_set(face_global: Sequence[int], sm: SmoothnessVector) -> ReferenceSet:
    face = tuple(int(v) for v in face_global)
    if any(a >= b for a, b in zip(face, face[1:])):
        raise ValueError(f"face vertices must be strictly ascending, got {face}")
    return ReferenceSet(face, reference_entries(len(face) - 1, sm))


@dataclass(frozen=True)
class BijectionResult:
    ok: bool
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def bijection_check(
    block: Sequence[MultiIndex],
    face: Sequence[int],
    ref: ReferenceSet,
    global_ids: Sequence[int] | None = None,
) -> BijectionResult:
    """Check that ``alpha -> (alpha_[f], alpha_{f*})`` maps ``block`` onto ``ref``.

    ``global_ids`` gives the global vertex numbers of ``face``; when present the
    face part is re-ordered to ascending global order.
    """
    face = tuple(face)
    d = len(block[0]) - 1 if block else 0
    star = complement(face, d)
    order = np.argsort(global_ids) if global_ids is not None else np.arange(len(face))
    images = []
    for a in block:
        af = restrict(a, face)
        images.append((tuple(af[j] for j in order), restrict(a, star)))
    target = set(ref.entries)
    img = set(images)
    if len(img) != len(images):
        return BijectionResult(False, "map is not injective")
    if img != target:
        missing = sorted(target - img)
        extra = sorted(img - target)
        return BijectionResult(False, f"missing={missing[:5]} extra={extra[:5]}")
    return BijectionResult(True)
