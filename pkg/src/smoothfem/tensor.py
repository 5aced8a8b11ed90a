"""Symmetric tensors stored by their canonical components.

An order-``r`` symmetric tensor on ``R^d`` is stored as a vector indexed by
multi-indices ``mu`` of length ``d`` with ``|mu| = r`` (counts of each
coordinate direction), in :func:`~smoothfem.lattice.generate_lattice` order.
All routines accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import Sequence

import numpy as np

from .lattice import generate_lattice, lattice_lookup, multi_factorial


def component_indices(d: int, r: int) -> tuple[tuple[int, ...], ...]:
    return generate_lattice(r, d - 1)


def n_components(d: int, r: int) -> int:
    return len(component_indices(d, r))


@lru_cache(maxsize=None)
def multiplicity(d: int, r: int) -> np.ndarray:
    """``r!/mu!``: how many full-index entries share the component ``mu``."""
    w = np.array([factorial(r) / multi_factorial(mu) for mu in component_indices(d, r)])
    w.setflags(write=False)
    return w


@lru_cache(maxsize=None)
def _raise_map(d: int, p: int) -> np.ndarray:
    """``out[i, j]`` = index of ``mu_i + e_j`` among degree ``p+1`` indices."""
    up = lattice_lookup(p + 1, d - 1)
    rows = []
    for mu in component_indices(d, p):
        rows.append([up[tuple(m + (q == j) for q, m in enumerate(mu))] for j in range(d)])
    out = np.array(rows, dtype=np.int64).reshape(-1, d)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _coeff_to_component(d: int, r: int) -> np.ndarray:
    w = np.array([multi_factorial(mu) / factorial(r) for mu in component_indices(d, r)])
    w.setflags(write=False)
    return w


def _multiply_linear(poly: np.ndarray, vec: np.ndarray, d: int, p: int) -> np.ndarray:
    """Coefficients of ``poly(x) * (vec . x)``; ``poly`` has degree ``p``."""
    up = _raise_map(d, p)
    out = np.zeros(poly.shape[:-1] + (n_components(d, p + 1),), dtype=np.result_type(poly, vec))
    for j in range(d):
        # mu -> mu + e_j is injective, so plain fancy-index accumulation is safe
        out[..., up[:, j]] += poly * vec[..., j : j + 1]
    return out


def sym_monomial(vectors: np.ndarray, alpha: Sequence[int]) -> np.ndarray:
    """Components of ``sym(t_1^{alpha_1} (x) ... (x) t_n^{alpha_n})``.

    ``vectors`` has shape ``(..., n, d)``.  The components are read off from
    the coefficients of the polynomial ``prod_i (t_i . x)^{alpha_i}``, using
    ``tau : x^r = sum_mu (r!/mu!) tau_mu x^mu``.
    """
    vectors = np.asarray(vectors, dtype=float)
    d = vectors.shape[-1]
    if vectors.shape[-2] != len(alpha):
        raise ValueError("alpha length must match the number of vectors")
    poly = np.ones(vectors.shape[:-2] + (1,))
    p = 0
    for i, a in enumerate(alpha):
        for _ in range(a):
            poly = _multiply_linear(poly, vectors[..., i, :], d, p)
            p += 1
    return poly * _coeff_to_component(d, p)


def sym_monomials(vectors: np.ndarray, r: int) -> np.ndarray:
    """Stack of :func:`sym_monomial` over all ``alpha`` with ``|alpha| = r``.

    Returns shape ``(..., n_alpha, n_comp)`` with ``alpha`` in lattice order.
    """
    vectors = np.asarray(vectors, dtype=float)
    n, d = vectors.shape[-2], vectors.shape[-1]
    if n == 0:
        if r != 0:
            raise ValueError("an empty family only has the order-0 monomial")
        return np.ones(vectors.shape[:-2] + (1, 1))
    # build products degree by degree, reusing alpha - e_i for the first nonzero i
    prev = {(0,) * n: np.ones(vectors.shape[:-2] + (1,))}
    for p in range(r):
        cur = {}
        for alpha in generate_lattice(p + 1, n - 1):
            i = next(j for j, a in enumerate(alpha) if a)
            base = tuple(a - (j == i) for j, a in enumerate(alpha))
            cur[alpha] = _multiply_linear(prev[base], vectors[..., i, :], d, p)
        prev = cur
    scale = _coeff_to_component(d, r)
    return np.stack([prev[a] * scale for a in generate_lattice(r, n - 1)], axis=-2)


def sym_pairing(a: np.ndarray, b: np.ndarray, d: int, r: int) -> np.ndarray:
    """Full contraction ``a : b`` of two symmetric tensors given by components."""
    return np.sum(np.asarray(a) * multiplicity(d, r) * np.asarray(b), axis=-1)


def pairing_matrix(fam_a: np.ndarray, fam_b: np.ndarray, r: int) -> np.ndarray:
    """``P[..., i, j] = sym(a^{alpha_i}) : sym(b^{beta_j})`` for two vector families."""
    d = np.shape(fam_a)[-1]
    A = sym_monomials(fam_a, r)
    B = sym_monomials(fam_b, r)
    return np.einsum("...ic,c,...jc->...ij", A, multiplicity(d, r), B)


def change_frame(
    tau: np.ndarray, new_dual: np.ndarray, r: int, frame: np.ndarray | None = None
) -> np.ndarray:
    """Components of ``tau`` with respect to a new frame ``{s_i}``.

    ``tau`` holds components in ``frame`` (rows; canonical basis if omitted) and
    ``new_dual`` the dual vectors ``s_hat_i``.  Result component ``mu`` equals
    ``tau : sym(s_hat^mu)``.
    """
    new_dual = np.asarray(new_dual, dtype=float)
    d = new_dual.shape[-1]
    if frame is None:
        frame = np.broadcast_to(np.eye(d), new_dual.shape[:-2] + (d, d))
    P = pairing_matrix(frame, new_dual, r)
    return np.einsum("...n,n,...nm->...m", np.asarray(tau), multiplicity(d, r), P)


def duality_check(frame: np.ndarray, dual: np.ndarray, r: int) -> float:
    """Max deviation of ``sym(t_hat^alpha) : sym(t^beta)`` from ``(alpha!/r!) delta``."""
    frame = np.asarray(frame, dtype=float)
    n = frame.shape[-2]
    P = pairing_matrix(dual, frame, r)
    expect = np.diag([multi_factorial(a) / factorial(r) for a in generate_lattice(r, n - 1)])
    return float(np.max(np.abs(P - expect)))


@dataclass
class SymTensor:
    """Order-``order`` symmetric tensor on ``R^dim`` (components may be batched)."""

    order: int
    dim: int
    components: np.ndarray

    def __post_init__(self) -> None:
        self.components = np.asarray(self.components, dtype=float)
        if self.components.shape[-1] != n_components(self.dim, self.order):
            raise ValueError("component count does not match order and dimension")

    @classmethod
    def monomial(cls, vectors: np.ndarray, alpha: Sequence[int]) -> "SymTensor":
        vectors = np.asarray(vectors, dtype=float)
        return cls(sum(alpha), vectors.shape[-1], sym_monomial(vectors, alpha))

    def __matmul__(self, other: "SymTensor") -> np.ndarray:
        if (self.order, self.dim) != (other.order, other.dim):
            raise ValueError("order/dimension mismatch")
        return sym_pairing(self.components, other.components, self.dim, self.order)

    def in_frame(self, new_dual: np.ndarray, frame: np.ndarray | None = None) -> "SymTensor":
        return SymTensor(self.order, self.dim, change_frame(self.components, new_dual, self.order, frame))
