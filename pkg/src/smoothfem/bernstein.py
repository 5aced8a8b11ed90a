"""Bernstein polynomials on simplices: evaluation, products, integrals, derivatives."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from math import comb, factorial
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .lattice import (
    MultiIndex,
    generate_lattice,
    lattice_array,
    lattice_lookup,
    multi_factorial,
    multinomial,
)
from .tensor import multiplicity, sym_monomial, sym_monomials

log = logging.getLogger(__name__)


def degree_from_size(n: int, d: int) -> int:
    k = 0
    while comb(k + d, d) < n:
        k += 1
    if comb(k + d, d) != n:
        raise ValueError(f"{n} is not the size of a degree lattice in dimension {d}")
    return k


@lru_cache(maxsize=None)
def _multinomials(k: int, d: int) -> np.ndarray:
    w = np.array([float(multinomial(a)) for a in generate_lattice(k, d)])
    w.setflags(write=False)
    return w


def bernstein_matrix(k: int, lam: np.ndarray) -> np.ndarray:
    """Values of every ``B^alpha_k`` at barycentric points ``lam (..., d+1)``.

    Returns shape ``(..., N)`` with ``alpha`` in lattice order.
    """
    lam = np.asarray(lam, dtype=float)
    d = lam.shape[-1] - 1
    exps = lattice_array(k, d)
    powers = lam[..., None] ** np.arange(k + 1)  # (..., d+1, k+1)
    vals = np.ones(lam.shape[:-1] + (len(exps),))
    for i in range(d + 1):
        vals *= powers[..., i, exps[:, i]]
    return vals * _multinomials(k, d)


def bernstein_eval(beta: Sequence[int], lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    return float(multinomial(beta)) * np.prod(lam ** np.asarray(beta), axis=-1)


def integrate(beta: Sequence[int], measure: float = 1.0) -> float:
    """Exact integral of ``B^beta`` over a simplex of the given measure."""
    k, d = sum(beta), len(beta) - 1
    return factorial(k) * factorial(d) / factorial(k + d) * measure


def product_coeff(gamma: Sequence[int], delta: Sequence[int]) -> float:
    """``c`` with ``B^gamma * B^delta = c * B^(gamma+delta)``."""
    k1, k2 = sum(gamma), sum(delta)
    s = tuple(a + b for a, b in zip(gamma, delta))
    num = multi_factorial(s) * factorial(k1) * factorial(k2)
    den = multi_factorial(gamma) * multi_factorial(delta) * factorial(k1 + k2)
    return num / den


@lru_cache(maxsize=None)
def mass_matrix(k: int, d: int) -> np.ndarray:
    """``M[a, b] = integral of B^a B^b`` over a unit-measure simplex (exact)."""
    pts = generate_lattice(k, d)
    base = factorial(2 * k) * factorial(d) / factorial(2 * k + d)
    M = np.array([[product_coeff(a, b) * base for b in pts] for a in pts])
    M.setflags(write=False)
    return M


def derivative_coefficient(k: int, alpha: Sequence[int]) -> float:
    """Scalar in front of ``sym(grad lambda^alpha) B^(beta-alpha)`` in the r-th derivative."""
    r = sum(alpha)
    return factorial(r) * factorial(k) / (factorial(k - r) * multi_factorial(alpha))


def derivative_terms(beta: Sequence[int], r: int) -> list[tuple[MultiIndex, float, MultiIndex]]:
    """Terms ``(alpha, coefficient, beta - alpha)`` of ``grad^r B^beta``.

    ``grad^r B^beta = sum coefficient * sym(grad lambda^alpha) * B^(beta-alpha)``
    over ``alpha <= beta`` with ``|alpha| = r``.
    """
    beta = tuple(beta)
    k, d = sum(beta), len(beta) - 1
    if r > k:
        return []
    out = []
    for alpha in generate_lattice(r, d):
        if all(a <= b for a, b in zip(alpha, beta)):
            out.append((alpha, derivative_coefficient(k, alpha), tuple(b - a for a, b in zip(alpha, beta))))
    return out


@lru_cache(maxsize=None)
def shift_index(k: int, r: int, d: int) -> np.ndarray:
    """``S[a, g]`` = lattice index of ``gamma_g + alpha_a`` in degree ``k``."""
    up = lattice_lookup(k, d)
    S = np.array(
        [
            [up[tuple(x + y for x, y in zip(a, g))] for g in generate_lattice(k - r, d)]
            for a in generate_lattice(r, d)
        ],
        dtype=np.int64,
    )
    S.setflags(write=False)
    return S


@lru_cache(maxsize=None)
def derivative_coefficients(k: int, r: int, d: int) -> np.ndarray:
    c = np.array([derivative_coefficient(k, a) for a in generate_lattice(r, d)])
    c.setflags(write=False)
    return c


def poly_derivative(coeffs: np.ndarray, r: int, grads: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Canonical components of ``grad^r p`` for Bernstein polynomials ``p``.

    ``coeffs (..., N_k)``, ``grads (..., d+1, d)`` and ``lam`` either shared
    ``(nq, d+1)`` or batched ``(..., nq, d+1)``.  Returns ``(..., nq, n_comp)``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    lam = np.asarray(lam, dtype=float)
    d = lam.shape[-1] - 1
    k = degree_from_size(coeffs.shape[-1], d)
    if r > k:
        nq = lam.shape[-2]
        return np.zeros(coeffs.shape[:-1] + (nq, comb(r + d - 1, d - 1)))
    S = shift_index(k, r, d)
    sub = coeffs[..., S]  # (..., n_alpha, N_{k-r})
    Bm = bernstein_matrix(k - r, lam)  # (nq, N) or (..., nq, N)
    if Bm.ndim == 2:
        V = sub @ Bm.T
    else:
        V = np.einsum("...an,...qn->...aq", sub, Bm)
    A = sym_monomials(grads, r)  # (..., n_alpha, n_comp)
    return np.einsum("...aq,a,...ac->...qc", V, derivative_coefficients(k, r, d), A)


def derivative_tensor(beta: Sequence[int], r: int, grads: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """``grad^r B^beta`` at points, as canonical components ``(nq, n_comp)``."""
    k, d = sum(beta), len(beta) - 1
    c = np.zeros(len(generate_lattice(k, d)))
    c[lattice_lookup(k, d)[tuple(beta)]] = 1.0
    return poly_derivative(c, r, grads, np.atleast_2d(lam))


def directional_derivative(
    beta: Sequence[int],
    directions: np.ndarray,
    alpha: Sequence[int],
    grads: np.ndarray,
    lam: np.ndarray,
) -> np.ndarray:
    """``grad^r B^beta : n^alpha`` with ``n`` rows of ``directions`` and ``r = |alpha|``."""
    r = sum(alpha)
    d = np.shape(directions)[-1]
    g = derivative_tensor(beta, r, grads, lam)
    return g @ (multiplicity(d, r) * sym_monomial(directions, alpha))


def dual_apply(alpha: Sequence[int], coeffs: np.ndarray) -> float:
    """The B^alpha coefficient of a polynomial given by lattice-ordered coefficients."""
    k, d = sum(alpha), len(alpha) - 1
    return coeffs[..., lattice_lookup(k, d)[tuple(alpha)]]


@lru_cache(maxsize=None)
def lattice_points(k: int, ell: int) -> np.ndarray:
    """Barycentric coordinates of the principal lattice of degree ``k`` on an ``ell``-simplex."""
    if k == 0:
        pts = np.full((1, ell + 1), 1.0 / (ell + 1))
    else:
        pts = lattice_array(k, ell) / k
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=None)
def _collocation_lu(k: int, ell: int, cond_warn: float = 1e12):
    V = bernstein_matrix(k, lattice_points(k, ell))
    cond = np.linalg.cond(V)
    if cond > cond_warn:
        log.warning("Lagrange-to-Bernstein matrix for k=%d, ell=%d has condition %.2e", k, ell, cond)
    return sla.lu_factor(V)


def lagrange_to_bernstein(values: np.ndarray, k: int, ell: int) -> np.ndarray:
    """Bernstein coefficients of the degree-``k`` interpolant of lattice-point values.

    ``values`` has the lattice points on axis 0; extra axes are solved together.
    """
    return sla.lu_solve(_collocation_lu(k, ell), np.asarray(values, dtype=float))


@dataclass
class BernsteinPoly:
    """Polynomial ``sum_a coeffs[a] B^a_degree`` on a simplex with given barycentric gradients."""

    degree: int
    coeffs: np.ndarray
    grads: np.ndarray

    @property
    def dim(self) -> int:
        return self.grads.shape[-1]

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        return bernstein_matrix(self.degree, lam) @ self.coeffs

    def derivative(self, r: int, lam: np.ndarray) -> np.ndarray:
        return poly_derivative(self.coeffs, r, self.grads, np.atleast_2d(lam))

    def __mul__(self, other: "BernsteinPoly") -> "BernsteinPoly":
        d = self.dim
        ka, kb = self.degree, other.degree
        out = np.zeros(len(generate_lattice(ka + kb, d)))
        look = lattice_lookup(ka + kb, d)
        for i, g in enumerate(generate_lattice(ka, d)):
            if self.coeffs[i] == 0:
                continue
            for j, h in enumerate(generate_lattice(kb, d)):
                s = tuple(x + y for x, y in zip(g, h))
                out[look[s]] += self.coeffs[i] * other.coeffs[j] * product_coeff(g, h)
        return BernsteinPoly(ka + kb, out, self.grads)
