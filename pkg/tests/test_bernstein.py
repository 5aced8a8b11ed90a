from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smoothfem.bernstein import (
    BernsteinPoly,
    bernstein_matrix,
    degree_from_size,
    derivative_terms,
    integrate,
    lagrange_to_bernstein,
    lattice_points,
    mass_matrix,
    poly_derivative,
    product_coeff,
)
from smoothfem.lattice import distance, generate_lattice, local_faces
from smoothfem.mesh import barycentric_gradients
from smoothfem.tensor import component_indices

from conftest import random_simplex
from oracles import MonomialPolys


def to_bary(vertices, x):
    d = vertices.shape[1]
    A = np.vstack([vertices.T, np.ones(d + 1)])
    return np.linalg.solve(A, np.vstack([x.T, np.ones(len(x))])).T


def random_bary(rng, n, d):
    return rng.dirichlet(np.ones(d + 1), size=n)


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("k", [0, 1, 4, 7])
def test_partition_of_unity_and_lattice(rng, d, k):
    lam = random_bary(rng, 6, d)
    assert bernstein_matrix(k, lam).shape == (6, comb(k + d, d))
    np.testing.assert_allclose(bernstein_matrix(k, lam).sum(axis=1), 1.0)
    assert degree_from_size(comb(k + d, d), d) == k


def test_degree_from_size_rejects_bad_size():
    with pytest.raises(ValueError):
        degree_from_size(7, 2)


@pytest.mark.parametrize("d,k", [(1, 5), (2, 4), (2, 7), (3, 5)])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_derivatives_against_monomial_oracle(rng, d, k, r):
    x = random_simplex(rng, d)
    geo = barycentric_gradients(x[None])
    lat = generate_lattice(k, d)
    polys = MonomialPolys.bernstein_basis(x, lat)
    lam = random_bary(rng, 5, d)
    pts = lam @ x
    coeffs = np.eye(len(lat))
    got = poly_derivative(coeffs, r, geo.grads[0], lam)  # (nb, nq, ncomp)
    for c, mu in enumerate(component_indices(d, r)):
        p = polys
        for axis, m in enumerate(mu):
            for _ in range(m):
                p = p.directional(np.eye(d)[axis])
        np.testing.assert_allclose(got[:, :, c], p(pts), atol=1e-8 * max(1, np.abs(p(pts)).max()))


@pytest.mark.parametrize("d,k", [(2, 6), (3, 5)])
def test_batched_derivative_matches_single(rng, d, k):
    xs = np.stack([random_simplex(rng, d) for _ in range(3)])
    geo = barycentric_gradients(xs)
    coeffs = rng.normal(size=(3, comb(k + d, d)))
    lam = random_bary(rng, 4, d)
    batched = poly_derivative(coeffs, 2, geo.grads, lam)
    for t in range(3):
        np.testing.assert_allclose(batched[t], poly_derivative(coeffs[t], 2, geo.grads[t], lam), atol=1e-10)


@pytest.mark.parametrize("d,k", [(2, 7), (3, 6)])
def test_vanishing_on_far_faces(rng, d, k):
    """grad^s B^beta is zero on a face f whenever s < dist(beta, f)."""
    x = random_simplex(rng, d)
    geo = barycentric_gradients(x[None])
    lat = generate_lattice(k, d)
    for ell in range(d):
        for f in local_faces(d, ell):
            lam = np.zeros((4, d + 1))
            lam[:, list(f)] = rng.dirichlet(np.ones(ell + 1), size=4)
            for s in range(k):
                vals = poly_derivative(np.eye(len(lat)), s, geo.grads[0], lam)
                for b, beta in enumerate(lat):
                    if s < distance(beta, f):
                        assert np.abs(vals[b]).max() < 1e-9


def test_derivative_terms_structure():
    terms = derivative_terms((2, 1, 0), 2)
    assert {a for a, _, _ in terms} == {(2, 0, 0), (1, 1, 0)}
    assert derivative_terms((1, 0), 2) == []


@pytest.mark.parametrize("d", [1, 2, 3])
def test_integrals_by_quadrature(d):
    from smoothfem.interpolation import quadrature

    k = 5
    rule = quadrature(d, k)
    vals = bernstein_matrix(k, rule.points).T @ rule.weights
    expect = [integrate(b) for b in generate_lattice(k, d)]
    np.testing.assert_allclose(vals, expect, rtol=1e-12)
    M = mass_matrix(3, d)
    rule6 = quadrature(d, 6)
    Bq = bernstein_matrix(3, rule6.points)
    np.testing.assert_allclose(Bq.T @ (rule6.weights[:, None] * Bq), M, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 4), st.integers(0, 4), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_product_rule(k1, k2, d, seed):
    rng = np.random.default_rng(seed)
    g = np.zeros((d + 1, d))
    a = BernsteinPoly(k1, rng.normal(size=comb(k1 + d, d)), g)
    b = BernsteinPoly(k2, rng.normal(size=comb(k2 + d, d)), g)
    lam = random_bary(rng, 5, d)
    np.testing.assert_allclose((a * b)(lam), a(lam) * b(lam), atol=1e-10)


def test_product_coeff_example():
    # B^(1,0) B^(0,1) = l0 l1 = B^(1,1) / 2
    assert product_coeff((1, 0), (0, 1)) == pytest.approx(0.5)


@pytest.mark.parametrize("k,ell", [(0, 1), (1, 2), (6, 1), (5, 2), (4, 3)])
def test_lagrange_roundtrip(rng, k, ell):
    c = rng.normal(size=(comb(k + ell, ell), 2))
    vals = bernstein_matrix(k, lattice_points(k, ell)) @ c
    np.testing.assert_allclose(lagrange_to_bernstein(vals, k, ell), c, atol=1e-10)


@pytest.mark.parametrize("d,k", [(2, 5), (2, 9), (3, 9)])
@pytest.mark.parametrize("r", [1, 2, 3])
def test_derivatives_against_finite_differences(rng, d, k, r):
    from oracles import fd_partial

    x = random_simplex(rng, d)
    geo = barycentric_gradients(x[None])
    lat = generate_lattice(k, d)
    for _ in range(10):
        b = rng.integers(len(lat))
        lam = random_bary(rng, 1, d)
        pt = lam @ x
        got = poly_derivative(np.eye(len(lat))[b], r, geo.grads[0], lam)[0]
        func = lambda y: bernstein_matrix(k, to_bary(x, y))[:, b]  # noqa: E731
        want = [fd_partial(func, pt, mu)[0] for mu in component_indices(d, r)]
        np.testing.assert_allclose(got, want, atol=1e-6)
