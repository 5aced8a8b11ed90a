"""Simplex quadrature, interpolation by global DoFs and error (semi)norms."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np
from scipy.special import roots_jacobi

from .bernstein import lagrange_to_bernstein, lattice_points, poly_derivative
from .fespace import FESpace, local_basis, dof_basis_matrix
from .frames import local_frame
from .functions import Oracle, partials
from .lattice import generate_lattice, lattice_lookup, local_faces, reference_entries, restrict, complement
from .tensor import multiplicity, sym_monomials


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points ``(nq, d+1)`` and weights summing to one."""

    points: np.ndarray
    weights: np.ndarray
    degree: int
    scheme: str


def gauss_jacobi_rule(d: int, degree: int) -> QuadratureRule:
    """Collapsed (Duffy) product rule with Gauss-Jacobi factors; positive weights."""
    n = degree // 2 + 1
    nodes, wts = [], []
    for i in range(d):
        a = d - 1 - i  # weight (1-t)^a absorbs the collapse Jacobian
        x, w = roots_jacobi(n, a, 0)
        nodes.append((x + 1) / 2)
        wts.append(w / 2 ** (a + 1))
    pts, weights = [], []
    for idx in product(range(n), repeat=d):
        t = [nodes[i][j] for i, j in enumerate(idx)]
        w = np.prod([wts[i][j] for i, j in enumerate(idx)])
        x, rest = [], 1.0
        for ti in t:
            x.append(ti * rest)
            rest *= 1 - ti
        pts.append([1 - sum(x)] + x)
        weights.append(w)
    weights = np.array(weights) * factorial(d)
    return QuadratureRule(np.array(pts), weights, 2 * n - 1, "gauss-jacobi")


def grundmann_moller_rule(d: int, degree: int) -> QuadratureRule:
    """Grundmann-Moller rule of odd degree ``2s+1 >= degree`` (has negative weights)."""
    s = max(0, degree) // 2
    pts, wts = [], []
    for i in range(s + 1):
        q = d + 2 * s + 1 - 2 * i
        w = (-1) ** i * 2.0 ** (-2 * s) * q ** (2 * s + 1) / (factorial(i) * factorial(d + 2 * s + 1 - i))
        for beta in generate_lattice(s - i, d):
            pts.append([(2 * b + 1) / q for b in beta])
            wts.append(w)
    wts = np.array(wts) * factorial(d)
    return QuadratureRule(np.array(pts), wts, 2 * s + 1, "grundmann-moller")


@lru_cache(maxsize=None)
def quadrature(d: int, degree: int, scheme: str = "gauss-jacobi") -> QuadratureRule:
    if scheme == "gauss-jacobi":
        return gauss_jacobi_rule(d, degree)
    if scheme == "grundmann-moller":
        return grundmann_moller_rule(d, degree)
    raise ValueError(f"unknown quadrature scheme {scheme!r}")


def _face_dof_values(
    face_points: np.ndarray, frames: np.ndarray | None, u: Oracle, k: int, entries
) -> np.ndarray:
    """Extended DoF values ``(nf, len(entries))`` for faces of one dimension.

    Each value is the ``B^alpha_f`` coefficient of the degree ``k-|gamma|``
    interpolant on the face of the derivative of ``u`` along ``frames^gamma``.
    """
    nf, p, d = face_points.shape
    ell = p - 1
    out = np.empty((nf, len(entries)))
    by_s: dict[int, list[int]] = {}
    for i, (_, g) in enumerate(entries):
        by_s.setdefault(sum(g), []).append(i)
    for s, idx in by_s.items():
        lam = lattice_points(k - s, ell)
        x = np.einsum("qv,fvc->fqc", lam, face_points)
        du = partials(u, s, x)  # (nf, nq, ncomp)
        if frames is None or frames.shape[1] == 0:
            vals = du[..., :1]
        else:
            mono = sym_monomials(frames, s)  # (nf, ngamma, ncomp)
            vals = np.einsum("fqc,c,fgc->fqg", du, multiplicity(d, s), mono)
        nq = vals.shape[1]
        coef = lagrange_to_bernstein(np.moveaxis(vals, 1, 0).reshape(nq, -1), k - s, ell)
        coef = coef.reshape((nq,) + vals.shape[0:1] + vals.shape[2:])  # (nb, nf, ngamma)
        la = lattice_lookup(k - s, ell)
        lg = lattice_lookup(s, d - ell - 1) if ell < d else {(): 0}
        rows = np.array([la[entries[i][0]] for i in idx])
        cols = np.array([lg[entries[i][1]] for i in idx])
        out[:, idx] = coef[rows, :, cols].T
    return out


def interpolate(space: FESpace, u: Oracle, dims: range | None = None) -> np.ndarray:
    """Global DoF vector of the canonical interpolant of ``u``.

    ``dims`` restricts to faces of the listed dimensions (other entries are 0).
    """
    d, k = space.sm.d, space.sm.k
    vals = np.zeros(space.ndof)
    for ell in dims if dims is not None else range(d + 1):
        entries = reference_entries(ell, space.sm)
        faces = space.table.faces[ell]
        if not len(entries) or not len(faces):
            continue
        frames = space.frames[ell] if ell < d else None
        block = _face_dof_values(space.mesh.nodes[faces], frames, u, k, entries)
        vals[space.offsets[ell] : space.offsets[ell + 1]] = block.ravel()
    return vals


def face_dof_values(space: FESpace, u: Oracle, ell: int, face_ids: np.ndarray) -> np.ndarray:
    """Extended DoF values of selected ``ell``-faces, shape ``(len(face_ids), n_ref)``."""
    entries = reference_entries(ell, space.sm)
    faces = space.table.faces[ell][face_ids]
    frames = space.frames[ell][face_ids] if ell < space.sm.d else None
    return _face_dof_values(space.mesh.nodes[faces], frames, u, space.sm.k, entries)


def local_interpolant(space: FESpace, u: Oracle, t: int) -> np.ndarray:
    """Interpolant on one element built from local-frame DoFs (lattice-order coefficients)."""
    sm, lay = space.sm, space.layout
    d, k = sm.d, sm.k
    verts, grads = space.geometry.vertices[t], space.geometry.grads[t]
    L = np.empty(lay.n)
    for ell in range(d + 1):
        for fidx, f in enumerate(local_faces(d, ell)):
            pos = lay.face_positions(ell, fidx)
            if not pos.size:
                continue
            star = complement(f, d)
            entries = [(restrict(lay.points[p], f), restrict(lay.points[p], star)) for p in pos]
            frame = local_frame(verts, grads, f).vectors if ell < d else None
            vals = _face_dof_values(verts[list(f)][None], None if frame is None else frame[None], u, k, entries)
            L[pos] = vals[0]
    C = local_basis(dof_basis_matrix(verts, grads, sm), sm)
    return (L @ C)[lay.canon_of_lex]


def error_norms(
    space: FESpace,
    coeffs: np.ndarray,
    u: Oracle,
    orders: range,
    degree: int | None = None,
    scheme: str = "gauss-jacobi",
    chunk: int = 64,
) -> list[float]:
    """Broken ``|u - u_h|_{H^j}`` for each ``j`` in ``orders``.

    ``coeffs`` are per-element Bernstein coefficients ``(NT, N)``; quadrature
    has degree ``2k`` unless given.
    """
    d, k = space.sm.d, space.sm.k
    rule = quadrature(d, degree if degree is not None else 2 * k, scheme)
    geo = space.geometry
    acc = np.zeros(len(orders))
    NT = space.mesh.n_elements
    for a in range(0, NT, chunk):
        sl = slice(a, min(a + chunk, NT))
        x = np.einsum("qv,tvc->tqc", rule.points, geo.vertices[sl])
        for i, j in enumerate(orders):
            uh = poly_derivative(coeffs[sl], j, geo.grads[sl], rule.points)
            diff = uh - partials(u, j, x)
            local = np.einsum("tqc,c,q->t", diff**2, multiplicity(d, j), rule.weights)
            acc[i] += float(np.dot(local, geo.measure[sl]))
    return [float(np.sqrt(v)) for v in acc]
