"""Galerkin solution of ``(-1)^(m+1) Laplace^(m+1) u = f`` with Dirichlet data."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .bernstein import bernstein_matrix, derivative_coefficients, mass_matrix, shift_index
from .fespace import FESpace
from .functions import Oracle, polyharmonic_source
from .interpolation import error_norms, interpolate, quadrature
from .lattice import generate_lattice, local_faces, reference_entries
from .tensor import pairing_matrix, sym_monomial, sym_monomials

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _reference_stiffness(k: int, q: int, d: int) -> np.ndarray:
    """``R[a, b, i, j] = c_a c_b int B^{i-a}_{k-q} B^{j-b}_{k-q}`` on a unit-measure simplex."""
    S = shift_index(k, q, d)
    c = derivative_coefficients(k, q, d)
    M = mass_matrix(k - q, d)
    n = len(generate_lattice(k, d))
    na = len(S)
    R = np.zeros((na, na, n, n))
    for a in range(na):
        for b in range(na):
            R[a, b][np.ix_(S[a], S[b])] = c[a] * c[b] * M
    R.setflags(write=False)
    return R


def bernstein_stiffness(grads: np.ndarray, measure: np.ndarray, k: int, q: int) -> np.ndarray:
    """Exact ``int grad^q B^i : grad^q B^j`` for a batch of elements, ``(NT, N, N)``."""
    d = grads.shape[-1]
    P = pairing_matrix(grads, grads, q)  # (NT, na, na)
    R = _reference_stiffness(k, q, d)
    return np.einsum("tab,abij->tij", P * measure[:, None, None], R, optimize=True)


def assemble_stiffness(space: FESpace, order: int | None = None) -> sp.csr_matrix:
    """Global matrix of ``(grad^order u, grad^order v)``; ``order`` defaults to ``m+1``."""
    q = space.sm.m + 1 if order is None else order
    geo = space.geometry
    rows, cols, vals = [], [], []
    for els, G in space.iter_bases():
        K = bernstein_stiffness(geo.grads[els], geo.measure[els], space.sm.k, q)
        A = G @ K @ np.swapaxes(G, 1, 2)
        dm = space.dofmap[els]
        rows.append(np.repeat(dm, dm.shape[1], axis=1).ravel())
        cols.append(np.tile(dm, (1, dm.shape[1])).ravel())
        vals.append(A.ravel())
    n = space.ndof
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A.tocsr()


def assemble_load(space: FESpace, f, degree: int | None = None, scheme: str = "gauss-jacobi") -> np.ndarray:
    """``b_i = int f Psi_i`` by quadrature of degree ``2k`` (default)."""
    d, k = space.sm.d, space.sm.k
    rule = quadrature(d, degree if degree is not None else 2 * k, scheme)
    Bm = bernstein_matrix(k, rule.points)  # (nq, N)
    geo = space.geometry
    b = np.zeros(space.ndof)
    for els, G in space.iter_bases():
        x = np.einsum("qv,tvc->tqc", rule.points, geo.vertices[els])
        fw = f(x) * rule.weights * geo.measure[els][:, None]
        loc = np.einsum("tpn,qn,tq->tp", G, Bm, fw)
        np.add.at(b, space.dofmap[els].ravel(), loc.ravel())
    return b


def _boundary_facet_normals(space: FESpace) -> dict[int, dict[int, list[np.ndarray]]]:
    """For each face dimension, map boundary face id -> unit normals of boundary facets containing it."""
    d = space.sm.d
    tab = space.table
    bfacets = np.flatnonzero(tab.boundary[d - 1])
    out: dict[int, dict[int, list[np.ndarray]]] = {ell: {} for ell in range(d)}
    looks = [{tuple(r): i for i, r in enumerate(tab.faces[ell].tolist())} for ell in range(d)]
    for fid in bfacets:
        verts = tab.faces[d - 1][fid]
        nu = space.frames[d - 1][fid][0]
        for ell in range(d):
            for sub in local_faces(d - 1, ell):
                gid = looks[ell][tuple(verts[list(sub)].tolist())]
                out[ell].setdefault(gid, []).append(nu)
    return out


def _determined_span(normals: list[np.ndarray], s: int, m: int) -> np.ndarray:
    """Spanning components of order-``s`` tensors fixed by traces up to normal order ``m``."""
    rows = []
    for nu in normals:
        d = nu.shape[0]
        # orthonormal completion with nu last
        q, _ = np.linalg.qr(np.column_stack([nu, np.eye(d)]))
        fam = np.vstack([q[:, 1:d].T, nu[None]])
        for mu in generate_lattice(s, d - 1):
            if mu[-1] <= m:
                rows.append(sym_monomial(fam, mu))
    return np.array(rows)


def constrained_dofs(space: FESpace, tol: float = 1e-8) -> np.ndarray:
    """Global DoFs on the boundary whose values follow from the Dirichlet data.

    A DoF along ``N_f^gamma`` on a boundary face is constrained when the tensor
    ``sym(N_f^gamma)`` lies in the span of tensors with at most ``m`` factors
    normal to some boundary facet containing the face.  Orders ``<= m`` are
    therefore always constrained; higher ones only where enough facets meet.
    """
    d, m = space.sm.d, space.sm.m
    normals = _boundary_facet_normals(space)
    out = []
    for ell in range(d):
        ref = reference_entries(ell, space.sm)
        if not ref:
            continue
        for fid, nus in normals[ell].items():
            frame = space.frames[ell][fid]
            spans = {}
            base = space.offsets[ell] + fid * len(ref)
            for e, (_, gamma) in enumerate(ref):
                s = sum(gamma)
                if s <= m:
                    out.append(base + e)
                    continue
                if s not in spans:
                    S = _determined_span(nus, s, m)
                    spans[s] = sla.orth(S.T) if len(S) else np.zeros((len(generate_lattice(s, d - 1)), 0))
                v = sym_monomial(frame, gamma)
                Q = spans[s]
                if np.linalg.norm(v - Q @ (Q.T @ v)) <= tol * np.linalg.norm(v):
                    out.append(base + e)
    return np.array(sorted(out), dtype=np.int64)


@dataclass
class LinearSystem:
    A: sp.csr_matrix
    b: np.ndarray
    constrained: np.ndarray
    values: np.ndarray


def apply_dirichlet(A: sp.csr_matrix, b: np.ndarray, space: FESpace, data: Oracle) -> LinearSystem:
    """Strong elimination: constrained rows/columns become identity rows with data values.

    Constrained values are the global DoF functionals applied to ``data``.
    """
    idx = constrained_dofs(space)
    g = np.zeros(space.ndof)
    if idx.size:
        g[idx] = interpolate(space, data, range(space.sm.d))[idx]
    b = b - A @ g
    mask = np.zeros(space.ndof, dtype=bool)
    mask[idx] = True
    keep = sp.diags((~mask).astype(float))
    A2 = (keep @ A @ keep + sp.diags(mask.astype(float))).tocsr()
    b[mask] = g[mask]
    return LinearSystem(A2, b, idx, g[idx])


@dataclass
class SolveResult:
    x: np.ndarray
    method: str
    iterations: int
    residual: float
    history: list[float] = field(default_factory=list)


def conjugate_gradient(A, b, tol: float = 1e-12, maxiter: int = 2000) -> SolveResult:
    """Jacobi-preconditioned CG; stops on ``|r| <= tol |b|``."""
    diag = A.diagonal()
    Minv = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b) or 1.0
    z = Minv * r
    p = z.copy()
    rz = r @ z
    hist = [np.linalg.norm(r) / bnorm]
    for it in range(1, maxiter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            break
        a = rz / pAp
        x += a * p
        r -= a * Ap
        hist.append(np.linalg.norm(r) / bnorm)
        if hist[-1] <= tol:
            return SolveResult(x, "cg", it, hist[-1], hist)
        z = Minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return SolveResult(x, "cg", len(hist) - 1, hist[-1], hist)


def solve(system: LinearSystem, tol: float = 1e-12, maxiter: int = 2000, dense_limit: int = 20000) -> SolveResult:
    """PCG first; dense symmetric factorisation (Jacobi-scaled) when CG does not converge."""
    A, b = system.A, system.b
    res = conjugate_gradient(A, b, tol, maxiter)
    if res.residual <= tol:
        return res
    n = A.shape[0]
    if n > dense_limit:
        raise SolverError(f"CG stalled at relative residual {res.residual:.2e} and n={n} exceeds the dense limit")
    log.info("CG stalled at %.2e after %d iterations; using dense factorisation", res.residual, res.iterations)
    s = 1.0 / np.sqrt(A.diagonal())
    Ad = (A.toarray() * s[:, None]) * s[None, :]
    try:
        y = sla.cho_solve(sla.cho_factor(Ad), b * s)
        method = "cholesky"
    except np.linalg.LinAlgError:
        y = sla.solve(Ad, b * s, assume_a="sym")
        method = "ldl"
    x = y * s
    rel = np.linalg.norm(b - A @ x) / (np.linalg.norm(b) or 1.0)
    return SolveResult(x, method, res.iterations, float(rel), res.history)


def solve_polyharmonic(space: FESpace, exact: Oracle, source=None) -> tuple[np.ndarray, SolveResult]:
    """Assemble, impose Dirichlet data from ``exact`` and solve; returns the global DoF vector."""
    m = space.sm.m
    f = source if source is not None else polyharmonic_source(exact, m)
    A = assemble_stiffness(space)
    b = assemble_load(space, f)
    system = apply_dirichlet(A, b, space, exact)
    res = solve(system)
    return res.x, res


@dataclass
class ConvergenceRow:
    h: float
    ndof: int
    errors: list[float]
    rates: list[float | None]
    seconds: float = 0.0


@dataclass
class ConvergenceTable:
    config: dict
    rows: list[ConvergenceRow]


def observed_rates(hs: list[float], errs: list[list[float]]) -> list[list[float | None]]:
    out: list[list[float | None]] = [[None] * len(errs[0])] if errs else []
    for i in range(1, len(hs)):
        fac = np.log(hs[i - 1] / hs[i])
        out.append([float(np.log(a / b) / fac) if a > 0 and b > 0 else None for a, b in zip(errs[i - 1], errs[i])])
    return out


def convergence_study(
    meshes: list,
    sm,
    exact: Oracle,
    kind: str = "polyharmonic",
    orders: range | None = None,
    threads: int = 1,
    config: dict | None = None,
    keep: list | None = None,
) -> ConvergenceTable:
    """Errors and observed rates over a mesh sequence for interpolation or the PDE solve.

    ``meshes`` are ``(h, Mesh)`` pairs.  When ``keep`` is a list, the space and
    element coefficients of each level are appended to it.
    """
    orders = orders if orders is not None else range(sm.m + 2)
    hs, errs, rows = [], [], []
    for h, mesh in meshes:
        t0 = time.perf_counter()
        space = FESpace(mesh, sm, threads=threads)
        if kind == "interpolate":
            u = interpolate(space, exact)
        elif kind == "polyharmonic":
            u, _ = solve_polyharmonic(space, exact)
        else:
            raise ValueError(f"unknown study kind {kind!r}")
        coeffs = space.element_coefficients(u)
        e = error_norms(space, coeffs, exact, orders)
        if keep is not None:
            keep.append((space, coeffs))
        hs.append(h)
        errs.append(e)
        rows.append(ConvergenceRow(h, space.ndof, e, [], time.perf_counter() - t0))
    for row, rate in zip(rows, observed_rates(hs, errs)):
        row.rates = rate
    return ConvergenceTable(config or {}, rows)
