"""The C^m conforming finite element space.

Per element the pipeline is: DoF-basis matrix ``D`` (local DoFs applied to
the Bernstein basis), local dual basis ``C = D^{-T}`` by block
back-substitution, transformation ``T`` from local to global normal frames,
and global basis coefficients ``G = T^T C``.  Row ``p`` of ``G`` holds the
Bernstein coefficients (lattice order) of the global basis function with
number ``dofmap[t, p]`` restricted to element ``t``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import permutations
from math import factorial

import numpy as np

from .bernstein import lattice_points, poly_derivative
from .frames import global_frame, local_frame
from .lattice import (
    SmoothnessVector,
    complement,
    decompose,
    distance,
    extend,
    generate_lattice,
    lattice_lookup,
    local_faces,
    multi_factorial,
    reference_entries,
    restrict,
)
from .mesh import ElementGeometry, FaceTable, Mesh, barycentric_gradients, encode_permutation, enumerate_faces
from .tensor import multiplicity, sym_monomials

log = logging.getLogger(__name__)


@dataclass
class _Group:
    """Local DoFs of one face with one normal derivative order ``s``."""

    ell: int
    fidx: int
    face: tuple[int, ...]
    s: int
    start: int
    stop: int
    af_id: np.ndarray  # which alpha_f each position carries
    g_id: np.ndarray  # lattice index of the normal multi-index
    # D entries with a row in this group
    d_rows: np.ndarray = field(repr=False, default=None)
    d_cols: np.ndarray = field(repr=False, default=None)
    d_coef: np.ndarray = field(repr=False, default=None)
    d_a: np.ndarray = field(repr=False, default=None)
    d_g: np.ndarray = field(repr=False, default=None)


@dataclass
class LocalLayout:
    """Canonical ordering of local DoFs and the sparsity data of ``D`` and ``T``.

    Canonical order: face dimension, local face (lex), distance to the face,
    lattice order.  Every local DoF sits on one lattice point.
    """

    sm: SmoothnessVector
    points: list[tuple[int, ...]]
    lex_of: np.ndarray
    face_dim: np.ndarray
    face_idx: np.ndarray
    order_s: np.ndarray
    groups: list[_Group]

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def diagonal(self) -> np.ndarray:
        k = self.sm.k
        return np.array([factorial(k) / factorial(k - s) for s in self.order_s])

    @cached_property
    def canon_of_lex(self) -> np.ndarray:
        inv = np.empty(self.n, dtype=np.int64)
        inv[self.lex_of] = np.arange(self.n)
        return inv

    def face_positions(self, ell: int, fidx: int) -> np.ndarray:
        return np.flatnonzero((self.face_dim == ell) & (self.face_idx == fidx))


@lru_cache(maxsize=None)
def local_layout(sm: SmoothnessVector) -> LocalLayout:
    d, k = sm.d, sm.k
    dec = decompose(sm)
    ordered = dec.ordered()
    points = [a for _, a in ordered]
    canon = {a: i for i, a in enumerate(points)}
    lex = lattice_lookup(k, d)
    face_of = {f: (len(f) - 1, local_faces(d, len(f) - 1).index(f)) for f, _ in ordered}
    face_dim = np.array([face_of[f][0] for f, _ in ordered])
    face_idx = np.array([face_of[f][1] for f, _ in ordered])
    order_s = np.array([distance(a, f) for f, a in ordered])
    groups: list[_Group] = []
    i = 0
    while i < len(ordered):
        f, a = ordered[i]
        s = distance(a, f)
        j = i
        while j < len(ordered) and ordered[j][0] == f and distance(ordered[j][1], f) == s:
            j += 1
        star = complement(f, d)
        afs = [restrict(ordered[p][1], f) for p in range(i, j)]
        af_list = sorted(set(afs), key=lambda x: lattice_lookup(k - s, len(f) - 1)[x])
        gl = lattice_lookup(s, d - len(f)) if star else {(): 0}
        g_id = np.array([gl[restrict(ordered[p][1], star)] for p in range(i, j)])
        grp = _Group(len(f) - 1, face_of[f][1], f, s, i, j, np.array([af_list.index(x) for x in afs]), g_id)
        # single-term closed form: column beta = E_f(alpha_f) + alpha_tilde
        rows, cols, coef, aid, gid = [], [], [], [], []
        for p in range(i, j):
            ef = extend(restrict(ordered[p][1], f), f, d)
            for ia, at in enumerate(generate_lattice(s, d)):
                beta = tuple(x + y for x, y in zip(ef, at))
                rows.append(p)
                cols.append(canon[beta])
                coef.append(factorial(s) * factorial(k) / (factorial(k - s) * multi_factorial(at)))
                aid.append(ia)
                gid.append(g_id[p - i])
        grp.d_rows, grp.d_cols = np.array(rows), np.array(cols)
        grp.d_coef, grp.d_a, grp.d_g = np.array(coef), np.array(aid), np.array(gid)
        groups.append(grp)
        i = j
    lex_of = np.array([lex[a] for a in points])
    return LocalLayout(sm, points, lex_of, face_dim, face_idx, order_s, groups)


def dof_basis_matrix(
    vertices: np.ndarray, grads: np.ndarray, sm: SmoothnessVector, exact_diagonal: bool = True
) -> np.ndarray:
    """``D[..., alpha, beta] = L^alpha(B^beta)`` in canonical order on both axes.

    Only entries allowed by the single-term closed form are written; all
    others are structurally zero.  With ``exact_diagonal`` the diagonal
    blocks are set to their exact values ``k!/(k-s)! I``.
    """
    vertices = np.asarray(vertices, dtype=float)
    grads = np.asarray(grads, dtype=float)
    single = vertices.ndim == 2
    if single:
        vertices, grads = vertices[None], grads[None]
    lay = local_layout(sm)
    d = sm.d
    nb = vertices.shape[0]
    D = np.zeros((nb, lay.n, lay.n))
    grad_mono = {}
    frames = {}
    for g in lay.groups:
        if g.s not in grad_mono:
            grad_mono[g.s] = sym_monomials(grads, g.s)
        if g.face not in frames:
            frames[g.face] = local_frame(vertices, grads, g.face).vectors
        P = np.einsum(
            "tac,c,tgc->tag", grad_mono[g.s], multiplicity(d, g.s), sym_monomials(frames[g.face], g.s)
        )
        D[:, g.d_rows, g.d_cols] = g.d_coef * P[:, g.d_a, g.d_g]
    if exact_diagonal:
        for g in lay.groups:
            blk = slice(g.start, g.stop)
            D[:, blk, blk] = np.eye(g.stop - g.start) * lay.diagonal[g.start]
    return D[0] if single else D


def local_basis(D: np.ndarray, sm: SmoothnessVector) -> np.ndarray:
    """``C = D^{-T}`` by back-substitution over the DoF blocks, highest first.

    Row ``alpha`` of ``C`` holds the canonical-order Bernstein coefficients of
    the local basis function dual to ``L^alpha``.  Diagonal blocks are scaled
    identities, so each step is a division.
    """
    lay = local_layout(sm)
    single = D.ndim == 2
    Dt = np.swapaxes(D[None] if single else D, 1, 2)
    X = np.zeros_like(Dt)
    for g in reversed(lay.groups):
        a, b = g.start, g.stop
        rhs = -Dt[:, a:b, b:] @ X[:, b:, :]
        rhs[:, :, a:b] += np.eye(b - a)
        X[:, a:b, :] = rhs / lay.diagonal[a]
    return X[0] if single else X


def _transform_blocks(
    vertices: np.ndarray, grads: np.ndarray, sm: SmoothnessVector, global_frames: dict
) -> list[np.ndarray]:
    """Dense ``T`` restricted to each group; ``global_frames[face] -> (nb, d-ell, d)``."""
    lay = local_layout(sm)
    d = sm.d
    out = []
    loc = {}
    for g in lay.groups:
        size = g.stop - g.start
        if g.ell == d:
            out.append(np.broadcast_to(np.eye(size), (vertices.shape[0], size, size)))
            continue
        if g.face not in loc:
            loc[g.face] = local_frame(vertices, grads, g.face).vectors
        gammas = generate_lattice(g.s, d - g.ell - 1)
        scale = np.array([factorial(g.s) / multi_factorial(c) for c in gammas])
        Nn = sym_monomials(loc[g.face], g.s)
        NN = sym_monomials(global_frames[g.face], g.s)
        Tt = np.einsum("tlc,c,tgc->tlg", Nn, multiplicity(d, g.s), NN) * scale
        same = g.af_id[:, None] == g.af_id[None, :]
        blk = Tt[:, g.g_id[:, None], g.g_id[None, :]] * same
        out.append(blk)
    return out


def transformation_matrix(
    vertices: np.ndarray, grads: np.ndarray, sm: SmoothnessVector, global_frames: dict
) -> np.ndarray:
    """Full ``T[alpha, beta]`` of one element (canonical order), block diagonal."""
    lay = local_layout(sm)
    blocks = _transform_blocks(vertices[None], grads[None], sm, {f: v[None] for f, v in global_frames.items()})
    T = np.zeros((lay.n, lay.n))
    for g, blk in zip(lay.groups, blocks):
        T[g.start : g.stop, g.start : g.stop] = blk[0]
    return T


def apply_transform(blocks: list[np.ndarray], C: np.ndarray, sm: SmoothnessVector) -> np.ndarray:
    """``G = T^T C`` using the block structure of ``T``."""
    lay = local_layout(sm)
    G = np.empty_like(C)
    for g, blk in zip(lay.groups, blocks):
        a, b = g.start, g.stop
        G[:, a:b] = np.swapaxes(blk, 1, 2) @ C[:, a:b]
    return G


@dataclass
class ElementBasis:
    """All per-element matrices of one element (canonical DoF order)."""

    element: int
    D: np.ndarray
    C: np.ndarray
    T: np.ndarray
    G: np.ndarray  # columns in lattice order

    def coefficients(self, dof_values: np.ndarray) -> np.ndarray:
        return dof_values @ self.G


@dataclass
class ContinuityReport:
    max_jump: float
    jumps: dict[int, float]
    scale: float
    n_faces: int
    n_points: int

    @property
    def relative(self) -> float:
        return self.max_jump / self.scale if self.scale > 0 else self.max_jump


class FESpace:
    """Global C^m space on a mesh.

    Global DoFs are numbered face dimension first, then global face id, then
    the entry of the face's reference label set.
    """

    def __init__(
        self,
        mesh: Mesh,
        sm: SmoothnessVector,
        threads: int = 1,
        chunk: int = 32,
        cache_bytes: float = 3e8,
    ) -> None:
        if mesh.dim != sm.d:
            raise ValueError(f"mesh dimension {mesh.dim} differs from smoothness vector dimension {sm.d}")
        self.mesh = mesh
        self.sm = sm
        self.threads = max(1, int(threads))
        self.chunk = chunk
        self.cache_bytes = cache_bytes
        self.layout = local_layout(sm)
        self.table: FaceTable = enumerate_faces(mesh)
        self.geometry: ElementGeometry = barycentric_gradients(mesh.element_vertices())
        d = sm.d
        self.frames = [global_frame(mesh.nodes[self.table.faces[ell]]) for ell in range(d)]
        self._build_dofmap()
        self._G: np.ndarray | None = None

    # numbering -----------------------------------------------------------
    def _build_dofmap(self) -> None:
        d, sm, lay, tab = self.sm.d, self.sm, self.layout, self.table
        self.n_reference = [len(reference_entries(ell, sm)) for ell in range(d + 1)]
        offsets = [0]
        for ell in range(d + 1):
            offsets.append(offsets[-1] + tab.count(ell) * self.n_reference[ell])
        self.offsets = offsets
        self.ndof = offsets[-1]
        NT = self.mesh.n_elements
        dofmap = np.empty((NT, lay.n), dtype=np.int64)
        for ell in range(d + 1):
            ref = reference_entries(ell, sm)
            look = {e: i for i, e in enumerate(ref)}
            perms = list(permutations(range(ell + 1)))
            codes = encode_permutation(tab.element_perm[ell])  # (NT, nfaces)
            for fidx, f in enumerate(local_faces(d, ell)):
                pos = lay.face_positions(ell, fidx)
                if pos.size == 0:
                    continue
                star = complement(f, d)
                table = np.empty((len(perms), pos.size), dtype=np.int64)
                for pc, p in enumerate(perms):
                    for j, q in enumerate(pos):
                        af = restrict(lay.points[q], f)
                        key = (tuple(af[i] for i in p), restrict(lay.points[q], star))
                        table[pc, j] = look[key]
                fid = tab.element_faces[ell][:, fidx]
                dofmap[:, pos] = offsets[ell] + fid[:, None] * self.n_reference[ell] + table[codes[:, fidx]]
        self.dofmap = dofmap
        self.dof_dim = np.concatenate([np.full(tab.count(ell) * self.n_reference[ell], ell) for ell in range(d + 1)])
        self.dof_face = np.concatenate(
            [np.repeat(np.arange(tab.count(ell)), self.n_reference[ell]) for ell in range(d + 1)]
        )
        self.dof_entry = np.concatenate(
            [np.tile(np.arange(self.n_reference[ell]), tab.count(ell)) for ell in range(d + 1)]
        )

    def dimension(self) -> int:
        return self.ndof

    def face_frames(self, elements: np.ndarray) -> dict:
        out = {}
        for ell in range(self.sm.d):
            for fidx, f in enumerate(local_faces(self.sm.d, ell)):
                out[f] = self.frames[ell][self.table.element_faces[ell][elements, fidx]]
        return out

    # element bases -------------------------------------------------------
    def _chunk_bases(self, elements: np.ndarray) -> np.ndarray:
        verts = self.geometry.vertices[elements]
        grads = self.geometry.grads[elements]
        D = dof_basis_matrix(verts, grads, self.sm)
        C = local_basis(D, self.sm)
        blocks = _transform_blocks(verts, grads, self.sm, self.face_frames(elements))
        G = apply_transform(blocks, C, self.sm)
        return G[:, :, self.layout.canon_of_lex]

    def _chunks(self, elements: np.ndarray) -> list[np.ndarray]:
        return [elements[i : i + self.chunk] for i in range(0, len(elements), self.chunk)]

    def iter_bases(self, elements: np.ndarray | None = None):
        """Yield ``(element ids, G)`` chunks; deterministic for any thread count."""
        if elements is None:
            elements = np.arange(self.mesh.n_elements)
        if self._G is not None:
            for c in self._chunks(elements):
                yield c, self._G[c]
            return
        chunks = self._chunks(elements)
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                yield from zip(chunks, ex.map(self._chunk_bases, chunks))
        else:
            for c in chunks:
                yield c, self._chunk_bases(c)

    def bases(self) -> np.ndarray:
        """Global basis coefficients of all elements ``(NT, n, N)`` (cached when small)."""
        if self._G is None:
            G = np.empty((self.mesh.n_elements, self.layout.n, self.layout.n))
            for c, g in self.iter_bases():
                G[c] = g
            if G.nbytes <= self.cache_bytes:
                self._G = G
            return G
        return self._G

    def element_basis(self, t: int) -> ElementBasis:
        verts, grads = self.geometry.vertices[t], self.geometry.grads[t]
        D = dof_basis_matrix(verts, grads, self.sm)
        C = local_basis(D, self.sm)
        frames = {f: v[0] for f, v in self.face_frames(np.array([t])).items()}
        T = transformation_matrix(verts, grads, self.sm, frames)
        G = (T.T @ C)[:, self.layout.canon_of_lex]
        return ElementBasis(t, D, C[:, self.layout.canon_of_lex], T, G)

    def element_coefficients(self, u: np.ndarray) -> np.ndarray:
        """Bernstein coefficients ``(NT, N)`` of a global DoF vector on each element."""
        u = np.asarray(u, dtype=float)
        out = np.empty((self.mesh.n_elements, self.layout.n))
        for c, g in self.iter_bases():
            out[c] = np.einsum("tp,tpn->tn", u[self.dofmap[c]], g)
        return out

    # geometry helpers ---------------------------------------------------
    def barycentric(self, elements: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Barycentric coordinates ``(..., d+1)`` of points ``x (n_el, nq, d)`` in given elements."""
        x0 = self.geometry.vertices[elements, 0]
        g = self.geometry.grads[elements]
        lam = np.einsum("tid,tqd->tqi", g, x - x0[:, None, :])
        lam[..., 0] += 1.0
        return lam


def dimension_formula(mesh: Mesh, sm: SmoothnessVector, table: FaceTable | None = None) -> int:
    """``sum_ell (#ell-faces) * |reference set of an ell-face|``."""
    table = table or enumerate_faces(mesh)
    return sum(table.count(ell) * len(reference_entries(ell, sm)) for ell in range(sm.d + 1))


def interior_facets(space: FESpace) -> tuple[np.ndarray, np.ndarray]:
    """Facet ids shared by two elements and the ``(nf, 2)`` element pairs."""
    d = space.sm.d
    ef = space.table.element_faces[d - 1]
    nfacet = space.table.count(d - 1)
    owners = np.full((nfacet, 2), -1, dtype=np.int64)
    fill = np.zeros(nfacet, dtype=np.int64)
    for t, row in enumerate(ef.tolist()):
        for fid in row:
            owners[fid, fill[fid]] = t
            fill[fid] += 1
    inner = np.flatnonzero(fill == 2)
    return inner, owners[inner]


def check_cm_continuity(
    space: FESpace,
    coeffs: np.ndarray,
    n_points: int = 20,
    rng: np.random.Generator | None = None,
    orders: range | None = None,
) -> ContinuityReport:
    """Two-sided jumps of ``grad^j u_h``, ``j <= m``, at random points of interior facets.

    ``coeffs`` are per-element Bernstein coefficients ``(NT, N)``; the reported
    scale is the max-norm of ``coeffs``.
    """
    rng = rng or np.random.default_rng(0)
    d, m = space.sm.d, space.sm.m
    orders = orders if orders is not None else range(m + 1)
    inner, owners = interior_facets(space)
    facets = space.table.faces[d - 1][inner]
    pts = space.mesh.nodes[facets]  # (nf, d, d)
    w = rng.dirichlet(np.ones(d), size=(len(inner), n_points))
    x = np.einsum("fqv,fvc->fqc", w, pts)
    jumps = {}
    for j in orders:
        vals = []
        for side in range(2):
            el = owners[:, side]
            lam = space.barycentric(el, x)
            vals.append(poly_derivative(coeffs[el], j, space.geometry.grads[el], lam))
        jumps[j] = float(np.max(np.abs(vals[0] - vals[1]))) if len(inner) else 0.0
    return ContinuityReport(
        max(jumps.values()) if jumps else 0.0,
        jumps,
        float(np.max(np.abs(coeffs))) if coeffs.size else 0.0,
        len(inner),
        n_points,
    )
