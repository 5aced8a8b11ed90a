"""Conforming simplicial meshes, sub-simplex tables and element geometry."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from math import factorial
from pathlib import Path

import numpy as np

from .lattice import local_faces


class SingularGeometryError(ValueError):
    """An element has (numerically) zero measure."""


class MeshFormatError(ValueError):
    pass


class NonManifoldError(ValueError):
    pass


@dataclass
class Mesh:
    """Vertex coordinates ``nodes (N, d)`` and element connectivity ``elements (NT, d+1)``."""

    nodes: np.ndarray
    elements: np.ndarray

    def __post_init__(self) -> None:
        self.nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if self.nodes.ndim != 2:
            raise MeshFormatError("nodes must be a 2D array")
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.elements.ndim != 2 or self.elements.shape[1] != self.dim + 1:
            raise MeshFormatError(
                f"elements must have {self.dim + 1} vertices each, got shape {self.elements.shape}"
            )
        if self.elements.size and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise MeshFormatError("element vertex index out of range")

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_vertices(self) -> np.ndarray:
        """Coordinates per element, shape ``(NT, d+1, d)``."""
        return self.nodes[self.elements]

    def h(self) -> float:
        """Largest edge length."""
        x = self.element_vertices()
        hmax = 0.0
        for i, j in local_faces(self.dim, 1):
            hmax = max(hmax, float(np.linalg.norm(x[:, i] - x[:, j], axis=1).max()))
        return hmax


@dataclass
class ElementGeometry:
    """Batched barycentric gradients ``(NT, d+1, d)`` and measures ``(NT,)``."""

    vertices: np.ndarray
    grads: np.ndarray
    measure: np.ndarray


def barycentric_gradients(vertices: np.ndarray, rtol: float = 1e-13) -> ElementGeometry:
    """Geometry for a batch of simplices given their vertex coordinates."""
    x = np.asarray(vertices, dtype=float)
    single = x.ndim == 2
    if single:
        x = x[None]
    d = x.shape[-1]
    jac = np.swapaxes(x[:, 1:] - x[:, :1], 1, 2)  # columns are edge vectors
    det = np.linalg.det(jac)
    scale = np.max(np.abs(x[:, 1:] - x[:, :1]), axis=(1, 2)) ** d
    bad = np.flatnonzero(np.abs(det) <= rtol * np.maximum(scale, np.finfo(float).tiny))
    if bad.size:
        raise SingularGeometryError(f"degenerate element(s) {bad[:10].tolist()}")
    inv = np.linalg.inv(jac)
    grads = np.empty((x.shape[0], d + 1, d))
    grads[:, 1:] = inv
    grads[:, 0] = -inv.sum(axis=1)
    geo = ElementGeometry(x, grads, np.abs(det) / factorial(d))
    if single:
        return ElementGeometry(x[0], grads[0], geo.measure[0])
    return geo


def _perm_codes(n: int) -> dict[tuple[int, ...], int]:
    return {p: i for i, p in enumerate(permutations(range(n)))}


def encode_permutation(p: np.ndarray) -> np.ndarray:
    """Integer code of each row permutation, matching ``itertools.permutations`` order."""
    n = p.shape[-1]
    codes = _perm_codes(n)
    flat = p.reshape(-1, n)
    keys = [codes[tuple(row)] for row in flat.tolist()]
    return np.asarray(keys, dtype=np.int64).reshape(p.shape[:-1])


@dataclass
class FaceTable:
    """Global sub-simplices of every dimension.

    ``faces[ell]`` holds ascending vertex tuples in lexicographic order, so a
    face's global id is its rank.  ``element_faces[ell][t, j]`` is the id of the
    ``j``-th local ``ell``-face of element ``t`` and ``element_perm[ell][t, j]``
    the argsort that brings its vertices into ascending global order.
    """

    faces: list[np.ndarray]
    element_faces: list[np.ndarray]
    element_perm: list[np.ndarray]
    boundary: list[np.ndarray] = field(default_factory=list)

    def count(self, ell: int) -> int:
        return len(self.faces[ell])


def enumerate_faces(mesh: Mesh) -> FaceTable:
    d = mesh.dim
    faces, elem_faces, elem_perm = [], [], []
    for ell in range(d + 1):
        loc = np.array(local_faces(d, ell))
        verts = mesh.elements[:, loc]  # (NT, nloc, ell+1)
        perm = np.argsort(verts, axis=2, kind="stable")
        srt = np.take_along_axis(verts, perm, axis=2)
        uniq, inv = np.unique(srt.reshape(-1, ell + 1), axis=0, return_inverse=True)
        faces.append(uniq)
        elem_faces.append(inv.reshape(verts.shape[:2]))
        elem_perm.append(perm)
    # facets with a single neighbour lie on the boundary
    nfacet = len(faces[d - 1])
    mult = np.bincount(elem_faces[d - 1].ravel(), minlength=nfacet)
    if np.any(mult > 2):
        raise NonManifoldError(f"facets shared by more than two elements: {np.flatnonzero(mult > 2)[:10]}")
    on_bnd = [np.zeros(len(faces[ell]), dtype=bool) for ell in range(d + 1)]
    bnd_facets = np.flatnonzero(mult == 1)
    on_bnd[d - 1][bnd_facets] = True
    fverts = faces[d - 1][bnd_facets]
    for ell in range(d - 1):
        lookup = {tuple(row): i for i, row in enumerate(faces[ell].tolist())}
        for sub in local_faces(d - 1, ell):
            for row in fverts[:, list(sub)].tolist():
                on_bnd[ell][lookup[tuple(row)]] = True
    return FaceTable(faces, elem_faces, elem_perm, on_bnd)


def builtin_mesh(kind: str, n: int) -> Mesh:
    """Uniform meshes of the unit interval, square or cube with ``n`` cells per side.

    The square splits each cell by the diagonal from (1,0) to (0,1); the cube
    uses the six-tetrahedron Kuhn split along the (0,0,0)-(1,1,1) diagonal.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if kind == "interval":
        nodes = np.linspace(0.0, 1.0, n + 1)[:, None]
        elems = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
        return Mesh(nodes, elems)
    if kind == "square":
        t = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(t, t)  # x fastest
        nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
        i, j = np.meshgrid(np.arange(n), np.arange(n))
        v00 = (j * (n + 1) + i).ravel()
        v10, v01 = v00 + 1, v00 + n + 1
        v11 = v01 + 1
        elems = np.empty((2 * n * n, 3), dtype=np.int64)
        elems[0::2] = np.stack([v00, v10, v01], axis=1)
        elems[1::2] = np.stack([v10, v11, v01], axis=1)
        return Mesh(nodes, elems)
    if kind == "cube":
        t = np.linspace(0.0, 1.0, n + 1)
        Z, Y, X = np.meshgrid(t, t, t, indexing="ij")
        nodes = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        idx = lambda a, b, c: (c * (n + 1) + b) * (n + 1) + a  # noqa: E731
        elems = []
        steps = np.eye(3, dtype=int)
        for c in range(n):
            for b in range(n):
                for a in range(n):
                    for p in permutations(range(3)):
                        cur = np.array([a, b, c])
                        tet = [idx(*cur)]
                        for axis in p:
                            cur = cur + steps[axis]
                            tet.append(idx(*cur))
                        elems.append(tet)
        return Mesh(nodes, np.array(elems, dtype=np.int64))
    raise ValueError(f"unknown builtin mesh kind {kind!r}")


def load_mesh(path: str | Path) -> Mesh:
    """Read the plain-text format: ``d N NT`` then N coordinate rows then NT index rows.

    Lines starting with ``#`` are ignored.  Indices are zero-based.
    """
    lines = []
    with open(path) as fh:
        for raw in fh:
            s = raw.strip()
            if s and not s.startswith("#"):
                lines.append(s)
    try:
        d, nn, nt = (int(v) for v in lines[0].split())
        nodes = np.array([[float(v) for v in ln.split()] for ln in lines[1 : 1 + nn]])
        elems = np.array([[int(v) for v in ln.split()] for ln in lines[1 + nn : 1 + nn + nt]])
    except (ValueError, IndexError) as exc:
        raise MeshFormatError(f"cannot parse mesh file {path}: {exc}") from exc
    if nodes.shape != (nn, d) or elems.shape != (nt, d + 1):
        raise MeshFormatError(
            f"mesh file {path}: expected {nn}x{d} nodes and {nt}x{d + 1} elements, "
            f"got {nodes.shape} and {elems.shape}"
        )
    return Mesh(nodes, elems)


def write_mesh(mesh: Mesh, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {len(mesh.nodes)} {mesh.n_elements}\n")
        for row in mesh.nodes:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
        for row in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def parse_mesh_spec(spec: str, dim: int | None = None) -> tuple[str, int | None, str | None]:
    """Split ``builtin:square:N``, ``builtin:cube`` or ``file:PATH``."""
    parts = spec.split(":", 2)
    if parts[0] == "file" and len(parts) >= 2:
        return "file", None, spec[len("file:") :]
    if parts[0] == "builtin" and len(parts) >= 2:
        n = int(parts[2]) if len(parts) == 3 else None
        return parts[1], n, None
    raise ValueError(f"bad mesh argument {spec!r}; expected builtin:KIND[:N] or file:PATH")
