"""Normal frames of faces.

Local frames depend on the element and are dual to the gradients of the
barycentric coordinates of the opposite vertices.  Global frames depend only
on the face and are orthonormal, so DoFs defined with them match across
elements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import complement


@dataclass
class LocalFrame:
    """Frame ``vectors (..., d-ell, d)`` of a local face and its dual ``duals``."""

    face: tuple[int, ...]
    vectors: np.ndarray
    duals: np.ndarray


def _tangent_projector(points: np.ndarray) -> np.ndarray:
    """Orthogonal projectors ``(..., d, d)`` onto the tangent space of simplices ``points (..., p, d)``."""
    d = points.shape[-1]
    if points.shape[-2] == 1:
        return np.zeros(points.shape[:-2] + (d, d))
    tangents = np.swapaxes(points[..., 1:, :] - points[..., :1, :], -1, -2)  # (..., d, p-1)
    q, _ = np.linalg.qr(tangents)
    return q @ np.swapaxes(q, -1, -2)


def local_frame(vertices: np.ndarray, grads: np.ndarray, face: tuple[int, ...]) -> LocalFrame:
    """Tangential-normal frame ``n_f^i``, ``i`` in the complement of ``face``.

    ``n_f^i`` is the gradient of ``lambda_i`` projected onto the tangent space
    of ``face + {i}``, scaled by its inverse squared length, so that
    ``grad lambda_j . n_f^i = delta_ij`` for ``i, j`` outside the face.
    """
    vertices = np.asarray(vertices, dtype=float)
    grads = np.asarray(grads, dtype=float)
    d = vertices.shape[-1]
    star = complement(face, d)
    vecs = []
    for i in star:
        sub = list(face) + [i]
        if len(sub) == d + 1:
            g = grads[..., i, :]
        else:
            P = _tangent_projector(vertices[..., sub, :])
            g = np.einsum("...ij,...j->...i", P, grads[..., i, :])
        vecs.append(g / np.sum(g * g, axis=-1, keepdims=True))
    if vecs:
        vectors = np.stack(vecs, axis=-2)
    else:
        vectors = np.zeros(vertices.shape[:-2] + (0, d))
    duals = grads[..., list(star), :]
    return LocalFrame(tuple(face), vectors, duals)


def global_frame(face_points: np.ndarray) -> np.ndarray:
    """Orthonormal basis ``(..., d-ell, d)`` of the normal space of faces ``face_points (..., ell+1, d)``.

    Vertices must be given in ascending global order.  The canonical basis is
    orthogonalised against the tangent space by modified Gram-Schmidt, always
    taking the candidate with the largest residual (lowest index on ties);
    each vector is signed so its largest-magnitude entry is positive.
    """
    pts = np.asarray(face_points, dtype=float)
    batch = pts.shape[:-2]
    p, d = pts.shape[-2], pts.shape[-1]
    ell = p - 1
    if ell == 0:
        return np.broadcast_to(np.eye(d), batch + (d, d)).copy()
    flat = pts.reshape(-1, p, d)
    nf = flat.shape[0]
    basis: list[np.ndarray] = []
    # orthonormal tangent basis by MGS in vertex order
    for j in range(1, p):
        v = flat[:, j] - flat[:, 0]
        for q in basis:
            v = v - np.sum(v * q, axis=1, keepdims=True) * q
        basis.append(v / np.linalg.norm(v, axis=1, keepdims=True))
    cand = np.broadcast_to(np.eye(d), (nf, d, d)).copy()
    for q in basis:
        cand -= q[:, None, :] * np.einsum("fic,fc->fi", cand, q)[:, :, None]
    normals = []
    for _ in range(d - ell):
        norms = np.linalg.norm(cand, axis=2)
        pick = np.argmax(norms, axis=1)  # argmax breaks ties at the lowest index
        v = cand[np.arange(nf), pick] / norms[np.arange(nf), pick][:, None]
        big = np.argmax(np.abs(v), axis=1)
        v = v * np.sign(v[np.arange(nf), big])[:, None]
        normals.append(v)
        cand -= v[:, None, :] * np.einsum("fic,fc->fi", cand, v)[:, :, None]
    return np.stack(normals, axis=1).reshape(batch + (d - ell, d))


def orientation_sign(grads: np.ndarray, normal: np.ndarray, opposite: int) -> np.ndarray:
    """Sign of ``normal . grad lambda_opposite`` for a facet opposite vertex ``opposite``."""
    return np.sign(np.einsum("...c,...c->...", normal, grads[..., opposite, :]))
