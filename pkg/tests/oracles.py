"""Independent reference implementations used only by the tests.

Nothing here calls the package's tensor or Bernstein derivative code.
"""

from __future__ import annotations

import itertools
from functools import lru_cache
from math import factorial

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.signal import convolve


# --- full d^r tensors ------------------------------------------------------

def full_outer(vectors):
    t = np.array(1.0)
    for v in vectors:
        t = np.multiply.outer(t, v)
    return t


def full_sym(t):
    r = t.ndim
    return sum(np.transpose(t, p) for p in itertools.permutations(range(r))) / factorial(r)


def full_monomial(vectors, alpha):
    seq = [vectors[i] for i, a in enumerate(alpha) for _ in range(a)]
    return full_sym(full_outer(seq)) if seq else np.array(1.0)


def canonical_entry(t, mu):
    idx = tuple(i for i, m in enumerate(mu) for _ in range(m))
    return t[idx] if idx else float(t)


def full_from_components(comps, d, r, lattice):
    """Expand canonical components to the full symmetric array."""
    t = np.zeros((d,) * r)
    look = {mu: c for mu, c in zip(lattice, comps)}
    for idx in itertools.product(range(d), repeat=r):
        mu = tuple(idx.count(i) for i in range(d))
        t[idx] = look[mu]
    return t


def frobenius(a, b):
    return float(np.sum(a * b))


# --- polynomials in Cartesian monomials --------------------------------------

class MonomialPolys:
    """A batch of polynomials on R^d as dense monomial coefficient arrays.

    Coefficients refer to the scaled variable ``y = (x - centre) / radius``,
    which keeps the expansion well conditioned on any element.
    """

    def __init__(self, coeffs: np.ndarray, d: int, centre=None, radius: float = 1.0):
        self.c = coeffs  # shape (nb,) + (K,)*d
        self.d = d
        self.centre = np.zeros(d) if centre is None else np.asarray(centre, dtype=float)
        self.radius = radius

    def like(self, coeffs: np.ndarray) -> "MonomialPolys":
        return MonomialPolys(coeffs, self.d, self.centre, self.radius)

    @classmethod
    def bernstein_basis(cls, vertices: np.ndarray, lattice) -> "MonomialPolys":
        d = vertices.shape[1]
        k = sum(lattice[0])
        centre = vertices.mean(axis=0)
        radius = float(np.max(np.linalg.norm(vertices - centre, axis=1)))
        A = np.vstack([((vertices - centre) / radius).T, np.ones(d + 1)])
        M = np.linalg.inv(A)  # lambda = M @ [x, 1]
        lin = []
        for i in range(d + 1):
            c = np.zeros((2,) * d)
            c[(0,) * d] = M[i, d]
            for j in range(d):
                e = [0] * d
                e[j] = 1
                c[tuple(e)] = M[i, j]
            lin.append(c)
        powers = []
        for i in range(d + 1):
            pw = [np.ones((1,) * d)]
            for _ in range(k):
                pw.append(convolve(pw[-1], lin[i], method="direct"))
            powers.append(pw)
        out = np.zeros((len(lattice),) + (k + 1,) * d)
        for n, a in enumerate(lattice):
            p = np.ones((1,) * d)
            for i, ai in enumerate(a):
                p = convolve(p, powers[i][ai], method="direct")
            coef = factorial(k) / np.prod([factorial(v) for v in a])
            sl = tuple(slice(0, s) for s in p.shape)
            out[(n,) + sl] = coef * p
        return cls(out, d, centre, radius)

    def directional(self, v: np.ndarray) -> "MonomialPolys":
        out = np.zeros_like(self.c)
        for j in range(self.d):
            if v[j] == 0:
                continue
            c = np.moveaxis(self.c, j + 1, -1)
            K = c.shape[-1]
            dc = np.zeros_like(c)
            dc[..., : K - 1] = c[..., 1:] * np.arange(1, K)
            out += v[j] / self.radius * np.moveaxis(dc, -1, j + 1)
        return self.like(out)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Values ``(nb, npts)``."""
        y = (np.asarray(x, dtype=float) - self.centre) / self.radius
        K = self.c.shape[1]
        if self.d == 1:
            V = P.polyvander(y[:, 0], K - 1)
        elif self.d == 2:
            V = P.polyvander2d(y[:, 0], y[:, 1], [K - 1] * 2)
        else:
            V = P.polyvander3d(y[:, 0], y[:, 1], y[:, 2], [K - 1] * 3)
        return self.c.reshape(len(self.c), -1) @ V.T


@lru_cache(maxsize=None)
def face_bernstein_vandermonde(q: int, ell: int) -> tuple[list, np.ndarray]:
    lat = [a for a in itertools.product(range(q + 1), repeat=ell + 1) if sum(a) == q]
    pts = [np.array(a) / q if q else np.full(ell + 1, 1 / (ell + 1)) for a in lat]
    V = np.array(
        [
            [factorial(q) / np.prod([factorial(v) for v in b]) * np.prod(p ** np.array(b)) for b in lat]
            for p in pts
        ]
    )
    return lat, V


def face_coefficients(
    polys: MonomialPolys, face_pts: np.ndarray, directions, q: int, memo: dict | None = None
) -> tuple[list, np.ndarray]:
    """Degree-``q`` face Bernstein coefficients of the restricted directional derivative.

    Returns the face lattice and an array ``(len(lattice), nb)``.  ``memo``
    caches derivatives by their direction sequence.
    """
    p = polys
    for i, v in enumerate(directions):
        key = tuple(np.asarray(w).tobytes() for w in directions[: i + 1])
        if memo is not None and key in memo:
            p = memo[key]
            continue
        p = p.directional(v)
        if memo is not None:
            memo[key] = p
    ell = len(face_pts) - 1
    lat, V = face_bernstein_vandermonde(q, ell)
    bary = np.array([np.array(a) / q if q else np.full(ell + 1, 1 / (ell + 1)) for a in lat])
    vals = p(bary @ face_pts)  # (nb, npts)
    return lat, np.linalg.solve(V, vals.T)


def dof_on_face(polys: MonomialPolys, face_pts: np.ndarray, directions, alpha_f) -> np.ndarray:
    """``<b^alpha_f, d^s p / d(directions) restricted to the face>`` for every polynomial in the batch.

    ``face_pts`` are the face vertices in the order that ``alpha_f`` refers to.
    """
    lat, coef = face_coefficients(polys, face_pts, directions, int(sum(alpha_f)))
    return coef[lat.index(tuple(alpha_f))]


def normal_directions(frame_vectors, gamma):
    return [frame_vectors[i] for i, g in enumerate(gamma) for _ in range(g)]


def apply_functionals(polys: MonomialPolys, functionals) -> np.ndarray:
    """Evaluate DoF functionals ``(face_pts, frame, alpha_f, gamma)`` on a batch of polynomials.

    Functionals that share a face and normal multi-index reuse one derivative
    evaluation.  Returns ``(len(functionals), nb)``.
    """
    groups: dict = {}
    for i, (pts, frame, af, gamma) in enumerate(functionals):
        key = (np.asarray(pts).tobytes(), np.asarray(frame).tobytes(), tuple(gamma), int(sum(af)))
        groups.setdefault(key, []).append(i)
    out = np.empty((len(functionals), polys.c.shape[0]))
    memo: dict = {}
    for idx in groups.values():
        pts, frame, _, gamma = functionals[idx[0]]
        q = int(sum(functionals[idx[0]][2]))
        lat, coef = face_coefficients(polys, np.asarray(pts), normal_directions(frame, gamma), q, memo)
        for i in idx:
            out[i] = coef[lat.index(tuple(functionals[i][2]))]
    return out


def local_functionals(x, grads, sm):
    """Local DoF functionals of one element in canonical order."""
    from smoothfem.fespace import local_layout
    from smoothfem.frames import local_frame
    from smoothfem.lattice import complement, local_faces, restrict

    lay = local_layout(sm)
    d = sm.d
    out = []
    for p, alpha in enumerate(lay.points):
        f = local_faces(d, lay.face_dim[p])[lay.face_idx[p]]
        frame = local_frame(x, grads, f).vectors
        out.append((x[list(f)], frame, restrict(alpha, f), restrict(alpha, complement(f, d))))
    return out


def global_functionals(space, t):
    """Global DoF functionals of element ``t`` in the order of ``space.dofmap[t]``."""
    from smoothfem.lattice import reference_entries

    sm = space.sm
    entries = [reference_entries(ell, sm) for ell in range(sm.d + 1)]
    out = []
    for gid in space.dofmap[t]:
        ell, fid = space.dof_dim[gid], space.dof_face[gid]
        af, gamma = entries[ell][space.dof_entry[gid]]
        frame = space.frames[ell][fid] if ell < sm.d else np.zeros((0, sm.d))
        out.append((space.mesh.nodes[space.table.faces[ell][fid]], frame, af, gamma))
    return out


# --- central finite differences ---------------------------------------------

def central_weights(order: int, half_width: int, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric stencil offsets and weights for the ``order``-th derivative.

    With ``2 half_width + 1`` points the stencil is exact for polynomials of
    degree ``2 half_width``, so only round-off remains for low-degree input.
    """
    j = np.arange(-half_width, half_width + 1)
    V = np.vander(j.astype(float), increasing=True).T  # V[p, i] = j_i^p
    rhs = np.zeros(len(j))
    rhs[order] = factorial(order)
    return j * step, np.linalg.solve(V, rhs) / step**order


def fd_partial(func, x: np.ndarray, mu, step: float = 0.05, half_width: int = 6) -> np.ndarray:
    """Mixed partial ``d^mu func`` at points ``x (n, d)`` by tensor-product central differences."""
    d = x.shape[-1]
    stencil = [(np.zeros(d), 1.0)]
    for axis, n in enumerate(mu):
        if n == 0:
            continue
        offs, wts = central_weights(n, half_width, step)
        stencil = [
            (o + off * np.eye(d)[axis], w * wt) for o, w in stencil for off, wt in zip(offs, wts)
        ]
    return sum(w * func(x + o) for o, w in stencil)


# --- exact Bernstein-form functionals ------------------------------------------

def _lattice(k, n):
    return [a for a in itertools.product(range(k + 1), repeat=n) if sum(a) == k]


def bernstein_functional(coeffs, grads, local_face, frame, alpha_f, gamma) -> np.ndarray:
    """``<b^alpha_f, d^s p / d frame^gamma on the face>`` read off exactly from Bernstein coefficients.

    Uses the derivative rule with full ``d^s`` tensors: the face coefficient is
    the element coefficient of ``grad^s p : frame^gamma`` at the lattice point
    that extends ``alpha_f`` by zeros.  ``coeffs (nb, N)`` follow the
    first-entry-descending lattice order; ``local_face`` lists element-local
    vertex numbers in the order ``alpha_f`` refers to.
    """
    coeffs = np.atleast_2d(coeffs)
    n_v, d = grads.shape
    s = int(sum(gamma))
    q = int(sum(alpha_f))
    k = q + s
    lat = sorted(_lattice(k, n_v), reverse=True)
    look = {a: i for i, a in enumerate(lat)}
    base = [0] * n_v
    for v, a in zip(local_face, alpha_f):
        base[v] = a
    target = full_monomial(frame, gamma) if s else np.array(1.0)
    total = np.zeros(len(coeffs))
    for alpha in _lattice(s, n_v):
        c = factorial(s) * factorial(k) / (factorial(k - s) * np.prod([factorial(v) for v in alpha]))
        pair = frobenius(full_monomial(grads, alpha), target) if s else 1.0
        beta = tuple(b + a for b, a in zip(base, alpha))
        total = total + c * pair * coeffs[:, look[beta]]
    return total
