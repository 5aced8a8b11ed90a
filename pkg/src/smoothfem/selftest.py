"""Fast internal consistency checks run by ``--experiment selftest``."""

from __future__ import annotations

import sys
import traceback
from typing import Callable

import numpy as np

from .fespace import FESpace, check_cm_continuity, dimension_formula, dof_basis_matrix, local_basis, local_layout
from .functions import Polynomial
from .interpolation import interpolate, error_norms
from .lattice import SmoothnessVector, check_partition, decompose, generate_lattice, lex_index
from .mesh import barycentric_gradients, builtin_mesh
from .tensor import duality_check


def _lattice() -> bool:
    ok = all(lex_index(a) == i for i, a in enumerate(generate_lattice(7, 3)))
    for r, k in [((2, 1, 0), 5), ((4, 2, 0), 9), ((4, 2, 1, 0), 11)]:
        ok &= check_partition(decompose(SmoothnessVector(r, k)))
    return ok


def _tensor() -> bool:
    rng = np.random.default_rng(1)
    F = rng.normal(size=(3, 3))
    return all(duality_check(F, np.linalg.inv(F).T, r) < 1e-10 for r in range(5))


def _dof_matrix() -> bool:
    rng = np.random.default_rng(2)
    sm = SmoothnessVector((4, 2, 1, 0), 9)
    x = rng.normal(size=(4, 3))
    geo = barycentric_gradients(x)
    D = dof_basis_matrix(x, geo.grads, sm)
    C = local_basis(D, sm)
    lay = local_layout(sm)
    lower = np.all(np.triu(D, 1) == 0)
    return bool(lower and np.abs(C @ D.T - np.eye(lay.n)).max() < 1e-9)


def _dimensions() -> bool:
    sm = SmoothnessVector((2, 1, 0), 7)
    return [dimension_formula(builtin_mesh("square", n), sm) for n in (1, 2, 4, 8)] == [55, 158, 526, 1910]


def _reproduction() -> bool:
    sm = SmoothnessVector((2, 1, 0), 5)
    space = FESpace(builtin_mesh("square", 2), sm)
    p = Polynomial.random(2, 5, np.random.default_rng(3))
    c = space.element_coefficients(interpolate(space, p))
    cont = check_cm_continuity(space, c)
    return max(error_norms(space, c, p, range(3))) < 1e-9 and cont.relative < 1e-10


CHECKS: dict[str, Callable[[], bool]] = {
    "lattice ordering and decomposition": _lattice,
    "symmetric tensor duality": _tensor,
    "dof-basis matrix structure and duality": _dof_matrix,
    "dimension counts": _dimensions,
    "polynomial reproduction and continuity": _reproduction,
}


def run_selftest(out=None) -> bool:
    out = out or sys.stdout
    passed = 0
    for name, fn in CHECKS.items():
        try:
            ok = bool(fn())
        except Exception:  # report, keep going
            traceback.print_exc()
            ok = False
        passed += ok
        print(f"{'PASS' if ok else 'FAIL'} {name}", file=out)
    print(f"selftest: {passed}/{len(CHECKS)} passed", file=out)
    return passed == len(CHECKS)
