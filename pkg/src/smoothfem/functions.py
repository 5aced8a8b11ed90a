"""Smooth test functions with exact partial derivatives of any order."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial, pi
from typing import Callable, Protocol, Sequence

import numpy as np

from .lattice import generate_lattice, multi_factorial


class Oracle(Protocol):
    dim: int

    def derivative(self, mu: Sequence[int], x: np.ndarray) -> np.ndarray: ...


def partials(u: Oracle, r: int, x: np.ndarray) -> np.ndarray:
    """All order-``r`` partials at ``x (..., d)`` as canonical components ``(..., n_comp)``."""
    return np.stack([u.derivative(mu, x) for mu in generate_lattice(r, u.dim - 1)], axis=-1)


@dataclass(frozen=True)
class Trig:
    """``offset + amp * sin(freq * x + phase)`` in one variable."""

    freq: float
    phase: float = 0.0
    amp: float = 1.0
    offset: float = 0.0

    def derivative(self, n: int, x: np.ndarray) -> np.ndarray:
        val = self.amp * self.freq**n * np.sin(self.freq * x + self.phase + n * pi / 2)
        return val + self.offset if n == 0 else val


def sine(freq: float) -> Trig:
    return Trig(freq)


def cosine(freq: float) -> Trig:
    return Trig(freq, phase=pi / 2)


def sine_squared(freq: float) -> Trig:
    # sin^2(a x) = 1/2 - cos(2 a x)/2
    return Trig(2 * freq, phase=pi / 2, amp=-0.5, offset=0.5)


@dataclass
class SeparableProduct:
    """``prod_i g_i(x_i)``; derivatives factor coordinate-wise."""

    factors: tuple[Trig, ...]
    name: str = ""

    @property
    def dim(self) -> int:
        return len(self.factors)

    def derivative(self, mu: Sequence[int], x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for i, (g, n) in enumerate(zip(self.factors, mu)):
            out = out * g.derivative(n, x[..., i])
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.derivative((0,) * self.dim, x)


@dataclass
class Polynomial:
    """Multivariate polynomial ``sum_e c_e x^e`` with exact derivatives."""

    terms: dict[tuple[int, ...], float]
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        self.dim = len(next(iter(self.terms)))

    @property
    def degree(self) -> int:
        return max(sum(e) for e in self.terms)

    def derivative(self, mu: Sequence[int], x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for e, c in self.terms.items():
            if any(a < b for a, b in zip(e, mu)):
                continue
            coef = c
            term = np.ones(x.shape[:-1])
            for i, (a, b) in enumerate(zip(e, mu)):
                coef *= factorial(a) / factorial(a - b)
                if a - b:
                    term = term * x[..., i] ** (a - b)
            out = out + coef * term
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.derivative((0,) * self.dim, x)

    @classmethod
    def random(cls, dim: int, degree: int, rng: np.random.Generator) -> "Polynomial":
        terms = {}
        for p in range(degree + 1):
            for e in generate_lattice(p, dim - 1):
                terms[e] = float(rng.uniform(-1, 1))
        return cls(terms)


@dataclass
class FiniteDifferenceOracle:
    """Partials of a plain callable by tensor-product central differences.

    The step for an order-``r`` derivative is ``eps**(1/(r+2)) * scale``, which
    balances truncation against round-off for second-order stencils.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int
    scale: float = 1.0

    def derivative(self, mu: Sequence[int], x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = sum(mu)
        if r == 0:
            return self.func(x)
        h = np.finfo(float).eps ** (1.0 / (r + 2)) * self.scale
        stencil = [(np.zeros(self.dim), 1.0)]
        for i, n in enumerate(mu):
            new = []
            for off, w in stencil:
                for j in range(n + 1):
                    o = off.copy()
                    o[i] += (n / 2 - j) * h
                    new.append((o, w * (-1) ** j * comb(n, j)))
            stencil = new
        out = np.zeros(x.shape[:-1])
        for off, w in stencil:
            out = out + w * self.func(x + off)
        return out / h**r


def polyharmonic_source(u: Oracle, m: int) -> Callable[[np.ndarray], np.ndarray]:
    """``f = (-1)^(m+1) Laplace^(m+1) u`` as a callable on ``(..., d)`` points."""
    p = m + 1
    d = u.dim
    terms = [(factorial(p) / multi_factorial(b), tuple(2 * v for v in b)) for b in generate_lattice(p, d - 1)]
    sign = (-1) ** p

    def f(x: np.ndarray) -> np.ndarray:
        return sign * sum(c * u.derivative(mu, x) for c, mu in terms)

    return f


EXACT_SOLUTIONS: dict[str, Callable[[], SeparableProduct]] = {
    "sincos45": lambda: SeparableProduct((sine(4.0), cosine(5.0)), "sincos45"),
    "sin2pi3d": lambda: SeparableProduct((sine(2 * pi),) * 3, "sin2pi3d"),
    "bih2d": lambda: SeparableProduct((sine_squared(2 * pi),) * 2, "bih2d"),
    "sin5xyz3d": lambda: SeparableProduct((sine(5.0),) * 3, "sin5xyz3d"),
    "sin2pi2d": lambda: SeparableProduct((sine(2 * pi),) * 2, "sin2pi2d"),
    "sin2pi1d": lambda: SeparableProduct((sine(2 * pi),), "sin2pi1d"),
}


def exact_solution(name: str) -> SeparableProduct:
    try:
        return EXACT_SOLUTIONS[name]()
    except KeyError:
        raise ValueError(f"unknown exact solution {name!r}; choose from {sorted(EXACT_SOLUTIONS)}") from None
