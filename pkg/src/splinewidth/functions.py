"""Test functions with exact derivatives, addressable by name."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

R_MAX_SMOOTH = 40


class FunctionError(ValueError):
    pass


@dataclass(frozen=True)
class FunctionSpec:
    """A function ``u`` with derivatives: ``evaluator(x, l)`` returns the ``l``-th derivative."""

    name: str
    evaluator: Callable[[np.ndarray, int], np.ndarray]
    r_max: int = R_MAX_SMOOTH
    periodic: bool = False

    def __post_init__(self):
        if self.periodic and not self.check_periodic():
            raise FunctionError(f"{self.name} is flagged periodic but its derivatives do not match on (0, 1)")

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        if deriv > self.r_max:
            raise FunctionError(f"{self.name}: derivative order {deriv} unavailable (r_max={self.r_max})")
        return np.asarray(self.evaluator(np.asarray(x, dtype=float), deriv), dtype=float)

    def derivative(self, order: int = 1) -> "FunctionSpec":
        if order > self.r_max:
            raise FunctionError(f"{self.name}: derivative order {order} unavailable (r_max={self.r_max})")
        ev = self.evaluator
        return FunctionSpec(f"d{order}({self.name})", lambda x, l: ev(x, l + order),
                            self.r_max - order, self.periodic)

    def scaled(self, c: float) -> "FunctionSpec":
        ev = self.evaluator
        return FunctionSpec(f"{c}*{self.name}", lambda x, l: c * ev(x, l), self.r_max, self.periodic)

    def __add__(self, other: "FunctionSpec") -> "FunctionSpec":
        e1, e2 = self.evaluator, other.evaluator
        return FunctionSpec(f"({self.name}+{other.name})", lambda x, l: e1(x, l) + e2(x, l),
                            min(self.r_max, other.r_max), self.periodic and other.periodic)

    def check_periodic(self, a: float = 0.0, b: float = 1.0, upto: int | None = None, tol: float = 1e-12) -> bool:
        """Whether derivatives below ``upto`` match at ``a`` and ``b`` (relative to their size)."""
        upto = self.r_max if upto is None else upto
        probe = np.linspace(a, b, 17)
        for alpha in range(min(upto, self.r_max)):
            va, vb = self(np.array([a]), alpha)[0], self(np.array([b]), alpha)[0]
            scale = max(1.0, float(np.abs(self(probe, alpha)).max()))
            if abs(va - vb) > tol * scale:
                return False
        return True


def sine(freq: float, name: str | None = None, periodic: bool = False) -> FunctionSpec:
    """``sin(freq * x)``."""
    def ev(x, l):
        return freq ** l * np.sin(freq * x + l * np.pi / 2)
    return FunctionSpec(name or f"sin({freq:g}x)", ev, periodic=periodic)


def cosine(freq: float, name: str | None = None, periodic: bool = False) -> FunctionSpec:
    """``cos(freq * x)``."""
    def ev(x, l):
        return freq ** l * np.cos(freq * x + l * np.pi / 2)
    return FunctionSpec(name or f"cos({freq:g}x)", ev, periodic=periodic)


def sin_m(m: int) -> FunctionSpec:
    """``sin(m pi x)``; periodic on (0, 1) when ``m`` is even."""
    return sine(m * np.pi, f"sin_{m}", periodic=m % 2 == 0)


def cos_m(m: int) -> FunctionSpec:
    """``cos(m pi x)``; periodic on (0, 1) when ``m`` is even."""
    return cosine(m * np.pi, f"cos_{m}", periodic=m % 2 == 0)


def poly_d(d: int) -> FunctionSpec:
    """The monomial ``x^d``."""
    def ev(x, l):
        if l > d:
            return np.zeros_like(x)
        return math.perm(d, l) * x ** (d - l)
    return FunctionSpec(f"poly_{d}", ev)


def exp_fn() -> FunctionSpec:
    return FunctionSpec("exp", lambda x, l: np.exp(x))


def runge() -> FunctionSpec:
    """``1 / (1 + 25 (x - 1/2)^2)``, with derivatives from ``Re[l! (-5i)^l / (1 + 5i t)^(l+1)]``."""
    def ev(x, l):
        z = 1.0 + 5j * (x - 0.5)
        return np.real(math.factorial(l) * (-5j) ** l / z ** (l + 1))
    return FunctionSpec("runge", ev)


def constant(c: float = 1.0) -> FunctionSpec:
    return FunctionSpec(f"const({c:g})", lambda x, l: np.full_like(x, c if l == 0 else 0.0), periodic=True)


def periodic_eigenfunction(j: int) -> FunctionSpec:
    """Orthonormal eigenfunctions of the periodic Laplacian on (0, 1).

    ``psi_0 = 1``, ``psi_{2i-1} = sqrt(2) sin(2 pi i x)``, ``psi_{2i} = sqrt(2) cos(2 pi i x)``.
    """
    if j == 0:
        return FunctionSpec("psi_0", lambda x, l: np.full_like(x, 1.0 if l == 0 else 0.0), periodic=True)
    i = (j + 1) // 2
    base = sine(2 * np.pi * i) if j % 2 == 1 else cosine(2 * np.pi * i)
    f = base.scaled(np.sqrt(2.0))
    return FunctionSpec(f"psi_{j}", f.evaluator, periodic=True)


_PATTERNS = [
    (re.compile(r"sin_(\d+)$"), lambda m: sin_m(int(m.group(1)))),
    (re.compile(r"cos_(\d+)$"), lambda m: cos_m(int(m.group(1)))),
    (re.compile(r"poly_(\d+)$"), lambda m: poly_d(int(m.group(1)))),
    (re.compile(r"exp$"), lambda m: exp_fn()),
    (re.compile(r"runge$"), lambda m: runge()),
    (re.compile(r"psi_(\d+)$"), lambda m: periodic_eigenfunction(int(m.group(1)))),
]

CATALOG = ("sin_m", "cos_m", "poly_d", "exp", "runge", "psi_j")


def get_function(name: str) -> FunctionSpec:
    """Look up a catalog function: ``sin_<m>``, ``cos_<m>``, ``poly_<d>``, ``exp``, ``runge`` or ``psi_<j>``."""
    for pat, make in _PATTERNS:
        m = pat.match(name.strip())
        if m:
            return make(m)
    raise FunctionError(f"unknown function {name!r}; catalog: {', '.join(CATALOG)}")
