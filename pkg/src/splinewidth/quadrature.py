"""Gauss-Legendre rules and composite rules aligned with break points."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .knots import BreakSequence

MAX_NODES = 64


class QuadratureError(RuntimeError):
    pass


def _legendre_and_derivative(m: int, x: np.ndarray):
    p0 = np.ones_like(x)
    p1 = x.copy()
    if m == 0:
        return p0, np.zeros_like(x)
    for j in range(2, m + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = m * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def _gauss_legendre_cached(m: int):
    k = np.arange(1, m + 1)
    x = np.cos(np.pi * (k - 0.25) / (m + 0.5))
    for _ in range(100):
        pm, dpm = _legendre_and_derivative(m, x)
        dx = pm / dpm
        x = x - dx
        if np.max(np.abs(dx)) <= 1e-15:
            break
    else:
        raise QuadratureError(f"Newton iteration for {m} Gauss nodes did not converge")
    _, dpm = _legendre_and_derivative(m, x)
    w = 2.0 / ((1.0 - x * x) * dpm * dpm)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``m``-point Gauss-Legendre rule on [-1, 1].

    Nodes are the roots of the Legendre polynomial ``P_m`` found by Newton's
    method from Chebyshev-like initial guesses.
    """
    m = int(m)
    if not 1 <= m <= MAX_NODES:
        raise ValueError(f"node count must be in [1, {MAX_NODES}], got {m}")
    if m == 1:
        return np.array([0.0]), np.array([2.0])
    return _gauss_legendre_cached(m)


@lru_cache(maxsize=None)
def local_integration_matrix(m: int) -> np.ndarray:
    """Matrix ``S`` with ``S @ f(xi) = int_{-1}^{xi_i} f`` for polynomials of degree < m."""
    xi, _ = gauss_legendre(m)
    V = np.polynomial.legendre.legvander(xi, m - 1)
    # int_{-1}^x P_j = (P_{j+1} - P_{j-1}) / (2j + 1), and x + 1 for j = 0
    Vp = np.polynomial.legendre.legvander(xi, m)
    Vint = np.empty((m, m))
    Vint[:, 0] = xi + 1.0
    for j in range(1, m):
        Vint[:, j] = (Vp[:, j + 1] - Vp[:, j - 1]) / (2 * j + 1)
    S = np.linalg.solve(V.T, Vint.T).T
    S.setflags(write=False)
    return S


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite Gauss rule: ``m`` nodes on each element of ``elements``.

    ``nodes`` and ``weights`` have shape ``(n_elements, m)``; ``x`` and ``w``
    are the flattened views.
    """

    elements: BreakSequence
    m: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def x(self) -> np.ndarray:
        return self.nodes.ravel()

    @property
    def w(self) -> np.ndarray:
        return self.weights.ravel()

    @property
    def size(self) -> int:
        return self.nodes.size

    def integrate(self, values) -> float:
        return float(np.dot(self.w, np.asarray(values, dtype=float).ravel()))

    def __call__(self, f) -> float:
        return self.integrate(f(self.x))


def composite_rule(breaks: BreakSequence, m: int, subdivisions: int = 1) -> QuadratureRule:
    """Affine copies of the ``m``-point rule on every break interval.

    With ``subdivisions > 1`` every interval is first split evenly.
    """
    if m < 1:
        raise ValueError("need at least one node per element")
    el = breaks.refine(subdivisions) if subdivisions > 1 else breaks
    xi, wi = gauss_legendre(m)
    left = el.points[:-1, None]
    hl = el.lengths[:, None]
    nodes = left + 0.5 * hl * (xi[None, :] + 1.0)
    weights = 0.5 * hl * wi[None, :]
    return QuadratureRule(el, m, nodes, weights)
