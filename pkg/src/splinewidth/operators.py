"""Integral operators on a fine Gauss grid.

Functions are represented by their samples at the nodes of a composite Gauss
rule, i.e. as piecewise polynomials of degree ``m - 1`` on a refinement of
the breaks. On that space the integration operators below are exact, and the
discrete inner product ``<f, g> = sum w f g`` is the L2 inner product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .knots import BreakSequence
from .quadrature import QuadratureRule, composite_rule, local_integration_matrix

MIN_GRID = 500
MAX_GRID = 8000
DEFAULT_NODES = 8

KERNEL_KINDS = ("left", "right", "periodic", "neumann")


class OperatorError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OperatorGrid:
    """Fine composite Gauss grid used to discretize integral operators."""

    rule: QuadratureRule
    subdivisions: int
    breaks: BreakSequence

    @property
    def x(self) -> np.ndarray:
        return self.rule.x

    @property
    def w(self) -> np.ndarray:
        return self.rule.w

    @property
    def size(self) -> int:
        return self.rule.size

    @property
    def a(self) -> float:
        return self.breaks.a

    @property
    def b(self) -> float:
        return self.breaks.b

    @cached_property
    def sqrt_w(self) -> np.ndarray:
        return np.sqrt(self.w)

    @cached_property
    def left_integration(self) -> np.ndarray:
        """Matrix ``L`` with ``(L f)_i = int_a^{x_i} f``, exact for piecewise polynomials of degree < m."""
        m = self.rule.m
        E = self.rule.nodes.shape[0]
        S = local_integration_matrix(m)
        h = self.rule.elements.lengths
        L = np.zeros((self.size, self.size))
        wmat = self.rule.weights
        for e in range(E):
            rows = slice(e * m, (e + 1) * m)
            # all earlier elements contribute their full integral
            L[rows, : e * m] = np.broadcast_to(wmat[:e].ravel(), (m, e * m))
            L[rows, rows] = 0.5 * h[e] * S
        L.setflags(write=False)
        return L

    def inner(self, f, g) -> float:
        return float(np.dot(self.w, np.asarray(f) * np.asarray(g)))

    def norm(self, f) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def refined(self) -> "OperatorGrid":
        """The grid with twice as many subdivisions (about ``2M`` nodes)."""
        return make_grid_subdivided(self.breaks, self.rule.m, 2 * self.subdivisions)


def make_grid_subdivided(breaks: BreakSequence, m: int, subdivisions: int) -> OperatorGrid:
    return OperatorGrid(composite_rule(breaks, m, subdivisions), subdivisions, breaks)


def make_grid(breaks: BreakSequence, M: int = 1000, m: int | None = None) -> OperatorGrid:
    """Grid of at least ``M`` nodes, aligned with ``breaks``.

    Every break interval is split into ``s`` equal parts carrying ``m`` Gauss
    nodes each, ``s`` being the smallest count that reaches ``M``.
    """
    if M < MIN_GRID:
        raise OperatorError(f"grid size M={M} below the minimum {MIN_GRID}")
    if M > MAX_GRID:
        raise OperatorError(f"grid size M={M} above the cap {MAX_GRID}")
    m = m or DEFAULT_NODES
    s = int(np.ceil(M / (breaks.n_intervals * m)))
    return make_grid_subdivided(breaks, m, max(s, 1))


def _kernel_values(kind: str, x, y, a: float, b: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    L = b - a
    below = (y <= x).astype(float)
    if kind == "left":
        return below
    if kind == "right":
        return (y >= x).astype(float)
    if kind == "periodic":
        return below + (y - x) / L - 0.5
    if kind == "neumann":
        return below - (b - y) / L
    raise OperatorError(f"unknown kernel kind {kind!r}")


@dataclass(frozen=True)
class KernelOperator:
    """An integral operator ``(Kf)(x) = int K(x, y) f(y) dy`` raised to ``power``.

    Kinds
    -----
    left
        ``int_a^x f``.
    right
        ``int_x^b f``, the adjoint of ``left``.
    periodic
        Green's operator of ``u' = f - mean f`` with ``u`` periodic and mean
        free; on (0, 1) its kernel is ``y - x - 1/2`` for ``x < y`` and
        ``y - x + 1/2`` otherwise.
    neumann
        ``(I - Pi) left`` with ``Pi`` the mean-value projection.

    ``adjoint=True`` takes the adjoint before raising to ``power``.
    """

    kind: str
    power: int = 1
    adjoint: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise OperatorError(f"unknown kernel kind {self.kind!r}; choose from {KERNEL_KINDS}")
        if self.power < 1:
            raise OperatorError("power must be at least 1")

    def kernel(self, x, y, a: float = 0.0, b: float = 1.0) -> np.ndarray:
        """Kernel values of the first power (``K(y, x)`` for the adjoint)."""
        if self.adjoint:
            return _kernel_values(self.kind, y, x, a, b)
        return _kernel_values(self.kind, x, y, a, b)

    def base_matrix(self, grid: OperatorGrid) -> np.ndarray:
        L = grid.left_integration
        w = grid.w
        one = np.ones(grid.size)
        length = grid.b - grid.a
        if self.kind == "left":
            A = np.array(L)
        elif self.kind == "right":
            A = np.outer(one, w) - L
        elif self.kind == "periodic":
            x = grid.x
            A = L + np.outer(one, w * (x - grid.b)) / length - np.outer(x - grid.a, w) / length + 0.5 * np.outer(one, w)
        else:
            A = L - np.outer(one, w @ L) / length
        if self.adjoint:
            A = weighted_adjoint(A, w)
        return A

    def matrix(self, grid: OperatorGrid) -> np.ndarray:
        A = self.base_matrix(grid)
        out = A
        for _ in range(self.power - 1):
            out = A @ out
        return out

    def apply(self, grid: OperatorGrid, f) -> np.ndarray:
        return self.matrix(grid) @ np.asarray(f, dtype=float)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "power": self.power, "adjoint": self.adjoint}


def weighted_adjoint(A: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Adjoint of ``A`` under ``<f, g> = sum w f g``: ``W^-1 A^T W``."""
    return (A.T * w[None, :]) / w[:, None]


def discretize_operator(op: KernelOperator, M: int = 1000, breaks: BreakSequence | None = None,
                        m: int | None = None) -> tuple[OperatorGrid, np.ndarray]:
    """Grid and matrix of ``op`` acting on samples.

    The matrix reproduces ``(Kf)(x_i) = sum_j w_j K(x_i, y_j) f(y_j)`` with the
    indicator part integrated exactly on every element.
    """
    grid = make_grid(breaks or BreakSequence(np.array([0.0, 1.0])), M, m)
    return grid, op.matrix(grid)


@dataclass(frozen=True)
class OperatorWord:
    """A product ``T_1 T_2 ... T_r`` of kernel operators (leftmost applied last)."""

    factors: tuple

    def matrix(self, grid: OperatorGrid) -> np.ndarray:
        out = np.eye(grid.size)
        for op in reversed(self.factors):
            out = op.matrix(grid) @ out
        return out

    def __len__(self):
        return len(self.factors)


def alternating_word(kind: str, r: int, start_adjoint: bool = False) -> OperatorWord:
    """``K K* K ...`` (or ``K* K K* ...``) of length ``r``."""
    return OperatorWord(tuple(KernelOperator(kind, 1, (i % 2 == 0) == start_adjoint) for i in range(r)))


CLASS_TAGS = ("A_r_per", "A_r_full", "A_r_0", "A_r_1", "A_r_2")


@dataclass(frozen=True)
class FunctionClassSpec:
    """A function class ``Z + T(B)`` with ``B`` the L2 unit ball.

    ``T`` is an operator word and ``Z`` a finite-dimensional shift: constants
    (``affine_degree = 0``), polynomials of degree below ``r`` (``r - 1``), or
    nothing (``None``).

    Tags
    ----
    A_r_per
        Periodic ``H^r`` functions with ``||d^r u|| <= 1``: constants plus
        the ``r``-th power of the periodic Green's operator.
    A_r_full
        ``H^r`` functions with ``||d^r u|| <= 1``: polynomials below degree
        ``r`` plus ``r``-fold integration from ``a``.
    A_r_0
        Even derivatives below ``r`` vanish at both ends: the word
        ``K1* K1 K1* ...`` with ``K1 = (I - Pi) K``.
    A_r_1
        Odd derivatives below ``r`` vanish at both ends: constants plus
        ``K1 K1* K1 ...``.
    A_r_2
        Even derivatives vanish at the left end, odd ones at the right:
        ``K K* K ...`` with ``K`` integration from the left.
    """

    tag: str
    r: int = 1

    def __post_init__(self):
        if self.tag not in CLASS_TAGS:
            raise OperatorError(f"unknown class {self.tag!r}; choose from {CLASS_TAGS}")
        if self.r < 1:
            raise OperatorError("class order r must be at least 1")

    @property
    def word(self) -> OperatorWord:
        if self.tag == "A_r_per":
            return OperatorWord((KernelOperator("periodic", self.r),))
        if self.tag == "A_r_full":
            return OperatorWord((KernelOperator("left", self.r),))
        if self.tag == "A_r_0":
            return alternating_word("neumann", self.r, start_adjoint=True)
        if self.tag == "A_r_1":
            return alternating_word("neumann", self.r, start_adjoint=False)
        return alternating_word("left", self.r, start_adjoint=False)

    @property
    def affine_degree(self) -> int | None:
        if self.tag in ("A_r_per", "A_r_1"):
            return 0
        if self.tag == "A_r_full":
            return self.r - 1
        return None

    def to_dict(self) -> dict:
        return {"tag": self.tag, "r": self.r}
