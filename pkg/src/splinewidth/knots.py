"""Break sequences and extended (open) knot vectors."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

MAX_DEGREE = 12


class KnotError(ValueError):
    """Raised for invalid break sequences or knot vectors."""


@dataclass(frozen=True, eq=False)
class BreakSequence:
    """Strictly increasing break points ``a = tau_0 < ... < tau_{N+1} = b``."""

    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise KnotError("a break sequence needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise KnotError("break points must be finite")
        if not np.all(np.diff(pts) > 0):
            raise KnotError("break points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __repr__(self):
        return f"BreakSequence(n_intervals={self.n_intervals}, a={self.a}, b={self.b}, h={self.h:.6g})"

    def __eq__(self, other):
        return isinstance(other, BreakSequence) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    @property
    def a(self) -> float:
        return float(self.points[0])

    @property
    def b(self) -> float:
        return float(self.points[-1])

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    @property
    def interior(self) -> np.ndarray:
        return self.points[1:-1]

    @property
    def h(self) -> float:
        return float(self.lengths.max())

    @property
    def h_min(self) -> float:
        return float(self.lengths.min())

    @property
    def h_hat(self) -> float:
        """Reduced width ``max{2 h_0, h_1, ..., h_{N-1}, 2 h_N}``."""
        hs = self.lengths
        return float(max(2.0 * hs[0], 2.0 * hs[-1], hs.max()))

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        return bool(np.allclose(self.lengths, self.lengths[0], rtol=rtol, atol=0.0))

    def refine(self, subdivisions: int) -> "BreakSequence":
        """Split every interval into ``subdivisions`` equal pieces."""
        if subdivisions < 1:
            raise KnotError("subdivisions must be >= 1")
        t = np.linspace(0.0, 1.0, subdivisions + 1)[:-1]
        pts = (self.points[:-1, None] + np.outer(self.lengths, t)).ravel()
        return BreakSequence(np.append(pts, self.b))

    def to_json(self) -> str:
        return json.dumps([repr(float(x)) for x in self.points])

    @classmethod
    def from_json(cls, text: str | list) -> "BreakSequence":
        data = json.loads(text) if isinstance(text, str) else text
        if not isinstance(data, list):
            raise KnotError("break sequence JSON must be an array")
        return cls(np.array([float(x) for x in data]))


def make_breaks(kind: str = "uniform", *, n: int | None = None, points: Sequence[float] | None = None,
                amplitude: float = 0.0, seed: int | None = None, a: float = 0.0, b: float = 1.0) -> BreakSequence:
    """Build a break sequence on ``[a, b]``.

    ``kind`` is one of ``"uniform"`` (``n`` equal intervals), ``"explicit"``
    (``points`` given verbatim) or ``"random_perturbed"`` (uniform ``n``
    intervals whose interior points are moved by at most ``amplitude``, using
    a seeded generator).
    """
    if kind == "explicit":
        if points is None:
            raise KnotError("explicit breaks need 'points'")
        return BreakSequence(points)
    if n is None or int(n) < 1:
        raise KnotError("n (number of intervals) must be >= 1")
    if not b > a:
        raise KnotError("need a < b")
    n = int(n)
    pts = np.linspace(a, b, n + 1)
    if kind == "uniform":
        return BreakSequence(pts)
    if kind == "random_perturbed":
        spacing = (b - a) / n
        if not 0.0 <= amplitude < 0.5 * spacing:
            raise KnotError(
                f"amplitude {amplitude} must be nonnegative and below half the uniform spacing {0.5 * spacing}"
            )
        rng = np.random.default_rng(seed)
        pts[1:-1] += rng.uniform(-amplitude, amplitude, size=n - 1)
        return BreakSequence(pts)
    raise KnotError(f"unknown break kind {kind!r}")


def make_special_breaks(p: int, i: int, n: int) -> BreakSequence:
    """Degree-dependent break sequences on (0, 1) for the optimal subspaces.

    With these points, the spaces with vanishing even (``i=0``), odd (``i=1``)
    or mixed (``i=2``) boundary derivatives have dimension exactly ``n``.
    """
    if p < 0 or n < 1:
        raise KnotError("need p >= 0 and n >= 1")
    odd = p % 2 == 1
    if i == 0:
        interior = [Fraction(j, n + 1) for j in range(1, n + 1)] if odd else \
            [Fraction(2 * j + 1, 2 * (n + 1)) for j in range(0, n + 1)]
    elif i == 1:
        interior = [Fraction(2 * j + 1, 2 * n) for j in range(0, n)] if odd else \
            [Fraction(j, n) for j in range(1, n)]
    elif i == 2:
        interior = [Fraction(2 * j, 2 * n + 1) for j in range(1, n + 1)] if odd else \
            [Fraction(2 * j + 1, 2 * n + 1) for j in range(0, n)]
    else:
        raise KnotError("i must be 0, 1 or 2")
    return BreakSequence([0.0] + [float(x) for x in interior] + [1.0])


@dataclass(frozen=True, eq=False)
class ExtendedKnotVector:
    """Open knot vector for degree ``p`` splines of smoothness ``k`` over ``breaks``.

    End knots have multiplicity ``p + 1``; interior breaks have multiplicity ``p - k``.
    """

    breaks: BreakSequence
    p: int
    k: int
    knots: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        p, k = int(self.p), int(self.k)
        if p < 0:
            raise KnotError("degree must be nonnegative")
        if p > MAX_DEGREE:
            raise KnotError(f"degree {p} exceeds the supported cap {MAX_DEGREE}")
        if not -1 <= k <= p - 1:
            raise KnotError(f"smoothness k={k} must satisfy -1 <= k <= p-1 for p={p}")
        br = self.breaks
        t = np.concatenate([
            np.full(p + 1, br.a),
            np.repeat(br.interior, p - k),
            np.full(p + 1, br.b),
        ])
        t.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "knots", t)

    @property
    def dim(self) -> int:
        return self.knots.size - self.p - 1

    def __len__(self):
        return self.knots.size

    def raised(self) -> "ExtendedKnotVector":
        """Knot vector of the antiderivative space (degree and smoothness + 1)."""
        return ExtendedKnotVector(self.breaks, self.p + 1, self.k + 1)

    def lowered(self) -> "ExtendedKnotVector":
        """Knot vector of the derivative space (degree and smoothness - 1)."""
        if self.p == 0:
            raise KnotError("cannot differentiate a degree-0 space")
        return ExtendedKnotVector(self.breaks, self.p - 1, self.k - 1)
