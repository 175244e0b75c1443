"""Constrained spline subspaces built as null spaces of endpoint functionals."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import bspline
from .knots import BreakSequence, ExtendedKnotVector, KnotError

RANK_RTOL = 1e-9

FAMILY_TAGS = ("full", "periodic", "even_zero", "odd_zero", "mixed", "reduced_odd")

# The five families that satisfy the boundary-product condition of the inverse inequality.
CONFORMING_TAGS = ("periodic", "even_zero", "odd_zero", "mixed", "reduced_odd")


class SpaceError(ValueError):
    """Raised when a constrained space cannot be built."""


@dataclass(frozen=True)
class ConstraintFamily:
    """Linear endpoint conditions defining a subspace.

    ``tag`` names the pattern: ``full`` (no conditions), ``periodic`` with
    ``order`` m (derivatives ``0..m-1`` match at both ends), ``even_zero`` /
    ``odd_zero`` (even / odd derivatives up to ``p`` vanish at both ends),
    ``mixed`` (even derivatives vanish at the left end, odd ones at the right)
    and ``reduced_odd`` (odd derivatives below ``p`` vanish at both ends).
    """

    tag: str = "full"
    order: int | None = None

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise SpaceError(f"unknown constraint family {self.tag!r}")
        if self.tag == "periodic" and self.order is not None and self.order < 0:
            raise SpaceError("periodic order must be nonnegative")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def periodic(cls, order: int | None = None):
        """Periodic matching of derivatives ``0..order-1`` (default: ``order = p``)."""
        return cls("periodic", order)

    @classmethod
    def even_zero(cls):
        return cls("even_zero")

    @classmethod
    def odd_zero(cls):
        return cls("odd_zero")

    @classmethod
    def mixed(cls):
        return cls("mixed")

    @classmethod
    def reduced_odd(cls):
        return cls("reduced_odd")

    @property
    def conforming(self) -> bool:
        return self.tag in CONFORMING_TAGS

    def periodic_order(self, p: int) -> int:
        return p if self.order is None else self.order

    def conditions(self, p: int) -> list[tuple[int, str]]:
        """List of ``(alpha, kind)`` with kind in ``left``, ``right`` (vanish) or ``match``."""
        if self.tag == "full":
            return []
        if self.tag == "periodic":
            m = self.periodic_order(p)
            if m > p + 1:
                raise SpaceError(f"periodic order {m} exceeds p+1={p + 1}")
            return [(a, "match") for a in range(m)]
        if self.tag == "even_zero":
            alphas = range(0, p + 1, 2)
            return [(a, e) for a in alphas for e in ("left", "right")]
        if self.tag == "odd_zero":
            alphas = range(1, p + 1, 2)
            return [(a, e) for a in alphas for e in ("left", "right")]
        if self.tag == "mixed":
            return [(a, "left") for a in range(0, p + 1, 2)] + [(a, "right") for a in range(1, p + 1, 2)]
        # reduced_odd
        return [(a, e) for a in range(1, p, 2) for e in ("left", "right")]

    def to_dict(self) -> dict:
        d = {"tag": self.tag}
        if self.order is not None:
            d["order"] = self.order
        return d

    @classmethod
    def from_dict(cls, d: dict | str) -> "ConstraintFamily":
        if isinstance(d, str):
            return cls(d)
        return cls(d["tag"], d.get("order"))


def constraint_matrix(kv: ExtendedKnotVector, family: ConstraintFamily) -> np.ndarray:
    rows = []
    for alpha, kind in family.conditions(kv.p):
        if kind == "match":
            row = bspline.endpoint_functional(kv, alpha, "left") - bspline.endpoint_functional(kv, alpha, "right")
        else:
            row = bspline.endpoint_functional(kv, alpha, kind)
        norm = np.linalg.norm(row)
        # rows differ in scale by powers of 1/h; normalise before rank decisions
        rows.append(row / norm if norm > 0 else row)
    if not rows:
        return np.zeros((0, kv.dim))
    return np.array(rows)


@dataclass(frozen=True, eq=False)
class SplineSpace:
    """A spline subspace: raw B-spline space plus an orthonormal coefficient basis.

    Row ``i`` of ``basis_map`` holds the raw B-spline coefficients of basis
    function ``i``. For the ``full`` family it is the identity, so the basis
    is the raw B-spline basis.
    """

    breaks: BreakSequence
    knotvec: ExtendedKnotVector
    family: ConstraintFamily
    basis_map: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def p(self) -> int:
        return self.knotvec.p

    @property
    def k(self) -> int:
        return self.knotvec.k

    @property
    def dim(self) -> int:
        return self.basis_map.shape[0]

    @property
    def rawdim(self) -> int:
        return self.knotvec.dim

    @property
    def is_full(self) -> bool:
        return self.family.tag == "full"

    @property
    def max_smooth(self) -> bool:
        return self.k == self.p - 1

    def __repr__(self):
        return (f"SplineSpace(p={self.p}, k={self.k}, family={self.family.tag}"
                f"{'' if self.family.order is None else f'({self.family.order})'}, "
                f"n_intervals={self.breaks.n_intervals}, dim={self.dim})")

    def eval_basis(self, x, deriv: int = 0) -> np.ndarray:
        """Values of all ``dim`` basis functions (``deriv``-th derivatives) at ``x``, shape ``(len(x), dim)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size and (x.min() < self.breaks.a or x.max() > self.breaks.b):
            raise ValueError(f"points outside [{self.breaks.a}, {self.breaks.b}]")
        raw = bspline.basis_matrix(self.knotvec, x, deriv)
        return raw if self.is_full else raw @ self.basis_map.T

    def to_raw(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        return c if self.is_full else c @ self.basis_map

    def from_raw(self, raw, check: float | None = 1e-9) -> np.ndarray:
        """Coefficients of a raw spline known to lie in the subspace.

        With ``check`` set, a relative residual above it raises ``SpaceError``.
        """
        raw = np.asarray(raw, dtype=float)
        if self.is_full:
            return raw.copy()
        c = raw @ self.basis_map.T
        if check is not None:
            res = np.linalg.norm(raw - c @ self.basis_map)
            scale = max(np.linalg.norm(raw), 1e-300)
            if res > check * scale:
                raise SpaceError(f"spline does not lie in the subspace (relative residual {res / scale:.2e})")
        return c

    def evaluate(self, coeffs, x, deriv: int = 0) -> np.ndarray:
        return bspline.evaluate(self.knotvec, self.to_raw(coeffs), x, deriv)

    def integrals(self) -> np.ndarray:
        """``int b_i`` for every basis function."""
        raw = bspline.integrals(self.knotvec)
        return raw if self.is_full else self.basis_map @ raw

    def constant_coeffs(self, value: float = 1.0) -> np.ndarray:
        """Coefficients of the constant function (partition of unity)."""
        return self.from_raw(np.full(self.rawdim, float(value)))

    def constraint_residual(self) -> float:
        """Largest relative violation of the family constraints over the basis."""
        C = constraint_matrix(self.knotvec, self.family)
        if C.shape[0] == 0:
            return 0.0
        vals = np.abs(C @ self.basis_map.T)
        norms = np.linalg.norm(C, axis=1)[:, None] * np.linalg.norm(self.basis_map, axis=1)[None, :]
        return float((vals / norms).max())

    def with_degree(self, p: int, family: ConstraintFamily | None = None) -> "SplineSpace":
        """Same breaks, maximal smoothness, degree ``p``; periodic order follows the degree."""
        fam = self.family if family is None else family
        if fam.tag == "periodic":
            fam = ConstraintFamily.periodic()
        return build_subspace(self.breaks, p, p - 1, fam)

    def descriptor(self) -> dict:
        return {
            "p": self.p,
            "k": self.k,
            "family": self.family.to_dict(),
            "breaks": [repr(float(x)) for x in self.breaks.points],
            "dim": self.dim,
        }

    def to_json(self) -> str:
        return json.dumps(self.descriptor())

    @classmethod
    def from_json(cls, text: str | dict) -> "SplineSpace":
        d = json.loads(text) if isinstance(text, str) else text
        br = BreakSequence.from_json(d["breaks"])
        p = int(d["p"])
        k = int(d.get("k", p - 1))
        return build_subspace(br, p, k, ConstraintFamily.from_dict(d.get("family", "full")))


def build_subspace(breaks: BreakSequence, p: int, k: int | None = None,
                   family: ConstraintFamily | str = "full") -> SplineSpace:
    """Subspace of ``S^k_{p,breaks}`` cut out by the family's endpoint conditions.

    The basis is an orthonormal null-space basis (in coefficient space) of the
    stacked, row-normalised constraint functionals.
    """
    if k is None:
        k = p - 1
    if isinstance(family, str):
        family = ConstraintFamily(family)
    try:
        kv = ExtendedKnotVector(breaks, p, k)
    except KnotError as exc:
        raise SpaceError(str(exc)) from exc
    if family.tag == "full":
        return SplineSpace(breaks, kv, family, np.eye(kv.dim))
    C = constraint_matrix(kv, family)
    if C.shape[0] == 0:
        basis = np.eye(kv.dim)
    else:
        _, s, vt = np.linalg.svd(C)
        rank = int(np.sum(s > RANK_RTOL * s[0])) if s.size else 0
        basis = vt[rank:]
    if basis.shape[0] == 0:
        raise SpaceError(f"constraints {family.tag} leave an empty space for p={p}, k={k}")
    basis = np.ascontiguousarray(basis)
    basis.setflags(write=False)
    return SplineSpace(breaks, kv, family, basis)


def periodic_space(breaks: BreakSequence, p: int) -> SplineSpace:
    """Maximally smooth periodic splines (all derivatives below ``p`` match)."""
    return build_subspace(breaks, p, p - 1, ConstraintFamily.periodic(p))
