"""L2 and Ritz projections onto spline spaces, error norms and a priori bound ratios."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bspline
from .functions import FunctionSpec
from .linalg import NotPositiveDefiniteError, cholesky, cho_solve
from .quadrature import QuadratureRule, composite_rule
from .spaces import SplineSpace

EXTRA_NODES = 10
RATIO_SLACK = 1e-9
# Mass matrices with a Cholesky diagonal spread beyond sqrt of this are treated as singular.
CONDITION_CAP = 1e14


class ProjectionError(ValueError):
    """Raised when a projection is undefined for the given space or function."""


class HypothesisError(ValueError):
    """Raised when an error bound is requested outside the hypotheses that make it valid."""


@dataclass(frozen=True, eq=False)
class ProjectionResult:
    """A projected spline.

    Attributes
    ----------
    space : SplineSpace
    coefficients : ndarray
        Coefficients in the basis of ``space``.
    kind : str
        ``"l2"``, ``"ritz_recursive"`` or ``"ritz_variational"``.
    q : int
        Ritz order (0 for the L2 projection).
    mean : float
        ``int (Qu)`` over the domain.
    """

    space: SplineSpace
    coefficients: np.ndarray = field(repr=False)
    kind: str
    q: int = 0
    mean: float = 0.0

    def __call__(self, x, deriv: int = 0) -> np.ndarray:
        return self.space.evaluate(self.coefficients, np.atleast_1d(np.asarray(x, dtype=float)), deriv)

    @property
    def raw(self) -> np.ndarray:
        return self.space.to_raw(self.coefficients)


def default_rule(space: SplineSpace, m: int | None = None, subdivisions: int = 1) -> QuadratureRule:
    """The oversampled rule used for loads and error norms: ``p + 10`` nodes per element."""
    return composite_rule(space.breaks, m or space.p + EXTRA_NODES, subdivisions)


def gram_matrix(space: SplineSpace, q: int = 0) -> np.ndarray:
    """Matrix of ``(d^q b_i, d^q b_j)``, exact for the piecewise polynomial integrands."""
    if q > space.p:
        raise ProjectionError(f"derivative order {q} exceeds degree {space.p}")
    key = ("gram", q)
    if key not in space._cache:
        rule = composite_rule(space.breaks, max(space.p + 1, 1))
        B = space.eval_basis(rule.x, q)
        G = (B * rule.w[:, None]).T @ B
        G = 0.5 * (G + G.T)
        G.setflags(write=False)
        space._cache[key] = G
    return space._cache[key]


def _mass_factor(space: SplineSpace) -> np.ndarray:
    if "mass_chol" not in space._cache:
        try:
            L = cholesky(gram_matrix(space, 0))
        except NotPositiveDefiniteError as exc:
            raise ProjectionError(f"mass matrix is numerically singular: {exc}") from exc
        d = np.diag(L)
        if (d.max() / d.min()) ** 2 > CONDITION_CAP:
            raise ProjectionError(f"mass matrix condition estimate {(d.max() / d.min()) ** 2:.2e} exceeds cap")
        space._cache["mass_chol"] = L
    return space._cache["mass_chol"]


def load_vector(space: SplineSpace, u: FunctionSpec, deriv: int = 0, rule: QuadratureRule | None = None) -> np.ndarray:
    """``(d^deriv u, d^deriv b_i)`` by the oversampled rule."""
    rule = rule or default_rule(space)
    B = space.eval_basis(rule.x, deriv)
    return B.T @ (rule.w * u(rule.x, deriv))


def _mean_of(space: SplineSpace, coeffs) -> float:
    return float(space.integrals() @ coeffs)


def l2_project(space: SplineSpace, u: FunctionSpec) -> ProjectionResult:
    """Orthogonal projection of ``u`` onto ``space`` in L2."""
    L = _mass_factor(space)
    c = cho_solve(L, load_vector(space, u))
    return ProjectionResult(space, c, "l2", 0, _mean_of(space, c))


def _check_ritz(space: SplineSpace, u: FunctionSpec, q: int):
    if space.family.tag not in ("full", "periodic"):
        raise ProjectionError(f"Ritz projections are defined on full or periodic spaces, not {space.family.tag}")
    if not space.max_smooth:
        raise ProjectionError("Ritz projections need a space of maximal smoothness")
    if space.family.tag == "periodic" and space.family.periodic_order(space.p) != space.p:
        raise ProjectionError("periodic Ritz projections need all derivatives below p to match")
    if q < 0 or q > space.p:
        raise ProjectionError(f"Ritz order q={q} must satisfy 0 <= q <= p={space.p}")
    if q > u.r_max:
        raise ProjectionError(f"derivative order {q} unavailable on {u.name} (r_max={u.r_max})")


def ritz_project_recursive(space: SplineSpace, u: FunctionSpec, q: int) -> ProjectionResult:
    """Ritz projection built level by level from the L2 projection of ``d^q u``.

    ``Q^q_p u = c(u) + K Q^{q-1}_{p-1} u'`` with ``c(u)`` fixed by matching the
    mean of ``u``. For periodic spaces ``K`` acts on the mean-free part of its
    argument and the result is shifted to mean zero before adding ``c(u)``.
    """
    _check_ritz(space, u, q)
    if q == 0:
        res = l2_project(space, u)
        return ProjectionResult(space, res.coefficients, "ritz_recursive", 0, res.mean)
    lower = space.with_degree(space.p - 1)
    inner = ritz_project_recursive(lower, u.derivative(), q - 1)
    f = inner.raw
    length = space.breaks.length
    rule = default_rule(space)
    u_mean = rule.integrate(u(rule.x)) / length
    kv = lower.knotvec
    if space.family.tag == "periodic":
        # partition of unity: subtracting the mean shifts every raw coefficient
        f = f - _mean_of(lower, inner.coefficients) / length
    kv_up, F = bspline.antidifferentiate(kv, f)
    F_mean = float(bspline.integrals(kv_up) @ F) / length
    raw = F + (u_mean - F_mean)
    coeffs = space.from_raw(raw)
    return ProjectionResult(space, coeffs, "ritz_recursive", q, _mean_of(space, coeffs))


def ritz_project_variational(space: SplineSpace, u: FunctionSpec, q: int) -> ProjectionResult:
    """Ritz projection from the stiffness system of order ``q`` with one mean constraint.

    The saddle system ``[[S, m], [m^T, 0]] [c, lam] = [b, int u]`` is solved in
    augmented form: ``S + rho m m^T`` is SPD whenever the constrained problem
    is well posed, and the multiplier follows from the scalar Schur complement.
    """
    _check_ritz(space, u, q)
    if space.family.tag == "full" and q != 1:
        raise ProjectionError("the variational Ritz projection on full spaces is defined for q = 1 only")
    S = gram_matrix(space, q)
    rule = default_rule(space)
    b = load_vector(space, u, q, rule)
    m = space.integrals()
    target = rule.integrate(u(rule.x))
    rho = np.trace(S) / max(m @ m, 1e-300)
    A = S + rho * np.outer(m, m)
    try:
        L = cholesky(A)
    except NotPositiveDefiniteError as exc:
        raise ProjectionError(f"singular augmented system: {exc}") from exc
    rhs = b + rho * target * m
    y = cho_solve(L, rhs)
    z = cho_solve(L, m)
    schur = m @ z
    lam = (m @ y - target) / schur
    c = y - lam * z
    return ProjectionResult(space, c, "ritz_variational", q, _mean_of(space, c))


def error_norm(u: FunctionSpec, result: ProjectionResult | None, ell: int = 0, *,
               space: SplineSpace | None = None, m: int | None = None, subdivisions: int = 1) -> float:
    """``||d^ell (u - s)||`` on the oversampled rule of the projection's space.

    ``result=None`` measures ``u`` itself (requires ``space`` for the rule).
    """
    sp = result.space if result is not None else space
    if sp is None:
        raise ValueError("need a projection result or a space")
    if ell > u.r_max:
        raise ProjectionError(f"derivative order {ell} unavailable on {u.name}")
    rule = default_rule(sp, m, subdivisions)
    diff = u(rule.x, ell)
    if result is not None:
        diff = diff - result(rule.x, ell)
    return float(np.sqrt(rule.integrate(diff * diff)))


def seminorm(u: FunctionSpec, r: int, space: SplineSpace, m: int | None = None) -> float:
    """``||d^r u||`` on the rule attached to ``space``."""
    return error_norm(u, None, r, space=space, m=m)


@dataclass(frozen=True)
class BoundReport:
    """Error, a priori bound and their ratio for one projection."""

    error: float
    bound: float
    ratio: float
    width: float
    width_kind: str
    estimate: str
    kind: str
    r: int
    ell: int
    q: int
    seminorm: float

    @property
    def holds(self) -> bool:
        return self.ratio <= 1.0 + RATIO_SLACK

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"holds": self.holds}


PROJECTOR_KINDS = ("l2", "ritz_recursive", "ritz_variational")


def check_hypotheses(space: SplineSpace, kind: str, r: int, ell: int = 0, q: int = 0,
                     u: FunctionSpec | None = None) -> tuple[str, str]:
    """Validate that an a priori bound applies; return ``(estimate_name, width_kind)``.

    Raises
    ------
    HypothesisError
        Naming the first violated condition.
    """
    p = space.p
    tag = space.family.tag
    if kind not in PROJECTOR_KINDS:
        raise HypothesisError(f"unknown projector kind {kind!r}")
    if r < 1:
        raise HypothesisError(f"r >= 1 required, got r={r}")
    if u is not None and r > u.r_max:
        raise HypothesisError(f"r <= r_max violated: {u.name} has r_max={u.r_max}")
    if not space.max_smooth:
        raise HypothesisError(f"maximal smoothness k = p-1 required, got k={space.k}")
    if kind == "l2" and q != 0:
        raise HypothesisError("q = 0 required for the L2 projection")

    if tag == "full":
        if kind == "l2":
            if ell != 0:
                raise HypothesisError("ell = 0 required for the L2 estimate on full spaces")
        else:
            if not 1 <= q <= r - 1:
                raise HypothesisError(f"1 <= q <= r-1 violated (q={q}, r={r})")
            if ell not in (q - 1, q):
                raise HypothesisError(f"ell in {{q-1, q}} violated (ell={ell}, q={q})")
            if kind == "ritz_variational" and q != 1:
                raise HypothesisError("q = 1 required for the variational Ritz projection on full spaces")
        if p < r - 1:
            raise HypothesisError(f"p >= r-1 violated (p={p}, r={r})")
        return ("full", "h")

    if tag == "periodic":
        if space.family.periodic_order(p) != p:
            raise HypothesisError("periodic order p required (all derivatives below p matched)")
        if u is not None and not u.periodic:
            raise HypothesisError(f"periodic u required; {u.name} is not periodic")
        if not 0 <= q <= r - 1:
            raise HypothesisError(f"0 <= q <= r-1 violated (q={q}, r={r})")
        if not 0 <= ell <= q:
            raise HypothesisError(f"0 <= ell <= q violated (ell={ell}, q={q})")
        if p < r - 1:
            raise HypothesisError(f"p >= r-1 violated (p={p}, r={r})")
        if p < 2 * q - ell - 1:
            raise HypothesisError(f"p >= 2q-ell-1 violated (p={p}, q={q}, ell={ell})")
        return ("periodic", "h")

    if tag in ("odd_zero", "reduced_odd"):
        if kind != "l2":
            raise HypothesisError(f"only the L2 projection has an estimate on {tag} spaces")
        if r != 1:
            raise HypothesisError(f"r = 1 required on {tag} spaces, got r={r}")
        if ell != 0:
            raise HypothesisError("ell = 0 required")
        if tag == "odd_zero":
            return ("odd_zero", "h" if p % 2 == 0 else "h_hat")
        return ("reduced_odd", "h")

    raise HypothesisError(f"no a priori estimate for the {tag} family")


def project(space: SplineSpace, u: FunctionSpec, kind: str = "l2", q: int = 0) -> ProjectionResult:
    if kind == "l2":
        return l2_project(space, u)
    if kind == "ritz_recursive":
        return ritz_project_recursive(space, u, q)
    if kind == "ritz_variational":
        return ritz_project_variational(space, u, q)
    raise ProjectionError(f"unknown projector kind {kind!r}")


def bound_report(u: FunctionSpec, space: SplineSpace, kind: str = "l2", r: int = 1, ell: int = 0,
                 q: int | None = None) -> BoundReport:
    """Compare ``||d^ell (u - Qu)||`` with ``(w/pi)^(r-ell) ||d^r u||``.

    ``w`` is the largest knot distance ``h``, or ``h_hat`` (boundary intervals
    counted twice) for the odd-derivative-free spaces of odd degree. ``q``
    defaults to 0 for the L2 projection and to ``ell`` otherwise.
    """
    if q is None:
        q = 0 if kind == "l2" else max(ell, 1 if space.family.tag == "full" else 0)
    estimate, width_kind = check_hypotheses(space, kind, r, ell, q, u)
    res = project(space, u, kind, q)
    err = error_norm(u, res, ell)
    width = space.breaks.h if width_kind == "h" else space.breaks.h_hat
    semi = seminorm(u, r, space)
    bound = (width / math.pi) ** (r - ell) * semi
    if bound == 0.0:
        ratio = 0.0 if err == 0.0 else math.inf
    else:
        ratio = err / bound
    return BoundReport(err, bound, ratio, width, width_kind, estimate, kind, r, ell, q, semi)


@dataclass(frozen=True)
class FunctionSpec2D:
    """A bivariate function with mixed partial derivatives ``evaluator(x, y, dx, dy)``.

    ``x`` and ``y`` broadcast against each other.
    """

    name: str
    evaluator: Callable[[np.ndarray, np.ndarray, int, int], np.ndarray]
    r_max: int = 40

    def __call__(self, x, y, dx: int = 0, dy: int = 0) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(x, dtype=float), np.asarray(y, dtype=float), dx, dy), dtype=float)

    @classmethod
    def product(cls, f: FunctionSpec, g: FunctionSpec) -> "FunctionSpec2D":
        """``f(x) g(y)``."""
        return cls(f"{f.name}*{g.name}", lambda x, y, dx, dy: f(x, dx) * g(y, dy), min(f.r_max, g.r_max))


@dataclass(frozen=True)
class TensorBoundReport:
    error: float
    bound: float
    ratio: float
    width: float
    r: int
    coefficients: np.ndarray = field(repr=False)

    @property
    def holds(self) -> bool:
        return self.ratio <= 1.0 + RATIO_SLACK


def tensor_bound_report(u: FunctionSpec2D, space1: SplineSpace, space2: SplineSpace, r: int) -> TensorBoundReport:
    """Tensor-product L2 projection error against ``(h/pi)^r (||d_x^r u|| + ||d_y^r u||)``.

    ``h`` is the larger of the two maximal knot distances.
    """
    for i, sp in enumerate((space1, space2), start=1):
        if sp.family.tag != "full" or not sp.max_smooth:
            raise HypothesisError(f"space{i} must be a full space of maximal smoothness")
        if sp.p < r - 1:
            raise HypothesisError(f"p{i} >= r-1 violated (p{i}={sp.p}, r={r})")
    if r < 1 or r > u.r_max:
        raise HypothesisError(f"1 <= r <= r_max violated (r={r})")
    rx, ry = default_rule(space1), default_rule(space2)
    X, Y = rx.x[:, None], ry.x[None, :]
    U = u(X, Y)
    B1, B2 = space1.eval_basis(rx.x), space2.eval_basis(ry.x)
    F = (B1 * rx.w[:, None]).T @ U @ (B2 * ry.w[:, None])
    L1, L2 = _mass_factor(space1), _mass_factor(space2)
    C = cho_solve(L1, F)
    C = cho_solve(L2, C.T).T
    E = U - B1 @ C @ B2.T
    W = rx.w[:, None] * ry.w[None, :]
    err = float(np.sqrt(np.sum(W * E * E)))
    dx = float(np.sqrt(np.sum(W * u(X, Y, r, 0) ** 2)))
    dy = float(np.sqrt(np.sum(W * u(X, Y, 0, r) ** 2)))
    width = max(space1.breaks.h, space2.breaks.h)
    bound = (width / math.pi) ** r * (dx + dy)
    ratio = err / bound if bound > 0 else (0.0 if err == 0 else math.inf)
    return TensorBoundReport(err, bound, ratio, width, r, C)
