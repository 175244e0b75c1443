"""Residual operator norms ``||(I - P) T||``, exact n-widths and optimality checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import FunctionSpec, cosine, sine
from .knots import BreakSequence, make_breaks, make_special_breaks
from .linalg import NotPositiveDefiniteError, cholesky, power_iteration, solve_lower, top_eigenpairs
from .operators import (FunctionClassSpec, KernelOperator, OperatorError, OperatorGrid, OperatorWord,
                        make_grid, make_grid_subdivided)
from .projection import error_norm, l2_project
from .spaces import SplineSpace, build_subspace

CERTIFICATE_TOL = 1e-3
NORM_TOL = 1e-6


class NWidthError(ValueError):
    pass


def _word_apply(word: OperatorWord, grid: OperatorGrid):
    """Closures applying ``T`` and its weighted adjoint to sample vectors (or blocks)."""
    mats = [op.matrix(grid) for op in word.factors]

    def forward(f):
        for A in reversed(mats):
            f = A @ f
        return f

    w = grid.w

    def adjoint(g):
        # T* = W^-1 T^T W, applied factor by factor
        g = w[:, None] * g if g.ndim == 2 else w * g
        for A in mats:
            g = A.T @ g
        return g / w[:, None] if g.ndim == 2 else g / w

    return forward, adjoint


def _projector_basis(space: SplineSpace, grid: OperatorGrid) -> np.ndarray:
    """``Q = W^(1/2) B R^-1`` with orthonormal columns spanning the sampled space."""
    B = space.eval_basis(grid.x)
    G = (B * grid.w[:, None]).T @ B
    try:
        Lc = cholesky(0.5 * (G + G.T))
    except NotPositiveDefiniteError as exc:
        raise NWidthError(f"grid Gram matrix of the space is singular: {exc}") from exc
    # Q^T = L^-1 (W^1/2 B)^T
    return solve_lower(Lc, (grid.sqrt_w[:, None] * B).T).T


@dataclass(frozen=True)
class NormResult:
    """``||(I - P) T||`` on a grid of size ``M`` with its ``2M`` certificate."""

    value: float
    value_refined: float
    certificate: float
    M: int
    M_refined: int
    converged: bool
    iterations: int

    @property
    def certified(self) -> bool:
        return self.converged and self.certificate <= CERTIFICATE_TOL

    def to_dict(self) -> dict:
        return {"E": self.value, "E_2M": self.value_refined, "certificate": self.certificate,
                "M": self.M, "M_2M": self.M_refined, "converged": self.converged}


def _residual_norm_on_grid(space: SplineSpace, word: OperatorWord, grid: OperatorGrid,
                           tol: float, seed: int):
    fwd, adj = _word_apply(word, grid)
    Q = _projector_basis(space, grid)
    s = grid.sqrt_w

    def apply(z):
        # z lives in W^(1/2) coordinates, where the grid inner product is Euclidean
        u = fwd(z / s) * s
        u = u - Q @ (Q.T @ u)
        return adj(u / s) * s

    res = power_iteration(apply, grid.size, tol=tol, max_iter=20000, seed=seed)
    return math.sqrt(max(res.value, 0.0)), res.converged, res.iterations


def residual_operator_norm(space: SplineSpace, operator: KernelOperator | OperatorWord | FunctionClassSpec,
                           M: int = 1000, tol: float = NORM_TOL, seed: int = 0) -> NormResult:
    """Largest singular value of ``(I - P) T`` with ``P`` the L2 projection onto ``space``.

    Computed by power iteration on ``T* (I - P) T`` under the grid inner
    product, on a grid of about ``M`` nodes and again on the grid with doubled
    subdivisions; ``certificate`` is their relative difference.
    """
    if isinstance(operator, FunctionClassSpec):
        word = operator.word
    elif isinstance(operator, KernelOperator):
        word = OperatorWord((operator,))
    else:
        word = operator
    m = max(8, space.p + 1)
    grid = make_grid(space.breaks, M, m)
    fine = make_grid_subdivided(space.breaks, m, 2 * grid.subdivisions)
    v1, c1, it1 = _residual_norm_on_grid(space, word, grid, tol, seed)
    v2, c2, it2 = _residual_norm_on_grid(space, word, fine, tol, seed)
    cert = abs(v1 - v2) / max(abs(v2), 1e-300)
    return NormResult(v1, v2, cert, grid.size, fine.size, c1 and c2, max(it1, it2))


def exact_nwidth(cls: FunctionClassSpec, n: int, a: float = 0.0, b: float = 1.0) -> float:
    """Closed-form Kolmogorov n-width of a class on ``(a, b)``.

    Uses ``d_n = lambda_{n+1}^{r/2}`` with the eigenvalues of the underlying
    second-order problem: periodic ``(2 pi i)^2`` in pairs, Dirichlet
    ``(j pi)^2``, Neumann ``(j pi)^2`` after the constant, mixed
    ``((j - 1/2) pi)^2``.
    """
    r = cls.r
    if n < 1:
        raise NWidthError("n must be positive")
    if cls.tag == "A_r_per":
        if (a, b) != (0.0, 1.0):
            raise NWidthError("no closed form implemented for the periodic class off (0, 1)")
        return (1.0 / (2.0 * math.pi * math.ceil(n / 2))) ** r
    if cls.tag == "A_r_full":
        if r != 1:
            raise NWidthError(f"no closed form implemented for A_r_full with r={r}")
        return (b - a) / (n * math.pi)
    if (a, b) != (0.0, 1.0):
        raise NWidthError(f"no closed form implemented for {cls.tag} off (0, 1)")
    if cls.tag == "A_r_0":
        return (1.0 / ((n + 1) * math.pi)) ** r
    if cls.tag == "A_r_1":
        return (1.0 / (n * math.pi)) ** r
    return (1.0 / ((n + 0.5) * math.pi)) ** r


def class_space_compatible(space: SplineSpace, cls: FunctionClassSpec) -> bool:
    """Whether the class's finite-dimensional shift lies in ``space`` (else the error is unbounded)."""
    deg = cls.affine_degree
    if deg is None:
        return True
    if deg > space.p:
        return False
    x = np.linspace(space.breaks.a, space.breaks.b, 4 * space.dim + 8)
    B = space.eval_basis(x)
    for d in range(deg + 1):
        target = x ** d
        c, *_ = np.linalg.lstsq(B, target, rcond=None)
        if np.abs(B @ c - target).max() > 1e-8 * max(1.0, np.abs(target).max()):
            return False
    return True


@dataclass(frozen=True)
class OptimalityReport:
    E: float
    d_n: float
    ratio: float
    n: int
    norm: NormResult

    def to_dict(self) -> dict:
        return {"E": self.E, "d_n": self.d_n, "ratio": self.ratio, "n": self.n} | self.norm.to_dict()


def optimality_ratio(space: SplineSpace, cls: FunctionClassSpec, M: int = 1000, seed: int = 0) -> OptimalityReport:
    """``||(I - P) T|| / d_n`` with ``n = dim(space)``."""
    if not class_space_compatible(space, cls):
        raise NWidthError(f"{cls.tag} needs polynomials of degree {cls.affine_degree} in the space")
    norm = residual_operator_norm(space, cls, M, seed=seed)
    d = exact_nwidth(cls, space.dim, space.breaks.a, space.breaks.b)
    return OptimalityReport(norm.value, d, norm.value / d, space.dim, norm)


@dataclass(frozen=True)
class OperatorSpectrum:
    """Leading singular values of ``T`` and left singular functions sampled on ``grid``."""

    singular_values: np.ndarray
    left_functions: np.ndarray = field(repr=False)
    grid: OperatorGrid = field(repr=False)
    converged: bool


def operator_spectrum(op: KernelOperator | OperatorWord, count: int, M: int = 2000,
                      breaks: BreakSequence | None = None, seed: int = 0) -> OperatorSpectrum:
    """Top ``count`` singular values of ``T`` via subspace iteration on ``T T*``.

    Left singular functions are normalized in L2.
    """
    word = OperatorWord((op,)) if isinstance(op, KernelOperator) else op
    grid = make_grid(breaks or BreakSequence(np.array([0.0, 1.0])), M)
    fwd, adj = _word_apply(word, grid)
    s = grid.sqrt_w

    def apply_block(Z):
        U = adj(Z / s[:, None])
        return fwd(U) * s[:, None]

    vals, vecs, ok = top_eigenpairs(apply_block, grid.size, count, seed=seed)
    return OperatorSpectrum(np.sqrt(np.maximum(vals, 0.0)), vecs / s[:, None], grid, ok)


@dataclass(frozen=True)
class KKStarReport:
    singular_values: np.ndarray
    expected: np.ndarray
    max_rel_error: float
    angles: tuple
    constant_image: float
    converged: bool


def kkstar_spectrum_check(count: int = 6, M: int = 2000, seed: int = 0) -> KKStarReport:
    """Compare the periodic Green's operator's singular values with ``1 / (2 pi i)`` pairs.

    ``angles[i-1]`` is the sine of the largest principal angle between the
    computed pair of left singular functions and ``span{sin, cos}(2 pi i x)``.
    """
    if M < 2000:
        raise NWidthError("the singular-value check needs M >= 2000")
    op = KernelOperator("periodic")
    spec = operator_spectrum(op, count, M, seed=seed)
    i = (np.arange(1, count + 1) + 1) // 2
    expected = 1.0 / (2.0 * np.pi * i)
    rel = np.abs(spec.singular_values - expected) / expected
    g = spec.grid
    angles = []
    for k in range(count // 2):
        U = spec.left_functions[:, 2 * k:2 * k + 2]
        f = 2.0 * np.pi * (k + 1)
        E = np.stack([np.sin(f * g.x), np.cos(f * g.x)], axis=1) * np.sqrt(2.0)
        # orthonormal bases in the grid inner product: residual of U off span(E)
        R = U - E @ ((E * g.w[:, None]).T @ U)
        angles.append(float(np.linalg.svd(g.sqrt_w[:, None] * R, compute_uv=False).max()))
    const = g.norm(op.apply(g, np.ones(g.size)))
    return KKStarReport(spec.singular_values, expected, float(rel.max()), tuple(angles), const, spec.converged)


def neumann_check(M: int = 1000) -> float:
    """Max deviation of ``K1 K1* cos(pi x)`` from ``cos(pi x) / pi^2``."""
    grid = make_grid(BreakSequence(np.array([0.0, 1.0])), M)
    c = np.cos(np.pi * grid.x)
    out = KernelOperator("neumann").apply(grid, KernelOperator("neumann", adjoint=True).apply(grid, c))
    return float(np.abs(out - c / np.pi ** 2).max())


FAMILY_FOR_CLASS = {0: "even_zero", 1: "odd_zero", 2: "mixed"}


def laplace_eigenfunction(i: int, j: int) -> FunctionSpec:
    """``j``-th eigenfunction (``j >= 1``) of ``-u''`` on (0, 1) for boundary type ``i``.

    ``i = 0``: ``sin(j pi x)``; ``i = 1``: ``cos((j - 1) pi x)``; ``i = 2``: ``sin((j - 1/2) pi x)``.
    """
    if j < 1:
        raise NWidthError("eigenfunction index starts at 1")
    if i == 0:
        return sine(j * np.pi, f"sin({j}pi x)")
    if i == 1:
        return cosine((j - 1) * np.pi, f"cos({j - 1}pi x)")
    if i == 2:
        return sine((j - 0.5) * np.pi, f"sin({j - 0.5:g}pi x)")
    raise NWidthError(f"boundary type must be 0, 1 or 2, got {i}")


def optimal_space(i: int, p: int, n: int) -> SplineSpace:
    """The ``n``-dimensional spline space of degree ``p`` on the special breaks for type ``i``."""
    if p > 12:
        raise NWidthError("degree capped at 12")
    sp = build_subspace(make_special_breaks(p, i, n), p, p - 1, FAMILY_FOR_CLASS[i])
    if sp.dim != n:
        raise NWidthError(f"space dimension {sp.dim} differs from n={n}")
    return sp


@dataclass(frozen=True)
class EigconvReport:
    """Relative L2 projection errors ``errors[j-1, t]`` for ``j = 1..n`` and ``p = p_values[t]``."""

    i: int
    n: int
    p_values: tuple
    errors: np.ndarray = field(repr=False)

    def rows(self):
        return [(j + 1, p, float(self.errors[j, t])) for j in range(self.n) for t, p in enumerate(self.p_values)]


def eigconv_report(i: int, n: int, p_values=range(1, 12)) -> EigconvReport:
    p_values = tuple(int(p) for p in p_values)
    errs = np.zeros((n, len(p_values)))
    for t, p in enumerate(p_values):
        sp = optimal_space(i, p, n)
        for j in range(1, n + 1):
            u = laplace_eigenfunction(i, j)
            errs[j - 1, t] = error_norm(u, l2_project(sp, u)) / error_norm(u, None, space=sp)
    return EigconvReport(i, n, p_values, errs)


def periodic_eigconv(n: int, j_values, p_values, q: int = 0, ell: int = 0) -> np.ndarray:
    """``||d^ell (psi_j - Q^q_p psi_j)||`` on uniform periodic splines, shape ``(len(j), len(p))``."""
    from .functions import periodic_eigenfunction
    from .projection import ritz_project_recursive
    from .spaces import periodic_space
    breaks = make_breaks("uniform", n=n)
    out = np.zeros((len(j_values), len(p_values)))
    for t, p in enumerate(p_values):
        sp = periodic_space(breaks, p)
        for s, j in enumerate(j_values):
            u = periodic_eigenfunction(j)
            out[s, t] = error_norm(u, ritz_project_recursive(sp, u, q), ell)
    return out


__all__ = [
    "NormResult", "residual_operator_norm", "exact_nwidth", "optimality_ratio", "OptimalityReport",
    "OperatorSpectrum", "operator_spectrum", "kkstar_spectrum_check", "KKStarReport", "neumann_check",
    "EigconvReport", "eigconv_report", "optimal_space", "laplace_eigenfunction", "periodic_eigconv",
    "OperatorError", "NWidthError", "class_space_compatible",
]
