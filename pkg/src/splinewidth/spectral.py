"""Galerkin spectra of the periodic Laplacian and inverse-inequality checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .functions import periodic_eigenfunction, sine, cosine
from .knots import BreakSequence, make_breaks
from .linalg import NotPositiveDefiniteError, gen_sym_eig
from .projection import EXTRA_NODES, default_rule, error_norm, gram_matrix, ritz_project_recursive
from .quadrature import composite_rule
from .spaces import ConstraintFamily, SpaceError, SplineSpace, build_subspace

DEFAULT_OUTLIER_THRESHOLD = 1.0
CLUSTER_RTOL = 1e-6


class SpectrumError(ValueError):
    pass


def exact_periodic_eigenvalues(count: int, length: float = 1.0) -> np.ndarray:
    """``0, (2 pi)^2, (2 pi)^2, (4 pi)^2, ...`` scaled to an interval of the given length."""
    j = np.arange(count)
    i = (j + 1) // 2
    return (2.0 * np.pi * i / length) ** 2


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Discrete eigenvalues of ``(s', v') = nu (s, v)`` paired index-wise with the exact ones.

    ``rel_err[j] = nu_h[j] / nu[j] - 1`` for ``j >= 1``; entry 0 is NaN since
    the exact eigenvalue vanishes.
    """

    nu_h: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    rel_err: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    space: SplineSpace

    @property
    def dim(self) -> int:
        return self.nu_h.size

    def rows(self):
        """``(j, nu_exact, nu_h, rel_err)`` for every mode."""
        return [(j, float(self.nu[j]), float(self.nu_h[j]), float(self.rel_err[j])) for j in range(self.dim)]


def periodic_space_smoothness(breaks: BreakSequence, p: int, k: int, *, full_ck: bool = False) -> SplineSpace:
    """Periodic spline spaces of reduced smoothness.

    With ``full_ck=False``: maximally smooth splines whose derivatives up to
    ``k`` match at the ends (dimension ``n + p - k - 1`` for ``n`` intervals).
    With ``full_ck=True``: ``C^k`` splines with the same matching (dimension
    ``n (p - k)``).
    """
    if not 0 <= k <= p - 1:
        raise SpaceError(f"need 0 <= k <= p-1, got k={k}, p={p}")
    fam = ConstraintFamily.periodic(k + 1)
    return build_subspace(breaks, p, k if full_ck else p - 1, fam)


def laplace_spectrum(space: SplineSpace) -> SpectrumResult:
    """Eigenvalues of the periodic Laplacian discretized on ``space``."""
    if space.family.tag != "periodic":
        raise SpectrumError("the periodic Laplacian needs a periodic family")
    if space.p < 1:
        raise SpectrumError("stiffness needs p >= 1")
    K = gram_matrix(space, 1)
    M = gram_matrix(space, 0)
    try:
        res = gen_sym_eig(K, M)
    except NotPositiveDefiniteError as exc:
        raise SpectrumError(f"mass matrix is not positive definite: {exc}") from exc
    nu_h = res.eigenvalues
    nu = exact_periodic_eigenvalues(nu_h.size, space.breaks.length)
    rel = np.full(nu_h.size, np.nan)
    rel[1:] = nu_h[1:] / nu[1:] - 1.0
    return SpectrumResult(nu_h, nu, rel, res.eigenvectors, space)


@dataclass(frozen=True)
class OutlierReport:
    count: int
    expected: int
    threshold: float
    indices: tuple
    spectrum: SpectrumResult = field(repr=False)


def outlier_report(n: int, p: int, k: int, threshold: float = DEFAULT_OUTLIER_THRESHOLD) -> OutlierReport:
    """Count modes with relative eigenvalue error above ``threshold``.

    Uses the maximally smooth space with derivatives up to ``k`` matched, on
    ``n`` uniform intervals of (0, 1). The expected count is ``p - k - 1``.
    """
    space = periodic_space_smoothness(make_breaks("uniform", n=n), p, k)
    spec = laplace_spectrum(space)
    idx = tuple(int(j) for j in np.nonzero(spec.rel_err[1:] > threshold)[0] + 1)
    return OutlierReport(len(idx), p - k - 1, threshold, idx, spec)


def moving_median(y, window: int) -> np.ndarray:
    """Centered moving median with the window shrunk at the ends."""
    y = np.asarray(y, dtype=float)
    half = max(window, 1) // 2
    out = np.empty_like(y)
    for i in range(y.size):
        lo, hi = max(0, i - half), min(y.size, i + half + 1)
        out[i] = np.median(y[lo:hi])
    return out


@dataclass(frozen=True)
class BranchProfile:
    """Rescaled error curve ``(j / dim, nu_h_j / nu_j - 1)`` and detected branch count."""

    x: np.ndarray = field(repr=False)
    rel_err: np.ndarray = field(repr=False)
    smoothed: np.ndarray = field(repr=False)
    branches: int
    expected: int
    boundaries: tuple
    spectrum: SpectrumResult = field(repr=False)


def _strict_local_min(y: np.ndarray, t: int) -> bool:
    """Whether ``y[t]`` is below the nearest differing value on both sides (plateaus allowed)."""
    left = y[:t][y[:t] != y[t]]
    right = y[t + 1:][y[t + 1:] != y[t]]
    return bool(left.size and right.size and left[-1] > y[t] and right[0] > y[t])


def count_branches(rel_err, n: int, window: int | None = None, reach: float = 0.1) -> tuple[int, tuple]:
    """``1 +`` the number of branch boundaries detected near multiples of ``n``.

    ``rel_err[t]`` belongs to mode ``j = t + 1``; the curve is taken in
    log10 and smoothed by a moving median of width ``window`` (default
    ``n / 10``). A multiple ``c = b n`` is a boundary when, within
    ``reach * n`` modes of ``c``, either the smoothed curve has a minimum
    strictly below its values at both ends of that neighbourhood, or the raw
    curve has a strict local minimum lying below the smoothed curve (the
    isolated well-resolved mode that closes each branch).
    """
    y = np.log10(np.maximum(np.abs(np.asarray(rel_err, dtype=float)), 1e-300))
    window = window or max(3, n // 10)
    s = moving_median(y, window)
    j = np.arange(1, y.size + 1)
    w = max(1, int(round(reach * n)))
    boundaries = []
    for b in range(1, y.size // n + 1):
        c = b * n
        lo, hi = c - w - 1, c + w - 1  # positions in y of modes c-w and c+w
        if lo < 1 or hi >= y.size - 1:
            continue
        inner = np.arange(lo, hi + 1)
        t_s = inner[np.argmin(s[inner])]
        smooth_min = s[t_s] < s[lo - 1] and s[t_s] < s[hi + 1]
        t_r = inner[np.argmin(y[inner])]
        dip = _strict_local_min(y, t_r) and y[t_r] < s[t_r]
        if smooth_min or dip:
            boundaries.append(int(j[t_r] + 1) if dip else int(j[t_s]))
    return 1 + len(boundaries), tuple(boundaries)


def branch_profile(n: int, p: int, k: int) -> BranchProfile:
    """Error profile of the ``C^k`` periodic space on ``n`` uniform intervals (dimension ``n (p - k)``)."""
    space = periodic_space_smoothness(make_breaks("uniform", n=n), p, k, full_ck=True)
    if space.dim != n * (p - k):
        raise SpectrumError(f"dimension {space.dim} differs from n(p-k) = {n * (p - k)}")
    spec = laplace_spectrum(space)
    rel = spec.rel_err[1:]
    x = np.arange(1, spec.dim) / spec.dim
    count, bounds = count_branches(rel, n)
    smoothed = 10.0 ** moving_median(np.log10(np.maximum(rel, 1e-300)), max(3, n // 10))
    return BranchProfile(x, rel, smoothed, count, p - k, bounds, spec)


@dataclass(frozen=True)
class EigfunctionError:
    """Distance between an exact eigenfunction (or eigenpair) and the discrete one.

    ``distance`` is ``||psi_0 - psi_0^h||`` after sign alignment for ``j = 0``,
    otherwise the sine of the largest principal angle between the exact pair
    ``span{psi_{2i-1}, psi_{2i}}`` and the matching discrete 2D eigenspace.
    """

    j: int
    distance: float
    kind: str
    cluster_ok: bool
    eigenvalues: tuple


def _discrete_functions(space: SplineSpace, vecs: np.ndarray, x: np.ndarray) -> np.ndarray:
    return space.eval_basis(x) @ vecs


def galerkin_eigfunction_error(space: SplineSpace, j: int, spectrum: SpectrumResult | None = None) -> EigfunctionError:
    spec = spectrum or laplace_spectrum(space)
    rule = composite_rule(space.breaks, space.p + EXTRA_NODES)
    x, w = rule.x, rule.w
    if j == 0:
        phi = _discrete_functions(space, spec.eigenvectors[:, :1], x)[:, 0]
        psi = np.ones_like(x)
        s = 1.0 if w @ (phi * psi) >= 0 else -1.0
        d = float(np.sqrt(w @ (psi - s * phi) ** 2))
        return EigfunctionError(0, d, "simple", True, (float(spec.nu_h[0]),))
    i = (j + 1) // 2
    cols = [2 * i - 1, 2 * i]
    if cols[-1] >= spec.dim:
        raise SpectrumError(f"pair {i} needs dimension > {2 * i}, space has {spec.dim}")
    lam = spec.nu_h[cols]
    cluster_ok = abs(lam[1] - lam[0]) <= CLUSTER_RTOL * abs(lam[1])
    neighbours = [c for c in (cols[0] - 1, cols[1] + 1) if 0 <= c < spec.dim]
    for c in neighbours:
        if abs(spec.nu_h[c] - lam.mean()) <= CLUSTER_RTOL * abs(lam.mean()):
            cluster_ok = False
    Phi = _discrete_functions(space, spec.eigenvectors[:, cols], x)
    Psi = np.stack([periodic_eigenfunction(2 * i - 1)(x), periodic_eigenfunction(2 * i)(x)], axis=1)
    # sines of the principal angles are the singular values of the part of the
    # discrete eigenspace orthogonal to the exact pair (both bases orthonormal)
    R = Phi - Psi @ ((Psi * w[:, None]).T @ Phi)
    sv = np.linalg.svd(np.sqrt(w)[:, None] * R, compute_uv=False)
    d = float(sv.max())
    return EigfunctionError(j, d, "pair", bool(cluster_ok), tuple(float(v) for v in lam))


@dataclass(frozen=True)
class ConjectureRow:
    p: int
    function: str
    error: float


@dataclass(frozen=True)
class ConjectureReport:
    m: int
    q: int
    rows: tuple
    constants_orthogonal: float
    parity_inner_products: tuple


def conjecture_explorer(m: int, q: int = 0, p_values=range(0, 10)) -> ConjectureReport:
    """Projection errors of ``sin(2 pi m x)`` (even ``p``) and ``cos(2 pi m x)`` (odd ``p``).

    Space: maximally smooth periodic splines on ``2m`` uniform intervals. Also
    records the largest ``|(b_i, cos)|`` over piecewise constants and, for each
    ``p``, the largest ``|(b_i, g)|`` where ``g`` is ``cos`` for even ``p`` and
    ``sin`` for odd ``p`` (these vanish).
    """
    n = 2 * m
    breaks = make_breaks("uniform", n=n)
    freq = 2.0 * np.pi * m
    s_fn = sine(freq, f"sin(2pi{m}x)", periodic=True)
    c_fn = cosine(freq, f"cos(2pi{m}x)", periodic=True)
    rows = []
    parity = []
    for p in p_values:
        if p > 12:
            raise SpectrumError("degree range is capped at 12")
        space = build_subspace(breaks, p, p - 1, ConstraintFamily.periodic())
        target = s_fn if p % 2 == 0 else c_fn
        res = ritz_project_recursive(space, target, min(q, p))
        rows.append(ConjectureRow(p, target.name, error_norm(target, res)))
        ortho = c_fn if p % 2 == 0 else s_fn
        rule = default_rule(space)
        ip = space.eval_basis(rule.x).T @ (rule.w * ortho(rule.x))
        parity.append((p, float(np.abs(ip).max())))
    pc = build_subspace(breaks, 0, -1, ConstraintFamily.periodic())
    rule = default_rule(pc)
    ip0 = pc.eval_basis(rule.x).T @ (rule.w * c_fn(rule.x))
    return ConjectureReport(m, q, tuple(rows), float(np.abs(ip0).max()), tuple(parity))


@dataclass(frozen=True)
class InverseInequalityReport:
    """Largest ``||s'|| / ||s||`` over a space against ``2 sqrt(3) / h_min``."""

    family: str
    p: int
    ratio: float
    bound: float
    slack: float
    conforming: bool

    @property
    def holds(self) -> bool:
        return self.slack >= 1.0 - 1e-12


def inverse_report(space: SplineSpace) -> InverseInequalityReport:
    if space.p < 1:
        raise SpectrumError("inverse inequality needs p >= 1")
    K = gram_matrix(space, 1)
    M = gram_matrix(space, 0)
    lam = gen_sym_eig(K, M).eigenvalues[-1]
    ratio = math.sqrt(max(lam, 0.0))
    bound = 2.0 * math.sqrt(3.0) / space.breaks.h_min
    slack = bound / ratio if ratio > 0 else math.inf
    return InverseInequalityReport(space.family.tag, space.p, ratio, bound, slack, space.family.conforming)
