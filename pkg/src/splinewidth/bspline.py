"""Raw B-spline basis evaluation and coefficient-level calculus."""

from __future__ import annotations

import numpy as np

from .knots import ExtendedKnotVector, KnotError


def _safe_div(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    nz = den != 0
    np.divide(num, den, out=out, where=nz)
    return out


def basis_matrix(kv: ExtendedKnotVector, x, deriv: int = 0) -> np.ndarray:
    """Values of the ``deriv``-th derivative of every raw B-spline at ``x``.

    Returns an array of shape ``(len(x), kv.dim)``. Intervals are half-open
    ``[t_i, t_{i+1})`` except the last one, which is closed, so ``x = b``
    takes left limits and interior breaks take right limits.
    """
    t = kv.knots
    p = kv.p
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if deriv < 0:
        raise ValueError("derivative order must be nonnegative")
    if x.size and (x.min() < t[0] - 1e-14 * (abs(t[0]) + 1) or x.max() > t[-1] + 1e-14 * (abs(t[-1]) + 1)):
        raise ValueError(f"evaluation points outside [{t[0]}, {t[-1]}]")
    n_all = t.size - 1
    if deriv > p:
        return np.zeros((x.size, kv.dim))

    # degree-0 indicators; the last nonempty interval also owns x == b
    xs = x[:, None]
    N = ((t[:-1] <= xs) & (xs < t[1:])).astype(float)
    last = np.nonzero(t[:-1] < t[1:])[0][-1]
    N[x >= t[-1], last] = 1.0

    top = p - deriv
    for d in range(1, p + 1):
        m = n_all - d
        left = t[d:d + m] - t[:m]
        right = t[d + 1:d + 1 + m] - t[1:1 + m]
        if d <= top:
            w1 = _safe_div(xs - t[:m], left)
            w2 = _safe_div(t[d + 1:d + 1 + m] - xs, right)
            N = w1 * N[:, :m] + w2 * N[:, 1:m + 1]
        else:
            N = d * (_safe_div(N[:, :m], left) - _safe_div(N[:, 1:m + 1], right))
    return N


def evaluate(kv: ExtendedKnotVector, coeffs, x, deriv: int = 0) -> np.ndarray:
    """Evaluate the spline with raw coefficients ``coeffs``."""
    return basis_matrix(kv, x, deriv) @ np.asarray(coeffs, dtype=float)


def endpoint_functional(kv: ExtendedKnotVector, alpha: int, end: str) -> np.ndarray:
    """Row ``r`` with ``r @ c`` equal to the one-sided ``alpha``-th derivative at an endpoint."""
    if alpha > kv.p:
        raise ValueError(f"derivative order {alpha} exceeds degree {kv.p}")
    if end not in ("left", "right"):
        raise ValueError("end must be 'left' or 'right'")
    x = kv.breaks.a if end == "left" else kv.breaks.b
    return basis_matrix(kv, [x], alpha)[0]


def antidifferentiate(kv: ExtendedKnotVector, coeffs) -> tuple[ExtendedKnotVector, np.ndarray]:
    """Coefficients of ``x -> int_a^x s`` on the raised knot vector.

    Uses ``d_i = sum_{j<i} c_j (t_{j+p+1} - t_j) / (p + 1)``.
    """
    c = np.asarray(coeffs, dtype=float)
    if c.shape[-1] != kv.dim:
        raise ValueError(f"expected {kv.dim} coefficients, got {c.shape[-1]}")
    t = kv.knots
    p = kv.p
    scale = (t[p + 1:p + 1 + kv.dim] - t[:kv.dim]) / (p + 1)
    d = np.zeros(c.shape[:-1] + (kv.dim + 1,))
    d[..., 1:] = np.cumsum(c * scale, axis=-1)
    return kv.raised(), d


def differentiate(kv: ExtendedKnotVector, coeffs) -> tuple[ExtendedKnotVector, np.ndarray]:
    """Coefficients of ``s'`` on the lowered knot vector."""
    if kv.k < 0:
        raise KnotError("derivative of a discontinuous spline is not a spline")
    c = np.asarray(coeffs, dtype=float)
    t = kv.knots
    p = kv.p
    den = t[p + 1:p + kv.dim] - t[1:kv.dim]
    return kv.lowered(), p * np.diff(c, axis=-1) / den


def integrals(kv: ExtendedKnotVector) -> np.ndarray:
    """``int_a^b N_i`` for every raw B-spline: ``(t_{i+p+1} - t_i) / (p + 1)``."""
    t = kv.knots
    return (t[kv.p + 1:kv.p + 1 + kv.dim] - t[:kv.dim]) / (kv.p + 1)
