"""Dense symmetric linear algebra: Cholesky, Jacobi eigensolver, power iteration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

SYMMETRY_RTOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    def __init__(self, pivot: int, value: float):
        super().__init__(f"matrix is not positive definite at pivot {pivot} (value {value:.3e})")
        self.pivot = pivot
        self.value = value


def _as_symmetric(A, name="A") -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    scale = np.abs(A).max() if A.size else 0.0
    if A.size and np.abs(A - A.T).max() > SYMMETRY_RTOL * max(scale, 1e-300):
        raise ValueError(f"{name} is not symmetric (asymmetry {np.abs(A - A.T).max():.2e})")
    return 0.5 * (A + A.T)


def cholesky(A) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == A``."""
    A = _as_symmetric(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if not d > 0.0:
            raise NotPositiveDefiniteError(j, float(d))
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def solve_lower(L, b) -> np.ndarray:
    """Forward substitution; ``b`` may be a vector or a matrix of right-hand sides."""
    b = np.array(b, dtype=float)
    x = np.zeros_like(b)
    for i in range(L.shape[0]):
        x[i] = (b[i] - L[i, :i] @ x[:i]) / L[i, i]
    return x


def solve_upper(U, b) -> np.ndarray:
    b = np.array(b, dtype=float)
    x = np.zeros_like(b)
    n = U.shape[0]
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - U[i, i + 1:] @ x[i + 1:]) / U[i, i]
    return x


def cho_solve(L, b) -> np.ndarray:
    return solve_upper(L.T, solve_lower(L, b))


def solve_spd(A, rhs) -> np.ndarray:
    """Solve ``A x = rhs`` for symmetric positive definite ``A``."""
    return cho_solve(cholesky(A), rhs)


@dataclass
class SymEigResult:
    """Eigenvalues in ascending order and eigenvectors as columns.

    For generalized problems ``B`` is kept so residuals can be checked.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0
    B: np.ndarray | None = None

    def residuals(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        V = self.eigenvectors
        BV = V if self.B is None else self.B @ V
        return np.linalg.norm(A @ V - BV * self.eigenvalues, axis=0)


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``0..n-1`` covering every pair once (circle method)."""
    m = n + (n % 2)
    idx = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(idx[i], idx[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            P = np.array([a for a, _ in pairs])
            Q = np.array([b for _, b in pairs])
            rounds.append((P, Q))
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def sym_eig(A, tol: float = 1e-12, max_sweeps: int = 100) -> SymEigResult:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Each sweep visits every off-diagonal pair once, in round-robin order so
    that the rotations of one round act on disjoint index pairs and can be
    applied together. Iteration stops once the off-diagonal Frobenius norm is
    below ``tol * ||A||_F``.
    """
    A = _as_symmetric(A)
    n = A.shape[0]
    Vt = np.eye(n)
    if n <= 1:
        return SymEigResult(np.diag(A).copy(), Vt, 0)
    norm = np.linalg.norm(A)
    if norm == 0.0:
        return SymEigResult(np.zeros(n), Vt, 0)
    rounds = _round_robin(n)
    offmask = ~np.eye(n, dtype=bool)
    target = tol * norm
    sweeps = 0
    while True:
        off = np.sqrt(np.sum(A * A, where=offmask))
        if off < target:
            break
        if sweeps >= max_sweeps:
            raise np.linalg.LinAlgError(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.2e})")
        sweeps += 1
        for P, Q in rounds:
            apq = A[P, Q]
            active = np.abs(apq) > 1e-300
            if not active.any():
                continue
            P, Q, apq = P[active], Q[active], apq[active]
            theta = (A[Q, Q] - A[P, P]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                         np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0)))
            t[theta == 0.0] = 1.0
            c = (1.0 / np.sqrt(t * t + 1.0))[:, None]
            s = t[:, None] * c
            # A <- J^T A J done as two row rotations: J^T A, then J^T (J^T A)^T
            for M in (A, None):
                if M is None:
                    A = np.ascontiguousarray(A.T)
                    M = A
                rp, rq = M[P], M[Q]
                M[P] = c * rp - s * rq
                M[Q] = s * rp + c * rq
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            vp, vq = Vt[P], Vt[Q]
            Vt[P] = c * vp - s * vq
            Vt[Q] = s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return SymEigResult(w[order], np.ascontiguousarray(Vt.T[:, order]), sweeps)


def gen_sym_eig(A, B, tol: float = 1e-12) -> SymEigResult:
    """Solve ``A v = lam B v`` with ``B`` SPD, via ``B = L L^T`` and Jacobi on ``L^-1 A L^-T``.

    Eigenvectors are ``B``-orthonormal.
    """
    A = _as_symmetric(A, "A")
    B = _as_symmetric(B, "B")
    L = cholesky(B)
    C = solve_lower(L, solve_lower(L, A).T)
    C = 0.5 * (C + C.T)
    res = sym_eig(C, tol=tol)
    V = solve_upper(L.T, res.eigenvectors)
    return SymEigResult(res.eigenvalues, V, res.sweeps, B)


@dataclass
class PowerResult:
    value: float
    vector: np.ndarray
    iterations: int
    converged: bool


def power_iteration(apply: Callable[[np.ndarray], np.ndarray], dim: int, tol: float = 1e-10,
                    max_iter: int = 10000, seed: int = 0) -> PowerResult:
    """Dominant eigenvalue of a symmetric positive semi-definite linear map.

    Stops when successive Rayleigh quotients agree to ``tol`` (relative). If
    the iterate collapses (start vector orthogonal to the range) it restarts
    from a fresh vector of the same seeded generator.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    prev = None
    lam = 0.0
    for it in range(1, max_iter + 1):
        y = apply(v)
        lam = float(v @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0 or not np.isfinite(ny):
            if ny == 0.0 and it > 3:
                return PowerResult(0.0, v, it, True)
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            prev = None
            continue
        if prev is not None and abs(lam - prev) <= tol * abs(lam):
            return PowerResult(lam, y / ny, it, True)
        prev = lam
        v = y / ny
    return PowerResult(lam, v, max_iter, False)


def orthonormalize(X) -> np.ndarray:
    """Orthonormal columns spanning ``X`` (two passes of modified Gram-Schmidt)."""
    Q = np.array(X, dtype=float)
    for _ in range(2):
        for j in range(Q.shape[1]):
            for i in range(j):
                Q[:, j] -= (Q[:, i] @ Q[:, j]) * Q[:, i]
            Q[:, j] /= np.linalg.norm(Q[:, j])
    return Q


def top_eigenpairs(apply_block: Callable[[np.ndarray], np.ndarray], dim: int, count: int,
                   guard: int = 4, tol: float = 1e-12, max_iter: int = 2000, seed: int = 0):
    """Leading ``count`` eigenpairs of a symmetric PSD map by subspace iteration.

    ``apply_block`` maps a ``(dim, b)`` block to its image. Rayleigh-Ritz
    steps use the Jacobi solver. Returns ``(values_desc, vectors, converged)``.
    """
    rng = np.random.default_rng(seed)
    b = min(dim, count + guard)
    X = orthonormalize(rng.standard_normal((dim, b)))
    prev = None
    vals = np.zeros(count)
    for _ in range(max_iter):
        Y = apply_block(X)
        H = X.T @ Y
        res = sym_eig(0.5 * (H + H.T))
        order = np.argsort(res.eigenvalues)[::-1]
        vals = res.eigenvalues[order][:count]
        X = orthonormalize(Y @ res.eigenvectors[:, order])
        if prev is not None and np.all(np.abs(vals - prev) <= tol * np.abs(vals[0])):
            return vals, X[:, :count], True
        prev = vals
    return vals, X[:, :count], False
