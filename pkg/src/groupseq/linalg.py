"""Dense SPD linear algebra: Cholesky factors, solves, block-inverse updates
and extreme-eigenvalue estimation.

All arrays are ordinary C-ordered float64 numpy arrays.  Every function is
pure: inputs are never modified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite, SingularSchurComplement

PIVOT_TOL = 1e-12
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == a``."""

    factor: np.ndarray

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.factor @ self.factor.T


def _check_square_symmetric(a: np.ndarray, sym_tol: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    return a


def spd_factorize(a, pivot_tol: float = PIVOT_TOL, sym_tol: float = SYMMETRY_TOL) -> SpdFactor:
    """Unpivoted Cholesky factorization of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If any pivot (squared diagonal of the factor) is ``<= pivot_tol``.
    """
    a = _check_square_symmetric(a, sym_tol)
    if a.shape[0] == 0:
        return SpdFactor(np.zeros((0, 0)))
    try:
        low = scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    pivots = np.diag(low) ** 2
    if np.any(pivots <= pivot_tol):
        k = int(np.argmax(pivots <= pivot_tol))
        raise NotPositiveDefinite(f"pivot {k} is {pivots[k]:.3e} <= {pivot_tol:g}")
    return SpdFactor(low)


def spd_solve(f: SpdFactor, b) -> np.ndarray:
    """Solve ``a x = b`` given the factor of ``a``; ``b`` may be a vector or matrix."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != f.dim:
        raise DimensionMismatch(f"right-hand side has {b.shape[0]} rows, factor has dim {f.dim}")
    if f.dim == 0:
        return np.zeros_like(b)
    return scipy.linalg.cho_solve((f.factor, True), b, check_finite=False)


def spd_inverse(f: SpdFactor) -> np.ndarray:
    inv = spd_solve(f, np.eye(f.dim))
    return 0.5 * (inv + inv.T)


def block_inverse_update(inv_old, cross, corner, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Inverse of ``[[A, B], [B.T, D]]`` from ``inv(A)``, ``B`` and ``D``.

    Uses the Schur complement ``S = D - B.T inv(A) B``; the cost is
    O(K^2 m + m^3) for a K x K old block and m new rows.
    """
    inv_old = np.asarray(inv_old, dtype=float)
    corner = np.atleast_2d(np.asarray(corner, dtype=float))
    k = inv_old.shape[0] if inv_old.size else 0
    m = corner.shape[0]
    cross = np.asarray(cross, dtype=float).reshape(k, m)
    try:
        if k == 0:
            return spd_inverse(spd_factorize(corner, pivot_tol))
        proj = inv_old @ cross
        schur = corner - cross.T @ proj
        schur = 0.5 * (schur + schur.T)
        schur_inv = spd_inverse(spd_factorize(schur, pivot_tol))
    except NotPositiveDefinite as exc:
        raise SingularSchurComplement(str(exc)) from None
    top_right = -proj @ schur_inv
    out = np.empty((k + m, k + m))
    out[:k, :k] = inv_old - top_right @ proj.T
    out[:k, k:] = top_right
    out[k:, :k] = top_right.T
    out[k:, k:] = schur_inv
    return out


def _jacobi_eigenvalues(a: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    """Cyclic Jacobi rotations until the off-diagonal mass is below ``tol * ||a||_F``."""
    a = a.copy()
    d = a.shape[0]
    target = tol * max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= target:
            return np.diag(a).copy()
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    a[p, q] = a[q, p] = 0.0
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                rp, rq = a[p].copy(), a[q].copy()
                a[p], a[q] = c * rp - s * rq, s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * cp - s * cq, s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
    raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps")


def _inverse_iteration_min(a: np.ndarray, tol: float, max_iter: int) -> float:
    d = a.shape[0]
    try:
        shift = 0.0
        f = spd_factorize(a, pivot_tol=0.0)
    except NotPositiveDefinite:
        # indefinite or singular: shift below the Gershgorin lower bound
        radius = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
        shift = float(np.min(np.diag(a) - radius)) - 1e-3 * max(1.0, np.linalg.norm(a))
        f = spd_factorize(a - shift * np.eye(d), pivot_tol=0.0)
    v = np.random.default_rng(0).standard_normal(d)
    v /= np.linalg.norm(v)
    rq = float(v @ a @ v)
    for _ in range(max_iter):
        v = spd_solve(f, v)
        v /= np.linalg.norm(v)
        new_rq = float(v @ a @ v)
        if abs(new_rq - rq) <= tol * max(abs(new_rq), np.finfo(float).tiny):
            return new_rq
        rq = new_rq
    raise NoConvergence(f"inverse iteration did not converge in {max_iter} iterations (shift {shift})")


def min_eigenvalue(a, tol: float = 1e-12, max_iter: int = 10_000, jacobi_max_dim: int = 64) -> float:
    """Smallest eigenvalue of a symmetric matrix.

    Jacobi sweeps for ``dim <= jacobi_max_dim``, shifted inverse power
    iteration above that.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _check_square_symmetric(a, SYMMETRY_TOL)
    a = 0.5 * (a + a.T)
    if a.shape[0] == 0:
        raise DimensionMismatch("empty matrix has no eigenvalues")
    if a.shape[0] <= jacobi_max_dim:
        return float(np.min(_jacobi_eigenvalues(a, tol, max_sweeps=100)))
    return _inverse_iteration_min(a, tol, max_iter)


def max_eigenvalue(a, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    a = np.asarray(a, dtype=float)
    d = a.shape[0]
    if d == 0:
        return 0.0
    v = np.ones(d) / np.sqrt(d) + 1e-3 * np.random.default_rng(0).standard_normal(d)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = a @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if abs(norm - est) <= tol * norm:
            return float(norm)
        est = norm
    raise NoConvergence(f"power iteration did not converge in {max_iter} iterations")
