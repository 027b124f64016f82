"""Independent reference computations used by the tests.

Nothing here calls into the library's numerical routines; each oracle is a
deliberately naive re-derivation.
"""

from __future__ import annotations

import itertools

import numpy as np

from groupseq.dataset import Dataset, GroupStructure, center_responses, generate_synthetic, whiten_groups


def gauss_solve(a, b):
    """Gaussian elimination with partial pivoting, written out longhand."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    vec = b.ndim == 1
    if vec:
        b = b[:, None]
    n = a.shape[0]
    m = np.hstack([a, b])
    for k in range(n):
        p = k + int(np.argmax(np.abs(m[k:, k])))
        m[[k, p]] = m[[p, k]]
        for i in range(k + 1, n):
            m[i] -= m[i, k] / m[k, k] * m[k]
    x = np.zeros((n, b.shape[1]))
    for i in reversed(range(n)):
        x[i] = (m[i, n:] - m[i, i + 1:n] @ x[i + 1:]) / m[i, i]
    return x[:, 0] if vec else x


def gauss_inverse(a):
    return gauss_solve(a, np.eye(len(a)))


def charpoly_eigenvalues(a):
    """Roots of the characteristic polynomial from Faddeev-LeVerrier coefficients."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    coeffs = [1.0]
    m = np.zeros_like(a)
    c = 1.0
    for k in range(1, n + 1):
        m = a @ m + c * np.eye(n)
        c = -np.trace(a @ m) / k
        coeffs.append(c)
    return np.sort(np.real(np.roots(coeffs)))


def central_difference(f, w, h=1e-5):
    w = np.array(w, dtype=float)
    grad = np.zeros_like(w)
    for idx in np.ndindex(w.shape):
        up, dn = w.copy(), w.copy()
        up[idx] += h
        dn[idx] -= h
        grad[idx] = (f(up) - f(dn)) / (2 * h)
    return grad


def ridge_weights(x, y, cols, lam):
    """Minimizer of (1/2n)||y - X_S w||^2 + lam/2 ||w||^2 by elimination."""
    cols = list(cols)
    if not cols:
        return np.zeros(0)
    n = x.shape[0]
    xs = x[:, cols]
    return gauss_solve(xs.T @ xs / n + lam * np.eye(len(cols)), xs.T @ y / n)


def risk(x, y, cols, w, lam):
    n = x.shape[0]
    pred = x[:, list(cols)] @ w if len(cols) else np.zeros(n)
    return float(np.sum((y - pred) ** 2)) / (2 * n) + 0.5 * lam * float(w @ w)


def explained(x, y, cols, lam):
    return risk(x, y, [], np.zeros(0), lam) - risk(x, y, cols, ridge_weights(x, y, cols, lam), lam)


def omp_from_scratch(d: Dataset, lam: float, score):
    """Group OMP where every prefix model is refit by a dense solve.

    ``score(b, j)`` maps the gradient block of group ``j`` to its score.
    """
    x, y = d.x, d.y[:, 0]
    n = d.n
    s = d.structure
    selected, cols = [], []
    models = []
    for _ in range(len(s)):
        w = ridge_weights(x, y, cols, lam)
        resid = y - (x[:, cols] @ w if cols else 0.0)
        best, best_j = -np.inf, None
        for j in range(len(s)):
            if j in selected:
                continue
            b = x[:, s.columns(j)].T @ resid / n
            sc = score(b, j)
            if sc > best:
                best, best_j = sc, j
        selected.append(best_j)
        cols = cols + list(s.columns(best_j))
        models.append((list(cols), ridge_weights(x, y, cols, lam)))
    return selected, models


def fr_from_scratch(d: Dataset, lam: float, cost_sensitive=True):
    x, y = d.x, d.y[:, 0]
    s = d.structure
    selected, cols, current = [], [], 0.0
    for _ in range(len(s)):
        best, best_j = -np.inf, None
        for j in range(len(s)):
            if j in selected:
                continue
            gain = explained(x, y, cols + list(s.columns(j)), lam) - current
            sc = gain / s.costs[j] if cost_sensitive else gain
            if sc > best:
                best, best_j = sc, j
        selected.append(best_j)
        cols = cols + list(s.columns(best_j))
        current = explained(x, y, cols, lam)
    return selected


def best_area_permutation(gains, costs, stop):
    """Largest area under a rebuilt curve over all permutations (brute force)."""
    best = -np.inf
    for perm in itertools.permutations(range(len(gains))):
        c = np.concatenate([[0.0], np.cumsum(np.asarray(costs)[list(perm)])])
        v = np.concatenate([[0.0], np.cumsum(np.asarray(gains)[list(perm)])])
        best = max(best, trapezoid_area(c, v, stop))
    return best


def trapezoid_area(c, v, stop):
    """Area of the piecewise-linear curve on [0, stop], flat past its last point."""
    c = list(c)
    v = list(v)
    if stop > c[-1]:
        c.append(stop)
        v.append(v[-1])
    area = 0.0
    for i in range(len(c) - 1):
        lo, hi = c[i], min(c[i + 1], stop)
        if hi <= lo:
            break
        v_hi = v[i] + (v[i + 1] - v[i]) * (hi - lo) / (c[i + 1] - c[i])
        area += 0.5 * (v[i] + v_hi) * (hi - lo)
    return area


def instance(seed: int, sizes=(2, 1, 3), costs=(1.0, 2.0, 0.5), n=60, whiten=True, sparsity=None,
             noise=0.3, correlation=0.3, cross=0.2) -> Dataset:
    d = generate_synthetic(seed, n, list(sizes), list(costs), len(sizes) if sparsity is None else sparsity,
                           noise, correlation, cross)
    d = center_responses(d)
    if whiten:
        d, _ = whiten_groups(d)
    return d


def random_instance(rng: np.random.Generator, max_groups=6, whiten=True, n=None) -> Dataset:
    j = int(rng.integers(1, max_groups + 1))
    sizes = rng.integers(1, 4, size=j).tolist()
    costs = np.round(rng.uniform(0.5, 5.0, size=j), 3).tolist()
    n = n or int(rng.integers(sum(sizes) + 10, 120))
    return instance(int(rng.integers(2**31)), sizes, costs, n, whiten, int(rng.integers(1, j + 1)),
                    float(rng.uniform(0, 1)), float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.4)))


def toy_dataset(x, y, sizes, costs) -> Dataset:
    return Dataset(np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                   GroupStructure.contiguous(sizes, costs))
