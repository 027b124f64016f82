"""Cost-weighted group lasso baseline ("Sparse").

Solves ``min_w 1/2 ||y - X w||^2 + lam * sum_g c_g ||w_g||_2`` with FISTA
plus function-value restart, and builds warm-started regularization paths
whose active sets are refit by ridge regression.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .dataset import Dataset, is_centered
from .errors import NoConvergence, PreconditionError
from .sequencer import RidgeModel, explained_variance, response_vector, ridge_fit


def group_prox(w_g, threshold: float) -> np.ndarray:
    """Block soft-threshold: ``w_g * max(0, 1 - threshold / ||w_g||)``."""
    w_g = np.asarray(w_g, dtype=float)
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    norm = float(np.linalg.norm(w_g))
    if norm <= threshold:
        return np.zeros_like(w_g)
    return w_g * (1.0 - threshold / norm)


@dataclass
class _Problem:
    gram: np.ndarray  # X^T X
    xty: np.ndarray  # X^T y
    yty: float
    group_cols: list
    costs: np.ndarray
    lipschitz: float

    @classmethod
    def from_dataset(cls, d: Dataset) -> "_Problem":
        y = response_vector(d)
        if not is_centered(d):
            raise PreconditionError("responses must be centered (see center_responses)")
        gram = d.x.T @ d.x
        lip = linalg.max_eigenvalue(gram) * 1.01
        s = d.structure
        return cls(gram, d.x.T @ y, float(y @ y), [s.columns(j) for j in range(len(s))], s.costs,
                   lip if lip > 0 else 1.0)

    def objective(self, w: np.ndarray, lam: float) -> float:
        fit = 0.5 * (self.yty - 2 * w @ self.xty + w @ self.gram @ w)
        return float(fit + lam * sum(c * np.linalg.norm(w[cols]) for cols, c in zip(self.group_cols, self.costs)))

    def prox(self, v: np.ndarray, lam: float, step: float) -> np.ndarray:
        out = np.empty_like(v)
        for cols, c in zip(self.group_cols, self.costs):
            out[cols] = group_prox(v[cols], lam * c * step)
        return out

    def kkt_violation(self, w: np.ndarray, lam: float) -> float:
        corr = self.xty - self.gram @ w  # X^T (y - X w)
        worst = 0.0
        for cols, c in zip(self.group_cols, self.costs):
            wg = w[cols]
            norm = np.linalg.norm(wg)
            if norm == 0.0:
                v = max(0.0, float(np.linalg.norm(corr[cols])) - lam * c)
            else:
                v = float(np.linalg.norm(corr[cols] - lam * c * wg / norm))
            worst = max(worst, v)
        return worst

    def lambda_max(self) -> float:
        return max(float(np.linalg.norm(self.xty[cols])) / c for cols, c in zip(self.group_cols, self.costs))


def lambda_max(d: Dataset) -> float:
    """Smallest ``lam`` for which the all-zero solution is optimal."""
    return _Problem.from_dataset(d).lambda_max()


def kkt_violation(d: Dataset, w, lam: float) -> float:
    """Largest blockwise distance from stationarity.

    Zero blocks: ``max(0, ||X_g^T r|| - lam c_g)``; nonzero blocks:
    ``||X_g^T r - lam c_g w_g / ||w_g||||`` with ``r = y - X w``.
    """
    return _Problem.from_dataset(d).kkt_violation(np.asarray(w, dtype=float), lam)


def _fista(prob: _Problem, lam: float, tol: float, w0, max_iter: int, trace: list | None):
    w = np.zeros(len(prob.xty)) if w0 is None else np.array(w0, dtype=float)
    step = 1.0 / prob.lipschitz
    obj = prob.objective(w, lam)
    if trace is not None:
        trace.append(obj)
    if prob.kkt_violation(w, lam) <= tol:
        return w
    z, t = w.copy(), 1.0
    for _ in range(max_iter):
        w_new = prob.prox(z - step * (prob.gram @ z - prob.xty), lam, step)
        obj_new = prob.objective(w_new, lam)
        if obj_new > obj:
            # restart momentum; a plain proximal step from w cannot increase the objective
            z, t = w.copy(), 1.0
            w_new = prob.prox(w - step * (prob.gram @ w - prob.xty), lam, step)
            obj_new = prob.objective(w_new, lam)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_new + ((t - 1.0) / t_new) * (w_new - w)
        w, t, obj = w_new, t_new, min(obj, obj_new)
        if trace is not None:
            trace.append(obj_new)
        if prob.kkt_violation(w, lam) <= tol:
            return w
    raise NoConvergence(f"FISTA reached {max_iter} iterations, KKT violation {prob.kkt_violation(w, lam):.3e}")


def solve_weighted_group_lasso(d: Dataset, lam: float, tol: float = 1e-6, w0=None,
                               max_iter: int = 200_000, trace: list | None = None) -> np.ndarray:
    """FISTA for the cost-weighted group lasso.

    Iterates until the blockwise KKT violation (see :func:`kkt_violation`)
    is at most ``tol``.  ``trace``, when given, receives the objective
    value after each iteration.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return _fista(_Problem.from_dataset(d), lam, tol, w0, max_iter, trace)


@dataclass
class LassoPath:
    lambdas: np.ndarray
    solutions: list
    active_groups: list
    active_costs: np.ndarray
    objectives: np.ndarray  # explained variance of a ridge refit on the active set
    raw_objectives: np.ndarray  # lasso objective value at the solution
    refit_models: list = field(default_factory=list)
    refit_lambda: float = 0.0

    def envelope(self) -> list[int]:
        """Path indices forming the best-objective-per-cost training curve, by increasing cost."""
        best: dict[float, int] = {}
        for i, cost in enumerate(self.active_costs):
            if cost <= 0:
                continue
            if cost not in best or self.objectives[i] > self.objectives[best[cost]]:
                best[cost] = i
        return [best[c] for c in sorted(best)]

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "active_groups": [list(map(int, a)) for a in self.active_groups],
            "active_costs": self.active_costs.tolist(),
            "objectives": self.objectives.tolist(),
            "raw_objectives": self.raw_objectives.tolist(),
            "refit_lambda": self.refit_lambda,
            "solutions": [w.tolist() for w in self.solutions],
        }


def lasso_path(d: Dataset, n_points: int = 50, refit_lambda: float = 0.0, tol: float = 1e-6,
               min_ratio: float = 1e-4) -> LassoPath:
    """Warm-started path on a geometric grid from ``lambda_max`` down to
    ``lambda_max * min_ratio``; each active set is refit by ridge with
    ``refit_lambda``."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    prob = _Problem.from_dataset(d)
    lam_max = prob.lambda_max()
    lambdas = np.geomspace(lam_max, lam_max * min_ratio, n_points)
    w = None
    sols, actives, costs, objs, raws, models = [], [], [], [], [], []
    for lam in lambdas:
        w = _fista(prob, float(lam), tol, w, 200_000, None)
        active = [j for j, cols in enumerate(prob.group_cols) if np.any(w[cols] != 0.0)]
        cols = d.structure.columns_of(active)
        sols.append(w.copy())
        actives.append(active)
        costs.append(float(sum(prob.costs[j] for j in active)))
        models.append(ridge_fit(d, cols, refit_lambda) if active else RidgeModel(cols, np.zeros(0), refit_lambda))
        objs.append(explained_variance(d, cols, refit_lambda))
        raws.append(prob.objective(w, float(lam)))
    return LassoPath(lambdas, sols, actives, np.array(costs), np.array(objs), np.array(raws), models,
                     float(refit_lambda))
