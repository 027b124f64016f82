"""Generalized linear extension: multi-dimensional responses, identity and
softmax mean functions, a damped Newton fitter and the GLM group sequencer.

The loss of a coefficient matrix ``W`` (P x |S|) is

    r(W) = (1/n) sum_i [phi(W x_i) - y_i^T W x_i] + (lam/2) ||W||_F^2

with ``phi(z) = ||z||^2 / 2`` (identity mean) or ``phi = logsumexp``
(softmax mean, ``phi(0) = log P``).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from . import linalg
from .dataset import Dataset
from .errors import NoConvergence, NotPositiveDefinite, PreconditionError
from .sequencer import SequencingResult, argmax_lowest_index

class MeanFunction(str, Enum):
    IDENTITY = "identity"
    SOFTMAX = "softmax"


@dataclass(frozen=True)
class GlmSpec:
    p: int
    mean_fn: MeanFunction = MeanFunction.IDENTITY
    lam: float = 0.0
    newton_tol: float = 1e-8
    newton_max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "mean_fn", MeanFunction(self.mean_fn))
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")

    def to_dict(self) -> dict:
        return {"p": self.p, "mean_fn": self.mean_fn.value, "lambda": self.lam,
                "newton_tol": self.newton_tol, "newton_max_iter": self.newton_max_iter}

    @classmethod
    def from_dict(cls, obj: dict) -> "GlmSpec":
        return cls(int(obj["p"]), MeanFunction(obj["mean_fn"]), float(obj["lambda"]),
                   float(obj["newton_tol"]), int(obj["newton_max_iter"]))


@dataclass(frozen=True)
class GlmModel:
    selected_columns: np.ndarray
    w: np.ndarray  # P x |S|
    spec: GlmSpec

    @classmethod
    def zero(cls, spec: GlmSpec) -> "GlmModel":
        return cls(np.zeros(0, dtype=int), np.zeros((spec.p, 0)), spec)

    def linear(self, x: np.ndarray) -> np.ndarray:
        return x[:, self.selected_columns] @ self.w.T

    def predict(self, x: np.ndarray) -> np.ndarray:
        return mean_fn_eval(self.spec, self.linear(x))

    def to_dict(self) -> dict:
        return {"kind": "glm", "columns": self.selected_columns.tolist(), "w": self.w.tolist(),
                "spec": self.spec.to_dict()}

    @classmethod
    def from_dict(cls, obj: dict) -> "GlmModel":
        spec = GlmSpec.from_dict(obj["spec"])
        cols = np.asarray(obj["columns"], dtype=int)
        w = np.asarray(obj["w"], dtype=float).reshape(spec.p, len(cols))
        return cls(cols, w, spec)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - np.max(z, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def mean_fn_eval(spec: GlmSpec, z) -> np.ndarray:
    """The mean function applied to the last axis of ``z``."""
    z = np.asarray(z, dtype=float)
    if spec.mean_fn is MeanFunction.IDENTITY:
        return z.copy()
    return _softmax(z)


def _phi(spec: GlmSpec, z: np.ndarray) -> np.ndarray:
    if spec.mean_fn is MeanFunction.IDENTITY:
        return 0.5 * np.sum(z * z, axis=-1)
    m = np.max(z, axis=-1)
    return m + np.log(np.sum(np.exp(z - m[..., None]), axis=-1))


def _check_p(d: Dataset, spec: GlmSpec):
    if d.p != spec.p:
        raise PreconditionError(f"dataset has {d.p} response columns, spec expects {spec.p}")


def _loss_restricted(xs: np.ndarray, y: np.ndarray, w: np.ndarray, spec: GlmSpec) -> float:
    z = xs @ w.T
    n = xs.shape[0]
    return float(np.sum(_phi(spec, z)) - np.sum(y * z)) / n + 0.5 * spec.lam * float(np.sum(w * w))


def _grad_restricted(xs, y, w, spec) -> np.ndarray:
    z = xs @ w.T
    return (mean_fn_eval(spec, z) - y).T @ xs / xs.shape[0] + spec.lam * w


def glm_loss(d: Dataset, model: GlmModel) -> float:
    _check_p(d, model.spec)
    return _loss_restricted(d.x[:, model.selected_columns], d.y, model.w, model.spec)


def glm_explained_variance(d: Dataset, model: GlmModel) -> float:
    """Loss reduction relative to the all-zero model."""
    return glm_loss(d, GlmModel.zero(model.spec)) - glm_loss(d, model)


def glm_gradient(d: Dataset, model: GlmModel) -> np.ndarray:
    """Full P x D gradient; unselected columns are treated as zero coefficients."""
    _check_p(d, model.spec)
    spec = model.spec
    resid = mean_fn_eval(spec, model.linear(d.x)) - d.y
    grad = resid.T @ d.x / d.n
    grad[:, model.selected_columns] += spec.lam * model.w
    return grad


def _hessian(xs: np.ndarray, w: np.ndarray, spec: GlmSpec) -> np.ndarray:
    n, k = xs.shape
    p = spec.p
    if spec.mean_fn is MeanFunction.IDENTITY:
        h = np.kron(np.eye(p), xs.T @ xs / n)
    else:
        probs = _softmax(xs @ w.T)
        h = np.empty((p * k, p * k))
        for a in range(p):
            for b in range(a, p):
                weight = probs[:, a] * ((a == b) - probs[:, b])
                block = xs.T @ (weight[:, None] * xs) / n
                h[a * k:(a + 1) * k, b * k:(b + 1) * k] = block
                h[b * k:(b + 1) * k, a * k:(a + 1) * k] = block.T
    h[np.diag_indices_from(h)] += spec.lam
    return h


def glm_fit(d: Dataset, columns, spec: GlmSpec, warm_start: GlmModel | None = None) -> GlmModel:
    """Minimize the GLM loss over coefficients supported on ``columns``.

    Damped Newton with Armijo backtracking (halving, constant 1e-4); falls
    back to a gradient step when the Hessian cannot be factorized.  Stops
    once the restricted gradient has Frobenius norm <= ``spec.newton_tol``.
    """
    _check_p(d, spec)
    columns = np.asarray(columns, dtype=int)
    k, p = len(columns), spec.p
    w = np.zeros((p, k))
    if warm_start is not None:
        pos = {int(c): i for i, c in enumerate(columns)}
        for i, c in enumerate(warm_start.selected_columns):
            if int(c) in pos:
                w[:, pos[int(c)]] = warm_start.w[:, i]
    if k == 0:
        return GlmModel(columns, w, spec)
    xs, y = d.x[:, columns], d.y
    loss = _loss_restricted(xs, y, w, spec)
    gnorm = np.inf
    for _ in range(spec.newton_max_iter):
        grad = _grad_restricted(xs, y, w, spec)
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= spec.newton_tol:
            return GlmModel(columns, w, spec)
        g = grad.ravel()
        try:
            step = -linalg.spd_solve(linalg.spd_factorize(_hessian(xs, w, spec), pivot_tol=0.0), g)
        except NotPositiveDefinite:
            step = -g
        slope = float(g @ step)
        if slope >= 0:
            step, slope = -g, -float(g @ g)
        t = 1.0
        while True:
            trial = w + t * step.reshape(p, k)
            trial_loss = _loss_restricted(xs, y, trial, spec)
            if trial_loss <= loss + 1e-4 * t * slope or t < 1e-14:
                break
            t *= 0.5
        w, loss = trial, trial_loss
    grad = _grad_restricted(xs, y, w, spec)
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= spec.newton_tol:
        return GlmModel(columns, w, spec)
    raise NoConvergence(f"Newton stopped after {spec.newton_max_iter} iterations, gradient norm {gnorm:.3e}")


def glm_predict_accuracy(model: GlmModel, d: Dataset) -> float:
    """Argmax accuracy of ``model`` against one-hot responses."""
    from .metrics import accuracy

    _check_p(d, model.spec)
    return accuracy(model.predict(d.x), d.y)


def sequence_omp_glm(d: Dataset, spec: GlmSpec, *, require_whitened: bool = True,
                     chooser: Callable[[np.ndarray], int] = argmax_lowest_index) -> SequencingResult:
    """Cost-sensitive group OMP for generalized linear models.

    Scores each unselected group by ``||grad_g||_F^2 / cost`` at the current
    model, appends the best, then refits on the enlarged support starting
    from the previous coefficients padded with zeros.  The per-prefix
    objective is the loss reduction from the zero model.
    """
    _check_p(d, spec)
    if require_whitened and not d.whitened:
        raise PreconditionError("GLM sequencing needs group-whitened data (see whiten_groups)")
    s = d.structure
    costs, names = s.costs, s.names
    group_cols = [s.columns(j) for j in range(len(s))]
    model = GlmModel.zero(spec)
    base = glm_loss(d, model)
    selected: list[int] = []
    prefix_costs, prefix_objs, models, tables, times = [], [], [], [], []
    total = 0.0
    for _ in range(len(s)):
        t0 = time.perf_counter()
        grad = glm_gradient(d, model)
        scores = np.full(len(s), -np.inf)
        table = {}
        for j, cols in enumerate(group_cols):
            if j in selected:
                continue
            scores[j] = float(np.sum(grad[:, cols] ** 2)) / costs[j]
            table[names[j]] = float(scores[j])
        pick = chooser(scores)
        selected.append(pick)
        cols = np.concatenate([model.selected_columns, group_cols[pick]])
        model = glm_fit(d, cols, spec, warm_start=model)
        total += costs[pick]
        prefix_costs.append(total)
        prefix_objs.append(base - glm_loss(d, model))
        models.append(model)
        tables.append(table)
        times.append(time.perf_counter() - t0)
    return SequencingResult(
        method="glm-omp", lam=float(spec.lam),
        order=[names[j] for j in selected], order_indices=selected,
        step_costs=costs[selected], prefix_costs=np.array(prefix_costs),
        prefix_objectives=np.array(prefix_objs), prefix_models=models,
        selection_scores=tables, step_times=times,
    )
