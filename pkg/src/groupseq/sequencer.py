"""Greedy feature-group sequencers for ridge regression.

Conventions: responses are a single centered column, the risk of a weight
vector is ``(1/2n)||y - X_S w||^2 + (lam/2)||w||^2``, and the group gradient
of the explained variance is

    b_g = (1/n) X_g^T (y - X_S w) - lam * w_g

which is the exact derivative of ``-risk`` with respect to ``w_g``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import linalg
from .dataset import Dataset, is_centered
from .errors import NonpositiveCost, NotPositiveDefinite, PreconditionError, SingularSystem


class SelectionRule(str, Enum):
    COST_SENSITIVE_L2 = "cost-sensitive-l2"
    COST_SENSITIVE_LINF = "cost-sensitive-linf"
    COST_INSENSITIVE_L2 = "cost-insensitive-l2"
    COST_SENSITIVE_MAHALANOBIS = "cost-sensitive-mahalanobis"


RULE_METHOD_NAMES = {
    SelectionRule.COST_SENSITIVE_L2: "cs-g-omp",
    SelectionRule.COST_SENSITIVE_LINF: "cs-g-omp-single",
    SelectionRule.COST_INSENSITIVE_L2: "g-omp",
    SelectionRule.COST_SENSITIVE_MAHALANOBIS: "cs-g-omp-mahalanobis",
}


@dataclass(frozen=True)
class RidgeModel:
    """Ridge fit ``w(S)`` on ``selected_columns``; ``inv_gram`` is
    ``((1/n) X_S^T X_S + lam I)^{-1}`` when maintained incrementally."""

    selected_columns: np.ndarray
    weights: np.ndarray
    lam: float
    inv_gram: np.ndarray | None = None

    def predict(self, x: np.ndarray) -> np.ndarray:
        return x[:, self.selected_columns] @ self.weights

    def to_dict(self) -> dict:
        return {"kind": "ridge", "columns": self.selected_columns.tolist(),
                "weights": self.weights.tolist(), "lambda": self.lam}


@dataclass
class SequencingResult:
    """Output of a sequencer: the group order and one fitted model per prefix."""

    method: str
    lam: float
    order: list[str]
    order_indices: list[int]
    step_costs: np.ndarray
    prefix_costs: np.ndarray
    prefix_objectives: np.ndarray
    prefix_models: list = field(default_factory=list)
    selection_scores: list[dict[str, float]] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.order)

    @property
    def marginal_gains(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.prefix_objectives]))

    def to_dict(self, include_scores: bool = True) -> dict:
        out = {
            "method": self.method,
            "lambda": self.lam,
            "order": list(self.order),
            "order_indices": [int(i) for i in self.order_indices],
            "step_costs": self.step_costs.tolist(),
            "prefix_costs": self.prefix_costs.tolist(),
            "prefix_objectives": self.prefix_objectives.tolist(),
            "prefix_models": [m.to_dict() for m in self.prefix_models],
        }
        if include_scores:
            out["selection_scores"] = self.selection_scores
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "SequencingResult":
        from .glm import GlmModel

        models = []
        for m in obj.get("prefix_models", []):
            if m["kind"] == "ridge":
                models.append(RidgeModel(np.asarray(m["columns"], dtype=int),
                                         np.asarray(m["weights"], dtype=float), float(m["lambda"])))
            else:
                models.append(GlmModel.from_dict(m))
        return cls(
            method=obj["method"], lam=float(obj["lambda"]), order=list(obj["order"]),
            order_indices=[int(i) for i in obj["order_indices"]],
            step_costs=np.asarray(obj["step_costs"], dtype=float),
            prefix_costs=np.asarray(obj["prefix_costs"], dtype=float),
            prefix_objectives=np.asarray(obj["prefix_objectives"], dtype=float),
            prefix_models=models,
            selection_scores=obj.get("selection_scores", []),
        )


# -- objective ---------------------------------------------------------------

def response_vector(d: Dataset) -> np.ndarray:
    if d.p != 1:
        raise PreconditionError(f"linear sequencing needs a single response column, got {d.p}")
    return d.y[:, 0]


def empty_risk(d: Dataset) -> float:
    """``R(empty) = (1/2n) sum y_i^2``."""
    y = response_vector(d)
    return float(y @ y) / (2 * d.n)


def model_risk(d: Dataset, model: RidgeModel) -> float:
    y = response_vector(d)
    resid = y - model.predict(d.x)
    return float(resid @ resid) / (2 * d.n) + 0.5 * model.lam * float(model.weights @ model.weights)


def model_explained_variance(d: Dataset, model: RidgeModel) -> float:
    return empty_risk(d) - model_risk(d, model)


def ridge_fit(d: Dataset, columns, lam: float) -> RidgeModel:
    """Dense from-scratch solve of ``((1/n) X_S^T X_S + lam I) w = (1/n) X_S^T y``."""
    columns = np.asarray(columns, dtype=int)
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    y = response_vector(d)
    xs = d.x[:, columns]
    gram = xs.T @ xs / d.n + lam * np.eye(len(columns))
    try:
        f = linalg.spd_factorize(gram)
    except NotPositiveDefinite as exc:
        raise SingularSystem(f"restricted Gram matrix is singular ({exc}); use lambda > 0") from None
    w = linalg.spd_solve(f, xs.T @ y / d.n)
    return RidgeModel(columns, w, float(lam))


def ridge_risk(d: Dataset, columns, lam: float) -> tuple[float, np.ndarray]:
    """Minimum regularized risk over weights supported on ``columns`` and the minimizer."""
    model = ridge_fit(d, columns, lam)
    return model_risk(d, model), model.weights


def explained_variance(d: Dataset, columns, lam: float) -> float:
    """``F(S) = R(empty) - R(S)``."""
    if len(columns) == 0:
        return 0.0
    return empty_risk(d) - ridge_risk(d, columns, lam)[0]


def group_gradient(d: Dataset, model: RidgeModel, g) -> np.ndarray:
    """Gradient of the explained variance w.r.t. the weights of group ``g`` (index or name).

    Unselected columns carry zero weight, so their ``-lam * w_g`` term vanishes.
    """
    j = d.structure.index(g) if isinstance(g, str) else int(g)
    grad = _full_gradient(d.x, response_vector(d), model)
    return grad[d.structure.columns(j)]


def _full_gradient(x: np.ndarray, y: np.ndarray, model: RidgeModel) -> np.ndarray:
    n = x.shape[0]
    resid = y - model.predict(x)
    grad = x.T @ resid / n
    grad[model.selected_columns] -= model.lam * model.weights
    return grad


# -- scoring -----------------------------------------------------------------

def score_group(rule: SelectionRule, b, cost: float, gram_g=None, lam: float = 0.0) -> float:
    """Selection score of one group given its gradient block ``b``.

    ``gram_g`` is the sample Gram ``(1/n) X_g^T X_g`` and is needed only for
    the Mahalanobis rule, which uses ``b^T (gram_g + lam I)^{-1} b / cost``.
    """
    if not cost > 0:
        raise NonpositiveCost(f"cost must be positive, got {cost}")
    b = np.asarray(b, dtype=float)
    rule = SelectionRule(rule)
    if rule is SelectionRule.COST_SENSITIVE_L2:
        return float(b @ b) / cost
    if rule is SelectionRule.COST_SENSITIVE_LINF:
        return float(np.max(np.abs(b))) ** 2 / cost
    if rule is SelectionRule.COST_INSENSITIVE_L2:
        return float(b @ b)
    if gram_g is None:
        raise ValueError("the Mahalanobis rule needs the group Gram matrix")
    gram_g = np.atleast_2d(np.asarray(gram_g, dtype=float))
    f = linalg.spd_factorize(gram_g + lam * np.eye(len(b)))
    return float(b @ linalg.spd_solve(f, b)) / cost


def argmax_lowest_index(scores: np.ndarray) -> int:
    """Index of the maximum score; ties go to the lowest index."""
    return int(np.argmax(scores))


def argmin_corrupted(scores: np.ndarray) -> int:
    """Deliberately wrong chooser (worst candidate); used as a negative control."""
    return int(np.argmin(np.where(np.isfinite(scores), scores, np.inf)))


def _check_inputs(d: Dataset, lam: float):
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    y = response_vector(d)
    if not is_centered(d):
        raise PreconditionError("responses must be centered (see center_responses)")
    return y


def _grow_inverse(x, inv, sel_cols, new_cols, lam):
    n = x.shape[0]
    xg = x[:, new_cols]
    cross = x[:, sel_cols].T @ xg / n
    corner = xg.T @ xg / n + lam * np.eye(len(new_cols))
    return linalg.block_inverse_update(inv, cross, corner)


# -- sequencers --------------------------------------------------------------

def sequence_omp(d: Dataset, lam: float, rule: SelectionRule = SelectionRule.COST_SENSITIVE_L2, *,
                 require_whitened: bool = True,
                 chooser: Callable[[np.ndarray], int] = argmax_lowest_index,
                 method: str | None = None) -> SequencingResult:
    """Cost-sensitive group orthogonal matching pursuit and its variants.

    Each step scores every unselected group on the gradient at the current
    prefix model, appends the best one (ties: lowest declared index) and
    refits the ridge model through a block-inverse update.  Runs until all
    groups are selected.

    The L2/LInf rules assume group-whitened data and refuse unwhitened input
    unless ``require_whitened=False``; the Mahalanobis rule accepts raw data.
    """
    rule = SelectionRule(rule)
    y = _check_inputs(d, lam)
    if rule is not SelectionRule.COST_SENSITIVE_MAHALANOBIS and require_whitened and not d.whitened:
        raise PreconditionError(f"rule {rule.value} needs group-whitened data (see whiten_groups)")
    x, n, s = d.x, d.n, d.structure
    costs = s.costs
    names = s.names
    group_cols = [s.columns(j) for j in range(len(s))]
    xty = x.T @ y / n

    group_factors = None
    if rule is SelectionRule.COST_SENSITIVE_MAHALANOBIS:
        group_factors = []
        for cols in group_cols:
            xg = x[:, cols]
            group_factors.append(linalg.spd_factorize(xg.T @ xg / n + lam * np.eye(len(cols))))

    selected: list[int] = []
    sel_cols = np.zeros(0, dtype=int)
    inv = np.zeros((0, 0))
    model = RidgeModel(sel_cols, np.zeros(0), float(lam), inv)
    prefix_costs, prefix_objs, models, tables, times = [], [], [], [], []
    total_cost = 0.0
    for _ in range(len(s)):
        t0 = time.perf_counter()
        grad = _full_gradient(x, y, model)
        scores = np.full(len(s), -np.inf)
        table = {}
        for j, cols in enumerate(group_cols):
            if j in selected:
                continue
            b = grad[cols]
            if group_factors is not None:
                scores[j] = float(b @ linalg.spd_solve(group_factors[j], b)) / costs[j]
            else:
                scores[j] = score_group(rule, b, costs[j])
            table[names[j]] = float(scores[j])
        pick = chooser(scores)
        inv = _grow_inverse(x, inv, sel_cols, group_cols[pick], lam)
        sel_cols = np.concatenate([sel_cols, group_cols[pick]])
        selected.append(pick)
        model = RidgeModel(sel_cols, inv @ xty[sel_cols], float(lam), inv)
        total_cost += costs[pick]
        prefix_costs.append(total_cost)
        prefix_objs.append(model_explained_variance(d, model))
        models.append(model)
        tables.append(table)
        times.append(time.perf_counter() - t0)

    return SequencingResult(
        method=method or RULE_METHOD_NAMES[rule], lam=float(lam),
        order=[names[j] for j in selected], order_indices=selected,
        step_costs=costs[selected], prefix_costs=np.array(prefix_costs),
        prefix_objectives=np.array(prefix_objs), prefix_models=models,
        selection_scores=tables, step_times=times,
    )


def sequence_fr(d: Dataset, lam: float, cost_sensitive: bool = True, *,
                chooser: Callable[[np.ndarray], int] = argmax_lowest_index) -> SequencingResult:
    """Group forward regression: pick the group with the best exact marginal
    gain in explained variance (per unit cost when ``cost_sensitive``).

    Every candidate is refit through its own block-inverse update, so a step
    costs O((J - K) K^2 n) against O(K^2 n + J n) for :func:`sequence_omp`.
    """
    y = _check_inputs(d, lam)
    x, n, s = d.x, d.n, d.structure
    costs = s.costs
    names = s.names
    group_cols = [s.columns(j) for j in range(len(s))]
    xty = x.T @ y / n

    selected: list[int] = []
    sel_cols = np.zeros(0, dtype=int)
    inv = np.zeros((0, 0))
    current = 0.0
    prefix_costs, prefix_objs, models, tables, times = [], [], [], [], []
    total_cost = 0.0
    for _ in range(len(s)):
        t0 = time.perf_counter()
        scores = np.full(len(s), -np.inf)
        candidates = {}
        table = {}
        for j, cols in enumerate(group_cols):
            if j in selected:
                continue
            cand_inv = _grow_inverse(x, inv, sel_cols, cols, lam)
            cand_cols = np.concatenate([sel_cols, cols])
            cand = RidgeModel(cand_cols, cand_inv @ xty[cand_cols], float(lam), cand_inv)
            value = model_explained_variance(d, cand)
            gain = value - current
            scores[j] = gain / costs[j] if cost_sensitive else gain
            candidates[j] = (cand, value)
            table[names[j]] = float(scores[j])
        pick = chooser(scores)
        model, current = candidates[pick]
        inv, sel_cols = model.inv_gram, model.selected_columns
        selected.append(pick)
        total_cost += costs[pick]
        prefix_costs.append(total_cost)
        prefix_objs.append(current)
        models.append(model)
        tables.append(table)
        times.append(time.perf_counter() - t0)

    return SequencingResult(
        method="cs-g-fr" if cost_sensitive else "g-fr", lam=float(lam),
        order=[names[j] for j in selected], order_indices=selected,
        step_costs=costs[selected], prefix_costs=np.array(prefix_costs),
        prefix_objectives=np.array(prefix_objs), prefix_models=models,
        selection_scores=tables, step_times=times,
    )
