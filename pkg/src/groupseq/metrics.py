"""Anytime-performance evaluation: objective-vs-cost curves, stopping costs,
timeliness, oracle reordering, accuracy and NDCG@k."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import ColumnMismatch, EmptyCurve, EmptyQuery, InvalidStopCost, LengthMismatch
from .sequencer import RidgeModel, SequencingResult, model_explained_variance


@dataclass(frozen=True)
class PerformanceCurve:
    """Piecewise-linear curve through ``(costs[i], values[i])``, starting at (0, 0).

    Beyond the last point the curve is extended flat at its last value.
    """

    costs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.costs, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if c.shape != v.shape or c.ndim != 1 or len(c) == 0:
            raise ValueError("costs and values must be equal-length nonempty vectors")
        if c[0] != 0.0 or v[0] != 0.0:
            raise ValueError("a curve must start at (0, 0)")
        if np.any(np.diff(c) <= 0):
            raise ValueError("curve costs must be strictly increasing")
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_points(cls, costs, values) -> "PerformanceCurve":
        """Prepend (0, 0) to a list of (cost, value) points with positive costs."""
        return cls(np.concatenate([[0.0], np.asarray(costs, dtype=float)]),
                   np.concatenate([[0.0], np.asarray(values, dtype=float)]))

    @property
    def final_value(self) -> float:
        return float(self.values[-1])

    @property
    def final_cost(self) -> float:
        return float(self.costs[-1])

    def value_at(self, cost: float) -> float:
        return float(np.interp(cost, self.costs, self.values))

    def to_csv(self, path) -> None:
        lines = ["cost,value"] + ["%.17g,%.17g" % (c, v) for c, v in zip(self.costs, self.values)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path) -> "PerformanceCurve":
        rows = Path(path).read_text(encoding="utf-8").strip().splitlines()[1:]
        data = np.array([[float(t) for t in r.split(",")] for r in rows]).reshape(-1, 2)
        return cls(data[:, 0], data[:, 1])


def _model_value(d: Dataset, model) -> float:
    from .glm import GlmModel, glm_explained_variance

    if isinstance(model, GlmModel):
        return glm_explained_variance(d, model)
    return model_explained_variance(d, model)


def curve_from_models(costs: Sequence[float], models: Sequence, d_eval: Dataset) -> PerformanceCurve:
    d_max = max((int(np.max(m.selected_columns)) for m in models if len(m.selected_columns)), default=-1)
    if d_max >= d_eval.dim:
        raise ColumnMismatch(f"models use column {d_max}, evaluation data has {d_eval.dim} columns")
    return PerformanceCurve.from_points(costs, [_model_value(d_eval, m) for m in models])


def curve_from_result(r: SequencingResult, d_eval: Dataset) -> PerformanceCurve:
    """Explained variance of every prefix model on ``d_eval`` against prefix cost.

    ``d_eval`` must already be transformed like the training data (same
    response centering and whitening maps).
    """
    if d_eval.n_groups != len(r.order_indices) and r.order_indices:
        raise ColumnMismatch(f"result has {len(r.order_indices)} groups, evaluation data has {d_eval.n_groups}")
    return curve_from_models(r.prefix_costs, r.prefix_models, d_eval)


def train_curve(r: SequencingResult) -> PerformanceCurve:
    return PerformanceCurve.from_points(r.prefix_costs, r.prefix_objectives)


def alpha_stopping_cost(curve: PerformanceCurve, alpha: float) -> float:
    """Smallest cost where the interpolated curve reaches ``alpha * final value``."""
    if len(curve.costs) < 2 or not curve.final_value > 0:
        raise EmptyCurve("need at least one point beyond the origin with a positive final value")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if alpha == 0.0:
        return 0.0
    target = alpha * curve.final_value
    c, v = curve.costs, curve.values
    i = int(np.argmax(v >= target))  # first point at or above target
    if i == 0:
        return 0.0
    c0, c1, v0, v1 = c[i - 1], c[i], v[i - 1], v[i]
    return float(c0 + (target - v0) * (c1 - c0) / (v1 - v0))


def curve_area(curve: PerformanceCurve, stop_cost: float) -> float:
    """Trapezoidal area under the curve on ``[0, stop_cost]``."""
    c, v = curve.costs, curve.values
    inside = c < stop_cost
    xs = np.concatenate([c[inside], [stop_cost]])
    ys = np.concatenate([v[inside], [curve.value_at(stop_cost)]])
    return float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))


def timeliness(curve: PerformanceCurve, stop_cost: float, normalizer: float | None = None) -> float:
    """Area under the curve up to ``stop_cost`` divided by ``stop_cost * normalizer``.

    ``normalizer`` defaults to the curve's own final value; for comparisons
    pass the final training objective of the reference sequencer.
    """
    if not stop_cost > 0:
        raise InvalidStopCost(f"stop cost must be positive, got {stop_cost}")
    norm = curve.final_value if normalizer is None else float(normalizer)
    if not norm > 0:
        raise InvalidStopCost("timeliness normalizer must be positive")
    return curve_area(curve, stop_cost) / (stop_cost * norm)


def plateau_alpha(curve: PerformanceCurve, start: float = 0.95, step: float = 0.01,
                  cost_fraction: float = 0.2) -> float:
    """First alpha >= ``start`` after which gaining another ``step`` of the final
    objective costs more than ``cost_fraction`` of the total cost; 1.0 if none."""
    total = curve.final_cost
    for k in range(int(round((1.0 - start) / step))):
        alpha = round(start + k * step, 10)
        nxt = min(1.0, alpha + step)
        if alpha_stopping_cost(curve, nxt) - alpha_stopping_cost(curve, alpha) > cost_fraction * total:
            return alpha
    return 1.0


def _ratio_order(gains: np.ndarray, costs: np.ndarray) -> np.ndarray:
    # stable sort keeps the original position on ties
    return np.argsort(-(gains / costs), kind="stable")


def oracle_reorder(r: SequencingResult) -> SequencingResult:
    """Reorder groups by marginal gain per unit cost, holding the marginals fixed.

    No models are refit; the returned result carries no prefix models.
    """
    gains = r.marginal_gains
    perm = _ratio_order(gains, r.step_costs)
    step_costs = r.step_costs[perm]
    return replace(
        r, method=f"oracle({r.method})",
        order=[r.order[i] for i in perm], order_indices=[r.order_indices[i] for i in perm],
        step_costs=step_costs, prefix_costs=np.cumsum(step_costs),
        prefix_objectives=np.cumsum(gains[perm]), prefix_models=[], selection_scores=[], step_times=[],
    )


def oracle_curve(curve: PerformanceCurve) -> PerformanceCurve:
    """Oracle reordering applied directly to a curve's segments (e.g. a test curve)."""
    gains = np.diff(curve.values)
    costs = np.diff(curve.costs)
    perm = _ratio_order(gains, costs)
    return PerformanceCurve.from_points(np.cumsum(costs[perm]), np.cumsum(gains[perm]))


def accuracy(predictions, labels, classes: Sequence | None = None) -> float:
    """Fraction of correct predictions.

    ``predictions`` is n x P.  For P > 1 the row argmax indexes ``classes``
    (default ``0..P-1``); ``labels`` may be class values or one-hot rows.  For
    P = 1 each score is mapped to the nearest value in ``classes``.
    """
    pred = np.asarray(predictions, dtype=float)
    if pred.ndim == 1:
        pred = pred[:, None]
    lab = np.asarray(labels)
    if len(pred) != len(lab):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(lab)} labels")
    if len(pred) == 0:
        raise LengthMismatch("no samples")
    p = pred.shape[1]
    if p > 1:
        cls = np.arange(p) if classes is None else np.asarray(classes)
        if lab.ndim == 2:
            lab = cls[np.argmax(lab, axis=1)]
        guess = cls[np.argmax(pred, axis=1)]
    else:
        if classes is None:
            raise ValueError("single-column predictions need the label set")
        cls = np.asarray(classes, dtype=float)
        guess = cls[np.argmin(np.abs(pred[:, :1] - cls[None, :]), axis=1)]
        lab = lab.reshape(-1)
    return float(np.mean(guess == lab))


def _dcg(rel: np.ndarray, k: int) -> float:
    rel = rel[:k]
    return float(np.sum((2.0 ** rel - 1.0) / np.log2(np.arange(2, len(rel) + 2))))


def ndcg_at_k(scores: Sequence, relevances: Sequence, k: int = 5) -> float:
    """Mean NDCG@k over queries with gain ``2^rel - 1`` and discount ``1/log2(i+1)``.

    Queries whose relevances are all zero count as 1.0.  Equal scores keep
    their input order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(scores) != len(relevances):
        raise LengthMismatch("scores and relevances cover different numbers of queries")
    if len(scores) == 0:
        raise EmptyQuery("no queries")
    out = []
    for q, (s, rel) in enumerate(zip(scores, relevances)):
        s = np.asarray(s, dtype=float)
        rel = np.asarray(rel, dtype=float)
        if len(s) == 0:
            raise EmptyQuery(f"query {q} has no documents")
        if len(s) != len(rel):
            raise LengthMismatch(f"query {q}: {len(s)} scores vs {len(rel)} relevances")
        ideal = _dcg(np.sort(rel)[::-1], k)
        if ideal == 0.0:
            out.append(1.0)
            continue
        ranked = rel[np.argsort(-s, kind="stable")]
        out.append(_dcg(ranked, k) / ideal)
    return float(np.mean(out))


def metrics_report(method: str, alpha: float, stop_cost: float, curve: PerformanceCurve,
                   normalizer: float) -> dict:
    return {
        "method": method,
        "alpha": alpha,
        "stop_cost": stop_cost,
        "timeliness": timeliness(curve, stop_cost, normalizer),
        "final_objective": normalizer,
    }


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
