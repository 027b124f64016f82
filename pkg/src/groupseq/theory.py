"""Empirical check of the greedy near-optimality guarantee.

For a greedy prefix of cost ``B`` and any competitor group set of cost
``K`` the explained variance satisfies

    F(greedy_B) >= (1 - exp(-gamma * B / K)) * F(best_K),
    gamma = lambda_min((1/n) X^T X + lam I) / (1 + lam),

and each greedy step satisfies the per-step inequality

    F(best_K) - F(G_{j-1}) <= (K / gamma) * (F(G_j) - F(G_{j-1})) / c(g_j).

Competitors are found by exhaustive enumeration of group subsets.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from . import linalg
from .dataset import Dataset, center_responses, generate_synthetic, whiten_groups
from .errors import PreconditionError, TooManyGroups
from .sequencer import SelectionRule, argmax_lowest_index, explained_variance, sequence_omp

MAX_GROUPS = 20
SLACK_TOL = 1e-10


def compute_gamma(d: Dataset, lam: float) -> float:
    if not d.whitened:
        raise PreconditionError("gamma is defined for group-whitened data")
    c = d.x.T @ d.x / d.n + lam * np.eye(d.dim)
    return linalg.min_eigenvalue(c) / (1.0 + lam)


@dataclass
class SubsetTable:
    """Explained variance of every group subset; ``masks[i]`` is a bitmask over groups."""

    masks: np.ndarray
    costs: np.ndarray
    values: np.ndarray

    def best(self, budget: float) -> tuple[list[int], float]:
        feasible = self.costs <= budget + 1e-12 * max(1.0, budget)
        i = int(np.argmax(np.where(feasible, self.values, -np.inf)))
        mask = int(self.masks[i])
        return [j for j in range(mask.bit_length()) if mask >> j & 1], float(self.values[i])

    def distinct_costs(self) -> np.ndarray:
        return np.unique(self.costs[self.costs > 0])


def subset_table(d: Dataset, lam: float) -> SubsetTable:
    j_count = d.n_groups
    if j_count > MAX_GROUPS:
        raise TooManyGroups(f"{j_count} groups exceed the enumeration limit of {MAX_GROUPS}")
    costs = d.structure.costs
    masks = np.arange(1 << j_count)
    subset_costs = np.zeros(len(masks))
    values = np.zeros(len(masks))
    for mask in masks[1:]:
        members = [j for j in range(j_count) if mask >> j & 1]
        subset_costs[mask] = costs[members].sum()
        values[mask] = explained_variance(d, d.structure.columns_of(members), lam)
    return SubsetTable(masks, subset_costs, values)


def best_competitor(d: Dataset, lam: float, budget: float) -> tuple[list[int], float]:
    """Exhaustive search for the group subset of cost <= budget with largest F."""
    return subset_table(d, lam).best(budget)


@dataclass
class BoundRecord:
    prefix: int
    budget: float
    competitor_cost: float
    f_greedy: float
    f_best_competitor: float
    bound: float
    slack: float
    satisfied: bool


@dataclass
class LemmaRecord:
    step: int
    competitor_cost: float
    lhs: float
    rhs: float
    slack: float
    satisfied: bool


@dataclass
class BoundReport:
    gamma: float
    lam: float
    order: list[str]
    records: list[BoundRecord] = field(default_factory=list)
    lemma_records: list[LemmaRecord] = field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        return all(r.satisfied for r in self.records)

    @property
    def lemma_satisfied(self) -> bool:
        return all(r.satisfied for r in self.lemma_records)

    @property
    def violations(self) -> int:
        return sum(not r.satisfied for r in self.records)

    @property
    def lemma_violations(self) -> int:
        return sum(not r.satisfied for r in self.lemma_records)

    @property
    def min_slack(self) -> float:
        return min((r.slack for r in self.records), default=math.inf)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "lambda": self.lam, "order": self.order,
            "satisfied": self.satisfied, "lemma_satisfied": self.lemma_satisfied,
            "violations": self.violations, "lemma_violations": self.lemma_violations,
            "records": [asdict(r) for r in self.records],
            "lemma_records": [asdict(r) for r in self.lemma_records],
        }


def check_theorem_bound(d: Dataset, lam: float, rule: SelectionRule = SelectionRule.COST_SENSITIVE_L2,
                        chooser: Callable[[np.ndarray], int] = argmax_lowest_index) -> BoundReport:
    """Run the greedy sequencer and test both inequalities at every prefix.

    Competitor costs are every distinct subset cost plus each prefix budget;
    a record is satisfied when its slack exceeds ``-1e-10``.
    """
    if d.n_groups > MAX_GROUPS:
        raise TooManyGroups(f"{d.n_groups} groups exceed the enumeration limit of {MAX_GROUPS}")
    gamma = compute_gamma(d, lam)
    result = sequence_omp(d, lam, rule, chooser=chooser)
    table = subset_table(d, lam)
    ks = table.distinct_costs()
    best_by_k = {float(k): table.best(float(k))[1] for k in ks}

    report = BoundReport(gamma, float(lam), result.order)
    f_prev = 0.0
    for j, (budget, f_g, step_cost) in enumerate(zip(result.prefix_costs, result.prefix_objectives,
                                                     result.step_costs)):
        budget = float(budget)
        competitors = dict(best_by_k)
        competitors.setdefault(budget, table.best(budget)[1])
        for k, f_s in competitors.items():
            bound = (1.0 - math.exp(-gamma * budget / k)) * f_s
            slack = float(f_g) - bound
            report.records.append(BoundRecord(j + 1, budget, k, float(f_g), f_s, bound, slack, slack > -SLACK_TOL))
            lhs = f_s - f_prev
            rhs = (k / gamma) * (float(f_g) - f_prev) / float(step_cost)
            report.lemma_records.append(LemmaRecord(j + 1, k, lhs, rhs, rhs - lhs, rhs - lhs > -SLACK_TOL))
        f_prev = float(f_g)
    return report


def random_instances(seed: int, count: int, lambdas=(0.01, 0.1, 1.0), max_groups: int = 8,
                     max_n: int = 100) -> Iterator[tuple[Dataset, float]]:
    """Seeded whitened, centered instances with J <= max_groups and n <= max_n.

    Groups have 1-3 columns, costs in [0.5, 5], and a mix of within-group and
    cross-group correlation so that gamma is usually well below 1.
    """
    rng = np.random.default_rng(seed)
    for i in range(count):
        j_count = int(rng.integers(1, max_groups + 1))
        sizes = rng.integers(1, 4, size=j_count).tolist()
        dim = sum(sizes)
        n = int(rng.integers(min(max_n, dim + 10), max_n + 1))
        costs = np.round(rng.uniform(0.5, 5.0, size=j_count), 3).tolist()
        within = float(rng.uniform(0.0, 0.6))
        cross = float(rng.uniform(0.0, 0.9 - within))
        d = generate_synthetic(int(rng.integers(2**31)), n, sizes, costs,
                               int(rng.integers(1, j_count + 1)), float(rng.uniform(0.0, 1.0)),
                               within, cross)
        d, _ = whiten_groups(center_responses(d))
        yield d, float(lambdas[i % len(lambdas)])
