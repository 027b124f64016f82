"""Datasets with costed feature groups: loading, centering, whitening and
seeded synthetic generation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from . import linalg
from .errors import InvalidConfig, NotPositiveDefinite, ParseError, RankDeficientGroup, SpecError


@dataclass(frozen=True)
class Group:
    name: str
    columns: tuple[int, ...]
    cost: float


@dataclass(frozen=True)
class GroupStructure:
    """Ordered partition of the feature columns into named, costed groups."""

    groups: tuple[Group, ...]

    def __post_init__(self):
        names = [g.name for g in self.groups]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SpecError(f"duplicate group names: {dup}")
        for g in self.groups:
            if not g.cost > 0:
                raise SpecError(f"group {g.name!r} has nonpositive cost {g.cost}")
            if len(g.columns) == 0:
                raise SpecError(f"group {g.name!r} has no columns")

    @classmethod
    def from_lists(cls, columns: Sequence[Sequence[int]], costs: Sequence[float], names=None):
        names = names or [f"g{j}" for j in range(len(columns))]
        if not (len(names) == len(columns) == len(costs)):
            raise SpecError("names, columns and costs must have equal length")
        return cls(tuple(Group(str(n), tuple(int(c) for c in cols), float(cost))
                         for n, cols, cost in zip(names, columns, costs)))

    @classmethod
    def contiguous(cls, sizes: Sequence[int], costs: Sequence[float], names=None):
        bounds = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        cols = [range(bounds[j], bounds[j + 1]) for j in range(len(sizes))]
        return cls.from_lists(cols, costs, names)

    def __len__(self):
        return len(self.groups)

    @property
    def names(self) -> list[str]:
        return [g.name for g in self.groups]

    @property
    def costs(self) -> np.ndarray:
        return np.array([g.cost for g in self.groups])

    @property
    def dim(self) -> int:
        return sum(len(g.columns) for g in self.groups)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def columns(self, j: int) -> np.ndarray:
        return np.asarray(self.groups[j].columns, dtype=int)

    def columns_of(self, indices: Sequence[int]) -> np.ndarray:
        if len(indices) == 0:
            return np.zeros(0, dtype=int)
        return np.concatenate([self.columns(j) for j in indices])

    def validate(self, dim: int, column_names: Sequence[str] | None = None) -> None:
        """Raise SpecError unless the groups partition ``range(dim)``."""
        owner: dict[int, str] = {}
        for g in self.groups:
            for c in g.columns:
                if not 0 <= c < dim:
                    raise SpecError(f"group {g.name!r} references column {c} outside 0..{dim - 1}")
                if c in owner:
                    label = column_names[c] if column_names else c
                    raise SpecError(f"column {c} ({label}) assigned to both {owner[c]!r} and {g.name!r}")
                owner[c] = g.name
        missing = [c for c in range(dim) if c not in owner]
        if missing:
            c = missing[0]
            label = f" ({column_names[c]})" if column_names else ""
            raise SpecError(f"column {c}{label} is not assigned to any group")


@dataclass(frozen=True)
class Dataset:
    """Feature matrix ``x`` (n x D), responses ``y`` (n x P) and group structure.

    ``response_mean`` is ``None`` until :func:`center_responses` has run.
    """

    x: np.ndarray
    y: np.ndarray
    structure: GroupStructure
    whitened: bool = False
    response_mean: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    response_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValueError(f"incompatible shapes x{x.shape}, y{y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        self.structure.validate(x.shape[1], self.feature_names or None)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"f{i}" for i in range(x.shape[1])))
        if not self.response_names:
            names = ("y",) if y.shape[1] == 1 else tuple(f"y{p}" for p in range(y.shape[1]))
            object.__setattr__(self, "response_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def p(self) -> int:
        return self.y.shape[1]

    @property
    def n_groups(self) -> int:
        return len(self.structure)

    def group_x(self, j: int) -> np.ndarray:
        return self.x[:, self.structure.columns(j)]

    def take(self, rows) -> "Dataset":
        return replace(self, x=self.x[rows], y=self.y[rows])


@dataclass(frozen=True)
class WhiteningTransform:
    """Per-group linear maps ``T_g``; whitened features are ``(x_g - mean_g) @ T_g``."""

    transforms: tuple[np.ndarray, ...]
    feature_mean: np.ndarray | None = None

    def apply(self, d: Dataset, whitened: bool = True) -> Dataset:
        x = d.x if self.feature_mean is None else d.x - self.feature_mean
        out = np.empty_like(x)
        for j, t in enumerate(self.transforms):
            cols = d.structure.columns(j)
            out[:, cols] = x[:, cols] @ t
        return replace(d, x=out, whitened=whitened)

    def to_dict(self) -> dict:
        return {
            "transforms": [t.tolist() for t in self.transforms],
            "feature_mean": None if self.feature_mean is None else self.feature_mean.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "WhiteningTransform":
        mean = obj.get("feature_mean")
        return cls(tuple(np.atleast_2d(np.asarray(t, dtype=float)) for t in obj["transforms"]),
                   None if mean is None else np.asarray(mean, dtype=float))


def center_responses(d: Dataset) -> Dataset:
    mean = d.y.mean(axis=0)
    prior = d.response_mean if d.response_mean is not None else np.zeros(d.p)
    return replace(d, y=d.y - mean, response_mean=prior + mean)


def apply_centering(d: Dataset, mean: np.ndarray) -> Dataset:
    """Shift responses by a mean estimated elsewhere (e.g. on the training split)."""
    mean = np.asarray(mean, dtype=float)
    return replace(d, y=d.y - mean, response_mean=mean)


def whiten_groups(d: Dataset, ridge: float = 0.0, center_features: bool = False,
                  pivot_tol: float = linalg.PIVOT_TOL) -> tuple[Dataset, WhiteningTransform]:
    """Make every group's sample Gram matrix ``(1/n) X_g^T X_g`` the identity.

    ``T_g = L^{-T}`` where ``L L^T = (1/n) X_g^T X_g + ridge * I``.  With
    ``ridge > 0`` the result is only approximately white.
    """
    if d.whitened:
        raise ValueError("dataset is already whitened")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    mean = d.x.mean(axis=0) if center_features else None
    x = d.x if mean is None else d.x - mean
    transforms = []
    for j, g in enumerate(d.structure.groups):
        xg = x[:, d.structure.columns(j)]
        gram = xg.T @ xg / d.n + ridge * np.eye(xg.shape[1])
        try:
            f = linalg.spd_factorize(gram, pivot_tol=pivot_tol)
        except NotPositiveDefinite:
            raise RankDeficientGroup(g.name) from None
        t = scipy.linalg.solve_triangular(f.factor, np.eye(xg.shape[1]), lower=True).T
        transforms.append(t)
    wt = WhiteningTransform(tuple(transforms), mean)
    return wt.apply(d), wt


def normalize_columns(d: Dataset, center_features: bool = False) -> tuple[Dataset, WhiteningTransform]:
    """Per-column scaling to unit ``(1/n) x^T x``; groups are left correlated."""
    mean = d.x.mean(axis=0) if center_features else None
    x = d.x if mean is None else d.x - mean
    scale = np.sqrt(np.mean(x * x, axis=0))
    scale[scale == 0] = 1.0
    transforms = tuple(np.diag(1.0 / scale[d.structure.columns(j)]) for j in range(d.n_groups))
    wt = WhiteningTransform(transforms, mean)
    return wt.apply(d, whitened=False), wt


def is_centered(d: Dataset, tol: float = 1e-8) -> bool:
    scale = max(1.0, float(np.max(np.abs(d.y)))) if d.y.size else 1.0
    return bool(np.all(np.abs(d.y.sum(axis=0)) <= tol * d.n * scale))


def group_gram_deviation(d: Dataset) -> float:
    """max over groups of ``||(1/n) X_g^T X_g - I||_max``."""
    worst = 0.0
    for j in range(d.n_groups):
        xg = d.group_x(j)
        worst = max(worst, float(np.max(np.abs(xg.T @ xg / d.n - np.eye(xg.shape[1])))))
    return worst


# -- files -------------------------------------------------------------------

def _parse_float(text: str, row: int, col: int, path) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{path}: malformed number {text!r} at row {row}, column {col}", row, col) from None
    if not np.isfinite(value):
        raise ParseError(f"{path}: non-finite value {text!r} at row {row}, column {col}", row, col)
    return value


def load_group_spec(path) -> dict:
    try:
        spec = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(spec, dict) or not isinstance(spec.get("groups"), list):
        raise SpecError(f"{path}: expected an object with a 'groups' list")
    return spec


def load_csv(path, group_spec) -> Dataset:
    """Read a headed CSV and a JSON group spec into an uncentered, unwhitened Dataset.

    The spec names columns by header; ``response_columns`` defaults to the
    last CSV column when absent.
    """
    path = Path(path)
    spec = group_spec if isinstance(group_spec, dict) else load_group_spec(group_spec)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", 0, None) from None
        rows = []
        for r, record in enumerate(reader, start=1):
            if not record:
                continue
            if len(record) != len(header):
                raise ParseError(f"{path}: row {r} has {len(record)} fields, header has {len(header)}", r, None)
            rows.append([_parse_float(v, r, c, path) for c, v in enumerate(record)])
    if len(set(header)) != len(header):
        raise ParseError(f"{path}: duplicate header names", 0, None)
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    response_names = spec.get("response_columns", header[-1:])
    for name in response_names:
        if name not in header:
            raise SpecError(f"response column {name!r} not found in {path}")
    feature_names = [h for h in header if h not in response_names]
    feature_pos = {name: i for i, name in enumerate(feature_names)}

    groups = []
    seen: dict[str, str] = {}
    for entry in spec["groups"]:
        name = str(entry.get("name"))
        cost = entry.get("cost")
        if not isinstance(cost, (int, float)) or not cost > 0:
            raise SpecError(f"group {name!r}: nonpositive cost {cost!r}")
        cols = []
        for col in entry.get("columns", []):
            if col not in feature_pos:
                raise SpecError(f"group {name!r}: unknown feature column {col!r}")
            if col in seen:
                raise SpecError(f"column {feature_pos[col]} ({col}) assigned to both {seen[col]!r} and {name!r}")
            seen[col] = name
            cols.append(feature_pos[col])
        groups.append(Group(name, tuple(cols), float(cost)))
    structure = GroupStructure(tuple(groups))
    structure.validate(len(feature_names), feature_names)

    x = data[:, [header.index(h) for h in feature_names]]
    y = data[:, [header.index(h) for h in response_names]]
    return Dataset(x, y, structure, feature_names=tuple(feature_names), response_names=tuple(response_names))


def _fmt(v: float) -> str:
    return "%.17g" % v


def save_csv(d: Dataset, path, spec_path) -> None:
    """Write ``d`` as a CSV plus JSON group spec readable by :func:`load_csv`."""
    header = list(d.feature_names) + list(d.response_names)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for xi, yi in zip(d.x, d.y):
            w.writerow([_fmt(v) for v in xi] + [_fmt(v) for v in yi])
    spec = {
        "response_columns": list(d.response_names),
        "groups": [
            {"name": g.name, "columns": [d.feature_names[c] for c in g.columns], "cost": g.cost}
            for g in d.structure.groups
        ],
    }
    Path(spec_path).write_text(json.dumps(spec, indent=2) + "\n", encoding="utf-8")


# -- synthetic data ----------------------------------------------------------

@dataclass
class SynthConfig:
    """Settings for :func:`generate_synthetic`."""

    seed: int = 0
    n: int = 200
    group_sizes: list = field(default_factory=lambda: [2, 3, 1, 4, 2, 3, 2, 1])
    costs: list = field(default_factory=lambda: [1.0, 4.0, 0.5, 8.0, 2.0, 3.0, 6.0, 1.5])
    sparsity: int = 4
    noise_sd: float = 0.5
    correlation: float = 0.5
    cross_correlation: float = 0.0
    n_classes: int = 0  # 0: regression, >= 2: one-hot softmax classification

    def generate(self) -> Dataset:
        if self.n_classes:
            return generate_synthetic_classes(self.seed, self.n, self.group_sizes, self.costs,
                                              self.n_classes, self.sparsity, self.correlation,
                                              self.cross_correlation)
        return generate_synthetic(self.seed, self.n, self.group_sizes, self.costs, self.sparsity,
                                  self.noise_sd, self.correlation, self.cross_correlation)


def _check_synth(n, group_sizes, costs, sparsity, correlation, cross_correlation):
    if len(group_sizes) != len(costs) or len(group_sizes) == 0:
        raise InvalidConfig("group_sizes and costs must be nonempty and of equal length")
    if any(int(s) < 1 for s in group_sizes):
        raise InvalidConfig("group sizes must be positive")
    if any(not c > 0 for c in costs):
        raise InvalidConfig("costs must be positive")
    if not 0 <= sparsity <= len(group_sizes):
        raise InvalidConfig(f"sparsity {sparsity} must lie in 0..{len(group_sizes)}")
    if n < 1:
        raise InvalidConfig("n must be positive")
    if not (0 <= correlation < 1 and 0 <= cross_correlation < 1 and correlation + cross_correlation < 1):
        raise InvalidConfig("correlations must be in [0, 1) with sum below 1")


def _synth_features(rng, n, group_sizes, correlation, cross_correlation):
    shared = rng.standard_normal(n)
    blocks = []
    for size in group_sizes:
        own_group = rng.standard_normal(n)
        own = rng.standard_normal((n, int(size)))
        blocks.append(np.sqrt(correlation) * own_group[:, None]
                      + np.sqrt(cross_correlation) * shared[:, None]
                      + np.sqrt(1 - correlation - cross_correlation) * own)
    return np.hstack(blocks)


def generate_synthetic(seed: int, n: int, group_sizes: Sequence[int], costs: Sequence[float],
                       sparsity: int, noise_sd: float, correlation: float,
                       cross_correlation: float = 0.0) -> Dataset:
    """Gaussian features with within-group correlation and a group-sparse linear response."""
    _check_synth(n, group_sizes, costs, sparsity, correlation, cross_correlation)
    if noise_sd < 0:
        raise InvalidConfig("noise_sd must be nonnegative")
    rng = np.random.default_rng(seed)
    x = _synth_features(rng, n, group_sizes, correlation, cross_correlation)
    structure = GroupStructure.contiguous(group_sizes, costs)
    support = rng.choice(len(group_sizes), size=sparsity, replace=False)
    w = np.zeros(x.shape[1])
    for j in support:
        cols = structure.columns(j)
        w[cols] = rng.standard_normal(len(cols))
    y = x @ w + noise_sd * rng.standard_normal(n)
    return Dataset(x, y[:, None], structure)


def generate_synthetic_classes(seed: int, n: int, group_sizes: Sequence[int], costs: Sequence[float],
                               n_classes: int, sparsity: int, correlation: float,
                               cross_correlation: float = 0.0, signal: float = 3.0) -> Dataset:
    """One-hot class labels drawn from a softmax of a group-sparse linear score."""
    _check_synth(n, group_sizes, costs, sparsity, correlation, cross_correlation)
    if n_classes < 2:
        raise InvalidConfig("n_classes must be at least 2")
    rng = np.random.default_rng(seed)
    x = _synth_features(rng, n, group_sizes, correlation, cross_correlation)
    structure = GroupStructure.contiguous(group_sizes, costs)
    support = rng.choice(len(group_sizes), size=sparsity, replace=False)
    w = np.zeros((n_classes, x.shape[1]))
    for j in support:
        cols = structure.columns(j)
        w[:, cols] = signal * rng.standard_normal((n_classes, len(cols))) / np.sqrt(len(cols))
    logits = x @ w.T
    labels = np.argmax(logits + rng.gumbel(size=logits.shape), axis=1)
    y = np.eye(n_classes)[labels]
    return Dataset(x, y, structure, response_names=tuple(f"class{k}" for k in range(n_classes)))


def train_test_split(d: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0 < test_fraction < 1:
        raise InvalidConfig("test_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(d.n)
    n_test = max(1, int(round(test_fraction * d.n)))
    return d.take(np.sort(perm[n_test:])), d.take(np.sort(perm[:n_test]))
