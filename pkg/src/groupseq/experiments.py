"""Desk-scale experiments: method ordering by timeliness and OMP-vs-FR runtime shape."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cli import RunConfig, prepare, run_method
from .dataset import center_responses, generate_synthetic, train_test_split, whiten_groups
from .metrics import alpha_stopping_cost, curve_from_models, timeliness, train_curve
from .sequencer import sequence_fr, sequence_omp


@dataclass
class OrderingConfig:
    n: int = 1000
    n_groups: int = 12
    sparsity: int = 5
    noise_sd: float = 1.0
    correlation: float = 0.3
    # FR and OMP coincide on orthogonal groups; they only separate when groups correlate
    cross_correlation: float = 0.6
    lam: float = 0.01
    alpha: float = 0.97
    test_fraction: float = 0.3
    methods: tuple = ("cs-g-fr", "cs-g-omp", "g-omp")


def ordering_instance(seed: int, cfg: OrderingConfig) -> dict[str, float]:
    """Test-set alpha-timeliness of each method on one planted instance.

    Group sizes are 1-4 and costs log-uniform over two decades, so cost
    awareness matters.  The stopping cost and normalizer come from the
    CS-G-OMP training curve.
    """
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 5, size=cfg.n_groups).tolist()
    costs = np.round(10 ** rng.uniform(-1, 1, size=cfg.n_groups), 4).tolist()
    d = generate_synthetic(int(rng.integers(2**31)), cfg.n, sizes, costs, cfg.sparsity, cfg.noise_sd,
                           cfg.correlation, cfg.cross_correlation)
    train, test = train_test_split(d, cfg.test_fraction, seed)
    run = RunConfig(lam=cfg.lam, alpha=cfg.alpha)
    prep = prepare(train, test, "cs-g-omp", run)
    results = {m: run_method(m, prep.train, run) for m in cfg.methods}
    ref = train_curve(results.get("cs-g-omp") or run_method("cs-g-omp", prep.train, run))
    stop = alpha_stopping_cost(ref, cfg.alpha)
    norm = ref.final_value
    return {m: timeliness(curve_from_models(r.prefix_costs, r.prefix_models, prep.test), stop, norm)
            for m, r in results.items()}


def ordering_comparison(seeds, cfg: OrderingConfig | None = None) -> dict[str, np.ndarray]:
    cfg = cfg or OrderingConfig()
    rows = [ordering_instance(s, cfg) for s in seeds]
    return {m: np.array([r[m] for r in rows]) for m in cfg.methods}


@dataclass
class RuntimeConfig:
    n: int = 300
    group_counts: list = field(default_factory=lambda: [10, 20, 40])
    group_size: int = 2
    lam: float = 0.01
    repeats: int = 3
    seed: int = 0


def runtime_shape(cfg: RuntimeConfig | None = None) -> dict[int, dict[str, float]]:
    """Best-of-``repeats`` wall-clock seconds for full OMP and FR runs per group count."""
    cfg = cfg or RuntimeConfig()
    out = {}
    for j in cfg.group_counts:
        d = generate_synthetic(cfg.seed + j, cfg.n, [cfg.group_size] * j, list(np.linspace(0.5, 3.0, j)),
                               max(1, j // 4), 0.5, 0.3)
        d, _ = whiten_groups(center_responses(d))
        times = {}
        for name, fn in (("omp", lambda: sequence_omp(d, cfg.lam)), ("fr", lambda: sequence_fr(d, cfg.lam))):
            best = np.inf
            for _ in range(cfg.repeats):
                t0 = time.perf_counter()
                fn()
                best = min(best, time.perf_counter() - t0)
            times[name] = best
        times["ratio"] = times["fr"] / times["omp"]
        out[j] = times
    return out
