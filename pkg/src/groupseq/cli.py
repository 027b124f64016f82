"""Command-line front end.

    groupseq synth         --config cfg.json --out DIR
    groupseq sequence      --config cfg.json [--method M] [--lambda L] ...
    groupseq verify-bound  [--config cfg.json] [--n-instances N]
    groupseq evaluate      --order DIR/order.json --data test.csv --groups groups.json

Exit codes: 0 success, 1 runtime error, 2 config error, 3 bound violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as ds
from .errors import ConfigError, GroupSeqError, InvalidConfig
from .glm import GlmSpec, MeanFunction, glm_predict_accuracy, sequence_omp_glm
from .grouplasso import lasso_path
from .metrics import (PerformanceCurve, alpha_stopping_cost, curve_from_models, curve_from_result, oracle_curve,
                      timeliness, train_curve, write_json)
from .sequencer import SelectionRule, SequencingResult, argmin_corrupted, argmax_lowest_index, sequence_fr, sequence_omp
from .theory import check_theorem_bound, random_instances

log = logging.getLogger("groupseq")

METHODS = ("cs-g-omp", "g-omp", "cs-g-omp-single", "cs-g-omp-nowhiten", "cs-g-fr", "g-fr", "sparse", "glm-omp")
EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_BOUND = 0, 1, 2, 3


@dataclass
class GlmSettings:
    mean_fn: str = "softmax"
    newton_tol: float = 1e-8
    newton_max_iter: int = 100


@dataclass
class RunConfig:
    data: str | None = None
    groups: str | None = None
    test_data: str | None = None
    test_fraction: float = 0.3
    method: str = "cs-g-omp"
    lam: float = 1e-3
    alpha: float = 0.97
    seed: int = 0
    output_dir: str = "out"
    whiten_ridge: float = 0.0
    center_features: bool = False
    lasso_points: int = 50
    n_instances: int = 200
    lambdas: list = field(default_factory=lambda: [0.01, 0.1, 1.0])
    threads: int = 1
    glm: GlmSettings = field(default_factory=GlmSettings)
    synth: ds.SynthConfig | None = None
    corrupt_rule: bool = False  # negative-control fixture for verify-bound

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        obj = dict(obj)
        if "lambda" in obj:
            obj["lam"] = obj.pop("lambda")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise InvalidConfig(f"unknown config keys: {unknown}")
        try:
            if "glm" in obj:
                obj["glm"] = GlmSettings(**obj["glm"])
            if obj.get("synth") is not None:
                obj["synth"] = ds.SynthConfig(**obj["synth"])
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from None
        return cls(**obj)

    def validate(self) -> "RunConfig":
        if self.method not in METHODS:
            raise InvalidConfig(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.lam >= 0:
            raise InvalidConfig("lambda must be nonnegative")
        if not 0 <= self.alpha <= 1:
            raise InvalidConfig("alpha must lie in [0, 1]")
        if self.threads < 1:
            raise InvalidConfig("threads must be at least 1")
        try:
            MeanFunction(self.glm.mean_fn)
        except ValueError:
            raise InvalidConfig(f"unknown mean function {self.glm.mean_fn!r}") from None
        return self


def load_config(args) -> RunConfig:
    obj = {}
    if getattr(args, "config", None):
        try:
            obj = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InvalidConfig(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{args.config}: invalid JSON ({exc})") from None
    cfg = RunConfig.from_dict(obj)
    overrides = {"data": "data", "groups": "groups", "test_data": "test_data", "method": "method",
                 "lam": "lam", "alpha": "alpha", "seed": "seed", "out": "output_dir", "threads": "threads",
                 "n_instances": "n_instances", "mean_fn": None}
    for arg, attr in overrides.items():
        value = getattr(args, arg, None)
        if value is None:
            continue
        if arg == "mean_fn":
            cfg.glm.mean_fn = value
        else:
            setattr(cfg, attr, value)
    if getattr(args, "corrupt_rule", False):
        cfg.corrupt_rule = True
    return cfg.validate()


# -- sequence ----------------------------------------------------------------

@dataclass
class Prepared:
    train: ds.Dataset
    test: ds.Dataset
    transform: ds.WhiteningTransform
    transform_kind: str
    response_mean: np.ndarray | None


def _load_split(cfg: RunConfig) -> tuple[ds.Dataset, ds.Dataset]:
    if not cfg.data or not cfg.groups:
        raise InvalidConfig("both 'data' and 'groups' paths are required")
    for p in (cfg.data, cfg.groups, cfg.test_data):
        if p and not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    full = ds.load_csv(cfg.data, cfg.groups)
    if cfg.test_data:
        return full, ds.load_csv(cfg.test_data, cfg.groups)
    return ds.train_test_split(full, cfg.test_fraction, cfg.seed)


def prepare(train: ds.Dataset, test: ds.Dataset, method: str, cfg: RunConfig) -> Prepared:
    center = method != "glm-omp" or cfg.glm.mean_fn == MeanFunction.IDENTITY.value
    mean = None
    if center:
        train = ds.center_responses(train)
        mean = train.response_mean
        test = ds.apply_centering(test, mean)
    if method == "cs-g-omp-nowhiten":
        train_t, wt = ds.normalize_columns(train, cfg.center_features)
        kind = "normalize"
    else:
        train_t, wt = ds.whiten_groups(train, cfg.whiten_ridge, cfg.center_features)
        kind = "whiten"
    test_t = wt.apply(test, whitened=train_t.whitened)
    return Prepared(train_t, test_t, wt, kind, mean)


def preprocess_with(d: ds.Dataset, pre: dict) -> ds.Dataset:
    if pre.get("response_mean") is not None:
        d = ds.apply_centering(d, np.asarray(pre["response_mean"], dtype=float))
    wt = ds.WhiteningTransform.from_dict(pre["transform"])
    return wt.apply(d, whitened=pre["transform_kind"] == "whiten")


def _glm_spec(cfg: RunConfig, p: int) -> GlmSpec:
    return GlmSpec(p, MeanFunction(cfg.glm.mean_fn), cfg.lam, cfg.glm.newton_tol, cfg.glm.newton_max_iter)


def run_method(method: str, d: ds.Dataset, cfg: RunConfig, chooser=argmax_lowest_index):
    """Run one sequencing method; ``sparse`` returns ``(SequencingResult, LassoPath)``."""
    if method == "cs-g-omp":
        return sequence_omp(d, cfg.lam, SelectionRule.COST_SENSITIVE_L2, chooser=chooser)
    if method == "g-omp":
        return sequence_omp(d, cfg.lam, SelectionRule.COST_INSENSITIVE_L2, chooser=chooser)
    if method == "cs-g-omp-single":
        return sequence_omp(d, cfg.lam, SelectionRule.COST_SENSITIVE_LINF, chooser=chooser)
    if method == "cs-g-omp-nowhiten":
        return sequence_omp(d, cfg.lam, SelectionRule.COST_SENSITIVE_L2, require_whitened=False,
                            chooser=chooser, method="cs-g-omp-nowhiten")
    if method == "cs-g-fr":
        return sequence_fr(d, cfg.lam, True, chooser=chooser)
    if method == "g-fr":
        return sequence_fr(d, cfg.lam, False, chooser=chooser)
    if method == "glm-omp":
        return sequence_omp_glm(d, _glm_spec(cfg, d.p), chooser=chooser)
    if method == "sparse":
        path = lasso_path(d, cfg.lasso_points, refit_lambda=cfg.lam)
        keep = path.envelope()
        first_seen: list[int] = []
        for active in path.active_groups:
            first_seen += [j for j in active if j not in first_seen]
        names = d.structure.names
        result = SequencingResult(
            method="sparse", lam=cfg.lam, order=[names[j] for j in first_seen], order_indices=first_seen,
            step_costs=d.structure.costs[first_seen], prefix_costs=path.active_costs[keep],
            prefix_objectives=path.objectives[keep], prefix_models=[path.refit_models[i] for i in keep],
        )
        return result, path
    raise InvalidConfig(f"unknown method {method!r}")


def cmd_sequence(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_raw, test_raw = _load_split(cfg)

    ref_method = "glm-omp" if cfg.method == "glm-omp" else "cs-g-omp"
    ref_prep = prepare(train_raw, test_raw, ref_method, cfg)
    reference = run_method(ref_method, ref_prep.train, cfg)
    ref_curve = train_curve(reference)
    stop_cost = alpha_stopping_cost(ref_curve, cfg.alpha)
    normalizer = ref_curve.final_value
    if stop_cost == 0.0:
        stop_cost = ref_curve.final_cost

    prep = ref_prep if cfg.method == ref_method else prepare(train_raw, test_raw, cfg.method, cfg)
    path = None
    if cfg.method == ref_method:
        result = reference
    else:
        result = run_method(cfg.method, prep.train, cfg)
        if cfg.method == "sparse":
            result, path = result

    curve_train = train_curve(result)
    curve_test = curve_from_models(result.prefix_costs, result.prefix_models, prep.test)
    curve_train.to_csv(out / "curve_train.csv")
    curve_test.to_csv(out / "curve_test.csv")

    preprocessing = {
        "response_mean": None if prep.response_mean is None else prep.response_mean.tolist(),
        "transform_kind": prep.transform_kind,
        "transform": prep.transform.to_dict(),
    }
    order = result.to_dict()
    order.update({"preprocessing": preprocessing,
                  "reference": {"method": ref_method, "alpha": cfg.alpha, "stop_cost": stop_cost,
                                "normalizer": normalizer}})
    write_json(order, out / "order.json")

    report = {
        "method": cfg.method,
        "alpha": cfg.alpha,
        "lambda": cfg.lam,
        "stop_cost": stop_cost,
        "final_objective": normalizer,
        "timeliness": timeliness(curve_test, stop_cost, normalizer),
        "train_timeliness": timeliness(curve_train, stop_cost, normalizer),
        "oracle_timeliness": timeliness(oracle_curve(curve_test), stop_cost, normalizer),
        "n_train": prep.train.n,
        "n_test": prep.test.n,
        "order": result.order,
        "timing_file": "timing.json",
    }
    if cfg.method == "glm-omp" and cfg.glm.mean_fn == MeanFunction.SOFTMAX.value:
        report["test_accuracy"] = [glm_predict_accuracy(m, prep.test) for m in result.prefix_models]
    if path is not None:
        write_json(path.to_dict(), out / "lasso_path.json")
        report["lasso_path_file"] = "lasso_path.json"
    write_json(report, out / "report.json")
    times = list(result.step_times)
    write_json({"method": cfg.method, "step_seconds": times,
                "cumulative_seconds": np.cumsum(times).tolist() if times else []}, out / "timing.json")
    log.info("%s: order %s, timeliness %.4f", cfg.method, result.order, report["timeliness"])
    return EXIT_OK


# -- evaluate ----------------------------------------------------------------

def cmd_evaluate(args) -> int:
    order_path = Path(args.order)
    if not order_path.exists():
        raise FileNotFoundError(f"no such file: {order_path}")
    obj = json.loads(order_path.read_text(encoding="utf-8"))
    result = SequencingResult.from_dict(obj)
    for p in (args.data, args.groups):
        if not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
    d = preprocess_with(ds.load_csv(args.data, args.groups), obj["preprocessing"])
    curve = curve_from_models(result.prefix_costs, result.prefix_models, d)
    out = Path(args.out or order_path.parent)
    out.mkdir(parents=True, exist_ok=True)
    curve.to_csv(out / "curve_eval.csv")
    ref = obj["reference"]
    report = {
        "method": obj["method"],
        "alpha": ref["alpha"],
        "stop_cost": ref["stop_cost"],
        "final_objective": ref["normalizer"],
        "timeliness": timeliness(curve, ref["stop_cost"], ref["normalizer"]),
    }
    write_json(report, out / "report_eval.json")
    return EXIT_OK


# -- verify-bound ------------------------------------------------------------

def _instance_summary(i, d, lam, rep) -> dict:
    return {"instance": i, "n": d.n, "groups": d.n_groups, "lambda": lam, "gamma": rep.gamma,
            "order": rep.order, "violations": rep.violations, "lemma_violations": rep.lemma_violations,
            "min_slack": rep.min_slack}


def cmd_verify_bound(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    chooser = argmin_corrupted if cfg.corrupt_rule else argmax_lowest_index

    if cfg.data or cfg.synth is not None:
        d = ds.load_csv(cfg.data, cfg.groups) if cfg.data else cfg.synth.generate()
        d, _ = ds.whiten_groups(ds.center_responses(d), cfg.whiten_ridge)
        rep = check_theorem_bound(d, cfg.lam, chooser=chooser)
        body = rep.to_dict()
        ok = rep.satisfied and rep.lemma_satisfied
    else:
        instances = list(random_instances(cfg.seed, cfg.n_instances, tuple(cfg.lambdas)))
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            reports = list(pool.map(lambda item: check_theorem_bound(item[0], item[1], chooser=chooser), instances))
        summaries = [_instance_summary(i, d, lam, rep) for i, ((d, lam), rep) in enumerate(zip(instances, reports))]
        ok = all(s["violations"] == 0 and s["lemma_violations"] == 0 for s in summaries)
        body = {"seed": cfg.seed, "instances": summaries,
                "violations": sum(s["violations"] for s in summaries),
                "lemma_violations": sum(s["lemma_violations"] for s in summaries),
                "satisfied": ok}
    write_json(body, out / "bound_report.json")
    if not ok:
        print("bound violated; see bound_report.json", file=sys.stderr)
        return EXIT_BOUND
    return EXIT_OK


# -- synth -------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    synth = cfg.synth or ds.SynthConfig(seed=cfg.seed)
    d = synth.generate()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds.save_csv(d, out / "data.csv", out / "groups.json")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupseq", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)

    p = sub.add_parser("synth", help="write a synthetic dataset and group spec")
    common(p)

    p = sub.add_parser("sequence", help="sequence feature groups and report anytime metrics")
    common(p)
    p.add_argument("--data")
    p.add_argument("--groups")
    p.add_argument("--test-data", dest="test_data")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--mean-fn", dest="mean_fn", choices=[m.value for m in MeanFunction])

    p = sub.add_parser("verify-bound", help="check the approximation guarantee by enumeration")
    common(p)
    p.add_argument("--data")
    p.add_argument("--groups")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--n-instances", dest="n_instances", type=int)
    p.add_argument("--corrupt-rule", dest="corrupt_rule", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("evaluate", help="evaluate a saved order.json on another dataset")
    p.add_argument("--order", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--groups", required=True)
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "evaluate":
            return cmd_evaluate(args)
        cfg = load_config(args)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "sequence":
            return cmd_sequence(cfg)
        return cmd_verify_bound(cfg)
    except ConfigError as exc:
        print(f"config error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GroupSeqError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
