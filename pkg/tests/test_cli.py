import json
import subprocess
import sys

import numpy as np
import pytest

from groupseq import cli
from groupseq.dataset import load_csv
from groupseq.metrics import PerformanceCurve, timeliness


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    assert cli.main(["synth", "--out", str(out), "--seed", "3"]) == 0
    return out


def run_sequence(synth_dir, out, *extra):
    args = ["sequence", "--data", str(synth_dir / "data.csv"), "--groups", str(synth_dir / "groups.json"),
            "--out", str(out), *extra]
    return cli.main(args)


def test_synth_is_deterministic_and_parses(tmp_path):
    for name in ("a", "b"):
        assert cli.main(["synth", "--out", str(tmp_path / name), "--seed", "7"]) == 0
    for f in ("data.csv", "groups.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    d = load_csv(tmp_path / "a" / "data.csv", tmp_path / "a" / "groups.json")
    assert d.n == 200 and d.n_groups == 8


def test_synth_invalid_sparsity(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": {"sparsity": 99}}))
    assert cli.main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_sequence_writes_outputs(synth_dir, tmp_path):
    out = tmp_path / "run"
    assert run_sequence(synth_dir, out) == 0
    for f in ("order.json", "curve_train.csv", "curve_test.csv", "report.json", "timing.json"):
        assert (out / f).exists()
    report = json.loads((out / "report.json").read_text())
    curve = PerformanceCurve.from_csv(out / "curve_test.csv")
    assert report["timeliness"] == timeliness(curve, report["stop_cost"], report["final_objective"])
    train = PerformanceCurve.from_csv(out / "curve_train.csv")
    assert report["train_timeliness"] == timeliness(train, report["stop_cost"], report["final_objective"])
    timing = json.loads((out / "timing.json").read_text())
    assert len(timing["step_seconds"]) == 8


def test_sequence_is_byte_deterministic(synth_dir, tmp_path):
    for name in ("a", "b"):
        assert run_sequence(synth_dir, tmp_path / name, "--method", "cs-g-fr") == 0
    for f in ("order.json", "curve_train.csv", "curve_test.csv", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


@pytest.mark.parametrize("method", cli.METHODS[:-1])
def test_every_linear_method_runs(synth_dir, tmp_path, method):
    assert run_sequence(synth_dir, tmp_path, "--method", method, "--lambda", "0.01") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["method"] == method
    assert ("lasso_path_file" in report) == (method == "sparse")
    if method == "sparse":
        path = json.loads((tmp_path / "lasso_path.json").read_text())
        assert len(path["lambdas"]) == 50


def test_glm_method(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"method": "glm-omp", "lambda": 0.01, "output_dir": str(tmp_path / "data"),
                               "synth": {"seed": 1, "n": 150, "n_classes": 3}}))
    assert cli.main(["synth", "--config", str(cfg)]) == 0
    out = tmp_path / "run"
    assert cli.main(["sequence", "--config", str(cfg), "--data", str(tmp_path / "data" / "data.csv"),
                     "--groups", str(tmp_path / "data" / "groups.json"), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["test_accuracy"]) == 8
    assert all(0 <= a <= 1 for a in report["test_accuracy"])


def test_missing_dataset_names_path(synth_dir, tmp_path, capsys):
    code = cli.main(["sequence", "--data", str(tmp_path / "nope.csv"), "--groups", str(synth_dir / "groups.json"),
                     "--out", str(tmp_path)])
    assert code == 1
    assert "nope.csv" in capsys.readouterr().err


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"lambda": -1}))
    assert cli.main(["sequence", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"alpha": 1.5}))
    assert cli.main(["sequence", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"method": "magic"}))
    assert cli.main(["sequence", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"no_such_key": 1}))
    assert cli.main(["sequence", "--config", str(bad)]) == 2
    bad.write_text("{not json")
    assert cli.main(["sequence", "--config", str(bad)]) == 2


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"method": "g-omp", "lambda": 0.5}))
    args = cli.build_parser().parse_args(["sequence", "--config", str(cfg), "--lambda", "0.25"])
    rc = cli.load_config(args)
    assert rc.method == "g-omp" and rc.lam == 0.25


def test_evaluate_reproduces_test_curve(synth_dir, tmp_path):
    from groupseq.dataset import save_csv, train_test_split
    full = load_csv(synth_dir / "data.csv", synth_dir / "groups.json")
    train, test = train_test_split(full, 0.3, 0)
    save_csv(train, tmp_path / "train.csv", tmp_path / "g.json")
    save_csv(test, tmp_path / "test.csv", tmp_path / "g.json")
    out = tmp_path / "run"
    assert cli.main(["sequence", "--data", str(tmp_path / "train.csv"), "--groups", str(tmp_path / "g.json"),
                     "--test-data", str(tmp_path / "test.csv"), "--out", str(out)]) == 0
    assert cli.main(["evaluate", "--order", str(out / "order.json"), "--data", str(tmp_path / "test.csv"),
                     "--groups", str(tmp_path / "g.json"), "--out", str(tmp_path / "ev")]) == 0
    a = PerformanceCurve.from_csv(out / "curve_test.csv")
    b = PerformanceCurve.from_csv(tmp_path / "ev" / "curve_eval.csv")
    assert np.allclose(a.values, b.values, atol=1e-10)
    ev = json.loads((tmp_path / "ev" / "report_eval.json").read_text())
    rep = json.loads((out / "report.json").read_text())
    assert ev["timeliness"] == pytest.approx(rep["timeliness"], abs=1e-10)


def test_verify_bound_default_synthetic(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": {}, "lambda": 0.1}))
    assert cli.main(["verify-bound", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "bound_report.json").read_text())
    assert rep["satisfied"] and rep["violations"] == 0


def test_verify_bound_suite_and_negative_control(tmp_path):
    assert cli.main(["verify-bound", "--n-instances", "15", "--threads", "2", "--out", str(tmp_path / "ok")]) == 0
    assert cli.main(["verify-bound", "--n-instances", "15", "--corrupt-rule", "--out", str(tmp_path / "bad")]) == 3
    rep = json.loads((tmp_path / "bad" / "bound_report.json").read_text())
    assert not rep["satisfied"]


def test_verify_bound_too_many_groups(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"synth": {"group_sizes": [1] * 25, "costs": [1.0] * 25, "sparsity": 3}}))
    assert cli.main(["verify-bound", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "TooManyGroups" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "groupseq", "synth", "--out", str(tmp_path)], capture_output=True)
    assert proc.returncode == 0 and (tmp_path / "data.csv").exists()
