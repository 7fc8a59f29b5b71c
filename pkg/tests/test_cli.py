import json

import numpy as np
import pytest

from dpcd import LossKind, Problem, Regularizer, load_csv, reference_solve
from dpcd.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def data_csv(tmp_path, capsys):
    path = tmp_path / "data.csv"
    code, out, _ = _run(capsys, "generate", "--n", "60", "--p", "5",
                        "--k-active", "2", "--seed", "3", "--weight-scale", "2.0",
                        "--out", str(path))
    assert code == 0
    return path


class TestGenerate:
    def test_writes_loadable_csv(self, data_csv):
        ds = load_csv(data_csv, "y")
        assert (ds.n, ds.p) == (60, 5)

    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        _run(capsys, "generate", "--n", "20", "--p", "3", "--k-active", "1",
             "--seed", "9", "--out", str(a))
        _run(capsys, "generate", "--n", "20", "--p", "3", "--k-active", "1",
             "--seed", "9", "--out", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_weights_out(self, tmp_path, capsys):
        path = tmp_path / "d.csv"
        wpath = tmp_path / "w.json"
        code, _, _ = _run(capsys, "generate", "--n", "10", "--p", "4",
                          "--k-active", "2", "--out", str(path),
                          "--weights-out", str(wpath))
        assert code == 0
        weights = json.loads(wpath.read_text())["true_weights"]
        assert len(weights) == 4


class TestSolveReference:
    def test_matches_library(self, data_csv, tmp_path, capsys):
        out = tmp_path / "ref.json"
        code, _, _ = _run(capsys, "solve-reference", "--data", str(data_csv),
                          "--label-column", "y", "--loss", "squared",
                          "--regularizer", "l1", "--reg-strength", "0.1",
                          "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        ds = load_csv(data_csv, "y")
        pb = Problem(ds, LossKind.SQUARED, Regularizer.l1(), 0.1)
        ref = reference_solve(pb)
        assert payload["objective"] == pytest.approx(ref.objective, rel=1e-12)
        assert payload["converged"]

    def test_stdout_when_no_out(self, data_csv, capsys):
        code, out, _ = _run(capsys, "solve-reference", "--data", str(data_csv),
                            "--label-column", "y")
        assert code == 0
        assert "objective" in json.loads(out)


class TestEstimateSmoothness:
    def test_positive_estimates_at_huge_epsilon(self, data_csv, tmp_path, capsys):
        out = tmp_path / "sm.json"
        code, _, _ = _run(capsys, "estimate-smoothness", "--data", str(data_csv),
                          "--label-column", "y", "--loss", "squared",
                          "--epsilon", "1e9", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload["private_smoothness"]) == 5
        assert all(v > 0 for v in payload["private_smoothness"])


def _spec_file(tmp_path):
    spec = {
        "dataset": {"kind": "sparse_lasso", "n": 80, "p": 8, "k_active": 2,
                    "label_noise_std": 0.5, "seed": 4, "weight_scale": 3.0},
        "loss": "squared", "regularizer": "l1", "reg_strength": 0.05,
        "preprocessing": "raw", "epsilon": 3.0, "delta": 1e-4,
        "algorithms": ["dp_cd"],
        "grid": {"cd_step_scales": [0.5, 1.0], "sgd_step_scales": [0.1],
                 "clip_scales": [100.0], "passes": [2]},
        "tuning_runs": 2, "eval_runs": 2, "base_seed": 21}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return path


class TestTuneAndRun:
    def test_tune_emits_best_config(self, tmp_path, capsys):
        out = tmp_path / "tuned.json"
        code, _, _ = _run(capsys, "tune", "--spec", str(_spec_file(tmp_path)),
                          "--algorithm", "dp_cd", "--out", str(out))
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["best"]["step_scale"] in (0.5, 1.0)
        assert payload["per_pass"][0]["passes"] == 2

    def test_run_writes_artifacts(self, tmp_path, capsys):
        outdir = tmp_path / "results"
        code, out, _ = _run(capsys, "run", "--spec", str(_spec_file(tmp_path)),
                            "--out", str(outdir))
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert "dp_cd" in report["algorithms"]
        assert (outdir / "curves.csv").exists()
        assert (outdir / "audit.json").exists()
        assert (outdir / "timings.json").exists()

    def test_flag_overrides(self, tmp_path, capsys):
        outdir = tmp_path / "results2"
        code, _, _ = _run(capsys, "run", "--spec", str(_spec_file(tmp_path)),
                          "--epsilon", "5.0", "--seed", "99", "--passes", "2",
                          "--out", str(outdir))
        assert code == 0
        report = json.loads((outdir / "report.json").read_text())
        assert report["spec"]["epsilon"] == 5.0
        assert report["spec"]["base_seed"] == 99

    def test_rerun_reproduces_bytes(self, tmp_path, capsys):
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        spec = _spec_file(tmp_path)
        assert _run(capsys, "run", "--spec", str(spec), "--out", str(d1))[0] == 0
        assert _run(capsys, "run", "--spec", str(spec), "--out", str(d2))[0] == 0
        assert (d1 / "report.json").read_bytes() == (d2 / "report.json").read_bytes()
        assert (d1 / "curves.csv").read_bytes() == (d2 / "curves.csv").read_bytes()
        assert (d1 / "audit.json").read_bytes() == (d2 / "audit.json").read_bytes()


class TestErrors:
    def test_missing_file_gives_json_error(self, capsys):
        code, _, err = _run(capsys, "solve-reference", "--data", "/nope.csv",
                            "--label-column", "y")
        assert code == 1
        payload = json.loads(err)
        assert payload["error"] == "FileNotFoundError"

    def test_bad_spec_gives_json_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\"dataset\": {\"kind\": \"nope\"}}")
        code, _, err = _run(capsys, "run", "--spec", str(bad),
                            "--out", str(tmp_path / "o"))
        assert code == 1
        assert "error" in json.loads(err)
