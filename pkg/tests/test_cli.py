import csv
import json
import os

import numpy as np
import pytest

from vcgp.cli import main


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


class TestCli:
    def test_selftest_passes(self, capsys):
        assert main(["selftest", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") >= 4
        assert "FAIL" not in out

    def test_gen_data_synth(self, tmp_path):
        cfg = write_config(tmp_path, "gen.json", {"type": "synth-gp", "N": 12, "Q": 2, "D": 1})
        assert main(["gen-data", "--config", cfg, "--seed", "3", "--out", str(tmp_path)]) == 0
        with open(tmp_path / "dataset.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["x0", "x1", "y0"]
        assert len(rows) == 13

    def test_gen_data_mackey_glass(self, tmp_path):
        cfg = write_config(
            tmp_path, "gen.json", {"type": "mackey-glass", "mackey_glass": {"length": 30}}
        )
        assert main(["gen-data", "--config", cfg, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "dataset.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["y0"] and len(rows) == 31

    def test_gen_data_unknown_type(self, tmp_path):
        cfg = write_config(tmp_path, "gen.json", {"type": "bogus"})
        assert main(["gen-data", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_fit_predict_roundtrip(self, tmp_path):
        gen = write_config(tmp_path, "gen.json", {"type": "synth-gp", "N": 15, "Q": 2, "D": 1})
        main(["gen-data", "--config", gen, "--out", str(tmp_path)])
        fit_cfg = write_config(
            tmp_path,
            "fit.json",
            {
                "dataset": str(tmp_path / "dataset.csv"),
                "fit": {"max_iterations": 20, "num_inducing": 6},
            },
        )
        assert main(["fit", "--config", fit_cfg, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "model.json").exists()

        pred_cfg = write_config(
            tmp_path,
            "pred.json",
            {"model": str(tmp_path / "model.json"), "inputs": str(tmp_path / "dataset.csv")},
        )
        assert main(["predict", "--config", pred_cfg, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "predictions.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["mean0", "variance0"]
        assert len(rows) == 16
        variances = np.array([float(r[1]) for r in rows[1:]])
        assert np.all(variances > 0)

    def test_forecast_command(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "fc.json",
            {
                "seeds": [0],
                "dataset": {"tau": 3, "train_points": 20, "horizon": 8, "washout": 40},
                "fit": {"max_iterations": 15, "num_inducing": 8, "hyper_warmup_iterations": 3},
            },
        )
        assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "report.csv").exists()
        assert (tmp_path / "forecast_trace_seed0.csv").exists()

    def test_semi_described_command(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "sd.json",
            {
                "seeds": [0],
                "fractions": [0.5],
                "dataset": {"n_observed": 8, "n_partial": 4, "n_test": 8, "q": 2, "d": 1},
                "fit": {"max_iterations": 15, "num_inducing": 6, "hyper_warmup_iterations": 3},
            },
        )
        assert main(["semi-described", "--config", cfg, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "report.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert any(r["method"] == "sd-gp" for r in rows)

    def test_baselines_command(self, tmp_path):
        gen = write_config(tmp_path, "gen.json", {"type": "synth-gp", "N": 20, "Q": 3, "D": 1})
        main(["gen-data", "--config", gen, "--out", str(tmp_path)])
        cfg = write_config(tmp_path, "b.json", {"dataset": str(tmp_path / "dataset.csv")})
        assert main(["baselines", "--config", cfg, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "baselines.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["method"] for r in rows} == {"mean", "mlr", "nn"}

    def test_report_command(self, tmp_path):
        cfg = write_config(
            tmp_path,
            "sd.json",
            {
                "seeds": [0],
                "fractions": [0.5],
                "dataset": {"n_observed": 8, "n_partial": 4, "n_test": 8, "q": 2, "d": 1},
                "fit": {"max_iterations": 10, "num_inducing": 6, "hyper_warmup_iterations": 3},
            },
        )
        main(["semi-described", "--config", cfg, "--out", str(tmp_path)])
        rep = write_config(tmp_path, "r.json", {"report": str(tmp_path / "report.csv")})
        assert main(["report", "--config", rep, "--out", str(tmp_path)]) == 0
        with open(tmp_path / "aggregates.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) >= 1
        # aggregates must equal recomputation from the per-trial rows
        with open(tmp_path / "report.csv") as fh:
            raw = [r for r in csv.DictReader(fh) if r["method"] == "sd-gp"]
        agg = [r for r in rows if r["method"] == "sd-gp"][0]
        assert float(agg["mean_mse"]) == pytest.approx(
            np.mean([float(r["mse"]) for r in raw]), rel=1e-12
        )
