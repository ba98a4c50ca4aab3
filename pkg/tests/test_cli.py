import csv
import json
import os

import pytest

from eqex import cli
from eqex.config import (ConfigError, ExperimentConfig, config_from_dict,
                         load_config)


SMALL = {
    "T": 20,
    "fundamental_investors": {"count": 2},
    "momentum_investors": {"count": 1},
    "consumer_investors": {"count": 2},
    "calibration_episodes": 2,
    "schedule": {"explore_episodes": 2, "exploit_episodes": 1,
                 "converge_episodes": 1},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(SMALL))
    return str(path)


class TestConfig:
    def test_defaults_round_trip(self):
        cfg = ExperimentConfig()
        assert config_from_dict(cfg.to_dict()) == cfg

    def test_partial_dict_gets_defaults(self):
        cfg = config_from_dict({"T": 50})
        assert cfg.T == 50
        assert cfg.gamma == 0.9999
        assert cfg.consumer_investors.count == 30

    def test_unknown_field_path_in_error(self):
        with pytest.raises(ConfigError, match="momentum_investors"):
            config_from_dict({"momentum_investors": {"windows": 3}})

    def test_invalid_json_reported(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))


class TestCalibrateCmd:
    def test_smoke_and_determinism(self, config_path, tmp_path, capsys):
        out1 = tmp_path / "cal1.json"
        out2 = tmp_path / "cal2.json"
        assert cli.main(["calibrate", "--config", config_path,
                         "--seed", "3", "--out", str(out1)]) == 0
        assert cli.main(["calibrate", "--config", config_path,
                         "--seed", "3", "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()
        assert "observed range" in capsys.readouterr().out

    def test_default_config_applies(self, tmp_path):
        # omitted agent counts fall back to documented defaults
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"T": 10, "calibration_episodes": 1}))
        cfg = load_config(str(path))
        assert cfg.fundamental_investors.count == 20


class TestTrainCmd:
    def test_requires_calibration(self, config_path, tmp_path, capsys):
        rc = cli.main(["train", "--config", config_path,
                       "--out-dir", str(tmp_path / "runs")])
        assert rc == 2
        assert "calibrat" in capsys.readouterr().err

    def test_train_outputs(self, config_path, tmp_path):
        cal = tmp_path / "cal.json"
        cli.main(["calibrate", "--config", config_path, "--out", str(cal)])
        out_dir = tmp_path / "runs"
        rc = cli.main(["train", "--config", config_path,
                       "--calibration", str(cal), "--eta", "0", "--beta", "0",
                       "--seed", "1", "--out-dir", str(out_dir)])
        assert rc == 0
        curve = out_dir / "curve_eta0_beta0_seed1.csv"
        with open(curve) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4    # total episodes in the reduced schedule
        eps = [float(r["epsilon"]) for r in rows]
        assert all(a >= b for a, b in zip(eps, eps[1:]))
        assert (out_dir / "qmm_eta0_beta0_seed1.jsonl").exists()
        assert json.loads((out_dir / "train_summary.json").read_text())["status"] == "ok"


class TestSweepCmd:
    def run_sweep(self, config_path, tmp_path, **kw):
        out_dir = str(tmp_path / "sweep")
        rc = cli.main(["sweep", "--config", config_path,
                       "--etas", kw.get("etas", "0,100"),
                       "--betas", kw.get("betas", "0.0,1.0"),
                       "--seeds", kw.get("seeds", "0,1"),
                       "--out-dir", out_dir])
        return rc, out_dir

    def test_grid_cardinality(self, config_path, tmp_path):
        rc, out_dir = self.run_sweep(config_path, tmp_path)
        assert rc == 0
        rows = cli.read_sweep_csv(os.path.join(out_dir, "sweep.csv"))
        assert len(rows) == 8
        assert all(r["status"] == "ok" for r in rows)

    def test_single_cell_matches_train(self, config_path, tmp_path):
        rc, out_dir = self.run_sweep(config_path, tmp_path,
                                     etas="0", betas="0.0", seeds="1")
        assert rc == 0
        rows = cli.read_sweep_csv(os.path.join(out_dir, "sweep.csv"))
        assert len(rows) == 1
        config = load_config(config_path)
        direct = cli.run_cell(config, 0.0, 0.0, 1, str(tmp_path / "direct"))
        for k in ("avg_fee", "avg_incentive", "mm_profit", "exchange_profit"):
            assert rows[0][k] == pytest.approx(direct[k])

    def test_trend_report_schema(self, config_path, tmp_path):
        rc, out_dir = self.run_sweep(config_path, tmp_path)
        trends = json.loads(
            open(os.path.join(out_dir, "trends.json")).read())
        for axis in ("vs_eta", "vs_beta"):
            for panel in cli.REPORT_PANELS:
                assert panel in trends[axis]
                for entry in trends[axis][panel].values():
                    assert set(entry) == {"per_seed", "pooled"}

    def test_rerun_reproduces_rows(self, config_path, tmp_path):
        _, dir1 = self.run_sweep(config_path, tmp_path,
                                 etas="0", betas="0.0", seeds="2")
        csv1 = open(os.path.join(dir1, "sweep.csv")).read()
        _, dir2 = self.run_sweep(config_path, tmp_path, etas="0",
                                 betas="0.0", seeds="2")
        csv2 = open(os.path.join(dir2, "sweep.csv")).read()
        assert csv1 == csv2


class TestReportCmd:
    def test_panels(self, config_path, tmp_path):
        out_dir = str(tmp_path / "sweep")
        cli.main(["sweep", "--config", config_path, "--etas", "0,100",
                  "--betas", "0.0", "--seeds", "0,1", "--out-dir", out_dir])
        report_dir = str(tmp_path / "report")
        rc = cli.main(["report", "--sweep-csv",
                       os.path.join(out_dir, "sweep.csv"),
                       "--out-dir", report_dir])
        assert rc == 0
        sweep_rows = cli.read_sweep_csv(os.path.join(out_dir, "sweep.csv"))
        for panel in cli.REPORT_PANELS:
            with open(os.path.join(report_dir, f"panel_{panel}.csv")) as fh:
                rows = list(csv.DictReader(fh))
            assert len(rows) == len(sweep_rows)
            # pass-through: values match the sweep exactly
            for got, src in zip(rows, sweep_rows):
                assert float(got["value"]) == pytest.approx(src[panel])
            norms = [abs(float(r["normalized"])) for r in rows]
            assert max(norms) <= 1.0 + 1e-12

    def test_malformed_input_line_number(self, tmp_path, capsys):
        bad = tmp_path / "sweep.csv"
        bad.write_text(",".join(cli.SWEEP_FIELDS) + "\n"
                       + "x,0,0,0,0,0,0,0,0,ok,\n")
        rc = cli.main(["report", "--sweep-csv", str(bad),
                       "--out-dir", str(tmp_path / "r")])
        assert rc == 2
        assert "line 2" in capsys.readouterr().err
