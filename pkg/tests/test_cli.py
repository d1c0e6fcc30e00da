import csv

import numpy as np
import pytest

from wits.benchmark import ExperimentConfig
from wits.cli import main, parse_config_text, resolved_config_ini
from wits.errors import ConfigError


@pytest.fixture
def csv_pair(tmp_path):
    rng = np.random.default_rng(0)
    paths = []
    for name, shift in (("x.csv", 0.0), ("y.csv", 0.0)):
        data = rng.normal(size=(40, 2)) + shift
        lines = ["f0,f1"] + [f"{float(a)!r},{float(b)!r}" for a, b in data]
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        paths.append(str(path))
    return paths


class TestTestCommand:
    def test_same_distribution_runs_clean(self, csv_pair, tmp_path, capsys):
        out_path = tmp_path / "report.csv"
        code = main([
            "test", csv_pair[0], csv_pair[1],
            "--method", "kfda-witness", "--sigma", "1.0", "--alpha", "0.05",
            "--seed", "3", "--out", str(out_path),
        ])
        assert code == 0
        printed = capsys.readouterr().out
        assert "decision:" in printed and "p-value:" in printed
        with open(out_path, newline="") as handle:
            row = next(csv.DictReader(handle))
        assert row["method"] == "kfda-witness"
        assert 0.0 <= float(row["p_value"]) <= 1.0

    def test_identical_files_do_not_reject(self, tmp_path, capsys):
        rng = np.random.default_rng(1)
        data = rng.normal(size=(60, 2))
        lines = ["a,b"] + [f"{float(x)!r},{float(y)!r}" for x, y in data]
        path = tmp_path / "same.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        code = main(["test", str(path), str(path), "--method", "kfda-witness",
                     "--sigma", "1.0", "--seed", "5"])
        assert code == 0
        assert "fail to reject" in capsys.readouterr().out

    def test_missing_file_exits_2(self, capsys):
        code = main(["test", "nope.csv", "also_nope.csv"])
        assert code == 2
        assert "nope.csv" in capsys.readouterr().err

    def test_default_grid_runs_cv(self, csv_pair, capsys):
        code = main(["test", csv_pair[0], csv_pair[1], "--method", "kfda-witness",
                     "--grid", "default", "--seed", "1"])
        assert code == 0

    def test_usage_error_exits_1(self, capsys):
        code = main(["test", "x.csv", "y.csv", "--method", "not-a-method"])
        assert code == 1

    def test_boot_method(self, csv_pair, capsys):
        code = main(["test", csv_pair[0], csv_pair[1], "--method", "mmd-boot",
                     "--sigma", "0.5", "--B", "80"])
        assert code == 0
        assert "mmd-boot" in capsys.readouterr().out


MINIMAL_CONFIG = """
[dataset]
kind = blobs-rotated
n = 30
m = 30
theta = 0.0

[method]
name = opt-mmd-witness

[stage1]
sigma = 0.2

[stage2]
alpha = 0.05
B = 40

[harness]
repetitions = 3
seed = 11
"""


class TestPowerCommand:
    def test_minimal_null_config(self, tmp_path, capsys):
        config_path = tmp_path / "null.ini"
        config_path.write_text(MINIMAL_CONFIG, encoding="utf-8")
        out_path = tmp_path / "results.csv"
        code = main(["power", str(config_path), "--out", str(out_path)])
        assert code == 0
        with open(out_path, newline="") as handle:
            records = list(csv.DictReader(handle))
        assert len(records) == 1
        assert records[0]["method"] == "opt-mmd-witness"
        assert int(records[0]["R"]) == 3
        # resolved config echo exists and re-parses to the same configuration
        echo = (str(out_path) + ".resolved.ini")
        config, axis, values = parse_config_text(open(echo).read())
        assert config.seed == 11 and config.repetitions == 3
        assert axis is None

    def test_unknown_field_named(self, tmp_path, capsys):
        config_path = tmp_path / "bad.ini"
        config_path.write_text(
            MINIMAL_CONFIG.replace("alpha = 0.05", "alpha = 0.05\nbogus_field = 3"),
            encoding="utf-8",
        )
        code = main(["power", str(config_path)])
        assert code == 1
        err = capsys.readouterr().err
        assert "bogus_field" in err and "stage2" in err

    def test_unknown_section_named(self, tmp_path, capsys):
        config_path = tmp_path / "bad2.ini"
        config_path.write_text(MINIMAL_CONFIG + "\n[mystery]\nx = 1\n", encoding="utf-8")
        code = main(["power", str(config_path)])
        assert code == 1
        assert "mystery" in capsys.readouterr().err

    def test_missing_config_exits_1(self, capsys):
        assert main(["power", "no_config.ini"]) == 1


class TestSweepCommand:
    def test_sweep_with_axis(self, tmp_path, capsys):
        config_path = tmp_path / "sweep.ini"
        config_path.write_text(
            MINIMAL_CONFIG.replace("seed = 11", "seed = 11\naxis = split_ratio\nvalues = 0.3,0.6"),
            encoding="utf-8",
        )
        out_path = tmp_path / "sweep.csv"
        code = main(["sweep", str(config_path), "--out", str(out_path)])
        assert code == 0
        with open(out_path, newline="") as handle:
            records = list(csv.DictReader(handle))
        assert [r["r"] for r in records] == ["0.3", "0.6"]

    def test_sweep_requires_axis(self, tmp_path, capsys):
        config_path = tmp_path / "noaxis.ini"
        config_path.write_text(MINIMAL_CONFIG, encoding="utf-8")
        assert main(["sweep", str(config_path)]) == 1


class TestConfigRoundTrip:
    def test_resolved_ini_round_trips(self):
        config = ExperimentConfig(
            dataset="blobs-liu", n=64, m=32, null=True, method="kfda-witness",
            sigma=0.4, lam=0.02, bandwidths=(0.1, 0.9), lambdas=(1e-3, 1e-1),
            r=0.6, cv_folds=4, falkon_centers=20, cg_iterations=33,
            alpha=0.1, num_permutations=123, threshold="analytic",
            repetitions=17, seed=99, workers=2,
        )
        text = resolved_config_ini(config, axis="lambda", values=(1e-3, 1e-1))
        parsed, axis, values = parse_config_text(text)
        assert parsed == config
        assert axis == "lambda"
        assert values == (1e-3, 1e-1)

    def test_round_trip_defaults(self):
        config = ExperimentConfig(sigma=0.2)
        parsed, _, _ = parse_config_text(resolved_config_ini(config))
        assert parsed == config

    def test_grid_keyword_default(self):
        config, _, _ = parse_config_text(
            "[stage1]\ngrid = default\nsigma=0.2\n"
        )
        assert len(config.bandwidths) == 10
        assert len(config.lambdas) == 5

    def test_grid_file(self, tmp_path):
        grid_path = tmp_path / "grid.ini"
        grid_path.write_text(
            "[grid]\nbandwidths = 0.1,0.5,2.0\nlambdas = 1e-3,1e-1\n",
            encoding="utf-8",
        )
        config, _, _ = parse_config_text(
            f"[stage1]\ngrid = {grid_path}\n"
        )
        assert config.bandwidths == (0.1, 0.5, 2.0)
        assert config.lambdas == (1e-3, 1e-1)

    def test_grid_file_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config_text("[stage1]\ngrid = /no/such/grid.ini\n")
        bad = tmp_path / "bad_grid.ini"
        bad.write_text("[grid]\nwidths = 1\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="widths"):
            parse_config_text(f"[stage1]\ngrid = {bad}\n")

    def test_value_errors_reported(self):
        with pytest.raises(ConfigError, match="invalid config value"):
            parse_config_text("[dataset]\nn = not_a_number\n")
