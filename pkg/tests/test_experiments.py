import csv
import hashlib
import json

import pytest

from csmlab import cli
from csmlab import experiments as ex


def write_config(tmp_path, experiment, params=None, seed=0, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"experiment": experiment, "params": params or {}, "seed": seed}))
    return str(path)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestRun:
    def test_overlap_decay_last_row(self, tmp_path):
        cfg = write_config(tmp_path, "overlap-decay", {"overlap": 0.9, "epsilon": 1e-6, "n_sites": 1000})
        assert cli.main(["run", cfg, "--out", str(tmp_path / "o")]) == 0
        rows = read_rows(tmp_path / "o" / "overlap-decay.csv")
        assert rows[0] == ["M", "abs_overlap", "S_M"]
        assert int(rows[-1][0]) == 132
        assert float(rows[-1][1]) < 1e-6 <= float(rows[-2][1])

    def test_csv_format(self, tmp_path):
        ex.run_experiment(ex.resolve_config("decoherence"), out=str(tmp_path))
        raw = (tmp_path / "decoherence.csv").read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")
        raw.decode("utf-8")

    def test_manifest(self, tmp_path):
        manifest, paths = ex.run_experiment(ex.resolve_config("ks"), out=str(tmp_path))
        data = json.loads(paths["manifest"].read_text())
        assert data["config"]["experiment"] == "ks"
        assert data["outputs"]["ks.csv"] == sha(paths["csv"])
        assert data["version"] == manifest.version
        assert data["summary"]["status"] == "none-exists"

    def test_same_seed_is_byte_identical(self, tmp_path):
        cfg = ex.resolve_config("born-sample")
        _, a = ex.run_experiment(cfg, out=str(tmp_path / "a"), threads=1)
        _, b = ex.run_experiment(cfg, out=str(tmp_path / "b"), threads=4)
        assert sha(a["csv"]) == sha(b["csv"])

    def test_seed_override_changes_output(self, tmp_path):
        cfg = ex.resolve_config("born-sample")
        _, a = ex.run_experiment(cfg, out=str(tmp_path / "a"), seed=1)
        _, b = ex.run_experiment(cfg, out=str(tmp_path / "b"), seed=2)
        assert sha(a["csv"]) != sha(b["csv"])

    def test_env_var_sets_default_output(self, tmp_path, monkeypatch):
        monkeypatch.setenv(ex.OUTPUT_ENV, str(tmp_path / "env"))
        assert cli.main(["run", "overlap-decay"]) == 0
        assert (tmp_path / "env" / "overlap-decay.csv").exists()


class TestErrors:
    def test_unknown_experiment(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "frobnicate")
        assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 2
        assert "frobnicate" in capsys.readouterr().err

    def test_unknown_bundled_name(self):
        with pytest.raises(ex.ConfigError):
            ex.resolve_config("frobnicate")

    @pytest.mark.parametrize(
        "experiment, params",
        [
            ("overlap-decay", {"overlap": 1.5}),
            ("overlap-decay", {"epsilon": 0}),
            ("overlap-decay", {"n_sites": "many"}),
            ("decoherence", {"bogus": 1}),
            ("sandwich-register", {"k": 0}),
        ],
    )
    def test_invalid_params(self, tmp_path, experiment, params):
        cfg = write_config(tmp_path, experiment, params)
        assert cli.main(["validate", cfg]) == 2
        assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 2

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert cli.main(["validate", str(path)]) == 2

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"experiment": "ks", "params": {}, "seed": 0, "colour": "red"}))
        assert cli.main(["validate", str(path)]) == 2

    def test_bad_seed(self, tmp_path):
        assert cli.main(["run", "ks", "--seed", "-1", "--out", str(tmp_path)]) == 2

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert cli.main(["run", "ks", "--out", str(blocker / "sub")]) == 4

    def test_truncation_is_numeric_error(self, tmp_path):
        cfg = write_config(tmp_path, "sandwich-coherent", {"alphas": [[3, 0]], "n_max": 4})
        assert cli.main(["run", cfg, "--out", str(tmp_path)]) == 3
        assert not (tmp_path / "sandwich-coherent.csv").exists()


class TestCommands:
    def test_list_experiments(self, capsys):
        assert cli.main(["list-experiments"]) == 0
        names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
        assert names == list(ex.EXPERIMENTS)
        assert len(names) == 11

    def test_every_bundled_config_validates(self):
        for name in ex.EXPERIMENTS:
            cfg = ex.ExperimentConfig.load(ex.bundled_config_path(name))
            assert cfg.experiment == name
            ex.validate_config(cfg)

    def test_validate_prints_ok(self, capsys):
        assert cli.main(["validate", "sector-classify"]) == 0
        assert capsys.readouterr().out.startswith("ok: sector-classify")
