import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
import yaml

from lmpgnn import config as cfg
from lmpgnn.cli import main

DOCS_CONFIG = Path(__file__).resolve().parents[1] / "docs" / "example_config.yaml"

SMALL = {
    "name": "smoke",
    "dataset": {"synthetic": {"n_nodes": 15, "n_timesteps": 30, "band": 3, "seed": 2}},
    "noise": {"family": "sas", "scale": 0.1, "alpha": 1.5},
    "observed_count": 10,
    "train_prefix": 10,
    "band_size": 3,
    "repetitions": 3,
    "base_seed": 4,
    "methods": [{"method": "lmp_gnn", "p": 1.2, "eta": 1.0e-4, "pretrain_epochs": 2},
                {"method": "gsign", "mu": 0.1}],
}


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


@pytest.fixture
def coords(tmp_path):
    rng = np.random.default_rng(0)
    path = tmp_path / "stations.csv"
    rows = [f"{i},{a:.5f},{b:.5f}" for i, (a, b) in
            enumerate(zip(rng.uniform(30, 45, 20), rng.uniform(-110, -80, 20)))]
    path.write_text("node_id,lat,lon\n" + "\n".join(rows) + "\n")
    return path


class TestConfig:
    def test_example_config_is_valid(self):
        raw = cfg.load_config(DOCS_CONFIG)
        spec = cfg.build_spec(raw)
        assert len(spec.methods) == 8
        assert spec.noise.alpha == 1.5

    def test_unknown_key_named(self, small_config):
        with pytest.raises(cfg.ConfigError, match="noise.alhpa"):
            cfg.load_config(small_config, ["noise.alhpa=1.4"])

    def test_type_error_names_key_and_type(self, small_config):
        with pytest.raises(cfg.ConfigError, match="'repetitions' must be integer"):
            cfg.load_config(small_config, ["repetitions=many"])
        with pytest.raises(cfg.ConfigError, match="'methods.1.mu' must be integer or number"):
            cfg.load_config(small_config, ["methods.1.mu=true"])

    def test_override_changes_only_that_field(self, small_config):
        base = cfg.load_config(small_config)
        new = cfg.load_config(small_config, ["noise.alpha=1.4"])
        assert new["noise"].pop("alpha") == 1.4
        base["noise"].pop("alpha")
        assert new == base

    def test_scientific_notation_override(self, small_config):
        assert cfg.load_config(small_config, ["methods.0.eta=1e-4"])["methods"][0]["eta"] == 1e-4

    def test_list_override(self, small_config):
        raw = cfg.load_config(small_config, ["methods.0.mu=0.2"])
        assert raw["methods"][0]["mu"] == 0.2

    def test_bad_override(self, small_config):
        with pytest.raises(cfg.ConfigError):
            cfg.load_config(small_config, ["methods.9.mu=0.2"])
        with pytest.raises(cfg.ConfigError):
            cfg.load_config(small_config, ["noise"])

    def test_missing_required(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({k: v for k, v in SMALL.items() if k != "noise"}))
        with pytest.raises(cfg.ConfigError, match="'noise'"):
            cfg.load_config(path)

    def test_invalid_values_are_config_errors(self, small_config):
        raw = cfg.load_config(small_config, ["noise.scale=-1"])
        with pytest.raises(cfg.ConfigError):
            cfg.build_spec(raw)
        raw = cfg.load_config(small_config, ["observed_count=99"])
        with pytest.raises(cfg.ConfigError):
            cfg.build_spec(raw)

    def test_relative_paths(self, tmp_path, coords):
        np.savetxt(tmp_path / "s.csv", np.random.default_rng(0).normal(size=(12, 20)),
                   delimiter=",")
        raw = dict(SMALL, dataset={"signals": "s.csv", "coords": coords.name, "k": 3})
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump(raw))
        spec = cfg.build_spec(cfg.load_config(path))
        assert spec.dataset.n_nodes == 20


class TestBuildGraph:
    def test_byte_identical(self, tmp_path, coords, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["build-graph", "--coords", str(coords), "--k", "7", "--out", str(a)]) == 0
        assert "nodes: 20" in capsys.readouterr().out
        assert main(["build-graph", "--coords", str(coords), "--k", "7", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "nope.csv"
        assert main(["build-graph", "--coords", str(missing), "--out", str(tmp_path / "o")]) == 2
        assert str(missing) in capsys.readouterr().err


class TestDesignFilter:
    def test_keeps_band(self, tmp_path, coords, capsys):
        np.savetxt(tmp_path / "s.csv", np.random.default_rng(1).normal(size=(10, 20)),
                   delimiter=",")
        out = tmp_path / "band.csv"
        code = main(["design-filter", "--signals", str(tmp_path / "s.csv"), "--coords",
                     str(coords), "--band-size", "5", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "frequency,eigenvalue,energy,keep"
        assert sum(int(l.rsplit(",", 1)[1]) for l in lines[1:]) == 5

    def test_needs_graph(self, tmp_path):
        np.savetxt(tmp_path / "s.csv", np.ones((3, 4)), delimiter=",")
        assert main(["design-filter", "--signals", str(tmp_path / "s.csv"), "--band-size", "2",
                     "--out", str(tmp_path / "o.csv")]) == 2


class TestRunReportPlot:
    def test_smoke(self, tmp_path, small_config, capsys):
        code = main(["run", str(small_config), "--override", "repetitions=2",
                     "--output-dir", str(tmp_path / "res"), "--jobs", "1"])
        assert code == 0
        out = capsys.readouterr().out
        rows = [l.split()[0] for l in out.splitlines()[2:]]
        assert rows == ["lmp_gnn", "gsign"]
        res = tmp_path / "res" / "smoke"
        assert np.loadtxt(res / "gsign" / "mse_t.csv", delimiter=",").shape == (2, 20)

        assert main(["report", str(res)]) == 0
        assert "gsign" in capsys.readouterr().out

        svg = tmp_path / "mse.svg"
        assert main(["plot", str(res), "--out", str(svg), "--log-scale",
                     "--node-trace", str(tmp_path / "trace.svg")]) == 0
        text = svg.read_text()
        assert "log scale" in text
        assert (tmp_path / "trace.svg").exists()
        first = svg.read_bytes()
        assert main(["plot", str(res), "--out", str(svg), "--log-scale"]) == 0
        assert svg.read_bytes() == first

    def test_env_output_dir(self, tmp_path, small_config, monkeypatch):
        monkeypatch.setenv("LMPGNN_OUTPUT_DIR", str(tmp_path / "envres"))
        assert main(["run", str(small_config), "--override", "repetitions=1",
                     "--jobs", "1"]) == 0
        assert (tmp_path / "envres" / "smoke" / "summary.csv").exists()

    def test_config_error_exit(self, small_config, capsys):
        assert main(["run", str(small_config), "--override", "bogus=1"]) == 3
        assert "bogus" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["run", str(tmp_path / "none.yaml")]) == 2

    def test_diverged_methods_still_exit_zero(self, tmp_path, small_config):
        code = main(["run", str(small_config), "--override", "methods.1.method=glms",
                     "--override", "methods.1.mu=1e8",
                     "--override", "noise.family=cauchy", "--override", "repetitions=1",
                     "--output-dir", str(tmp_path), "--jobs", "1"])
        assert code == 0
        summary = (tmp_path / "smoke" / "summary.csv").read_text().splitlines()
        assert summary[2].endswith(",1")

    def test_plot_empty_dir(self, tmp_path, capsys):
        (tmp_path / "empty").mkdir()
        assert main(["plot", str(tmp_path / "empty"), "--out", str(tmp_path / "x.svg")]) != 0
        assert capsys.readouterr().err

    def test_one_method_one_series(self, tmp_path, small_config):
        from lmpgnn.experiment import read_results
        from lmpgnn.plotting import plot_mse
        main(["run", str(small_config), "--override", "methods=[{method: glms}]",
              "--override", "repetitions=1", "--output-dir", str(tmp_path), "--jobs", "1"])
        plotted = plot_mse(read_results(tmp_path / "smoke"), tmp_path / "one.svg")
        assert plotted == ["glms"]


class TestHelp:
    def test_run_help_lists_keys(self, capsys):
        with pytest.raises(SystemExit):
            main(["run", "--help"])
        out = capsys.readouterr().out
        for key in list(cfg.TOP_KEYS) + list(cfg.NOISE_KEYS) + list(cfg.METHOD_KEYS):
            assert key in out

    @pytest.mark.parametrize("sub", ["build-graph", "design-filter", "report", "plot"])
    def test_subcommand_help(self, sub, capsys):
        with pytest.raises(SystemExit) as info:
            main([sub, "--help"])
        assert info.value.code == 0

    @pytest.mark.skipif(shutil.which("lmpgnn") is None, reason="console script not installed")
    def test_console_script(self):
        res = subprocess.run(["lmpgnn", "--help"], capture_output=True, text=True)
        assert res.returncode == 0 and "build-graph" in res.stdout

    def test_module_entry(self):
        res = subprocess.run([sys.executable, "-m", "lmpgnn.cli", "report", "/nonexistent"],
                             capture_output=True, text=True)
        assert res.returncode == 2
