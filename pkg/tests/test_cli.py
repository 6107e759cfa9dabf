import json
from pathlib import Path

import pytest

from simploss import cli
from simploss.config import ConfigError, config_from_dict, load_config


def write_config(tmp_path, **overrides):
    document = {
        "seed": 0,
        "out_dir": str(tmp_path / "run"),
        "model": {"layer_widths": [2, 8, 8, 2]},
        "dataset": {
            "kind": "two_spirals",
            "n_per_class": 40,
            "noise_sigma": 0.02,
            "n_test_per_class": 60,
        },
        "train": {"lr": 0.05, "momentum": 0.9, "weight_decay": 1e-4,
                  "epochs": 60, "batch_size": 32},
        "spro": {"train": {"lr": 0.02, "momentum": 0.9, "weight_decay": 0.0,
                           "epochs": 8, "batch_size": 32}},
        "reg": {"lambda_star": 1.0},
        "ensemble": {"j_samples_per_simplex": 10},
    }
    document.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document))
    return path


class TestConfig:
    def test_unknown_top_level_key_rejected(self, tmp_path):
        path = write_config(tmp_path, extra_knob=1)
        with pytest.raises(ConfigError):
            load_config(path)

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict(
                {
                    "model": {"layer_widths": [2, 2], "bogus": True},
                    "dataset": {"kind": "two_spirals"},
                }
            )

    def test_missing_sections_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"model": {"layer_widths": [2, 2]}})

    def test_seed_override(self, tmp_path):
        path = write_config(tmp_path)
        config = load_config(path, seed_override=99)
        assert config.seed == 99
        assert config.train.seed == 99

    def test_defaults_fill_in(self):
        config = config_from_dict(
            {"model": {"layer_widths": [2, 2]},
             "dataset": {"kind": "two_spirals"}}
        )
        assert config.spro.h_samples == 5
        assert config.reg.lambda_star == 1e-8
        assert config.ensemble.j_samples_per_simplex == 25


class TestCommands:
    def run(self, *argv):
        return cli.main(list(argv))

    def test_gen_data_and_rerun_identical(self, tmp_path):
        config = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert self.run("gen-data", "--config", str(config), "--out", str(out_a)) == 0
        assert self.run("gen-data", "--config", str(config), "--out", str(out_b)) == 0
        assert (out_a / "train.csv").read_bytes() == (out_b / "train.csv").read_bytes()
        assert (out_a / "test.csv").read_bytes() == (out_b / "test.csv").read_bytes()
        manifest = json.loads((out_a / "manifest.json").read_text())
        assert set(manifest["artifacts"]) == {"train.csv", "test.csv"}

    def test_full_pipeline(self, tmp_path):
        config = write_config(tmp_path)
        m0, m1 = tmp_path / "m0", tmp_path / "m1"
        assert self.run("train-base", "--config", str(config), "--out", str(m0),
                        "--seed", "1") == 0
        assert self.run("train-base", "--config", str(config), "--out", str(m1),
                        "--seed", "2") == 0

        espro_dir = tmp_path / "espro"
        assert self.run("spro", "--config", str(config), "--out", str(espro_dir),
                        "--mode", "espro", "--k", "2",
                        "--modes", str(m0 / "mode.json")) == 0
        ckpt = espro_dir / "complex.json"
        assert ckpt.exists()
        payload = json.loads(ckpt.read_text())
        assert payload["kind"] == "complex"
        assert payload["config"]["k"] == 2
        history = payload["history"]
        assert all("log_volume" in r for recs in history.values() for r in recs)

        eval_dir = tmp_path / "eval"
        assert self.run("eval", "--config", str(config), "--out", str(eval_dir),
                        "--checkpoint", str(ckpt), "--j-sweep", "1,5") == 0
        report = json.loads((eval_dir / "report.json").read_text())
        assert {"temperature", "unscaled", "scaled", "ensemble_nll",
                "member_nll_mean"} <= set(report)
        assert report["ensemble_nll"] <= report["member_nll_mean"] + 1e-12
        sweep_lines = (eval_dir / "j_sweep.csv").read_text().strip().splitlines()
        assert sweep_lines[0] == "j,test_error"
        assert len(sweep_lines) == 3

        surf_dir = tmp_path / "surf"
        assert self.run("surface", "--config", str(config), "--out", str(surf_dir),
                        "--checkpoint", str(ckpt),
                        "--vertices", "w0,w0_theta0,w0_theta1",
                        "--resolution", "5") == 0
        assert (surf_dir / "surface.csv").exists()
        assert (surf_dir / "surface.json").exists()

        layout = tmp_path / "layout.json"
        layout.write_text(json.dumps({
            "modes": ["w0", "w1"],
            "connectors": ["t0"],
            "simplexes": [["w0", "t0"], ["w1", "t0"]],
        }))
        conn_dir = tmp_path / "conn"
        assert self.run("spro", "--config", str(config), "--out", str(conn_dir),
                        "--mode", "connect", "--layout", str(layout),
                        "--modes", str(m0 / "mode.json"), str(m1 / "mode.json")) == 0

        probe_dir = tmp_path / "probe"
        assert self.run("probe-dim", "--config", str(config), "--out", str(probe_dir),
                        "--w0", str(m0 / "mode.json"),
                        "--w1", str(m1 / "mode.json"), "--max-k", "2") == 0
        table = (probe_dir / "probe.csv").read_text().strip().splitlines()
        assert table[0] == "k,log_volume,sample_acc_mean,sample_acc_min"
        probe_report = json.loads((probe_dir / "probe_report.json").read_text())
        assert "collapse_at" in probe_report

    def test_train_rerun_byte_identical(self, tmp_path):
        config = write_config(tmp_path)
        out_a, out_b = tmp_path / "ra", tmp_path / "rb"
        self.run("train-base", "--config", str(config), "--out", str(out_a))
        self.run("train-base", "--config", str(config), "--out", str(out_b))
        assert (out_a / "mode.json").read_bytes() == (out_b / "mode.json").read_bytes()

    def test_validation_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"model": {"layer_widths": [2, 2]},
                                   "dataset": {"kind": "nope"}}))
        assert cli.main(["gen-data", "--config", str(bad)]) == cli.EXIT_VALIDATION

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_divergence_exit_code(self, tmp_path):
        config = write_config(
            tmp_path,
            model={"layer_widths": [1, 20, 1], "activation": "tanh",
                   "output_kind": "scalar", "loss_kind": "gaussian_nll",
                   "noise_variance": 0.1},
            dataset={"kind": "regression_1d", "points_per_interval": 20},
            train={"lr": 1e12, "momentum": 0.9, "weight_decay": 0.0,
                   "epochs": 30, "batch_size": 60, "schedule": "constant"},
        )
        code = cli.main(["train-base", "--config", str(config),
                         "--out", str(tmp_path / "div")])
        assert code == cli.EXIT_DIVERGENCE

    def test_eval_refuses_mismatched_model(self, tmp_path):
        config = write_config(tmp_path)
        m0 = tmp_path / "m0"
        self.run("train-base", "--config", str(config), "--out", str(m0))
        espro_dir = tmp_path / "es"
        self.run("spro", "--config", str(config), "--out", str(espro_dir),
                 "--mode", "espro", "--k", "1", "--modes", str(m0 / "mode.json"))
        other = write_config(tmp_path, model={"layer_widths": [2, 4, 2]})
        other_path = tmp_path / "config2.json"
        other_path.write_text(Path(other).read_text())
        code = cli.main(["eval", "--config", str(other_path),
                         "--out", str(tmp_path / "x"),
                         "--checkpoint", str(espro_dir / "complex.json")])
        assert code == cli.EXIT_VALIDATION
