import json

import numpy as np
import pytest

from attractorlab.cli import main
from attractorlab.dynsys import integrate, trajectory_to_csv
from attractorlab.lstm import Architecture, init_params
from attractorlab.sampling import fit_scaler, build_fixed_point, load_dataset
from attractorlab.training import TrainConfig, TrainedModel


def run_cli(*argv):
    return main(list(argv))


@pytest.fixture()
def tiny_dataset_dir(tmp_path):
    out = tmp_path / "data"
    code = run_cli(
        "gen-data", "--strategy", "fixed-point", "--out", str(out),
        "--budget", "900", "--delta", "0.001",
    )
    assert code == 0
    return out


EVAL_JSON = {
    "eval": {
        "horizon": 200, "threshold": 0.4, "d2_steps": 3000, "d2_spinup": 100,
        "d2_points": 1000, "theiler": 20, "d_true": 2.06, "lambda1": 0.9,
        "envelope_steps": 50, "warmup": 20,
    }
}


class TestKac:
    def test_reference_value(self, capsys):
        assert run_cli("kac", "--epsilon", "0.01", "--dim", "2.06") == 0
        assert "13183" in capsys.readouterr().out

    def test_prefactor(self, capsys):
        code = run_cli("kac", "--epsilon", "0.01", "--dim", "2.06",
                       "--prefactor", "2.0481572855529535")
        assert code == 0
        assert "27000" in capsys.readouterr().out

    def test_writes_artifact(self, tmp_path, capsys):
        out = tmp_path / "kac"
        assert run_cli("kac", "--epsilon", "0.1", "--dim", "2.0", "--out", str(out)) == 0
        payload = json.loads((out / "kac.json").read_text())
        assert payload["n_samples"] == 100
        assert (out / "repro.json").exists()

    def test_invalid_arguments_exit_2(self):
        assert run_cli("kac", "--epsilon", "1.5", "--dim", "2.0") == 2


class TestGenData:
    def test_fixed_point_manifest(self, tiny_dataset_dir):
        manifest = json.loads((tiny_dataset_dir / "manifest.json").read_text())
        assert manifest["strategy"] == "fixed-point"
        assert len(manifest["chunks"]) == 9
        assert manifest["total_samples"] == 900

    def test_byte_identical_rerun(self, tmp_path):
        args = ["gen-data", "--strategy", "random", "--seed", "3",
                "--budget", "450", "--transient", "200"]
        assert run_cli(*args, "--out", str(tmp_path / "a")) == 0
        assert run_cli(*args, "--out", str(tmp_path / "b")) == 0
        for name in ["manifest.json", "chunk_000.atlb"]:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_non_divisible_split_exits_2(self, tmp_path):
        code = run_cli("gen-data", "--strategy", "split", "--chunks", "7",
                       "--budget", "900", "--out", str(tmp_path / "x"))
        assert code == 2

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ATTRACTORLAB_SEED", "77")
        out = tmp_path / "env"
        assert run_cli("gen-data", "--strategy", "ergodic", "--budget", "300",
                       "--transient", "100", "--out", str(out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 77

    def test_csv_format(self, tmp_path):
        out = tmp_path / "csvds"
        assert run_cli("gen-data", "--strategy", "short", "--budget", "450",
                       "--format", "csv", "--out", str(out)) == 0
        ds = load_dataset(out)
        assert ds.total_samples == 50  # budget // 9


class TestTrainEvaluate:
    def test_train_then_evaluate(self, tiny_dataset_dir, tmp_path, capsys):
        model_dir = tmp_path / "model"
        code = run_cli(
            "train", "--data", str(tiny_dataset_dir), "--out", str(model_dir),
            "--epochs", "2", "--hidden", "4", "--tbptt", "25", "--param-seed", "5",
        )
        assert code == 0
        model = TrainedModel.load(model_dir / "model.atlm")
        assert model.arch.hidden == (4,)
        assert len(model.history) == 2
        assert (model_dir / "repro.json").exists()

        cfg_path = tmp_path / "eval_cfg.json"
        cfg_path.write_text(json.dumps(EVAL_JSON))
        eval_dir = tmp_path / "eval"
        code = run_cli(
            "evaluate", "--model", str(model_dir / "model.atlm"),
            "--config", str(cfg_path), "--out", str(eval_dir),
        )
        assert code == 0
        payload = json.loads((eval_dir / "eval.json").read_text())
        assert {"valid_time_lyapunov", "d2", "d2_failure"} <= set(payload)

    def test_gaussian_memory_flag(self, tiny_dataset_dir, tmp_path):
        model_dir = tmp_path / "gm"
        code = run_cli(
            "train", "--data", str(tiny_dataset_dir), "--out", str(model_dir),
            "--epochs", "1", "--hidden", "3", "--memory", "gaussian", "--memory-seed", "4",
        )
        assert code == 0
        model = TrainedModel.load(model_dir / "model.atlm")
        assert model.config.memory_init.mode == "gaussian"
        assert model.config.memory_init.seed == 4


class TestDiagnostics:
    def test_lyapunov_json(self, tmp_path, capsys):
        out = tmp_path / "lyap"
        assert run_cli("lyapunov", "--steps", "20000", "--out", str(out)) == 0
        text = capsys.readouterr().out
        assert "Kaplan-Yorke" in text
        payload = json.loads((out / "lyapunov.json").read_text())
        assert len(payload["exponents"]) == 3

    def test_d2_on_trajectory_file(self, tmp_path, capsys):
        traj = integrate(np.ones(3), n_steps=20_000, transient=5000)
        path = tmp_path / "traj.csv"
        trajectory_to_csv(traj, path)
        assert run_cli("d2", "--traj", str(path), "--points", "2000") == 0
        out = capsys.readouterr().out
        assert out.startswith("d2 = ")
        assert abs(float(out.split("=")[1].split()[0]) - 2.06) < 0.3

    def test_d2_requires_input(self):
        assert run_cli("d2") == 2


class TestTsne:
    def test_embedding_outputs(self, tmp_path, capsys):
        ergo = build_fixed_point(chunk_len=30)
        scaler = fit_scaler(ergo)
        arch = Architecture(3, (4,), 3)
        paths = []
        for i in range(16):
            model = TrainedModel(
                params=init_params(seed=i, arch=arch), scaler=scaler,
                config=TrainConfig(epochs=0), history=[],
                dataset_fingerprint="x", dt=0.01,
            )
            path = tmp_path / f"m{i:02d}.atlm"
            model.save(path)
            paths.append(str(path))
        out = tmp_path / "emb"
        code = run_cli("tsne", "--models", *paths, "--iters", "300",
                       "--perplexity", "5", "--out", str(out))
        assert code == 0
        lines = (out / "embedding.csv").read_text().splitlines()
        assert lines[0] == "model_id,strategy,gamma1,gamma2,d2_error"
        assert len(lines) == 17
        assert (out / "radial.json").exists()


class TestEnsembleAndReplay:
    def test_tiny_grid_and_replay(self, tmp_path):
        cfg = {
            "train": {"epochs": 1, "tbptt_window": 50},
            "eval": EVAL_JSON["eval"],
        }
        cfg_path = tmp_path / "grid.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "grid"
        code = run_cli(
            "ensemble", "--strategy", "short", "--memory", "zero",
            "--models", "2", "--config", str(cfg_path), "--out", str(out),
            "--data-seed", "5",
        )
        assert code == 0
        assert (out / "short_zero" / "report.json").exists()
        assert (out / "short_zero" / "models.csv").exists()
        assert (out / "short_zero" / "envelope.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["short_zero"]["n_models"] == 2

        replay_out = tmp_path / "replayed"
        code = run_cli("replay", str(out / "repro.json"), "--out", str(replay_out))
        assert code == 0
        original = json.loads((out / "repro.json").read_text())["outputs"]
        fresh = json.loads((replay_out / "repro.json").read_text())["outputs"]
        assert original == fresh

    def test_gen_data_replay(self, tmp_path):
        out = tmp_path / "ds"
        assert run_cli("gen-data", "--strategy", "random", "--budget", "450",
                       "--seed", "9", "--out", str(out)) == 0
        replay_out = tmp_path / "ds2"
        assert run_cli("replay", str(out / "repro.json"), "--out", str(replay_out)) == 0
        assert (out / "chunk_003.atlb").read_bytes() == (replay_out / "chunk_003.atlb").read_bytes()

    def test_replay_detects_tampering(self, tmp_path):
        out = tmp_path / "k"
        assert run_cli("kac", "--epsilon", "0.1", "--dim", "2.0", "--out", str(out)) == 0
        repro = json.loads((out / "repro.json").read_text())
        repro["outputs"]["kac.json"] = "0" * 64
        (out / "repro.json").write_text(json.dumps(repro))
        assert run_cli("replay", str(out / "repro.json"), "--out", str(tmp_path / "k2")) == 1


class TestUsageErrors:
    def test_unknown_strategy_exits_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run_cli("gen-data", "--strategy", "bogus", "--out", str(tmp_path / "x"))
        assert exc.value.code == 2

    def test_missing_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli()
        assert exc.value.code == 2
