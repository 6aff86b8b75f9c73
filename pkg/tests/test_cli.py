import json
import math

import numpy as np
import pytest

from polyhead import cli
from polyhead.polytope import load_json


def run(args):
    return cli.main(args)


class TestGenWeights:
    def test_cube_47(self, tmp_path, capsys):
        out = tmp_path / "w.json"
        assert run(["gen-weights", "--kind", "cube", "--classes", "47",
                    "--out", str(out)]) == 0
        printed = capsys.readouterr().out
        assert "d=6" in printed
        w = load_json(out)
        assert w.dim == 6

    def test_orthoplex_phi(self, tmp_path, capsys):
        out = tmp_path / "w.json"
        assert run(["gen-weights", "--kind", "orthoplex", "--classes", "10",
                    "--out", str(out)]) == 0
        assert "phi=1.5707963268" in capsys.readouterr().out

    def test_class_count_error(self, tmp_path):
        out = tmp_path / "w.json"
        assert run(["gen-weights", "--kind", "simplex", "--classes", "1",
                    "--out", str(out)]) == 2


class TestCheck:
    def test_valid_file(self, tmp_path):
        out = tmp_path / "w.json"
        run(["gen-weights", "--kind", "simplex", "--classes", "8",
             "--out", str(out)])
        assert run(["check", "--weights", str(out), "--tol", "1e-10"]) == 0

    def test_corrupted_row(self, tmp_path, capsys):
        out = tmp_path / "w.json"
        run(["gen-weights", "--kind", "simplex", "--classes", "8",
             "--out", str(out)])
        payload = json.loads(out.read_text())
        payload["rows"][0][0] += 0.01
        out.write_text(json.dumps(payload))
        assert run(["check", "--weights", str(out)]) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_missing_file(self, tmp_path):
        assert run(["check", "--weights", str(tmp_path / "nope.json")]) == 3


def blob_config(tmp_path, **overrides):
    config = {
        "seed": 5,
        "epochs": 40,
        "batch_size": 64,
        "lr": 0.01,
        "hidden_widths": [32],
        "loss": {"kind": "angular_margin", "kappa": 30.0, "m": "max"},
        "classifier": {"kind": "simplex", "classes": 4},
        "dataset": {"type": "blobs", "classes": 4, "dim": 3, "per_class": 100,
                    "spread": 1.0, "separation": 6.0, "seed": 6},
        "out_dir": str(tmp_path / "run"),
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path, config


class TestTrain:
    def test_blobs_geometry(self, tmp_path):
        path, config = blob_config(tmp_path)
        assert run(["train", "--config", str(path)]) == 0
        out = tmp_path / "run"
        report = json.loads((out / "geometry.json").read_text())
        phi = math.acos(-1.0 / 3.0)
        assert abs(report["min_pairwise_mean_angle"] - phi) < 0.15
        assert (out / "checkpoint.json").exists()
        assert (out / "epochs.csv").read_text().startswith(
            "epoch,mean_loss,train_accuracy\n")
        assert (out / "features.csv").exists()

    def test_max_margin_resolved_in_snapshot(self, tmp_path):
        path, _ = blob_config(
            tmp_path, classifier={"kind": "orthoplex", "classes": 4},
            epochs=1)
        assert run(["train", "--config", str(path)]) == 0
        resolved = json.loads(
            (tmp_path / "run" / "config_resolved.json").read_text())
        assert resolved["loss"]["m"] == pytest.approx(math.pi / 2, abs=0)

    def test_trainable_baseline_rows_move(self, tmp_path):
        path, _ = blob_config(
            tmp_path,
            classifier={"kind": "simplex", "classes": 4, "trainable": True},
            epochs=3)
        assert run(["train", "--config", str(path)]) == 0
        ckpt = json.loads((tmp_path / "run" / "checkpoint.json").read_text())
        assert ckpt["head"]["type"] == "trainable"

    def test_fixed_head_identical_to_polytope(self, tmp_path):
        from polyhead.polytope import make_simplex
        path, _ = blob_config(tmp_path, epochs=2)
        assert run(["train", "--config", str(path)]) == 0
        ckpt = json.loads((tmp_path / "run" / "checkpoint.json").read_text())
        rows = np.asarray(ckpt["head"]["weights"]["rows"])
        assert np.array_equal(rows, make_simplex(4).rows)

    def test_unknown_config_key(self, tmp_path):
        path, _ = blob_config(tmp_path, learningrate=0.1)
        assert run(["train", "--config", str(path)]) == 2

    def test_config_parse_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json }")
        assert run(["train", "--config", str(path)]) == 2

    def test_missing_config(self, tmp_path):
        assert run(["train", "--config", str(tmp_path / "nope.json")]) == 3

    def test_determinism_byte_identical(self, tmp_path):
        path, _ = blob_config(tmp_path, epochs=4)
        assert run(["train", "--config", str(path),
                    "--out-dir", str(tmp_path / "a")]) == 0
        assert run(["train", "--config", str(path),
                    "--out-dir", str(tmp_path / "b")]) == 0
        for name in ("checkpoint.json", "epochs.csv", "geometry.json",
                     "features.csv"):
            assert ((tmp_path / "a" / name).read_bytes()
                    == (tmp_path / "b" / name).read_bytes())


class TestEval:
    def test_eval_training_blobs(self, tmp_path, capsys):
        path, config = blob_config(tmp_path)
        assert run(["train", "--config", str(path)]) == 0
        capsys.readouterr()
        ds = config["dataset"]
        assert run(["eval", "--checkpoint", str(tmp_path / "run" / "checkpoint.json"),
                    "--blobs-classes", str(ds["classes"]),
                    "--blobs-dim", str(ds["dim"]),
                    "--blobs-per-class", str(ds["per_class"]),
                    "--blobs-spread", str(ds["spread"]),
                    "--blobs-separation", str(ds["separation"]),
                    "--blobs-seed", str(ds["seed"])]) == 0
        printed = capsys.readouterr().out
        acc = float(printed.split("accuracy=")[1].split()[0])
        assert acc >= 0.99

    def test_mismatched_input_dim(self, tmp_path):
        path, _ = blob_config(tmp_path, epochs=1)
        assert run(["train", "--config", str(path)]) == 0
        assert run(["eval", "--checkpoint",
                    str(tmp_path / "run" / "checkpoint.json"),
                    "--blobs-classes", "4", "--blobs-dim", "7"]) == 2

    def test_missing_checkpoint(self, tmp_path):
        assert run(["eval", "--checkpoint", str(tmp_path / "nope.json"),
                    "--blobs-classes", "2"]) == 3

    def test_no_dataset_args(self, tmp_path):
        path, _ = blob_config(tmp_path, epochs=1)
        run(["train", "--config", str(path)])
        assert run(["eval", "--checkpoint",
                    str(tmp_path / "run" / "checkpoint.json")]) == 2
