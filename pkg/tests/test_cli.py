import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from psograsp import cli
from psograsp.geometry import GraspRect
from psograsp.nn import random_weights, save_weights
from psograsp.raster_io import read_ppm, write_ppm

from conftest import write_cornell_example


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def load_schema(name):
    text = resources.files("psograsp").joinpath(f"schemas/{name}").read_text()
    return json.loads(text)


@pytest.fixture
def image_path(tmp_path, flat_image):
    path = tmp_path / "scene.ppm"
    write_ppm(path, flat_image)
    return str(path)


SYNTH = "synthetic:112,112,45,40,60"


class TestDetect:
    def test_json_output_and_schema(self, capsys, image_path):
        code, out, err = run_cli(
            capsys, "detect", image_path, "--scorer", SYNTH, "--seed", "3",
            "--init", "0.0", "--iters", "40",
        )
        assert code == 0, err
        payload = json.loads(out)
        jsonschema.validate(payload, load_schema("detect.schema.json"))
        assert payload["seed"] == 3
        assert payload["score"] > 0.9
        assert abs(payload["x"] - 112) < 6 and abs(payload["y"] - 112) < 6

    def test_missing_image_exits_1(self, capsys, tmp_path):
        code, out, err = run_cli(capsys, "detect", str(tmp_path / "nope.ppm"), "--scorer", SYNTH)
        assert code == 1
        assert "error:" in err

    def test_init_failure_exits_2(self, capsys, image_path):
        code, out, err = run_cli(
            capsys, "detect", image_path, "--scorer", SYNTH,
            "--init", "1.0", "--max-init", "2",
        )
        assert code == 2
        assert "initialization failed" in err

    def test_no_scorer_exits_1(self, capsys, image_path):
        code, out, err = run_cli(capsys, "detect", image_path)
        assert code == 1

    def test_seeded_rerun_identical(self, capsys, image_path):
        args = ("detect", image_path, "--scorer", SYNTH, "--seed", "9", "--init", "0.0")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2

    def test_output_equals_library_search(self, capsys, image_path, flat_image):
        from psograsp.pso import SwarmConfig, search
        from psograsp.scorer import SyntheticScorer

        code, out, _ = run_cli(
            capsys, "detect", image_path, "--scorer", SYNTH, "--seed", "13", "--init", "0.0"
        )
        assert code == 0
        payload = json.loads(out)
        cfg = SwarmConfig(seed=13, init_threshold=0.0)
        res = search(flat_image, SyntheticScorer(GraspRect(112, 112, 45, 40, 60)), cfg)
        assert payload["x"] == res.best.x and payload["y"] == res.best.y
        assert payload["theta"] == res.best.theta
        assert payload["h"] == res.best.h and payload["w"] == res.best.w
        assert payload["score"] == res.best_score
        assert payload["iterations"] == res.iterations_used

    def test_env_seed_fallback(self, capsys, image_path, monkeypatch):
        monkeypatch.setenv("GRASP_PSO_SEED", "17")
        code, out, _ = run_cli(capsys, "detect", image_path, "--scorer", SYNTH, "--init", "0.0")
        assert code == 0
        assert json.loads(out)["seed"] == 17

    def test_annotate_and_trajectory(self, capsys, image_path, tmp_path):
        anno = tmp_path / "anno.ppm"
        traj = tmp_path / "traj.jsonl"
        code, out, _ = run_cli(
            capsys, "detect", image_path, "--scorer", SYNTH, "--init", "0.0",
            "--annotate", str(anno), "--trajectory", str(traj),
        )
        assert code == 0
        img = read_ppm(anno)
        assert img.shape == (224, 224, 3)
        assert img.max() > 0.6  # some edge pixels drawn over the gray scene
        lines = traj.read_text().strip().splitlines()
        payload = json.loads(out)
        assert len(lines) == payload["iterations"]
        first = json.loads(lines[0])
        assert set(first) == {"iteration", "g_fit", "g_best"}

    def test_config_file_and_flag_precedence(self, capsys, image_path, tmp_path):
        cfg_file = tmp_path / "cfg.json"
        cfg_file.write_text(json.dumps({"n_particles": 10, "init_threshold": 0.0, "seed": 5}))
        code, out, _ = run_cli(
            capsys, "detect", image_path, "--scorer", SYNTH, "--config", str(cfg_file),
            "--particles", "12",
        )
        assert code == 0
        payload = json.loads(out)
        assert payload["config"]["n_particles"] == 12  # flag wins
        assert payload["config"]["init_threshold"] == 0.0  # file wins over default
        assert payload["seed"] == 5

    def test_cnn_scorer_roundtrip(self, capsys, image_path, tmp_path):
        wpath = tmp_path / "model.gnwb"
        save_weights(random_weights(seed=11), wpath)
        code, out, _ = run_cli(
            capsys, "detect", image_path, "--weights", str(wpath),
            "--seed", "1", "--particles", "6", "--iters", "2", "--init", "0.0", "--prob", "1.0",
        )
        assert code == 0
        payload = json.loads(out)
        assert 0.0 <= payload["score"] <= 1.0

    def test_both_scorers_rejected(self, capsys, image_path, tmp_path):
        wpath = tmp_path / "model.gnwb"
        save_weights(random_weights(seed=11), wpath)
        code, _, err = run_cli(
            capsys, "detect", image_path, "--weights", str(wpath), "--scorer", SYNTH
        )
        assert code == 1 and "exactly one scorer" in err


class TestMultigrasp:
    def test_k1_matches_detect(self, capsys, image_path):
        common = (image_path, "--scorer", SYNTH, "--seed", "4", "--init", "0.0")
        _, det_out, _ = run_cli(capsys, "detect", *common)
        code, mg_out, _ = run_cli(capsys, "multigrasp", *common, "--k", "1", "--floor", "0.0")
        assert code == 0
        det = json.loads(det_out)
        mg = json.loads(mg_out)
        jsonschema.validate(mg, load_schema("multigrasp.schema.json"))
        assert len(mg["grasps"]) == 1
        for key in ("x", "y", "theta", "h", "w", "score"):
            assert mg["grasps"][0][key] == det[key]

    def test_unreachable_floor_gives_empty_list(self, capsys, image_path):
        code, out, _ = run_cli(
            capsys, "multigrasp", image_path, "--scorer", SYNTH, "--seed", "4",
            "--init", "0.0", "--floor", "1.0",
        )
        assert code == 0
        assert json.loads(out)["grasps"] == []

    def test_sorted_by_score(self, capsys, image_path):
        code, out, _ = run_cli(
            capsys, "multigrasp", image_path, "--scorer", SYNTH, "--seed", "6",
            "--init", "0.0", "--k", "4", "--floor", "0.01", "--min-sep", "10",
        )
        assert code == 0
        scores = [g["score"] for g in json.loads(out)["grasps"]]
        assert scores == sorted(scores, reverse=True)

    def test_seeded_rerun_identical(self, capsys, image_path):
        args = (
            "multigrasp", image_path, "--scorer", SYNTH, "--seed", "8",
            "--init", "0.0", "--k", "3", "--floor", "0.1",
        )
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2


@pytest.fixture
def eval_dataset(tmp_path):
    target = GraspRect(112, 112, 45, 40, 60)
    root = tmp_path / "data"
    root.mkdir()
    for i in range(3):
        write_cornell_example(root, f"ex{i}", target)
    return root, target


class TestEvaluate:
    def test_fixture_accuracy_one(self, capsys, eval_dataset):
        root, target = eval_dataset
        code, out, err = run_cli(
            capsys, "evaluate", str(root), "--scorer", SYNTH, "--seed", "2", "--init", "0.0",
        )
        assert code == 0, err
        payload = json.loads(out)
        jsonschema.validate(payload, load_schema("evaluate.schema.json"))
        assert payload["accuracy"] == 1.0
        assert payload["mode"] == "single"
        assert payload["reference_targets"]["single_accuracy"] == 0.928

    def test_omit_timing_reruns_identical(self, capsys, eval_dataset):
        root, _ = eval_dataset
        args = ("evaluate", str(root), "--scorer", SYNTH, "--seed", "2", "--init", "0.0", "--omit-timing")
        _, out1, _ = run_cli(capsys, *args)
        _, out2, _ = run_cli(capsys, *args)
        assert out1 == out2
        payload = json.loads(out1)
        assert "timing" not in payload
        assert all("ms" not in rec for rec in payload["per_example"])

    def test_empty_dir_exits_1(self, capsys, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        code, _, err = run_cli(capsys, "evaluate", str(empty), "--scorer", SYNTH)
        assert code == 1


class TestExtractPatches:
    def test_wraps_dataset_op(self, capsys, eval_dataset, tmp_path):
        root, _ = eval_dataset
        out_dir = tmp_path / "patches"
        code, out, _ = run_cli(capsys, "extract-patches", str(root), str(out_dir))
        assert code == 0
        assert json.loads(out)["patches_written"] == 3
        assert (out_dir / "manifest.csv").exists()


class TestWeightsInfo:
    def test_layer_table(self, capsys, tmp_path):
        wpath = tmp_path / "model.gnwb"
        save_weights(random_weights(seed=0), wpath)
        code, out, _ = run_cli(capsys, "weights-info", str(wpath))
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 12  # header + 10 layers + bn_eps
        assert "conv_bn" in lines[1]
        assert lines[-1].startswith("bn_eps")

    def test_bad_magic_message(self, capsys, tmp_path):
        bad = tmp_path / "junk.gnwb"
        bad.write_bytes(b"JUNKJUNKJUNK")
        code, _, err = run_cli(capsys, "weights-info", str(bad))
        assert code == 1
        assert "BadMagic" in err
