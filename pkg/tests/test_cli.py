import json

import pytest

from camproxy.cli import main
from camproxy.data import load_dataset


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = main(
        [
            "gen",
            "--ids", "16",
            "--cameras", "3",
            "--images-low", "5",
            "--images-high", "7",
            "--seed", "3",
            "--out", str(out),
        ]
    )
    assert code == 0
    return out


class TestGen:
    def test_writes_three_files(self, generated):
        for name in ("train.csv", "query.csv", "gallery.csv"):
            assert (generated / name).exists()

    def test_files_load_back(self, generated):
        train = load_dataset(generated / "train.csv")
        assert train.num_cameras == 3
        assert train.true_ids is not None

    def test_binary_format(self, tmp_path):
        code = main(
            ["gen", "--ids", "8", "--seed", "1", "--format", "binary", "--out", str(tmp_path)]
        )
        assert code == 0
        ds = load_dataset(tmp_path / "train.bin", format="binary")
        assert ds.num_instances > 0


@pytest.fixture(scope="module")
def run_dir(generated, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    config = out / "config.json"
    config.write_text(json.dumps({"intra_only_epochs": 1}))
    code = main(
        [
            "train",
            "--data", str(generated / "train.csv"),
            "--config", str(config),
            "--out", str(out),
            "--epochs", "2",
            "--seed", "4",
            "--no-figures",
        ]
    )
    assert code == 0
    return out


class TestTrainEval:

    def test_train_outputs(self, run_dir):
        assert (run_dir / "enc.bin").exists()
        assert (run_dir / "report.csv").exists()
        assert (run_dir / "summary.json").exists()
        lines = (run_dir / "report.csv").read_text().strip().splitlines()
        assert lines[0].startswith("epoch,clusters,proxies,outliers")
        assert len(lines) == 3

    def test_train_rejects_default_intra_only_conflict(self, generated, tmp_path):
        code = main(
            [
                "train",
                "--data", str(generated / "train.csv"),
                "--out", str(tmp_path),
                "--epochs", "3",
            ]
        )
        assert code == 1  # intra_only_epochs default 5 exceeds 3 epochs

    def test_train_renders_figures(self, generated, tmp_path):
        code = main(
            [
                "train",
                "--data", str(generated / "train.csv"),
                "--out", str(tmp_path),
                "--epochs", "6",
                "--seed", "4",
            ]
        )
        assert code == 0
        assert (tmp_path / "report.png").exists()

    def test_eval_json(self, generated, run_dir, tmp_path, capsys):
        result_path = tmp_path / "result.json"
        per_query = tmp_path / "ap.csv"
        code = main(
            [
                "eval",
                "--checkpoint", str(run_dir / "enc.bin"),
                "--query", str(generated / "query.csv"),
                "--gallery", str(generated / "gallery.csv"),
                "--out", str(result_path),
                "--per-query", str(per_query),
            ]
        )
        assert code == 0
        payload = json.loads(result_path.read_text())
        for key in ("rank_1", "rank_5", "rank_10", "mAP"):
            assert key in payload
        printed = json.loads(capsys.readouterr().out)
        assert printed == payload
        assert per_query.exists()

    def test_config_file_with_override(self, generated, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"epochs": 1, "intra_only_epochs": 0, "seed": 9}))
        out = tmp_path / "run"
        code = main(
            [
                "train",
                "--data", str(generated / "train.csv"),
                "--config", str(config),
                "--out", str(out),
                "--epochs", "2",
                "--no-figures",
            ]
        )
        assert code == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["epochs_completed"] == 2
        assert summary["config"]["seed"] == 9


class TestLabelsProject:
    def test_labels_dump(self, generated, tmp_path):
        out = tmp_path / "labels.csv"
        code = main(
            ["labels", "--data", str(generated / "train.csv"), "--k1", "10", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "key,camera,cluster,proxy_global,proxy_in_camera"
        train = load_dataset(generated / "train.csv")
        assert len(lines) == train.num_instances + 1

    def test_project_csv_and_figure(self, generated, tmp_path):
        out = tmp_path / "proj.csv"
        code = main(["project", "--data", str(generated / "train.csv"), "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "key,camera,true_id,pc1,pc2"
        assert (tmp_path / "proj.png").exists()

    def test_project_deterministic(self, generated, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        for path in (a, b):
            code = main(
                ["project", "--data", str(generated / "train.csv"), "--out", str(path), "--no-figures"]
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()


class TestExitCodes:
    def test_missing_file_exits_two(self, tmp_path):
        code = main(
            ["train", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path), "--no-figures"]
        )
        assert code == 2

    def test_unknown_flag_exits_two(self):
        assert main(["gen", "--nope", "1", "--out", "x"]) == 2

    def test_unknown_command_exits_two(self):
        assert main(["frobnicate"]) == 2

    def test_no_command_exits_two(self):
        assert main([]) == 2

    def test_malformed_csv_exits_one(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("key,camera,f0,f1\na,1,nan,2.0\n")
        code = main(["labels", "--data", str(bad), "--out", str(tmp_path / "out.csv")])
        assert code == 1
