import json

import pandas as pd
import pytest

from remnet.commands.augment import parse_specs
from remnet.main import main
from remnet.utils.exceptions import ConfigError
from remnet.utils.image_processing import ImageProcessor

TINY_RUN = {
    "seed": 3,
    "architecture": {
        "preprocessing": "remnant", "remnant_filters": [4], "classifier": "toy",
        "toy_filters": [8, 8], "n_class": 2, "input_size": 64,
    },
    "data": {"augment": False, "clusters_per_image": 1},
    "train": {"batch_size": 4, "max_epochs": 2, "lr_init": 0.01},
    "evaluation": {"n_votes": 1, "sweep_votes": [1, 2]},
}


def envelope(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]


def test_missing_config_exits_with_file_code(tmp_path, capsys):
    assert main(["split", "--config", str(tmp_path / "nope.json")]) == 4
    error = envelope(capsys)
    assert error["code"] == "MISSING_FILE"
    assert error["exit_code"] == 4


def test_invalid_config_values_exit_with_config_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"train": {"batch_size": 0}}))
    assert main(["split", "--config", str(path)]) == 2
    error = envelope(capsys)
    assert error["code"] == "CONFIG_ERROR"
    assert error["details"]["errors"][0]["loc"] == ["train", "batch_size"]


def test_non_positive_vote_count_is_rejected(tmp_path, small_dataset, capsys):
    assert main(["eval", "--manifest", str(small_dataset), "--out", str(tmp_path), "--n-votes", "0"]) == 2
    assert envelope(capsys)["code"] == "CONFIG_ERROR"


def test_parse_specs():
    specs = parse_specs("jpeg:70, gamma:0.8")
    assert [s.tag for s in specs] == ["jpeg70", "gamma0.8"]
    assert parse_specs("") is None
    with pytest.raises(ConfigError):
        parse_specs("jpeg:75")


def test_gradcheck_command(tmp_path):
    assert main(["gradcheck", "--out", str(tmp_path), "--instances", "1"]) == 0
    report = pd.read_csv(tmp_path / "gradcheck.tsv", sep="\t")
    assert report["passed"].all()
    assert (tmp_path / "run_config.json").is_file()


def test_split_command(tmp_path, small_dataset, capsys):
    assert main(["split", "--manifest", str(small_dataset), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "split_report.json").read_text())
    assert report["test"] == 2 and report["violations"] == []
    assert report["train"] + report["val"] == 12
    assert json.loads(capsys.readouterr().out) == report


def test_augment_command(tmp_path, small_dataset):
    assert main(["augment", "--manifest", str(small_dataset), "--out", str(tmp_path), "--specs", "jpeg:70"]) == 0
    frame = pd.read_csv(tmp_path / "augmented.tsv", sep="\t")
    assert len(frame) == 48


def test_score_patch_command(tmp_path, textured_image):
    image = ImageProcessor.save_png(textured_image, tmp_path / "img.png")
    out = tmp_path / "out"
    assert main(["score-patch", "--image", str(image), "--out", str(out)]) == 0
    heat = pd.read_csv(out / "heatmap.tsv", sep="\t")
    assert len(heat) == 25
    assert (out / "heatmap.png").is_file()


@pytest.mark.slow
def test_train_then_eval(tmp_path, small_dataset):
    config = tmp_path / "tiny.json"
    config.write_text(json.dumps(TINY_RUN))
    run_dir = tmp_path / "run"
    common = ["--config", str(config), "--manifest", str(small_dataset), "--out", str(run_dir)]

    assert main(["train", *common]) == 0
    result = json.loads((run_dir / "train_result.json").read_text())
    assert 1 <= result["best_epoch"] <= 2
    assert (run_dir / "best.ckpt").is_file()
    assert len(pd.read_csv(run_dir / "test.tsv", sep="\t")) == 2

    assert main(["eval", *common]) == 0
    metrics = json.loads((run_dir / "metrics.json").read_text())
    assert metrics["n_images"] == 2
    assert 0.0 <= metrics["accuracy"] <= 100.0
    assert (run_dir / "sweep.txt").read_text().splitlines()[0] == "n_votes\taccuracy"
    assert len(pd.read_csv(run_dir / "confusion.tsv", sep="\t", index_col=0)) == 2
    assert len((run_dir / "predictions.jsonl").read_text().splitlines()) == 2


@pytest.mark.slow
def test_run_directory_replays_to_identical_results(tmp_path, small_dataset):
    config = tmp_path / "tiny.json"
    config.write_text(json.dumps(TINY_RUN))
    first = tmp_path / "first"
    common = ["--config", str(config), "--manifest", str(small_dataset), "--out", str(first)]
    assert main(["train", *common]) == 0
    assert main(["eval", *common, "--no-sweep"]) == 0

    replay = tmp_path / "replay"
    again = ["--config", str(first / "run_config.json"), "--out", str(replay)]
    assert main(["train", *again]) == 0
    assert main(["eval", *again, "--no-sweep"]) == 0

    assert (replay / "history.tsv").read_text() == (first / "history.tsv").read_text()
    assert json.loads((replay / "metrics.json").read_text()) == json.loads((first / "metrics.json").read_text())
    assert (replay / "test.tsv").read_text() == (first / "test.tsv").read_text()
