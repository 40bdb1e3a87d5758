import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal

from remnet.models.training import PredictionRecord
from remnet.services.metrics_service import metrics_service
from remnet.utils.exceptions import ConstraintError


def predictions(pairs):
    return [PredictionRecord(path=f"{i}.png", true_label=t, final_label=p) for i, (t, p) in enumerate(pairs)]


def test_accuracy_percentage():
    records = predictions([(0, 0)] * 527 + [(0, 1)] * 13)
    assert metrics_service.accuracy(records) == pytest.approx(97.59, abs=0.005)


def test_accuracy_needs_labelled_predictions():
    with pytest.raises(ConstraintError):
        metrics_service.accuracy([])
    with pytest.raises(ConstraintError):
        metrics_service.accuracy([PredictionRecord(path="a", final_label=0)])


@pytest.mark.parametrize("unaltered, manipulated, expected", [
    (100.0, 0.0, 70.0),
    (96.0, 93.0, 95.1),
    (50.0, 50.0, 50.0),
])
def test_weighted_score(unaltered, manipulated, expected):
    assert metrics_service.weighted_score(unaltered, manipulated) == pytest.approx(expected)


@pytest.mark.parametrize("unaltered, manipulated", [(101.0, 50.0), (50.0, -0.1)])
def test_weighted_score_range(unaltered, manipulated):
    with pytest.raises(ConstraintError):
        metrics_service.weighted_score(unaltered, manipulated)


def test_confusion_matrix_agrees_with_accuracy(rng):
    pairs = [(int(t), int(p)) for t, p in zip(rng.integers(0, 4, 60), rng.integers(0, 4, 60))]
    records = predictions(pairs)
    matrix = metrics_service.confusion_matrix(records, n_class=5)
    assert matrix.shape == (5, 5)
    assert matrix.sum() == 60
    assert np.trace(matrix) / 60 * 100 == pytest.approx(metrics_service.accuracy(records))
    assert_array_equal(matrix.sum(axis=1)[:4], np.bincount([t for t, _ in pairs], minlength=4))
    assert matrix[4].sum() == 0


def test_report_writers(tmp_path):
    records = predictions([(0, 0), (1, 0), (1, 1)])
    lines = metrics_service.write_predictions(records, tmp_path / "p.jsonl").read_text().splitlines()
    assert len(lines) == 3
    assert PredictionRecord.model_validate_json(lines[1]).final_label == 0

    matrix = metrics_service.confusion_matrix(records, 2)
    metrics_service.write_confusion(matrix, tmp_path / "c.tsv", tmp_path / "c.png")
    frame = pd.read_csv(tmp_path / "c.tsv", sep="\t", index_col=0)
    assert_array_equal(frame.to_numpy(), [[1, 0], [1, 1]])
    assert (tmp_path / "c.png").stat().st_size > 0

    metrics_service.write_sweep({20: 90.0, 1: 75.5}, tmp_path / "sweep.txt", tmp_path / "sweep.png")
    assert (tmp_path / "sweep.txt").read_text().splitlines() == ["n_votes\taccuracy", "1\t75.5000", "20\t90.0000"]

    metrics_service.write_heatmap(np.array([[0.1, 0.2], [0.3, 0.4]]), tmp_path / "h.tsv", stride=64)
    heat = pd.read_csv(tmp_path / "h.tsv", sep="\t")
    assert list(heat["col"]) == [0, 64, 0, 64]
    assert heat["quality"].iloc[3] == pytest.approx(0.4)


def test_summarize_averages_manipulated_runs():
    assert metrics_service.summarize({"gamma0.5": 80.0, "jpeg90": 90.0}) == pytest.approx(85.0)
    with pytest.raises(ConstraintError):
        metrics_service.summarize({})
