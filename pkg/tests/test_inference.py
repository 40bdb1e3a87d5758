import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from remnet.models.dataset import AugmentationSpec, ClusterRecord, ImageRecord
from remnet.services.inference_service import inference_service
from remnet.services.manifest_service import manifest_service
from remnet.utils.exceptions import ConstraintError


class BrightnessModel:
    """Two-class stand-in: P(class 1) is the mean patch brightness"""

    input_shape = (64, 64, 3)
    n_class = 2

    def eval(self):
        return self

    def probabilities(self, x):
        bright = x.data.mean(axis=(1, 2, 3)).astype(np.float64)
        return np.stack([1.0 - bright, bright], axis=1)


def test_vote_tie_goes_to_larger_probability_mass():
    labels = [0] * 10 + [1] * 10
    probs = [np.array([0.5, 0.3, 0.1, 0.1])] * 10 + [np.array([0.19, 0.42, 0.2, 0.19])] * 10
    final, tally = inference_service.vote(labels, probs, n_class=4)
    # class 0 sums to 6.9, class 1 to 7.2
    assert final == 1
    assert_array_equal(tally, [10, 10, 0, 0])


def test_vote_majority_ignores_probabilities():
    labels = [2] * 11 + [0] * 9
    probs = [np.array([0.34, 0.0, 0.66])] * 11 + [np.array([1.0, 0.0, 0.0])] * 9
    final, tally = inference_service.vote(labels, probs, n_class=3)
    assert final == 2
    assert tally.sum() == 20


def test_vote_unanimous():
    final, _ = inference_service.vote([3] * 5, [np.eye(4)[3]] * 5, n_class=4)
    assert final == 3


def test_vote_exact_tie_goes_to_lowest_index():
    final, _ = inference_service.vote([1, 0], [np.array([0.5, 0.5])] * 2, n_class=2)
    assert final == 0


def test_vote_is_order_independent(rng):
    labels = [0, 1, 2] * 4
    probs = [rng.dirichlet(np.ones(3)) for _ in labels]
    expected, _ = inference_service.vote(labels, probs, 3)
    for _ in range(10):
        perm = rng.permutation(len(labels))
        final, _ = inference_service.vote([labels[i] for i in perm], [probs[i] for i in perm], 3)
        assert final == expected


def test_vote_needs_clusters():
    with pytest.raises(ConstraintError):
        inference_service.vote([], [], 2)


def test_predict_cluster_averages_patch_probabilities():
    cluster = np.zeros((256, 256, 3), dtype=np.uint8)
    # 4 of the 16 patches are white
    cluster[:64, :] = 255
    label, mean = inference_service.predict_cluster(BrightnessModel(), cluster)
    assert_allclose(mean, [0.75, 0.25])
    assert label == 0


def test_predict_image_collects_per_cluster_votes(textured_image):
    record = ImageRecord(path="img.png", model_label=1, device_id="d", scene_id="s")
    prediction = inference_service.predict_image(BrightnessModel(), textured_image, record, n_votes=3)
    assert len(prediction.cluster_labels) == 3
    assert sum(prediction.vote_tally) == 3
    assert all(abs(sum(p) - 1.0) < 1e-9 for p in prediction.cluster_probabilities)
    assert prediction.true_label == 1


def test_record_without_clusters_is_rejected():
    record = ImageRecord(path="img.png", model_label=0, device_id="d", scene_id="s")
    with pytest.raises(ConstraintError):
        inference_service.record_from_clusters(BrightnessModel(), [], record)


def test_evaluate_and_sweep_on_brightness_coded_images(small_dataset):
    records = manifest_service.read(small_dataset)
    model = BrightnessModel()

    predictions, metrics = inference_service.evaluate(model, records, n_votes=5, workers=2)
    assert metrics.accuracy == 100.0
    assert metrics.n_images == metrics.n_correct == 24
    assert [p.path for p in predictions] == [r.path for r in records]
    # 256x256 images hold a single cluster
    assert all(len(p.cluster_labels) == 1 for p in predictions)

    jpeg = AugmentationSpec(kind="jpeg", factor=90)
    predictions, metrics = inference_service.evaluate(model, records, manipulation=jpeg, workers=2)
    assert metrics.accuracy == 100.0
    assert {p.manipulation for p in predictions} == {"jpeg90"}

    sweep = inference_service.voting_sweep(model, records, n_list=(5, 1), workers=2)
    assert sweep == {1: 100.0, 5: 100.0}


def test_evaluate_flags_images_short_of_clusters(small_dataset):
    records = manifest_service.read(small_dataset)[:4]
    predictions, metrics = inference_service.evaluate(BrightnessModel(), records, n_votes=20, workers=1)
    assert all(p.cluster_shortfall == 19 for p in predictions)
    assert metrics.images_with_shortfall == 4


def test_evaluate_uses_the_requested_cluster_size(small_dataset):
    records = manifest_service.read(small_dataset)[:4]
    predictions, metrics = inference_service.evaluate(BrightnessModel(), records, n_votes=20, workers=1,
                                                      cluster_size=128)
    # a 128 window on a 64 stride fits 3 x 3 times into 256x256
    assert all(len(p.cluster_labels) == 9 for p in predictions)
    assert all(p.cluster_shortfall == 11 for p in predictions)
    assert metrics.accuracy == 100.0

    sweep = inference_service.voting_sweep(BrightnessModel(), records, n_list=(9,), workers=1, cluster_size=128)
    assert sweep == {9: 100.0}


def test_batched_cluster_prediction_matches_single(textured_image):
    record = ImageRecord(path="img.png", model_label=0, device_id="d", scene_id="s")
    clusters = [
        ClusterRecord(source=record, origin=(r, c), size=256, quality=0.0,
                      pixels=textured_image[r:r + 256, c:c + 256])
        for r, c in ((0, 0), (128, 64), (256, 256))
    ]
    batched = inference_service.predict_clusters(BrightnessModel(), clusters)
    for cluster, (label, mean) in zip(clusters, batched):
        single_label, single_mean = inference_service.predict_cluster(BrightnessModel(), cluster.pixels)
        assert label == single_label
        assert_allclose(mean, single_mean, rtol=1e-6)


def test_evaluate_rejects_empty_sets():
    with pytest.raises(ConstraintError):
        inference_service.evaluate(BrightnessModel(), [])
