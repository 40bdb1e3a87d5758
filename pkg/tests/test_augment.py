import numpy as np
import pytest
from numpy.testing import assert_array_equal
from pydantic import ValidationError

from remnet.models.base import AugmentationKind
from remnet.models.dataset import AugmentationSpec, ImageRecord, manipulation_sets, training_augmentations
from remnet.services.augmentation_service import augmentation_service
from remnet.services.cluster_service import cluster_service
from remnet.utils.image_processing import ImageProcessor


def spec(kind, factor=1.0):
    return AugmentationSpec(kind=kind, factor=factor)


def test_identity_manipulations(textured_image):
    for s in (spec("none"), spec("gamma", 1.0), spec("rescale", 1.0)):
        out = augmentation_service.augment(textured_image, s)
        assert_array_equal(out, textured_image)
        assert out is not textured_image


def test_half_scale_gives_single_cluster(textured_image):
    small = augmentation_service.augment(textured_image, spec("rescale", 0.5))
    assert small.shape == (256, 256, 3)
    record = ImageRecord(path="mem", model_label=0, device_id="d", scene_id="s")
    assert len(cluster_service.extract_top_clusters(small, record)) == 1


def test_upscale_doubles_both_dimensions(textured_image):
    assert augmentation_service.augment(textured_image[:100, :60], spec("rescale", 2.0)).shape == (200, 120, 3)


def test_jpeg_quality_sequence_degrades_monotonically(textured_image):
    psnrs = [
        ImageProcessor.psnr(textured_image, augmentation_service.augment(textured_image, spec("jpeg", q)))
        for q in (90, 80, 70)
    ]
    assert psnrs[0] >= psnrs[1] >= psnrs[2]
    assert all(np.isfinite(p) for p in psnrs)


def test_gamma_inverse_recovers_image_within_one_level(textured_image):
    there = augmentation_service.augment(textured_image, spec("gamma", 0.8))
    back = augmentation_service.augment(there, spec("gamma", 1.25))
    diff = np.abs(back.astype(int) - textured_image.astype(int))
    assert diff.max() <= 1


def test_gamma_brightens_below_one():
    pixels = np.full((4, 4, 3), 64, dtype=np.uint8)
    assert augmentation_service.augment(pixels, spec("gamma", 0.8)).min() > 64


@pytest.mark.parametrize("kind, factor", [("jpeg", 75), ("rescale", 3.0), ("gamma", 2.0)])
def test_illegal_factors_are_rejected(kind, factor):
    with pytest.raises(ValidationError):
        spec(kind, factor)


def test_factor_sets():
    train = training_augmentations()
    assert len(train) == 9
    assert sorted(s.factor for s in train if s.kind == AugmentationKind.JPEG) == [70, 80, 90]
    sets = manipulation_sets()
    assert sorted(s.factor for s in sets["gamma"]) == [0.5, 0.75, 1.25, 1.5]
    assert sorted(s.factor for s in sets["rescale"]) == [0.8, 0.9, 1.1, 1.2]
    assert len({s.tag for group in sets.values() for s in group}) == 12


def test_augment_manifest_writes_nine_copies(tmp_path, textured_image):
    source = ImageProcessor.save_png(textured_image, tmp_path / "src" / "a.png")
    record = ImageRecord(path=str(source), model_label=2, device_id="m2_d0", scene_id="scene_000")
    out = augmentation_service.augment_manifest([record], tmp_path / "aug", workers=2)

    assert len(out) == 10
    assert out[0].path == str(source)
    assert (out[0].width, out[0].height) == (512, 512)
    assert all(r.model_label == 2 and r.device_id == "m2_d0" and r.scene_id == "scene_000" for r in out)
    for r in out[1:]:
        pixels = ImageProcessor.load_rgb(r.path)
        assert pixels.shape == (r.height, r.width, 3)
    assert {(r.width, r.height) for r in out} >= {(256, 256), (1024, 1024)}
    assert_array_equal(ImageProcessor.load_rgb(source), textured_image)


def test_psnr_of_identical_images_is_infinite(textured_image):
    assert ImageProcessor.psnr(textured_image, textured_image.copy()) == float("inf")
