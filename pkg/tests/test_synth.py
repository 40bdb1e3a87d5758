import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import stats

from remnet.models.synth import CameraModelSpec, DatasetDescriptor, DeviceSpec, SceneGeneratorSpec, SynthConfig
from remnet.services.cluster_service import cluster_service
from remnet.services.manifest_service import manifest_service
from remnet.services.split_service import split_service
from remnet.services.synth_service import synth_service
from remnet.utils.exceptions import ConstraintError, DatasetWriteError
from remnet.utils.image_processing import ImageProcessor

SMALL = SynthConfig(n_models=3, devices_per_model=2, n_scenes=4, image_size=256)


def plain_model(**update):
    spec = CameraModelSpec(
        model_id=0, bayer_pattern="RGGB", demosaic_kernel="bilinear",
        color_matrix=np.eye(3).tolist(), noise_shape="low", noise_sigma=0.0, jpeg_quant_scale=0.0,
    )
    return spec.model_copy(update=update)


def plain_device(strength=0.0, seed=1):
    return DeviceSpec(device_id="m00_d00", model_id=0, prnu_seed=seed, prnu_strength=strength)


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    descriptor = synth_service.generate_dataset(SMALL, out, master_seed=11, workers=2)
    return out, descriptor


def test_model_specs_are_pairwise_distinct():
    specs = synth_service.make_model_specs(SynthConfig(n_models=18), seed=0)
    assert len(specs) == 18
    for i, a in enumerate(specs):
        for b in specs[i + 1:]:
            assert len(a.differing_fields(b)) >= 2
        assert np.allclose(np.sum(a.color_matrix, axis=1), 1.0, atol=1e-5)


def test_specs_are_reproducible():
    a = synth_service.make_model_specs(SMALL, seed=4)
    b = synth_service.make_model_specs(SMALL, seed=4)
    assert a == b
    devices = synth_service.make_device_specs(a, 2, seed=4)
    assert [d.device_id for d in devices] == ["m00_d00", "m00_d01", "m01_d00", "m01_d01", "m02_d00", "m02_d01"]
    assert len({d.prnu_seed for d in devices}) == 6


def test_single_device_models_are_rejected():
    models = synth_service.make_model_specs(SMALL, seed=0)
    with pytest.raises(ConstraintError):
        synth_service.make_device_specs(models, 1, seed=0)


def test_render_scene_is_deterministic_and_in_range():
    spec = SceneGeneratorSpec(scene_id="scene_000", seed=99)
    a = synth_service.render_scene(spec, 256)
    assert a.dtype == np.float32 and a.shape == (256, 256, 3)
    assert 0.0 <= a.min() and a.max() <= 1.0
    assert_array_equal(a, synth_service.render_scene(spec, 256))


def test_flat_and_textured_scenes():
    spec = SceneGeneratorSpec(scene_id="scene_000", seed=5)
    flat = synth_service.render_scene(spec, 256, flat_fraction=1.0)
    textured = synth_service.render_scene(spec, 256, flat_fraction=0.0)
    assert flat.std(axis=(0, 1)).max() < 0.01
    assert textured.std(axis=(0, 1)).min() > 0.03


def test_render_scene_rejects_small_sizes():
    with pytest.raises(ConstraintError):
        synth_service.render_scene(SceneGeneratorSpec(scene_id="s", seed=0), 128)


def test_clean_pipeline_reproduces_smooth_input():
    yy, xx = np.mgrid[0:64, 0:64] / 64.0
    ideal = np.stack([0.4 + 0.1 * xx, 0.5 + 0.1 * yy, 0.3 + 0.05 * (xx + yy)], axis=-1)
    for pattern in ("RGGB", "BGGR", "GRBG", "GBRG"):
        out = synth_service.apply_pipeline(ideal, plain_model(bayer_pattern=pattern), plain_device(), shot_seed=0)
        diff = np.abs(out.astype(int) - ImageProcessor.to_uint8(ideal).astype(int))
        assert diff.max() <= 2, pattern


def test_shot_noise_and_prnu_change_the_capture():
    ideal = np.full((64, 64, 3), 0.5)
    model = plain_model(noise_sigma=0.02)
    a = synth_service.apply_pipeline(ideal, model, plain_device(), shot_seed=1)
    assert_array_equal(a, synth_service.apply_pipeline(ideal, model, plain_device(), shot_seed=1))
    assert not np.array_equal(a, synth_service.apply_pipeline(ideal, model, plain_device(), shot_seed=2))

    clean = plain_model()
    one = synth_service.apply_pipeline(ideal, clean, plain_device(0.02, seed=1), shot_seed=0)
    two = synth_service.apply_pipeline(ideal, clean, plain_device(0.02, seed=2), shot_seed=0)
    assert not np.array_equal(one, two)


def test_prnu_field_has_requested_strength():
    field = synth_service.prnu_field(plain_device(0.01), 256, 256)
    assert abs(field.mean()) < 1e-3
    assert abs(field.std() - 0.01) < 1e-3


@pytest.mark.parametrize("shape", ["low", "mid", "high"])
def test_shaped_noise_is_unit_variance(shape):
    noise = synth_service.shaped_noise(np.random.default_rng(0), (64, 64), shape)
    assert noise.shape == (64, 64, 3)
    assert abs(noise.std() - 1.0) < 1e-6


def test_generated_dataset_layout(generated):
    out, descriptor = generated
    assert descriptor.n_images == 3 * 2 * 4
    records = manifest_service.read(out / "manifest.tsv")
    assert len(records) == 24
    assert all((r.width, r.height) == (256, 256) for r in records)
    assert {r.device_id for r in records} == {f"m{m:02d}_d{d:02d}" for m in range(3) for d in range(2)}

    reloaded = DatasetDescriptor.model_validate(json.loads((out / "dataset.json").read_text()))
    assert reloaded == descriptor


def test_generated_dataset_splits_cleanly(generated):
    out, _ = generated
    split = split_service.split_by_device_scene(manifest_service.read(out / "manifest.tsv"))
    assert split.violations == []
    assert len(split.test) == 3
    assert len(split.train) + len(split.val) == 9


def test_generation_is_bit_exact(generated, tmp_path):
    out, _ = generated
    synth_service.generate_dataset(SMALL, tmp_path, master_seed=11, workers=1)
    for rel in ("images/m00_d00/scene_000.png", "images/m02_d01/scene_003.png"):
        assert_array_equal(ImageProcessor.load_rgb(out / rel), ImageProcessor.load_rgb(tmp_path / rel))


def test_images_per_device_above_scene_count_is_rejected(tmp_path):
    config = SMALL.model_copy(update={"images_per_device": 5})
    with pytest.raises(ConstraintError):
        synth_service.generate_dataset(config, tmp_path)


def test_failed_write_leaves_no_manifest(tmp_path):
    (tmp_path / "images").write_text("not a directory")
    with pytest.raises(DatasetWriteError):
        synth_service.generate_dataset(SMALL, tmp_path, master_seed=0, workers=1)
    assert not (tmp_path / "manifest.tsv").exists()
    assert not (tmp_path / "dataset.json").exists()


def test_lattice_concentration_separates_quantization_steps():
    gen = np.random.default_rng(0)
    on_grid = 3.0 * gen.integers(1, 20, size=500) * gen.choice([-1, 1], size=500)
    assert synth_service.lattice_concentration(on_grid, 3) > 0.99
    assert synth_service.lattice_concentration(on_grid, 2) < 0.2
    assert synth_service.lattice_concentration(np.zeros(10), 3) == 0.0


def test_residue_features_shape_and_jpeg_sensitivity():
    spec = SceneGeneratorSpec(scene_id="scene_000", seed=3)
    ideal = synth_service.render_scene(spec, 256, flat_fraction=0.0)
    mild = synth_service.apply_pipeline(ideal, plain_model(noise_sigma=0.01, jpeg_quant_scale=0.05), plain_device(), 0)
    harsh = synth_service.apply_pipeline(ideal, plain_model(noise_sigma=0.01, jpeg_quant_scale=0.4), plain_device(), 0)
    a = synth_service.residue_features(synth_service.aligned_center_crop(mild, 64))
    b = synth_service.residue_features(synth_service.aligned_center_crop(harsh, 64))
    assert a.shape == b.shape == (21,)
    assert np.all(np.isfinite(a)) and not np.allclose(a[6:], b[6:])


def test_aligned_center_crop_snaps_to_block_grid():
    pixels = np.zeros((300, 270, 3), dtype=np.uint8)
    pixels[16, 0] = 1
    crop = synth_service.aligned_center_crop(pixels, 256)
    assert crop.shape == (256, 256, 3)
    assert crop[0, 0, 0] == 1  # row offset 22 snaps to 16, column offset 7 to 0


def test_device_difference_tracks_prnu_difference():
    model = synth_service.make_model_specs(SynthConfig(), seed=0)[0]
    dev_a, dev_b = synth_service.make_device_specs([model], 2, seed=0, strength=0.01)
    field_diff = synth_service.prnu_field(dev_a, 256, 256) - synth_service.prnu_field(dev_b, 256, 256)
    correlations = []
    for k, spec in enumerate(synth_service.make_scene_specs(4, seed=7)):
        ideal = synth_service.render_scene(spec, 256, flat_fraction=0.0)
        a = synth_service.apply_pipeline(ideal, model, dev_a, shot_seed=2 * k).astype(np.float64)
        b = synth_service.apply_pipeline(ideal, model, dev_b, shot_seed=2 * k + 1).astype(np.float64)
        correlations.append(np.corrcoef((a - b).mean(axis=2).ravel(), field_diff.ravel())[0, 1])
    assert np.mean(correlations) > 0.3


@pytest.mark.slow
def test_models_differ_in_residue_variance_over_fifty_scenes():
    models = synth_service.make_model_specs(SynthConfig(), seed=0)[:2]
    devices = synth_service.make_device_specs(models, 2, seed=0)
    log_ratios = []
    for k, spec in enumerate(synth_service.make_scene_specs(50, seed=1)):
        ideal = synth_service.render_scene(spec, 256)
        variances = []
        for model, device in ((models[0], devices[0]), (models[1], devices[2])):
            pixels = synth_service.apply_pipeline(ideal, model, device, shot_seed=k)
            residue = ImageProcessor.highpass_filter(ImageProcessor.to_unit(pixels))[2:-2, 2:-2]
            variances.append(float(residue.var()))
        log_ratios.append(np.log(variances[0] / variances[1]))
    assert stats.ttest_1samp(log_ratios, 0.0).pvalue < 0.05


@pytest.mark.slow
def test_default_scenes_mix_textured_and_flat_windows():
    scores = np.concatenate([
        cluster_service.score_map(ImageProcessor.to_uint8(synth_service.render_scene(spec, 512))).ravel()
        for spec in synth_service.make_scene_specs(20, seed=0)
    ])
    assert np.mean(scores > 0.5) >= 0.3
    assert np.mean(scores < 0.2) >= 0.1


@pytest.fixture(scope="module")
def four_models(tmp_path_factory):
    out = tmp_path_factory.mktemp("four_models")
    synth_service.generate_dataset(SynthConfig(n_scenes=12, image_size=256), out, master_seed=0, workers=2)
    return manifest_service.read(out / "manifest.tsv")


@pytest.mark.slow
def test_fingerprint_oracle_separates_four_models(four_models):
    accuracy = synth_service.fingerprint_oracle_accuracy(four_models, seed=0, patches_per_image=8)
    assert accuracy > 60
    assert accuracy == synth_service.fingerprint_oracle_accuracy(four_models, seed=0, patches_per_image=8)


@pytest.mark.slow
def test_fingerprint_oracle_ignores_scene_assignment(four_models):
    baseline = synth_service.fingerprint_oracle_accuracy(four_models, seed=0)
    scene_ids = sorted({r.scene_id for r in four_models})
    gen = np.random.default_rng(5)
    shuffles = {m: dict(zip(scene_ids, gen.permutation(scene_ids))) for m in {r.model_label for r in four_models}}
    shuffled = [r.model_copy(update={"scene_id": str(shuffles[r.model_label][r.scene_id])}) for r in four_models]
    assert abs(synth_service.fingerprint_oracle_accuracy(shuffled, seed=0) - baseline) <= 10
