"""Synthetic camera simulator.

A surrogate acquisition pipeline with model-level fingerprints (CFA layout,
demosaic kernel, color matrix, noise spectrum, JPEG tables) and a per-device
PRNU field. It is not a radiometric camera model; every knob lives in
``SynthConfig`` so a dataset can be regenerated bit-exactly from its
descriptor.
"""

import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft, ndimage
from sklearn.neighbors import NearestCentroid
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from remnet.config import settings
from remnet.models.base import BayerPattern, DemosaicKernel, NoiseShape
from remnet.models.dataset import ImageRecord
from remnet.models.synth import (
    CameraModelSpec,
    DatasetDescriptor,
    DeviceSpec,
    SceneGeneratorSpec,
    SynthConfig,
)
from remnet.services.cluster_service import cluster_service
from remnet.services.manifest_service import manifest_service
from remnet.services.split_service import split_service
from remnet.utils.exceptions import ConstraintError, DatasetWriteError
from remnet.utils.image_processing import ImageProcessor

logger = logging.getLogger(__name__)

# Channel index (0=R, 1=G, 2=B) at each position of the 2x2 CFA tile
CFA_LAYOUTS: Dict[BayerPattern, Tuple[Tuple[int, int], Tuple[int, int]]] = {
    BayerPattern.RGGB: ((0, 1), (1, 2)),
    BayerPattern.BGGR: ((2, 1), (1, 0)),
    BayerPattern.GRBG: ((1, 0), (2, 1)),
    BayerPattern.GBRG: ((1, 2), (0, 1)),
}

# Positive interpolation weights, so every normalized-convolution denominator is > 0
DEMOSAIC_KERNELS: Dict[DemosaicKernel, np.ndarray] = {
    DemosaicKernel.BILINEAR: np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], dtype=np.float64),
    DemosaicKernel.SMOOTH: np.outer([1, 4, 6, 4, 1], [1, 4, 6, 4, 1]).astype(np.float64),
    DemosaicKernel.BOX: np.ones((3, 3), dtype=np.float64),
}

# Standard baseline JPEG tables (luminance, chrominance), row-major
STANDARD_LUMA_TABLE = np.array([
    16, 11, 10, 16, 24, 40, 51, 61,
    12, 12, 14, 19, 26, 58, 60, 55,
    14, 13, 16, 24, 40, 57, 69, 56,
    14, 17, 22, 29, 51, 87, 80, 62,
    18, 22, 37, 56, 68, 109, 103, 77,
    24, 35, 55, 64, 81, 104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101,
    72, 92, 95, 98, 112, 100, 103, 99,
])
STANDARD_CHROMA_TABLE = np.array([
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
] + [99] * 32)

NOISE_SIGMA_FACTORS = (1.0, 1.4, 0.7, 1.2)

# Separability oracle: JPEG color transform and the block-DCT lattice it inspects
JPEG_BLOCK = 8
YCBCR_MATRIX = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
LATTICE_PERIODS = (2, 3, 4, 5, 6)
LATTICE_POSITIONS = ((0, 1), (0, 2), (0, 3), (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2))


def _seed_int(seq: np.random.SeedSequence) -> int:
    return int(seq.generate_state(1, dtype=np.uint32)[0])


class SynthService:
    """Service for rendering scenes and simulating camera captures"""

    # -- spec factories ----------------------------------------------------
    def make_model_specs(self, config: SynthConfig, seed: int) -> List[CameraModelSpec]:
        """Deterministic model specs; any two differ in at least two fields"""
        rng = np.random.default_rng(seed)
        patterns = list(BayerPattern)
        kernels = list(DemosaicKernel)
        shapes = list(NoiseShape)
        scales = config.jpeg_quant_scales or [1.0]
        specs = []
        for i in range(config.n_models):
            mix = np.eye(3) + rng.uniform(-0.08, 0.08, size=(3, 3)) * (1.0 - np.eye(3))
            mix /= mix.sum(axis=1, keepdims=True)
            specs.append(
                CameraModelSpec(
                    model_id=i,
                    bayer_pattern=patterns[i % len(patterns)],
                    demosaic_kernel=kernels[i % len(kernels)],
                    color_matrix=np.round(mix, 6).tolist(),
                    noise_shape=shapes[(i + 1) % len(shapes)],
                    noise_sigma=config.noise_sigma * NOISE_SIGMA_FACTORS[i % len(NOISE_SIGMA_FACTORS)],
                    jpeg_quant_scale=scales[i % len(scales)] * (1.0 + 0.25 * (i // 12)),
                )
            )
        for a in range(len(specs)):
            for b in range(a + 1, len(specs)):
                if len(specs[a].differing_fields(specs[b])) < 2:
                    raise ConstraintError(f"camera models {a} and {b} differ in fewer than two fields")
        return specs

    def make_device_specs(self, models: Sequence[CameraModelSpec], devices_per_model: int, seed: int,
                          strength: float = 0.01) -> List[DeviceSpec]:
        if devices_per_model < 2:
            raise ConstraintError(f"devices_per_model must be >= 2 for device-disjoint splits, got {devices_per_model}")
        children = np.random.SeedSequence(seed).spawn(len(models) * devices_per_model)
        devices = []
        for m, model in enumerate(models):
            for d in range(devices_per_model):
                devices.append(
                    DeviceSpec(
                        device_id=f"m{model.model_id:02d}_d{d:02d}",
                        model_id=model.model_id,
                        prnu_seed=_seed_int(children[m * devices_per_model + d]),
                        prnu_strength=strength,
                    )
                )
        return devices

    def make_scene_specs(self, n_scenes: int, seed: int) -> List[SceneGeneratorSpec]:
        children = np.random.SeedSequence(seed).spawn(n_scenes)
        return [SceneGeneratorSpec(scene_id=f"scene_{k:03d}", seed=_seed_int(s)) for k, s in enumerate(children)]

    # -- scene rendering -----------------------------------------------------
    def render_scene(self, spec: SceneGeneratorSpec, size: int = 512, flat_fraction: float = 0.25) -> np.ndarray:
        """Ideal RGB image in [0, 1] (float32), deterministic per seed.

        About ``flat_fraction`` of scenes are nearly uniform dark or bright
        frames; the rest mix value-noise texture, geometric shapes and an
        optional flat sky band.
        """
        if size < 256:
            raise ConstraintError(f"scene size must be >= 256, got {size}")
        rng = np.random.default_rng(spec.seed)
        yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size

        if rng.random() < flat_fraction:
            level = rng.uniform(0.02, 0.05) if rng.random() < 0.5 else rng.uniform(0.95, 0.98)
            tilt = rng.uniform(-0.01, 0.01, size=2)
            plane = level + tilt[0] * (yy - 0.5) + tilt[1] * (xx - 0.5)
            image = plane[..., None] + rng.uniform(-0.005, 0.005, size=3)
            return np.clip(image, 0.0, 1.0).astype(np.float32)

        image = np.empty((size, size, 3))
        image[...] = rng.uniform(0.35, 0.65) + rng.uniform(-0.05, 0.05, size=3)
        slope = rng.uniform(-0.1, 0.1, size=2)
        image += (slope[0] * (yy - 0.5) + slope[1] * (xx - 0.5))[..., None]

        for cell, amplitude in ((64, 0.12), (32, 0.08), (16, 0.05), (8, 0.03)):
            image += amplitude * self._value_noise(rng, size, cell)[..., None]
            image += 0.3 * amplitude * np.stack([self._value_noise(rng, size, cell) for _ in range(3)], axis=-1)

        for _ in range(int(rng.integers(6, 16))):
            color = rng.uniform(0.3, 0.7, size=3)
            half_h, half_w = rng.uniform(size / 32, size / 8, size=2)
            cy, cx = rng.uniform(0, size, size=2)
            if rng.random() < 0.5:
                mask = (np.abs(yy * size - cy) < half_h) & (np.abs(xx * size - cx) < half_w)
            else:
                mask = ((yy * size - cy) / half_h) ** 2 + ((xx * size - cx) / half_w) ** 2 < 1.0
            shade = 1.0 + 0.1 * self._value_noise(rng, size, 16)
            image[mask] = color * shade[mask][:, None]

        if rng.random() < 0.5:
            band = int(rng.uniform(0.1, 0.35) * size)
            sky = rng.uniform(0.85, 0.95) + rng.uniform(-0.02, 0.02, size=3)
            image[:band] = sky + 0.02 * yy[:band, :, None]

        return np.clip(image, 0.0, 1.0).astype(np.float32)

    @staticmethod
    def _value_noise(rng: np.random.Generator, size: int, cell: int) -> np.ndarray:
        """Unit-variance smooth noise with feature size ``cell`` pixels"""
        coarse = rng.standard_normal((size // cell + 2, size // cell + 2))
        fine = ndimage.zoom(coarse, cell, order=3)[:size, :size]
        return (fine - fine.mean()) / (fine.std() + 1e-12)

    # -- acquisition pipeline --------------------------------------------------
    @staticmethod
    def cfa_masks(pattern: BayerPattern, height: int, width: int) -> np.ndarray:
        layout = CFA_LAYOUTS[BayerPattern(pattern)]
        masks = np.zeros((height, width, 3), dtype=bool)
        for dy in range(2):
            for dx in range(2):
                masks[dy::2, dx::2, layout[dy][dx]] = True
        return masks

    def demosaic(self, mosaic: np.ndarray, pattern: BayerPattern, kernel: DemosaicKernel) -> np.ndarray:
        """Normalized convolution of each sparse channel with the model's kernel"""
        masks = self.cfa_masks(pattern, *mosaic.shape)
        weights = DEMOSAIC_KERNELS[DemosaicKernel(kernel)]
        out = np.empty(mosaic.shape + (3,))
        for c in range(3):
            m = masks[..., c].astype(np.float64)
            num = ndimage.convolve(mosaic * m, weights, mode="mirror")
            den = ndimage.convolve(m, weights, mode="mirror")
            out[..., c] = num / den
        return out

    def mosaic_and_demosaic(self, ideal: np.ndarray, model: CameraModelSpec) -> np.ndarray:
        masks = self.cfa_masks(model.bayer_pattern, *ideal.shape[:2])
        mosaic = (ideal.astype(np.float64) * masks).sum(axis=-1)
        return self.demosaic(mosaic, model.bayer_pattern, model.demosaic_kernel)

    @staticmethod
    def prnu_field(device: DeviceSpec, height: int, width: int) -> np.ndarray:
        """Zero-mean multiplicative field with standard deviation ``prnu_strength``"""
        rng = np.random.default_rng(device.prnu_seed)
        return device.prnu_strength * rng.standard_normal((height, width))

    @staticmethod
    def shaped_noise(rng: np.random.Generator, shape: Tuple[int, int], noise_shape: NoiseShape) -> np.ndarray:
        """Unit-variance (H, W, 3) noise with low-, mid- or high-frequency emphasis"""
        white = rng.standard_normal(shape + (3,))
        if noise_shape == NoiseShape.LOW:
            shaped = ndimage.gaussian_filter(white, sigma=(1.5, 1.5, 0))
        elif noise_shape == NoiseShape.MID:
            shaped = ndimage.gaussian_filter(white, sigma=(0.7, 0.7, 0)) - ndimage.gaussian_filter(white, sigma=(2.5, 2.5, 0))
        else:
            shaped = white - ndimage.gaussian_filter(white, sigma=(1.0, 1.0, 0))
        return shaped / (shaped.std() + 1e-12)

    @staticmethod
    def quant_tables(scale: float) -> List[List[int]]:
        return [
            np.clip(np.rint(STANDARD_LUMA_TABLE * scale), 1, 255).astype(int).tolist(),
            np.clip(np.rint(STANDARD_CHROMA_TABLE * scale), 1, 255).astype(int).tolist(),
        ]

    def apply_pipeline(self, ideal: np.ndarray, model: CameraModelSpec, device: DeviceSpec, shot_seed: int) -> np.ndarray:
        """Mosaic, demosaic, PRNU, color matrix, shaped noise, JPEG; returns uint8 RGB"""
        height, width = ideal.shape[:2]
        image = self.mosaic_and_demosaic(ideal, model)
        image *= 1.0 + self.prnu_field(device, height, width)[..., None]
        image = image @ np.asarray(model.color_matrix, dtype=np.float64).T
        if model.noise_sigma > 0:
            rng = np.random.default_rng(shot_seed)
            image += model.noise_sigma * self.shaped_noise(rng, (height, width), model.noise_shape)
        pixels = ImageProcessor.to_uint8(np.clip(image, 0.0, 1.0))
        if model.jpeg_quant_scale > 0:
            pixels = ImageProcessor.jpeg_round_trip(pixels, qtables=self.quant_tables(model.jpeg_quant_scale))
        return pixels

    # -- dataset generation ------------------------------------------------------
    def generate_dataset(
        self,
        config: SynthConfig,
        out_dir: Union[str, Path],
        master_seed: int = 0,
        workers: Optional[int] = None,
    ) -> DatasetDescriptor:
        """Write images, ``manifest.tsv`` and ``dataset.json`` under ``out_dir``.

        Any write failure removes the partially written image tree before
        raising.
        """
        out_dir = Path(out_dir)
        workers = workers or settings.worker_count
        model_seq, device_seq, scene_seq, pick_seq = np.random.SeedSequence(master_seed).spawn(4)

        models = self.make_model_specs(config, _seed_int(model_seq))
        devices = self.make_device_specs(models, config.devices_per_model, _seed_int(device_seq), config.prnu_strength)
        scenes = self.make_scene_specs(config.n_scenes, _seed_int(scene_seq))
        models_by_id = {m.model_id: m for m in models}

        per_device = config.images_per_device or config.n_scenes
        if per_device > config.n_scenes:
            raise ConstraintError(
                f"images_per_device ({per_device}) exceeds the number of scenes ({config.n_scenes})"
            )
        pick_rng = np.random.default_rng(pick_seq)
        jobs = []
        for d_idx, device in enumerate(devices):
            if per_device == config.n_scenes:
                chosen = range(config.n_scenes)
            else:
                chosen = sorted(pick_rng.choice(config.n_scenes, size=per_device, replace=False).tolist())
            for s_idx in chosen:
                shot_seed = _seed_int(np.random.SeedSequence([master_seed, d_idx, s_idx]))
                jobs.append((device, scenes[s_idx], shot_seed))

        needed = sorted({scene.scene_id for _, scene, _ in jobs})
        scene_by_id = {s.scene_id: s for s in scenes}
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rendered = dict(zip(needed, pool.map(
                lambda sid: self.render_scene(scene_by_id[sid], config.image_size, config.flat_scene_fraction),
                needed,
            )))

        image_dir = out_dir / "images"

        def capture(job) -> ImageRecord:
            device, scene, shot_seed = job
            pixels = self.apply_pipeline(rendered[scene.scene_id], models_by_id[device.model_id], device, shot_seed)
            target = image_dir / device.device_id / f"{scene.scene_id}.png"
            ImageProcessor.save_png(pixels, target)
            return ImageRecord(
                path=str(target),
                model_label=device.model_id,
                device_id=device.device_id,
                scene_id=scene.scene_id,
                width=pixels.shape[1],
                height=pixels.shape[0],
            )

        try:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(capture, jobs))
            manifest_path = manifest_service.write(records, out_dir / "manifest.tsv")
            descriptor = DatasetDescriptor(
                master_seed=master_seed,
                config=config,
                models=models,
                devices=devices,
                scenes=scenes,
                n_images=len(records),
                manifest=manifest_path.name,
            )
            (out_dir / "dataset.json").write_text(descriptor.model_dump_json(indent=2), encoding="utf-8")
        except (OSError, DatasetWriteError) as e:
            shutil.rmtree(image_dir, ignore_errors=True)
            for name in ("manifest.tsv", "dataset.json"):
                (out_dir / name).unlink(missing_ok=True)
            if isinstance(e, DatasetWriteError):
                raise
            raise DatasetWriteError(f"Synthetic dataset generation failed: {e}", {"out_dir": str(out_dir)})

        logger.info(
            f"Generated {len(records)} images: {len(models)} models x "
            f"{config.devices_per_model} devices, {len(needed)} scenes -> {out_dir}"
        )
        return descriptor

    # -- separability oracle -------------------------------------------------------
    @staticmethod
    def block_dct(channel: np.ndarray) -> np.ndarray:
        """Orthonormal 8x8 block DCT of a grid-aligned (H, W) plane -> (blocks, 8, 8)"""
        h, w = (channel.shape[0] // JPEG_BLOCK) * JPEG_BLOCK, (channel.shape[1] // JPEG_BLOCK) * JPEG_BLOCK
        blocks = channel[:h, :w].reshape(h // JPEG_BLOCK, JPEG_BLOCK, w // JPEG_BLOCK, JPEG_BLOCK)
        blocks = blocks.transpose(0, 2, 1, 3).reshape(-1, JPEG_BLOCK, JPEG_BLOCK)
        return fft.dctn(blocks, type=2, norm="ortho", axes=(1, 2))

    @staticmethod
    def lattice_concentration(values: np.ndarray, period: int, min_magnitude: float = 1.5) -> float:
        """How tightly coefficients sit on multiples of ``period``, in [0, 1].

        Mean resultant length of the phases 2*pi*v/period, bias-corrected for
        the sample count; near-zero coefficients are skipped.
        """
        values = values[np.abs(values) >= min_magnitude]
        n = values.size
        if n < 2:
            return 0.0
        resultant = np.exp(2j * np.pi * values / period).sum()
        return float(np.sqrt(max((np.abs(resultant) ** 2 - n) / (n * (n - 1)), 0.0)))

    @classmethod
    def residue_features(cls, patch: np.ndarray) -> np.ndarray:
        """Noise-floor and quantization-lattice statistics of one grid-aligned uint8 patch.

        Per RGB channel: log median absolute high-pass residue and median
        residual. Per YCbCr channel and period: lattice concentration of the
        low-frequency block-DCT coefficients.
        """
        unit = ImageProcessor.to_unit(patch).astype(np.float64)
        residue = ImageProcessor.highpass_filter(unit)[2:-2, 2:-2]
        median = ImageProcessor.median_residual(unit)[2:-2, 2:-2]
        features = []
        for c in range(3):
            features.append(np.log(np.median(np.abs(residue[..., c])) + 0.5 / 255))
            features.append(np.log(np.median(np.abs(median[..., c])) + 0.5 / 255))

        ycbcr = patch.astype(np.float64) @ YCBCR_MATRIX.T
        rows, cols = zip(*LATTICE_POSITIONS)
        for c in range(3):
            coefficients = cls.block_dct(ycbcr[..., c])[:, rows, cols]
            for period in LATTICE_PERIODS:
                features.append(np.mean([cls.lattice_concentration(coefficients[:, k], period)
                                         for k in range(len(LATTICE_POSITIONS))]))
        return np.nan_to_num(np.asarray(features))

    @staticmethod
    def aligned_center_crop(pixels: np.ndarray, size: int) -> np.ndarray:
        """Center crop snapped to the JPEG block grid"""
        r = ((pixels.shape[0] - size) // 2) // JPEG_BLOCK * JPEG_BLOCK
        c = ((pixels.shape[1] - size) // 2) // JPEG_BLOCK * JPEG_BLOCK
        return pixels[r:r + size, c:c + size]

    def fingerprint_oracle_accuracy(self, records: Sequence[ImageRecord], seed: int = 0,
                                    patches_per_image: int = 8) -> float:
        """Patch accuracy (%) of a nearest-centroid classifier on residue statistics.

        Trained on the train/val devices and scored on the held-out devices of
        a device/scene-disjoint split.
        """
        split = split_service.split_by_device_scene(records, seed=seed)
        train_records = split.train + split.val
        if not train_records or not split.test:
            raise ConstraintError("fingerprint oracle needs non-empty train and test splits")

        def featurize(group: Sequence[ImageRecord]):
            xs, ys = [], []
            for record in group:
                pixels = ImageProcessor.load_rgb(record.path)
                cluster = self.aligned_center_crop(pixels, 256)
                tiles = cluster_service.non_overlapping_patches(cluster)
                step = max(1, len(tiles) // patches_per_image)
                for tile in tiles[::step][:patches_per_image]:
                    xs.append(self.residue_features(tile))
                    ys.append(record.model_label)
            return np.array(xs), np.array(ys)

        x_train, y_train = featurize(train_records)
        x_test, y_test = featurize(split.test)
        oracle = make_pipeline(StandardScaler(), NearestCentroid())
        oracle.fit(x_train, y_train)
        accuracy = 100.0 * float(oracle.score(x_test, y_test))
        logger.info(f"Fingerprint oracle patch accuracy on held-out devices: {accuracy:.2f}%")
        return accuracy


# Global instance
synth_service = SynthService()
