"""Shared fixtures"""

from pathlib import Path
from typing import List

import numpy as np
import pytest

from remnet.models.architecture import ArchitectureDescriptor
from remnet.models.dataset import ImageRecord
from remnet.services.manifest_service import manifest_service
from remnet.utils.image_processing import ImageProcessor


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def textured_image() -> np.ndarray:
    """512x512 uint8 image with smooth texture and a flat black corner"""
    gen = np.random.default_rng(7)
    yy, xx = np.mgrid[0:512, 0:512] / 512.0
    base = 0.5 + 0.2 * np.sin(12 * xx)[..., None] * np.cos(9 * yy)[..., None]
    base = base + 0.1 * gen.standard_normal((512, 512, 3))
    base[:256, :256] = 0.0
    return ImageProcessor.to_uint8(np.clip(base, 0, 1))


@pytest.fixture
def toy_descriptor() -> ArchitectureDescriptor:
    """Small cascade: two narrow remnant blocks and the toy head"""
    return ArchitectureDescriptor(
        preprocessing="remnant",
        remnant_filters=[4, 4],
        classifier="toy",
        toy_filters=[8, 8],
        n_class=2,
        input_size=64,
    )


def write_dataset(root: Path, n_models: int = 2, n_devices: int = 2, n_scenes: int = 2,
                  size: int = 256, seed: int = 0) -> List[ImageRecord]:
    """Write PNGs whose brightness encodes the model label, plus a manifest"""
    gen = np.random.default_rng(seed)
    records = []
    for m in range(n_models):
        for d in range(n_devices):
            for s in range(n_scenes):
                level = 0.25 + 0.5 * m / max(n_models - 1, 1)
                unit = np.clip(level + 0.05 * gen.standard_normal((size, size, 3)), 0, 1)
                path = root / "images" / f"m{m}_d{d}" / f"scene_{s:03d}.png"
                ImageProcessor.save_png(ImageProcessor.to_uint8(unit), path)
                records.append(ImageRecord(
                    path=str(path), model_label=m, device_id=f"m{m}_d{d}",
                    scene_id=f"scene_{s:03d}", width=size, height=size,
                ))
    manifest_service.write(records, root / "manifest.tsv")
    return records


@pytest.fixture
def small_dataset(tmp_path) -> Path:
    """Manifest path of a 2 models x 3 devices x 4 scenes brightness-coded dataset"""
    write_dataset(tmp_path / "data", n_models=2, n_devices=3, n_scenes=4)
    return tmp_path / "data" / "manifest.tsv"
