"""Synthetic camera simulator schemas"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from remnet.models.base import BayerPattern, DemosaicKernel, NoiseShape


class CameraModelSpec(BaseModel):
    """Model-level acquisition fingerprint (surrogate, not a real camera)"""
    model_config = ConfigDict(protected_namespaces=())

    model_id: int = Field(ge=0)
    bayer_pattern: BayerPattern
    demosaic_kernel: DemosaicKernel
    color_matrix: List[List[float]]
    noise_shape: NoiseShape
    noise_sigma: float = Field(default=0.01, ge=0.0)
    jpeg_quant_scale: float = Field(default=1.0, ge=0.0)

    @field_validator("color_matrix")
    @classmethod
    def _three_by_three(cls, value: List[List[float]]) -> List[List[float]]:
        if len(value) != 3 or any(len(row) != 3 for row in value):
            raise ValueError("color_matrix must be 3x3")
        return value

    def differing_fields(self, other: "CameraModelSpec") -> List[str]:
        fields = ["bayer_pattern", "demosaic_kernel", "color_matrix", "noise_shape", "jpeg_quant_scale"]
        return [f for f in fields if getattr(self, f) != getattr(other, f)]


class DeviceSpec(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    device_id: str
    model_id: int = Field(ge=0)
    prnu_seed: int
    prnu_strength: float = Field(default=0.01, ge=0.0, le=0.02)


class SceneGeneratorSpec(BaseModel):
    scene_id: str
    seed: int


class SynthConfig(BaseModel):
    """Synthetic dataset shape and simulator knobs"""
    n_models: int = Field(default=4, ge=1)
    devices_per_model: int = Field(default=3, ge=2)
    n_scenes: int = Field(default=40, ge=1)
    images_per_device: Optional[int] = Field(default=None, ge=1)
    image_size: int = Field(default=512, ge=256)
    prnu_strength: float = Field(default=0.01, ge=0.0, le=0.02)
    noise_sigma: float = Field(default=0.01, ge=0.0)
    flat_scene_fraction: float = Field(default=0.25, ge=0.0, le=1.0)
    jpeg_quant_scales: List[float] = Field(default_factory=lambda: [0.05, 0.2, 0.3, 0.4])


class DatasetDescriptor(BaseModel):
    """Everything needed to regenerate a synthetic dataset bit-exactly"""
    master_seed: int
    config: SynthConfig
    models: List[CameraModelSpec]
    devices: List[DeviceSpec]
    scenes: List[SceneGeneratorSpec]
    n_images: int
    manifest: str
