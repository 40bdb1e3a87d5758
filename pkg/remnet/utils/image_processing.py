"""Image I/O, codec round trips and pixel-domain filters"""

import io
import math
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from remnet.utils.exceptions import ConstraintError, MissingFileError, SchemaError

PathLike = Union[str, Path]

# Zero-sum 3x3 high-pass kernel, applied identically to every channel
HIGHPASS_KERNEL = np.array(
    [[-1, -1, -1],
     [-1, 8, -1],
     [-1, -1, -1]],
    dtype=np.float64,
) / 8.0


class ImageProcessor:
    """Utility class for image processing operations"""

    @staticmethod
    def load_rgb(path: PathLike) -> np.ndarray:
        """Decode an image file to an (H, W, 3) uint8 array"""
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(str(path))
        try:
            with Image.open(path) as image:
                if image.mode != "RGB":
                    image = image.convert("RGB")
                return np.array(image, dtype=np.uint8)
        except (UnidentifiedImageError, OSError) as e:
            raise SchemaError(f"Cannot decode image {path}: {e}", {"path": str(path)})

    @staticmethod
    def image_size(path: PathLike) -> Tuple[int, int]:
        """(width, height) without decoding pixels"""
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(str(path))
        with Image.open(path) as image:
            return image.size

    @staticmethod
    def save_png(pixels: np.ndarray, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), mode="RGB").save(path, format="PNG")
        return path

    @staticmethod
    def to_unit(pixels: np.ndarray) -> np.ndarray:
        """uint8 -> float32 in [0, 1]"""
        return pixels.astype(np.float32) / 255.0

    @staticmethod
    def to_uint8(values: np.ndarray) -> np.ndarray:
        """[0, 1] floats -> rounded, clipped uint8"""
        return np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)

    # -- manipulations ---------------------------------------------------
    @staticmethod
    def jpeg_round_trip(
        pixels: np.ndarray,
        quality: Optional[int] = None,
        qtables: Optional[Sequence[Sequence[int]]] = None,
    ) -> np.ndarray:
        """Baseline JPEG encode then decode, either at a quality factor or with explicit tables"""
        image = Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), mode="RGB")
        buffer = io.BytesIO()
        if qtables is not None:
            image.save(buffer, format="JPEG", qtables=[list(t) for t in qtables], subsampling=0)
        else:
            image.save(buffer, format="JPEG", quality=int(quality if quality is not None else 75), subsampling=0)
        buffer.seek(0)
        with Image.open(buffer) as decoded:
            return np.array(decoded.convert("RGB"), dtype=np.uint8)

    @staticmethod
    def rescale_bicubic(pixels: np.ndarray, factor: float) -> np.ndarray:
        """Bicubic resample of both dimensions by ``factor``"""
        if factor <= 0:
            raise ConstraintError(f"rescale factor must be positive, got {factor}")
        height, width = pixels.shape[:2]
        new_size = (max(1, int(round(width * factor))), max(1, int(round(height * factor))))
        image = Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8), mode="RGB")
        return np.array(image.resize(new_size, Image.Resampling.BICUBIC), dtype=np.uint8)

    @staticmethod
    def gamma_correct(pixels: np.ndarray, gamma: float) -> np.ndarray:
        """out = in ** gamma on [0, 1], re-quantized to 8 bits"""
        if gamma <= 0:
            raise ConstraintError(f"gamma must be positive, got {gamma}")
        if gamma == 1.0:
            return pixels.copy()
        unit = pixels.astype(np.float64) / 255.0
        return ImageProcessor.to_uint8(unit ** gamma)

    # -- residue filters ---------------------------------------------------
    @staticmethod
    def median_residual(image: np.ndarray, window: int = 3) -> np.ndarray:
        """image - median_filter(image), window x window per channel.

        Works on (H, W, C) images and (B, H, W, C) batches.
        """
        image = np.asarray(image)
        if image.ndim < 3:
            raise ConstraintError(f"median_residual expects (..., H, W, C), got shape {image.shape}")
        size = (1,) * (image.ndim - 3) + (window, window, 1)
        values = image.astype(np.float32) if image.dtype == np.uint8 else image
        return values - ndimage.median_filter(values, size=size, mode="reflect")

    @staticmethod
    def highpass_filter(image: np.ndarray, kernel: np.ndarray = HIGHPASS_KERNEL) -> np.ndarray:
        """Convolve every channel with the same zero-sum kernel"""
        image = np.asarray(image)
        if image.ndim < 3:
            raise ConstraintError(f"highpass_filter expects (..., H, W, C), got shape {image.shape}")
        values = image.astype(np.float32) if image.dtype == np.uint8 else image
        weights = np.asarray(kernel, dtype=values.dtype).reshape((1,) * (values.ndim - 3) + kernel.shape + (1,))
        return ndimage.convolve(values, weights, mode="reflect")

    # -- measurements ------------------------------------------------------
    @staticmethod
    def psnr(reference: np.ndarray, image: np.ndarray, peak: float = 255.0) -> float:
        """Peak signal-to-noise ratio in dB; inf for identical inputs"""
        if reference.shape != image.shape:
            raise ConstraintError(f"psnr shape mismatch: {reference.shape} vs {image.shape}")
        mse = float(np.mean((reference.astype(np.float64) - image.astype(np.float64)) ** 2))
        if mse == 0.0:
            return math.inf
        return 10.0 * math.log10(peak * peak / mse)
