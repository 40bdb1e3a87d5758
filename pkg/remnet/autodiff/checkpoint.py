"""Binary weight checkpoint container.

Layout (all integers little-endian)::

    magic         8 bytes   b"REMNETCK"
    version       uint32    FORMAT_VERSION
    param_count   uint64    total number of trainable scalars
    header_len    uint32
    header        header_len bytes of UTF-8 JSON (architecture descriptor,
                  epoch, validation loss, free-form extras)
    entry_count   uint32
    entries       entry_count times:
        name_len  uint16
        name      name_len bytes UTF-8 (e.g. "remnant.0.conv1.weight")
        kind      uint8     0 = trainable parameter, 1 = buffer (BN running stats)
        ndim      uint8
        dims      ndim x uint32
        data      prod(dims) x float32 little-endian, row-major

Values are written and read back without conversion, so a save/load round
trip is bit-exact.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Union

import numpy as np

from remnet.utils.exceptions import DatasetWriteError, MissingFileError, SchemaError

logger = logging.getLogger(__name__)

MAGIC = b"REMNETCK"
FORMAT_VERSION = 1
KIND_PARAMETER = 0
KIND_BUFFER = 1
_LE_FLOAT32 = np.dtype("<f4")


@dataclass
class CheckpointData:
    header: dict
    parameters: Dict[str, np.ndarray] = field(default_factory=dict)
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)
    param_count: int = 0


def save_checkpoint(
    path: Union[str, Path],
    parameters: Dict[str, np.ndarray],
    buffers: Dict[str, np.ndarray],
    header: dict,
) -> Path:
    """Write a checkpoint atomically (temp file, then rename)"""
    path = Path(path)
    param_count = int(sum(np.asarray(v).size for v in parameters.values()))
    header_bytes = json.dumps(header, sort_keys=True, default=str).encode("utf-8")

    chunks = [
        MAGIC,
        struct.pack("<I", FORMAT_VERSION),
        struct.pack("<Q", param_count),
        struct.pack("<I", len(header_bytes)),
        header_bytes,
        struct.pack("<I", len(parameters) + len(buffers)),
    ]
    for kind, entries in ((KIND_PARAMETER, parameters), (KIND_BUFFER, buffers)):
        for name, value in entries.items():
            array = np.ascontiguousarray(value, dtype=_LE_FLOAT32)
            name_bytes = name.encode("utf-8")
            chunks.append(struct.pack("<H", len(name_bytes)))
            chunks.append(name_bytes)
            chunks.append(struct.pack("<BB", kind, array.ndim))
            chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
            chunks.append(array.tobytes(order="C"))

    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as fh:
            for chunk in chunks:
                fh.write(chunk)
        tmp.replace(path)
    except OSError as e:
        tmp.unlink(missing_ok=True)
        raise DatasetWriteError(f"Failed to write checkpoint {path}: {e}", {"path": str(path)})
    logger.debug(f"Saved checkpoint {path} ({param_count} parameters)")
    return path


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise SchemaError(f"Truncated checkpoint {self.path}", {"offset": self.pos, "wanted": n})
        chunk = self.blob[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: Union[str, Path]) -> CheckpointData:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(str(path))
    reader = _Reader(path.read_bytes(), path)

    if reader.take(len(MAGIC)) != MAGIC:
        raise SchemaError(f"{path} is not a RemNet checkpoint (bad magic)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise SchemaError(f"Unsupported checkpoint version {version}", {"expected": FORMAT_VERSION})
    (param_count,) = reader.unpack("<Q")
    (header_len,) = reader.unpack("<I")
    try:
        header = json.loads(reader.take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"Corrupt checkpoint header in {path}: {e}")

    data = CheckpointData(header=header, param_count=param_count)
    (entry_count,) = reader.unpack("<I")
    for _ in range(entry_count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        kind, ndim = reader.unpack("<BB")
        shape = reader.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(reader.take(size * 4), dtype=_LE_FLOAT32).reshape(shape)
        array = array.astype(np.float32)
        if kind == KIND_PARAMETER:
            data.parameters[name] = array
        elif kind == KIND_BUFFER:
            data.buffers[name] = array
        else:
            raise SchemaError(f"Unknown entry kind {kind} for {name!r} in {path}")

    counted = sum(a.size for a in data.parameters.values())
    if counted != param_count:
        raise SchemaError(
            f"Checkpoint {path} declares {param_count} parameters but holds {counted}",
            {"declared": param_count, "found": counted},
        )
    return data
