"""Dataset manifest reading and writing.

A manifest is tab-separated text with a header row and the columns
``path  model_label  device_id  scene_id`` (optionally ``width  height``).
Relative paths are resolved against the manifest's own directory.
"""

import logging
import os
from pathlib import Path
from typing import List, Sequence, Union

import pandas as pd
from pydantic import ValidationError

from remnet.models.dataset import MANIFEST_COLUMNS, ImageRecord
from remnet.utils.exceptions import DatasetWriteError, MissingFileError, SchemaError

logger = logging.getLogger(__name__)


class ManifestService:
    """Service for manifest TSV files"""

    def read(self, path: Union[str, Path]) -> List[ImageRecord]:
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(str(path))
        try:
            frame = pd.read_csv(path, sep="\t", dtype={"device_id": str, "scene_id": str, "path": str})
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise SchemaError(f"Cannot parse manifest {path}: {e}", {"path": str(path)})

        missing = [c for c in MANIFEST_COLUMNS if c not in frame.columns]
        if missing:
            raise SchemaError(
                f"Manifest {path} lacks required columns {missing}",
                {"path": str(path), "columns": list(frame.columns)},
            )

        base = path.parent
        records = []
        for row_number, row in enumerate(frame.to_dict(orient="records"), start=2):
            image_path = Path(str(row["path"]))
            if not image_path.is_absolute():
                image_path = base / image_path
            try:
                records.append(
                    ImageRecord(
                        path=str(image_path),
                        model_label=row["model_label"],
                        device_id=str(row["device_id"]),
                        scene_id=str(row["scene_id"]),
                        width=int(row.get("width", 0) or 0),
                        height=int(row.get("height", 0) or 0),
                    )
                )
            except (ValidationError, ValueError, TypeError) as e:
                raise SchemaError(
                    f"Manifest {path} line {row_number} is invalid: {e}",
                    {"path": str(path), "line": row_number},
                )
        logger.debug(f"Read {len(records)} records from {path}")
        return records

    def write(self, records: Sequence[ImageRecord], path: Union[str, Path]) -> Path:
        path = Path(path)
        base = path.parent.resolve()
        rows = []
        for record in records:
            row = record.model_dump()
            image_path = Path(record.path).resolve()
            try:
                row["path"] = os.path.relpath(image_path, base)
            except ValueError:
                row["path"] = str(image_path)
            rows.append(row)
        frame = pd.DataFrame(rows, columns=list(MANIFEST_COLUMNS) + ["width", "height"])
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(path, sep="\t", index=False)
        except OSError as e:
            raise DatasetWriteError(f"Failed to write manifest {path}: {e}", {"path": str(path)})
        logger.info(f"Wrote manifest {path} ({len(rows)} records)")
        return path


# Global instance
manifest_service = ManifestService()
