"""Accuracy metrics and report files"""

import logging
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from sklearn.metrics import confusion_matrix as sk_confusion_matrix  # noqa: E402

from remnet.models.training import PredictionRecord  # noqa: E402
from remnet.utils.exceptions import ConstraintError, DatasetWriteError  # noqa: E402

logger = logging.getLogger(__name__)

UNALTERED_WEIGHT = 0.7


class MetricsService:
    """Service for image-level accuracy, weighted scores and their report files"""

    @staticmethod
    def accuracy(records: Sequence[PredictionRecord]) -> float:
        """Percentage of images whose final label matches the ground truth"""
        if not records:
            raise ConstraintError("accuracy needs at least one prediction")
        if any(r.true_label is None for r in records):
            raise ConstraintError("accuracy needs ground-truth labels for every prediction")
        correct = sum(1 for r in records if r.correct)
        return correct / len(records) * 100.0

    @staticmethod
    def weighted_score(acc_unaltered: float, acc_manipulated: float) -> float:
        for name, value in (("unaltered", acc_unaltered), ("manipulated", acc_manipulated)):
            if not 0.0 <= value <= 100.0:
                raise ConstraintError(f"{name} accuracy must lie in [0, 100], got {value}")
        return UNALTERED_WEIGHT * acc_unaltered + (1.0 - UNALTERED_WEIGHT) * acc_manipulated

    @staticmethod
    def confusion_matrix(records: Sequence[PredictionRecord], n_class: int) -> np.ndarray:
        """Counts with rows = true class, columns = predicted class"""
        y_true = [r.true_label for r in records]
        y_pred = [r.final_label for r in records]
        return sk_confusion_matrix(y_true, y_pred, labels=list(range(n_class)))

    # -- writers -------------------------------------------------------------------
    @staticmethod
    def _ensure_dir(path: Path) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DatasetWriteError(f"Cannot create {path.parent}: {e}", {"path": str(path)})

    def write_predictions(self, records: Sequence[PredictionRecord], path: Union[str, Path]) -> Path:
        """Per-image audit dump, one JSON object per line"""
        path = Path(path)
        self._ensure_dir(path)
        lines = [r.model_dump_json() for r in records]
        path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
        return path

    def write_confusion(self, matrix: np.ndarray, tsv_path: Union[str, Path],
                        png_path: Optional[Union[str, Path]] = None) -> Path:
        tsv_path = Path(tsv_path)
        self._ensure_dir(tsv_path)
        labels = [str(i) for i in range(matrix.shape[0])]
        frame = pd.DataFrame(matrix, index=pd.Index(labels, name="true"), columns=labels)
        frame.to_csv(tsv_path, sep="\t")

        if png_path is not None:
            fig, ax = plt.subplots(figsize=(max(4, matrix.shape[0] * 0.5), max(4, matrix.shape[0] * 0.5)))
            image = ax.imshow(matrix, cmap="Blues")
            ax.set_xlabel("predicted model")
            ax.set_ylabel("true model")
            ax.set_xticks(range(matrix.shape[0]))
            ax.set_yticks(range(matrix.shape[0]))
            for (i, j), count in np.ndenumerate(matrix):
                if count:
                    ax.text(j, i, str(count), ha="center", va="center", fontsize=8)
            fig.colorbar(image, ax=ax)
            fig.tight_layout()
            fig.savefig(png_path, dpi=120)
            plt.close(fig)
        return tsv_path

    def write_sweep(self, sweep: Mapping[int, float], txt_path: Union[str, Path],
                    png_path: Optional[Union[str, Path]] = None) -> Path:
        """Two-column text (N, accuracy) plus an optional line plot"""
        txt_path = Path(txt_path)
        self._ensure_dir(txt_path)
        rows = sorted(sweep.items())
        txt_path.write_text(
            "n_votes\taccuracy\n" + "".join(f"{n}\t{acc:.4f}\n" for n, acc in rows),
            encoding="utf-8",
        )
        if png_path is not None:
            fig, ax = plt.subplots(figsize=(5, 3.5))
            ax.plot([n for n, _ in rows], [a for _, a in rows], marker="o")
            ax.set_xlabel("voting number N")
            ax.set_ylabel("accuracy (%)")
            ax.grid(True, alpha=0.3)
            fig.tight_layout()
            fig.savefig(png_path, dpi=120)
            plt.close(fig)
        return txt_path

    def write_heatmap(self, scores: np.ndarray, txt_path: Union[str, Path],
                      png_path: Optional[Union[str, Path]] = None, stride: int = 64) -> Path:
        """Quality scores on the candidate grid as TSV (row, col, q) and an optional heatmap"""
        txt_path = Path(txt_path)
        self._ensure_dir(txt_path)
        rows, cols = np.indices(scores.shape)
        frame = pd.DataFrame({
            "row": (rows * stride).ravel(),
            "col": (cols * stride).ravel(),
            "quality": scores.ravel(),
        })
        frame.to_csv(txt_path, sep="\t", index=False, float_format="%.10f")
        if png_path is not None:
            fig, ax = plt.subplots(figsize=(5, 4))
            image = ax.imshow(scores, cmap="viridis", vmin=0.0, vmax=1.0)
            ax.set_title("cluster quality Q")
            fig.colorbar(image, ax=ax)
            fig.tight_layout()
            fig.savefig(png_path, dpi=120)
            plt.close(fig)
        return txt_path

    @staticmethod
    def summarize(manipulated: Dict[str, float]) -> float:
        """Mean accuracy over manipulation runs"""
        if not manipulated:
            raise ConstraintError("no manipulated accuracies to summarize")
        return float(np.mean(list(manipulated.values())))


# Global instance
metrics_service = MetricsService()
