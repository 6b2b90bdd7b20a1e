"""Evaluation metrics: unweighted average recall, macro F1, accuracy, MAE.

Classes absent from the reference are excluded from the UAR and macro-F1
averages; a supported class with zero true positives contributes F1 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError

NUM_CLASSES = 5


@dataclass(frozen=True)
class MetricsReport:
    uar: float
    f1_macro: float
    accuracy: float
    mae: float
    confusion: np.ndarray
    support: np.ndarray

    def to_dict(self) -> dict:
        return {
            "uar": self.uar,
            "f1_macro": self.f1_macro,
            "accuracy": self.accuracy,
            "mae": self.mae,
            "confusion": self.confusion.tolist(),
            "support": self.support.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            uar=float(d["uar"]),
            f1_macro=float(d["f1_macro"]),
            accuracy=float(d["accuracy"]),
            mae=float(d["mae"]),
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            support=np.asarray(d["support"], dtype=np.int64),
        )

    def format_table(self) -> str:
        # Percentages to one decimal, MAE to three.
        lines = [
            f"UAR        {self.uar:.1f}",
            f"F1         {self.f1_macro:.1f}",
            f"Accuracy   {self.accuracy:.1f}",
            f"MAE        {self.mae:.3f}",
            "Confusion (rows=reference, cols=prediction):",
            "      " + "".join(f"{c:>6d}" for c in range(1, NUM_CLASSES + 1)),
        ]
        for r in range(NUM_CLASSES):
            lines.append(f"{r + 1:>6d}" + "".join(f"{int(n):>6d}" for n in self.confusion[r]))
        return "\n".join(lines)


def _checked(values: Sequence[int], name: str) -> np.ndarray:
    arr = np.asarray(list(values), dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise InputError(f"{name} must be a non-empty 1-D sequence")
    if np.any(arr < 1) or np.any(arr > NUM_CLASSES):
        raise InputError(f"{name} labels must lie in 1..{NUM_CLASSES}")
    return arr


def confusion_matrix(refs: Sequence[int], preds: Sequence[int]) -> np.ndarray:
    """5x5 counts; rows are reference classes, columns predictions."""
    r = _checked(refs, "refs")
    p = _checked(preds, "preds")
    if r.size != p.size:
        raise InputError(f"refs ({r.size}) and preds ({p.size}) differ in length")
    cm = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(cm, (r - 1, p - 1), 1)
    return cm


def evaluate(refs: Sequence[int], preds: Sequence[int]) -> MetricsReport:
    r = _checked(refs, "refs")
    p = _checked(preds, "preds")
    if r.size != p.size:
        raise InputError(f"refs ({r.size}) and preds ({p.size}) differ in length")
    cm = confusion_matrix(r, p)
    support = cm.sum(axis=1)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = support - tp
    present = support > 0

    recall = np.zeros(NUM_CLASSES)
    recall[present] = tp[present] / support[present]
    denom = 2 * tp + fp + fn
    f1 = np.zeros(NUM_CLASSES)
    nz = denom > 0
    f1[nz] = 2 * tp[nz] / denom[nz]

    uar = 100.0 * float(recall[present].mean())
    f1_macro = 100.0 * float(f1[present].mean())
    accuracy = 100.0 * float(tp.sum()) / r.size
    mae = float(np.mean(np.abs(r - p)))
    return MetricsReport(
        uar=uar,
        f1_macro=f1_macro,
        accuracy=accuracy,
        mae=mae,
        confusion=cm,
        support=support,
    )
