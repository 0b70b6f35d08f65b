"""Confusion-matrix metrics laid out like a sleep-scoring results table."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import STAGES


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


@dataclass(frozen=True, eq=False)
class Metrics:
    confusion: np.ndarray  # rows = truth, cols = prediction

    @classmethod
    def from_predictions(cls, truth, pred, n_classes: int = len(STAGES)) -> "Metrics":
        conf = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(conf, (np.asarray(truth), np.asarray(pred)), 1)
        return cls(conf)

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.confusion) / self.total) if self.total else 0.0

    @property
    def precision(self) -> np.ndarray:
        return _safe_div(np.diag(self.confusion), self.confusion.sum(axis=0))

    @property
    def recall(self) -> np.ndarray:
        return _safe_div(np.diag(self.confusion), self.confusion.sum(axis=1))

    @property
    def f1(self) -> np.ndarray:
        p, r = self.precision, self.recall
        return _safe_div(2.0 * p * r, p + r)

    def report(self, class_names=STAGES) -> str:
        lines = [f"{'':8s}{'Pre':>7s}{'Re':>7s}{'F1':>7s}"]
        for i, name in enumerate(class_names):
            lines.append(f"{name:8s}{self.precision[i]:7.2f}{self.recall[i]:7.2f}{self.f1[i]:7.2f}")
        lines.append(f"Overall Accuracy {self.accuracy:.4f} (n={self.total})")
        return "\n".join(lines)
