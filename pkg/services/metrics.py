"""
Per-class precision, recall, Dice and IoU from a confusion matrix.

Rows of the confusion matrix are true classes, columns predictions. A
metric whose denominator is zero counts as 0. Macro means average over
the classes present in the ground truth only.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np
from sklearn.metrics import confusion_matrix

from dataset import FeatureTable
from errors import EvaluationError, LabelingError
from services.classifier import Classifier

MACRO_METRICS = ("mPrecision", "mRecall", "mDice", "mIoU")


@dataclass(frozen=True, eq=False)
class EvalReport:
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    dice: np.ndarray
    iou: np.ndarray
    present: np.ndarray

    def _macro(self, values: np.ndarray) -> float:
        return float(values[self.present].mean()) if self.present.any() else 0.0

    @property
    def m_precision(self) -> float:
        return self._macro(self.precision)

    @property
    def m_recall(self) -> float:
        return self._macro(self.recall)

    @property
    def m_dice(self) -> float:
        return self._macro(self.dice)

    @property
    def m_iou(self) -> float:
        return self._macro(self.iou)

    def macro(self) -> Dict[str, float]:
        return {
            "mPrecision": self.m_precision,
            "mRecall": self.m_recall,
            "mDice": self.m_dice,
            "mIoU": self.m_iou,
        }

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "dice": self.dice.tolist(),
            "iou": self.iou.tolist(),
            **self.macro(),
        }


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    out = np.zeros(numerator.shape, dtype=np.float64)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    return out


def report_from_confusion(confusion: np.ndarray) -> EvalReport:
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise EvaluationError(f"confusion matrix must be square, got shape {confusion.shape}")
    if (confusion < 0).any():
        raise EvaluationError("confusion matrix entries must be non-negative")
    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    return EvalReport(
        confusion=confusion,
        precision=_ratio(tp, tp + fp),
        recall=_ratio(tp, tp + fn),
        dice=_ratio(2 * tp, 2 * tp + fp + fn),
        iou=_ratio(tp, tp + fp + fn),
        present=confusion.sum(axis=1) > 0,
    )


def report_from_predictions(y_true: np.ndarray, y_pred: np.ndarray, num_classes: int) -> EvalReport:
    if len(y_true) == 0:
        raise EvaluationError("cannot evaluate an empty test set")
    confusion = confusion_matrix(y_true, y_pred, labels=np.arange(num_classes))
    return report_from_confusion(confusion)


def evaluate(model: Classifier, test: FeatureTable) -> EvalReport:
    """
    Score a classifier on a labeled test table.

    Raises:
        EvaluationError: empty test table.
        LabelingError: unlabeled test records.
        DimensionError: feature dimension differs from the model's.
    """
    if len(test) == 0:
        raise EvaluationError("cannot evaluate an empty test set")
    if not test.is_fully_labeled:
        raise LabelingError("test table has unlabeled records")
    return report_from_predictions(test.labels, model.predict(test.features), test.num_classes)
