"""Micro-averaged F1 and Hamming loss over binary prediction matrices.

Predictions are binarized at logit 0 (sigmoid > 0.5) before any metric is
computed; the metrics never see raw scores.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger("magnet.metrics")


def binarize(logits: np.ndarray) -> np.ndarray:
    return (np.asarray(logits) > 0).astype(np.int64)


@dataclass
class ConfusionTotals:
    tp: np.ndarray  # per-label true positives
    fp: np.ndarray
    fn: np.ndarray
    n_examples: int
    n_labels: int


def confusion_totals(targets: np.ndarray, predictions: np.ndarray) -> ConfusionTotals:
    y = np.asarray(targets, dtype=np.int64)
    z = np.asarray(predictions, dtype=np.int64)
    if y.shape != z.shape or y.ndim != 2:
        raise ValueError(f"shape mismatch: targets {y.shape} vs predictions {z.shape}")
    tp = ((y == 1) & (z == 1)).sum(axis=0)
    fp = ((y == 0) & (z == 1)).sum(axis=0)
    fn = ((y == 1) & (z == 0)).sum(axis=0)
    return ConfusionTotals(tp, fp, fn, y.shape[0], y.shape[1])


def micro_precision(t: ConfusionTotals) -> float:
    denom = int(t.tp.sum() + t.fp.sum())
    return float(t.tp.sum() / denom) if denom else 0.0


def micro_recall(t: ConfusionTotals) -> float:
    denom = int(t.tp.sum() + t.fn.sum())
    return float(t.tp.sum() / denom) if denom else 0.0


def micro_f1(t: ConfusionTotals) -> float:
    """Globally summed 2tp / (2tp + fp + fn); 0 with a warning when empty."""
    denom = int(2 * t.tp.sum() + t.fp.sum() + t.fn.sum())
    if denom == 0:
        log.warning("micro_f1: no positives in targets or predictions, defining F1 = 0")
        return 0.0
    return float(2 * t.tp.sum() / denom)


def hamming_loss(targets: np.ndarray, predictions: np.ndarray) -> float:
    """Fraction of (example, label) cells where prediction and target disagree."""
    y = np.asarray(targets, dtype=np.int64)
    z = np.asarray(predictions, dtype=np.int64)
    if y.shape != z.shape or y.ndim != 2:
        raise ValueError(f"shape mismatch: targets {y.shape} vs predictions {z.shape}")
    return float(np.not_equal(y, z).sum() / y.size)


def metrics_record(epoch: int, split: str, loss: float, f1: float, hl: float) -> str:
    """One line-delimited report record, stable field order."""
    return json.dumps(
        {"epoch": epoch, "split": split, "loss": loss, "micro_f1": f1, "hamming_loss": hl}
    )
