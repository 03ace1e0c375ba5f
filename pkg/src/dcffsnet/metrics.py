"""Overlap metrics between binary masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import require_binary_mask
from .errors import ShapeMismatch


@dataclass(frozen=True)
class MetricsReport:
    dice: float
    iou: float

    def line(self) -> str:
        """Single machine-readable record, key=value with 6 decimals."""
        return f"dice={self.dice:.6f} iou={self.iou:.6f}"


def dice_iou(pred, truth) -> MetricsReport:
    """Dice and IoU of two binary masks; two empty masks score 1 by convention."""
    p = require_binary_mask(pred)
    t = require_binary_mask(truth)
    if p.shape != t.shape:
        raise ShapeMismatch(f"mask shapes disagree: {p.shape} vs {t.shape}")
    inter = int(np.count_nonzero(p & t))
    a = int(np.count_nonzero(p))
    b = int(np.count_nonzero(t))
    if a + b == 0:
        return MetricsReport(dice=1.0, iou=1.0)
    dice = 2.0 * inter / (a + b)
    iou = inter / (a + b - inter)
    return MetricsReport(dice=dice, iou=iou)
