"""Composite connectivity loss.

The connectivity prediction is scored three ways against one ground-truth
mask: the aggregated single-channel map against the mask itself, the voted
map against the encoded connectivity target, and the raw prediction against
the same target. The three cross-entropies combine as::

    combined = main + w_bbce * voted_term + w_cbce * raw_term

and the two network outputs combine as ``total = w_output1 * combined(out1)
+ combined(out2)``.

Cross-entropies are reduced in float64 so closed-form identities hold to
1e-9; predictions are clamped to [1e-7, 1 - 1e-7] before the logs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .connectivity import (BoundaryConvention, bilateral_vote,
                           encode_connectivity, rca_aggregate,
                           require_binary_mask)
from .errors import ShapeMismatch
from .tensor import Tensor

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    bbce: float = 0.2      # weight of the voted-map term
    cbce: float = 0.8      # weight of the raw-prediction term
    output1: float = 0.2   # weight of the supervision output in the total


@dataclass(frozen=True)
class LossTerms:
    main_bce: float
    bbce: float
    cbce: float
    combined: float


@dataclass(frozen=True)
class LossReport:
    output1: LossTerms
    output2: LossTerms
    total: float


def _as_f64(x) -> np.ndarray:
    a = x.array if isinstance(x, Tensor) else np.asarray(x)
    return a.astype(np.float64)


def bce(pred, target) -> float:
    """Mean binary cross-entropy; shapes must match up to broadcasting a 2-D
    target over batch and channel axes."""
    p = _as_f64(pred)
    t = _as_f64(target)
    if t.ndim == 2 and p.ndim == 4 and p.shape[2:] == t.shape:
        t = np.broadcast_to(t, p.shape)
    if p.shape != t.shape:
        raise ShapeMismatch(f"bce shapes disagree: {p.shape} vs {t.shape}")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def agreement_score(pred, target) -> float:
    """Mean of ``p*t + (1-p)*(1-t)``: the raw agreement product (1 at a
    perfect binary match, 0 at a perfect mismatch). Kept for audits; this is
    a similarity, not a loss."""
    p = _as_f64(pred)
    t = _as_f64(target)
    if t.ndim == 2 and p.ndim == 4 and p.shape[2:] == t.shape:
        t = np.broadcast_to(t, p.shape)
    if p.shape != t.shape:
        raise ShapeMismatch(f"agreement shapes disagree: {p.shape} vs {t.shape}")
    return float(np.mean(p * t + (1.0 - p) * (1.0 - t)))


def composite_loss(xc: Tensor, y, w: LossWeights,
                   conv: BoundaryConvention) -> LossTerms:
    """Score an 8-channel connectivity prediction against a binary mask."""
    mask = require_binary_mask(y)
    if (xc.h, xc.w) != mask.shape:
        raise ShapeMismatch(
            f"prediction spatial dims {(xc.h, xc.w)} != mask {mask.shape}")
    voted = bilateral_vote(xc)
    aggregated = rca_aggregate(voted)
    target = encode_connectivity(mask, conv)
    t = target.array
    if xc.n != 1:
        t = np.broadcast_to(t, (xc.n,) + t.shape[1:])
    main = bce(aggregated, mask)
    voted_term = bce(voted, t)
    raw_term = bce(xc, t)
    combined = main + w.bbce * voted_term + w.cbce * raw_term
    return LossTerms(main_bce=main, bbce=voted_term, cbce=raw_term,
                     combined=combined)


def total_loss(out, y, w: LossWeights, conv: BoundaryConvention) -> LossReport:
    """Combine the losses of both network outputs (``out`` needs ``output1``
    and ``output2`` tensors, both post-sigmoid)."""
    t1 = composite_loss(out.output1, y, w, conv)
    t2 = composite_loss(out.output2, y, w, conv)
    return LossReport(output1=t1, output2=t2,
                      total=w.output1 * t1.combined + t2.combined)
