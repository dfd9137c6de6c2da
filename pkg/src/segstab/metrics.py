"""Segmentation overlap metrics and training losses.

Per-class Dice and IoU follow the usual set-overlap definitions,

    dice = 2|A & B| / (|A| + |B|)        iou = |A & B| / (|A | B|)

with the convention that a class absent from both masks scores 1.0
(perfect agreement on absence).  The two are related by the identity
iou = dice / (2 - dice), which holds exactly under this convention and
is exercised heavily by the test suite.

Macro aggregation is the unweighted mean over foreground classes,
background excluded by default.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import CompositeWeights, FocalParams, LabelMask, ProbMap

FOCAL_PROB_FLOOR = 1e-7
DICE_LOSS_EPS = 1e-6
DEFAULT_FOREGROUND = (1, 2, 3)


def _check_pair(pred: LabelMask, gt: LabelMask) -> None:
    if pred.labels.shape != gt.labels.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.labels.shape} vs gt {gt.labels.shape}"
        )


def dice_per_class(pred: LabelMask, gt: LabelMask, class_id: int) -> float:
    """Dice coefficient of one class; 1.0 when the class is absent from both."""
    _check_pair(pred, gt)
    a = pred.labels == class_id
    b = gt.labels == class_id
    denom = int(a.sum()) + int(b.sum())
    if denom == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return 2.0 * inter / denom


def iou_per_class(pred: LabelMask, gt: LabelMask, class_id: int) -> float:
    """Intersection-over-union of one class; 1.0 when absent from both."""
    _check_pair(pred, gt)
    a = pred.labels == class_id
    b = gt.labels == class_id
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a, b).sum())
    return inter / union


def macro_average(values) -> float:
    """Unweighted mean of per-class scores."""
    values = list(values)
    if not values:
        raise ValueError("macro average of an empty class set")
    return float(sum(values)) / len(values)


@dataclass(frozen=True)
class ClassMetrics:
    """Per-class (dice, iou) pairs plus their macro means."""

    per_class: dict
    macro_dice: float
    macro_iou: float
    foreground: tuple


def macro_metrics(
    pred: LabelMask, gt: LabelMask, foreground=DEFAULT_FOREGROUND
) -> ClassMetrics:
    """Dice and IoU for each foreground class plus unweighted macro means.

    Background (class 0) is excluded from ``foreground`` by default; the
    macro values are plain means of the per-class columns, so a table of
    per-class scores and its macro column stay arithmetically consistent.
    """
    foreground = tuple(foreground)
    if not foreground:
        raise ValueError("foreground class set must be non-empty")
    for k in foreground:
        if not 0 <= k < max(pred.num_classes, gt.num_classes):
            raise ValueError(f"foreground class {k} outside the label alphabet")
    per_class = {}
    for k in foreground:
        per_class[k] = (dice_per_class(pred, gt, k), iou_per_class(pred, gt, k))
    return ClassMetrics(
        per_class=per_class,
        macro_dice=macro_average(d for d, _ in per_class.values()),
        macro_iou=macro_average(i for _, i in per_class.values()),
        foreground=foreground,
    )


def _check_probs_vs_mask(probs: ProbMap, gt: LabelMask) -> None:
    if (probs.height, probs.width) != (gt.height, gt.width):
        raise ValueError(
            f"shape mismatch: probs {(probs.height, probs.width)} vs "
            f"gt {(gt.height, gt.width)}"
        )
    if gt.num_classes > probs.num_classes:
        raise ValueError(
            f"mask declares {gt.num_classes} classes but probability map "
            f"has only {probs.num_classes} channels"
        )


def focal_loss(probs: ProbMap, gt: LabelMask, params: FocalParams = FocalParams()) -> float:
    """Mean focal loss, -alpha * (1 - p_t)**gamma * ln(p_t), over pixels.

    p_t is the predicted probability of each pixel's true class, clamped
    to [1e-7, 1] before the log so that confidently wrong predictions
    yield a large finite penalty instead of an infinity.
    """
    _check_probs_vs_mask(probs, gt)
    pt = np.take_along_axis(probs.values, gt.labels[:, :, None], axis=2)[:, :, 0]
    pt = np.clip(pt, FOCAL_PROB_FLOOR, 1.0)
    losses = -params.alpha * (1.0 - pt) ** params.gamma * np.log(pt)
    return float(losses.mean())


def dice_loss(probs: ProbMap, gt: LabelMask) -> float:
    """Soft multi-class dice loss over all K channels.

    1 - (1/K) * sum_k (2 * sum(P_k * Y_k) + eps) / (sum(P_k) + sum(Y_k) + eps)

    where Y is the one-hot ground truth and eps = 1e-6 guards empty
    classes.  All channels participate, background included.
    """
    _check_probs_vs_mask(probs, gt)
    k = probs.num_classes
    terms = np.empty(k)
    for c in range(k):
        p = probs.values[:, :, c]
        y = (gt.labels == c).astype(np.float64)
        inter = float((p * y).sum())
        terms[c] = (2.0 * inter + DICE_LOSS_EPS) / (
            float(p.sum()) + float(y.sum()) + DICE_LOSS_EPS
        )
    return float(1.0 - terms.mean())


def composite_loss(
    probs: ProbMap,
    gt: LabelMask,
    focal_params: FocalParams = FocalParams(),
    weights: CompositeWeights = CompositeWeights(),
) -> float:
    """Weighted sum lambda_f * focal + lambda_d * dice of the two losses."""
    return weights.lambda_focal * focal_loss(probs, gt, focal_params) + (
        weights.lambda_dice * dice_loss(probs, gt)
    )
