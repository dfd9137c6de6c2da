"""Pixel-level explanation maps for segmentation predictions.

Five complementary layers, each a float map in [0, 1]:

error
    Binary disagreement between predicted and reference labels.
uncertainty
    Shannon entropy of the per-pixel class distribution in bits,
    normalized by log2(K) so a uniform distribution maps to 1.
morphology
    Mean of two max-normalized texture cues on the grayscale image: the
    local standard deviation over a 5x5 window and the morphological
    gradient (3x3 dilation minus erosion).
attention
    Class regions weighted by how badly that class is segmented,
    sum_k (1 - dice_k) * mask_k, scaled into [0, 1].
saliency
    3x3 Sobel gradient magnitude of the grayscale image, max-normalized.

All window operations use replicate padding at the borders, so constant
images produce exactly zero texture/saliency responses.  The composite
map is the weighted mean of its layers (zero map when all weights are
zero), and the stability summary reduces a stack of per-fold maps to a
per-pixel mean and population variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .datamodel import LabelMask, ProbMap, XaiWeights

LAYER_IDS = ("error", "uncertainty", "morphology", "attention", "saliency", "composite")

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


@dataclass
class ExplanationMap:
    """A named float map with every value in [0, 1]."""

    values: np.ndarray
    layer_id: str

    def __post_init__(self):
        if self.layer_id not in LAYER_IDS:
            raise ValueError(f"unknown layer id {self.layer_id!r}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"map must be 2-D and non-empty, got shape {arr.shape}")
        if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
            raise ValueError(
                f"map values outside [0, 1]: range [{arr.min():.6g}, {arr.max():.6g}]"
            )
        arr = np.clip(arr, 0.0, 1.0)
        arr.flags.writeable = False
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _max_normalize(arr: np.ndarray) -> np.ndarray:
    peak = float(arr.max())
    if peak <= 0.0:
        return np.zeros_like(arr)
    return arr / peak


def error_map(pred: LabelMask, gt: LabelMask) -> ExplanationMap:
    """1 where predicted and reference labels differ, 0 where they agree."""
    if pred.labels.shape != gt.labels.shape:
        raise ValueError(
            f"shape mismatch: pred {pred.labels.shape} vs gt {gt.labels.shape}"
        )
    return ExplanationMap((pred.labels != gt.labels).astype(np.float64), "error")


def entropy_bits(probs: ProbMap) -> np.ndarray:
    """Raw per-pixel Shannon entropy in bits (0 log 0 taken as 0)."""
    p = probs.values
    terms = np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
    return -terms.sum(axis=2)


def uncertainty_map(probs: ProbMap) -> ExplanationMap:
    """Entropy normalized by log2(K): 0 for one-hot, 1 for uniform pixels."""
    h = entropy_bits(probs) / np.log2(probs.num_classes)
    return ExplanationMap(np.clip(h, 0.0, 1.0), "uncertainty")


def morphology_map(image: np.ndarray) -> ExplanationMap:
    """Texture cue: mean of normalized local std and morphological gradient.

    ``image`` is a 2-D grayscale array in [0, 1].  Local standard
    deviation uses a 5x5 window; the morphological gradient is the 3x3
    grayscale dilation minus erosion.  Each cue is divided by its own
    maximum (zero maps stay zero) before the 0.5/0.5 mix.
    """
    img = _as_image(image)
    mean = ndimage.uniform_filter(img, size=5, mode="nearest")
    mean_sq = ndimage.uniform_filter(img * img, size=5, mode="nearest")
    local_std = np.sqrt(np.clip(mean_sq - mean * mean, 0.0, None))
    grad = ndimage.maximum_filter(img, size=3, mode="nearest") - ndimage.minimum_filter(
        img, size=3, mode="nearest"
    )
    values = 0.5 * _max_normalize(local_std) + 0.5 * _max_normalize(grad)
    return ExplanationMap(values, "morphology")


def class_attention_map(masks, dice_scores) -> ExplanationMap:
    """Foreground regions weighted by their segmentation deficit.

    ``masks`` are binary per-class arrays, ``dice_scores`` the matching
    per-class Dice values; each region contributes (1 - dice).  Where
    regions overlap the weights add, so the raw map is scaled by
    max(1, sum of deficits) to stay within [0, 1]; disjoint masks pass
    through unscaled.
    """
    masks = [np.asarray(m) for m in masks]
    scores = [float(s) for s in dice_scores]
    if len(masks) != len(scores) or not masks:
        raise ValueError("need equally many masks and dice scores, at least one")
    shape = masks[0].shape
    total_deficit = 0.0
    raw = np.zeros(shape, dtype=np.float64)
    for m, s in zip(masks, scores):
        if m.shape != shape:
            raise ValueError("all class masks must share one shape")
        if not np.isin(m, (0, 1)).all():
            raise ValueError("class masks must be binary")
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"dice score {s} outside [0, 1]")
        raw += (1.0 - s) * m
        total_deficit += 1.0 - s
    values = raw / max(1.0, total_deficit)
    return ExplanationMap(values, "attention")


def saliency_map(image: np.ndarray) -> ExplanationMap:
    """Max-normalized 3x3 Sobel gradient magnitude with replicate borders."""
    img = _as_image(image)
    gx = ndimage.correlate(img, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, _SOBEL_Y, mode="nearest")
    return ExplanationMap(_max_normalize(np.hypot(gx, gy)), "saliency")


def composite_map(layers, weights) -> ExplanationMap:
    """Weighted mean of explanation layers.

    ``weights`` is either an :class:`XaiWeights` bundle (for the
    standard 5-layer stack) or any sequence of non-negative reals
    matching ``layers``.  All-zero weights yield the zero map.
    """
    alphas = list(weights.alphas if isinstance(weights, XaiWeights) else weights)
    if len(alphas) != len(layers):
        raise ValueError(f"{len(layers)} layers but {len(alphas)} weights")
    if not layers:
        raise ValueError("no layers given")
    if any(a < 0.0 for a in alphas):
        raise ValueError("layer weights must be non-negative")
    shape = layers[0].values.shape
    for layer in layers:
        if layer.values.shape != shape:
            raise ValueError("all layers must share one shape")
    total = sum(alphas)
    if total == 0.0:
        return ExplanationMap(np.zeros(shape), "composite")
    acc = np.zeros(shape, dtype=np.float64)
    for layer, a in zip(layers, alphas):
        acc += a * layer.values
    return ExplanationMap(acc / total, "composite")


@dataclass
class UncertaintyStability:
    """Per-pixel mean and population variance of per-fold maps."""

    mean_map: ExplanationMap
    variance_map: np.ndarray
    n_folds: int


def uncertainty_stability(fold_maps) -> UncertaintyStability:
    """Reduce >= 2 same-layer, same-shape fold maps to mean and variance.

    Variance is the population (divide by n) variance; identical maps
    give an exactly zero variance map.
    """
    maps = list(fold_maps)
    if len(maps) < 2:
        raise ValueError("stability needs at least 2 fold maps")
    layer = maps[0].layer_id
    shape = maps[0].values.shape
    for m in maps:
        if m.layer_id != layer:
            raise ValueError("fold maps must share one layer id")
        if m.values.shape != shape:
            raise ValueError("fold maps must share one shape")
    stack = np.stack([m.values for m in maps])
    mean = stack.mean(axis=0)
    var = stack.var(axis=0)
    # pixels where every fold agrees have variance 0 by definition; rounding
    # in the mean would otherwise leave ~1e-32 residue there
    identical = (stack == stack[0]).all(axis=0)
    mean = np.where(identical, stack[0], mean)
    var[identical] = 0.0
    return UncertaintyStability(
        mean_map=ExplanationMap(mean, layer),
        variance_map=var,
        n_folds=len(maps),
    )


def write_map_png(emap: ExplanationMap, path: str) -> None:
    """Save a map as an 8-bit grayscale PNG (values scaled by 255)."""
    import io

    from PIL import Image

    from .datamodel import atomic_write_bytes

    u8 = np.round(emap.values * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="L").save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def _as_image(image: np.ndarray) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be 2-D and non-empty, got shape {img.shape}")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("grayscale image values must lie in [0, 1]")
    return img
