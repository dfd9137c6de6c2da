"""Build the five explanation layers and their composite for one case.

A synthetic grayscale image (bright organ on a dark body) is paired
with a plausible soft prediction: confident inside regions, uncertain
along the organ boundary, and wrong in one corner of the organ.  Each
layer isolates one question:

  error        where is the prediction wrong?
  uncertainty  where was the model unsure?
  morphology   where is the anatomy locally complex?
  attention    which regions belong to badly-scored classes?
  saliency     where does the image itself change fastest?

The composite blends them with non-negative weights.  PNGs land in
demos/out/xai/, and a fold-ensemble mean/variance pair shows how
uncertainty itself can be checked for stability.
"""

import os

import numpy as np

from segstab.datamodel import LabelMask, ProbMap, XaiWeights
from segstab.metrics import dice_per_class
from segstab.xai import (
    class_attention_map,
    composite_map,
    error_map,
    morphology_map,
    saliency_map,
    uncertainty_map,
    uncertainty_stability,
    write_map_png,
)

OUT_DIR = os.path.join(os.path.dirname(__file__), "out", "xai")


def build_case(h=64, w=64):
    yy, xx = np.mgrid[0:h, 0:w]
    inside = (yy - 32) ** 2 + (xx - 30) ** 2 < 18**2
    labels = np.where(inside, 1, 0).astype(np.int64)
    image = np.where(inside, 0.75, 0.30) + 0.02 * np.sin(xx / 3.0)
    gt = LabelMask(labels, num_classes=2)

    pred_labels = labels.copy()
    wrong = inside & (yy < 20)          # miss the organ's top cap
    pred_labels[wrong] = 0
    pred = LabelMask(pred_labels, num_classes=2)

    # soft scores: crisp far from the boundary, hesitant near it
    dist = np.abs(np.sqrt((yy - 32.0) ** 2 + (xx - 30.0) ** 2) - 18.0)
    p_fg = np.where(pred_labels == 1, 0.95, 0.05).astype(np.float64)
    ramp = np.clip(dist / 6.0, 0.0, 1.0)
    p_fg = 0.5 + (p_fg - 0.5) * ramp
    probs = np.stack([1.0 - p_fg, p_fg], axis=-1)
    return np.clip(image, 0.0, 1.0), ProbMap(probs), pred, gt


def main():
    image, probs, pred, gt = build_case()

    foreground = (1,)
    masks = [(gt.labels == k).astype(np.int64) for k in foreground]
    dices = [dice_per_class(pred, gt, k) for k in foreground]
    print(f"organ dice: {dices[0]:.4f}")

    layers = [
        error_map(pred, gt),
        uncertainty_map(probs),
        morphology_map(image),
        class_attention_map(masks, dices),
        saliency_map(image),
    ]
    composite = composite_map(layers, XaiWeights((1.0, 1.0, 0.5, 1.0, 0.5)))

    os.makedirs(OUT_DIR, exist_ok=True)
    for emap in layers + [composite]:
        path = os.path.join(OUT_DIR, f"{emap.layer_id}.png")
        write_map_png(emap, path)
        print(
            f"  {emap.layer_id:12s} mean {emap.values.mean():.3f} "
            f"max {emap.values.max():.3f} -> {path}"
        )

    # pretend three folds produced slightly different uncertainty maps
    rng = np.random.default_rng(0)
    fold_maps = []
    for _ in range(3):
        jitter = np.clip(
            probs.values + rng.normal(0.0, 0.01, size=probs.values.shape), 1e-6, None
        )
        jitter /= jitter.sum(axis=-1, keepdims=True)
        fold_maps.append(uncertainty_map(ProbMap(jitter)))
    stab = uncertainty_stability(fold_maps)
    print(
        f"\nuncertainty across {stab.n_folds} folds: "
        f"mean {stab.mean_map.values.mean():.4f}, "
        f"max per-pixel variance {stab.variance_map.max():.2e}"
    )
    agreed = uncertainty_stability([fold_maps[0]] * 3)
    print("identical folds give exactly zero variance everywhere:",
          bool((agreed.variance_map == 0.0).all()))


if __name__ == "__main__":
    main()
