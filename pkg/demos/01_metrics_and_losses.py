"""Score a predicted segmentation against its reference mask.

Builds a small 3-class scene (background, a square organ, a thin
vessel, a blob), perturbs it into a "prediction", and walks through the
overlap metrics and the training losses defined on probability maps.
"""

import numpy as np

from segstab.datamodel import FocalParams, LabelMask, ProbMap
from segstab.metrics import (
    composite_loss,
    dice_loss,
    dice_per_class,
    focal_loss,
    iou_per_class,
    macro_metrics,
)


def build_scene():
    labels = np.zeros((48, 48), dtype=np.int64)
    labels[8:24, 8:24] = 1          # square organ
    labels[30, 4:44] = 2            # one-pixel-wide vessel
    labels[34:42, 30:40] = 3        # blob
    return LabelMask(labels, num_classes=4)


def perturb(mask: LabelMask) -> LabelMask:
    labels = mask.labels.copy()
    labels[8:24, 22:24] = 0         # clip the organ's right edge
    labels[30, 4:14] = 0            # drop a vessel segment
    labels[31, 14:44] = 2           # and shift the rest down a row
    labels[36:40, 28:30] = 3        # overgrow the blob slightly
    return LabelMask(labels, num_classes=4)


def main():
    gt = build_scene()
    pred = perturb(gt)

    print("per-class overlap")
    for class_id, name in ((1, "organ"), (2, "vessel"), (3, "blob")):
        d = dice_per_class(pred, gt, class_id)
        i = iou_per_class(pred, gt, class_id)
        # the identity iou = dice / (2 - dice) ties the two scales together
        print(f"  {name:7s} dice {d:.4f}  iou {i:.4f}  dice/(2-dice) {d / (2 - d):.4f}")

    summary = macro_metrics(pred, gt)
    print(f"macro dice {summary.macro_dice:.4f}, macro iou {summary.macro_iou:.4f}")

    # a soft prediction: confident and right except along the perturbations
    k = gt.num_classes
    probs = np.full((48, 48, k), 0.02 / (k - 1))
    for c in range(k):
        probs[pred.labels == c, c] = 0.98
    pmap = ProbMap(probs)

    print("\ntraining losses on the soft prediction")
    print(f"  focal (default alpha=0.8, gamma=2) {focal_loss(pmap, gt):.4f}")
    print(f"  focal (alpha=0.25, gamma=1.5)      "
          f"{focal_loss(pmap, gt, FocalParams(0.25, 1.5)):.4f}")
    print(f"  soft dice                          {dice_loss(pmap, gt):.4f}")
    print(f"  composite (0.5 / 0.5)              {composite_loss(pmap, gt):.4f}")


if __name__ == "__main__":
    main()
