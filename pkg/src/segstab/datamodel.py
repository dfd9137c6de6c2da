"""Domain types and on-disk formats shared by every other module.

Types validate their invariants at construction and are treated as
immutable afterwards (numpy payloads are marked read-only).  File
readers re-validate on the way in, so any value of these types obtained
from this module is safe to hand to the analysis code without further
checking.

On-disk formats
---------------
Label masks
    Either an 8-bit single-channel PNG whose pixel values are class
    indices, or a UTF-8 text file of space-separated integers, one image
    row per line.
Probability maps
    A small binary container: the ASCII header line
    ``PMAP v1 <H> <W> <K>\\n`` followed by exactly H*W*K little-endian
    float32 values in row-major (y, x, k) order.
Score tables
    CSV with the exact header ``model,fold,metric,class,value``.  The
    class column holds a class name, with ``macro`` reserved for the
    macro-averaged row.
Split plans
    JSON with keys ``protocol``, ``k``, ``n_samples``, ``seed``,
    ``folds`` (list of ``{"train": [...], "test": [...]}``).
"""

from __future__ import annotations

import csv
import json
import os
import re
import struct
import tempfile
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

PMAP_MAGIC = "PMAP"
PMAP_VERSION = "v1"
PROB_SUM_TOL = 1e-4
SCORE_HEADER = ("model", "fold", "metric", "class", "value")
MACRO_CLASS = "macro"

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_DECIMAL_RE = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file and atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-segstab-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# Label masks
# ---------------------------------------------------------------------------


@dataclass
class LabelMask:
    """Integer class-index image.

    ``num_classes`` is the declared label alphabet size K; every pixel
    must satisfy 0 <= label < K.  K = 1 is permitted so that degenerate
    all-background files can still be inspected; callers that need
    multi-class semantics ask for it via ``read_label_mask(...,
    min_classes=2)`` or check ``num_classes`` themselves.
    """

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("mask must have at least one row and column")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"mask dtype must be integer, got {arr.dtype}")
        if self.num_classes < 1:
            raise ValueError(f"num_classes must be >= 1, got {self.num_classes}")
        if arr.size and (arr.min() < 0 or arr.max() >= self.num_classes):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), "
                f"found range [{arr.min()}, {arr.max()}]"
            )
        arr = arr.astype(np.int64, copy=True)
        arr.flags.writeable = False
        self.labels = arr

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @classmethod
    def from_array(cls, labels, num_classes: int | None = None) -> "LabelMask":
        arr = np.asarray(labels)
        if num_classes is None:
            num_classes = int(arr.max()) + 1 if arr.size else 1
        return cls(arr, num_classes)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMask):
            return NotImplemented
        return self.num_classes == other.num_classes and np.array_equal(
            self.labels, other.labels
        )


def read_label_mask(
    path: str, num_classes: int | None = None, min_classes: int = 1
) -> LabelMask:
    """Read a mask from PNG or text, sniffing the format from content.

    ``num_classes`` overrides the inferred alphabet size (max label + 1).
    ``min_classes`` rejects masks whose alphabet is smaller than the
    caller requires, e.g. an all-zeros file when two classes are needed.
    """
    with open(path, "rb") as handle:
        head = handle.read(len(_PNG_SIGNATURE))
    if head == _PNG_SIGNATURE:
        arr = _read_mask_png(path)
    else:
        arr = _read_mask_text(path)
    if num_classes is None:
        num_classes = int(arr.max()) + 1 if arr.size else 1
    mask = LabelMask(arr, num_classes)
    if mask.num_classes < min_classes:
        raise ValueError(
            f"{path}: mask has {mask.num_classes} class(es), "
            f"caller requires at least {min_classes}"
        )
    return mask


def _read_mask_png(path: str) -> np.ndarray:
    with Image.open(path) as img:
        if img.mode != "L":
            raise ValueError(
                f"{path}: expected 8-bit single-channel PNG (mode L), got mode {img.mode}"
            )
        return np.asarray(img, dtype=np.int64)


def _read_mask_text(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = [int(tok) for tok in line.split()]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-integer token") from exc
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty mask file")
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValueError(
                f"{path}: non-rectangular mask, row {i} has {len(row)} "
                f"values, expected {width}"
            )
    return np.array(rows, dtype=np.int64)


def write_label_mask_text(mask: LabelMask, path: str) -> None:
    lines = [" ".join(str(v) for v in row) for row in mask.labels]
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_label_mask_png(mask: LabelMask, path: str) -> None:
    if mask.num_classes > 256:
        raise ValueError("PNG masks support at most 256 classes")
    img = Image.fromarray(mask.labels.astype(np.uint8), mode="L")
    import io

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def read_grayscale_image(path: str) -> np.ndarray:
    """Read any PNG as a float64 grayscale image in [0, 1] (luma)."""
    with Image.open(path) as img:
        gray = img.convert("L")
        return np.asarray(gray, dtype=np.float64) / 255.0


# ---------------------------------------------------------------------------
# Probability maps
# ---------------------------------------------------------------------------


@dataclass
class ProbMap:
    """Per-pixel class probabilities, shape (H, W, K).

    Values lie in [0, 1] and each pixel's K values sum to 1 within
    ``PROB_SUM_TOL``.  Stored as float64 internally regardless of the
    float32 file payload.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"probability map must be (H, W, K), got {arr.shape}")
        h, w, k = arr.shape
        if h < 1 or w < 1:
            raise ValueError("probability map must have at least one pixel")
        if k < 2:
            raise ValueError(f"probability map needs K >= 2 channels, got {k}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(
                f"probabilities must lie in [0, 1], found range "
                f"[{arr.min():.6g}, {arr.max():.6g}]"
            )
        sums = arr.sum(axis=2)
        worst = float(np.abs(sums - 1.0).max())
        if worst > PROB_SUM_TOL:
            raise ValueError(
                f"not normalized: per-pixel sums deviate from 1 by up to "
                f"{worst:.3g} (tolerance {PROB_SUM_TOL:g})"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        self.values = arr

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def num_classes(self) -> int:
        return self.values.shape[2]


def read_prob_map(path: str) -> ProbMap:
    """Read a ``PMAP v1`` binary probability map."""
    with open(path, "rb") as handle:
        header = bytearray()
        while True:
            ch = handle.read(1)
            if not ch:
                raise ValueError(f"{path}: truncated header")
            if ch == b"\n":
                break
            header.extend(ch)
            if len(header) > 128:
                raise ValueError(f"{path}: header line too long, not a PMAP file")
        parts = header.decode("ascii", errors="replace").split()
        if len(parts) != 5 or parts[0] != PMAP_MAGIC or parts[1] != PMAP_VERSION:
            raise ValueError(f"{path}: bad magic/header {header!r}")
        try:
            h, w, k = (int(p) for p in parts[2:5])
        except ValueError as exc:
            raise ValueError(f"{path}: non-integer dimensions in header") from exc
        if h < 1 or w < 1 or k < 2:
            raise ValueError(f"{path}: bad dimensions H={h} W={w} K={k}")
        payload = handle.read()
    expected = h * w * k * 4
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload length mismatch, expected {expected} bytes "
            f"for {h}x{w}x{k} float32, got {len(payload)}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    return ProbMap(flat.reshape(h, w, k))


def write_prob_map(pmap: ProbMap, path: str) -> None:
    header = f"{PMAP_MAGIC} {PMAP_VERSION} {pmap.height} {pmap.width} {pmap.num_classes}\n"
    payload = pmap.values.astype("<f4").tobytes(order="C")
    atomic_write_bytes(path, header.encode("ascii") + payload)


# ---------------------------------------------------------------------------
# Score tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoreRecord:
    model: str
    fold: int
    metric: str
    class_id: str
    value: float


@dataclass
class ScoreTable:
    """A set of (model, fold, metric, class) -> value records.

    Key tuples are unique, every value is finite, and each
    (metric, class) slice is rectangular: every model present in the
    slice has a value for every fold present in the slice.
    """

    records: list = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for rec in self.records:
            key = (rec.model, rec.fold, rec.metric, rec.class_id)
            if key in seen:
                raise ValueError(f"duplicate record for {key}")
            seen.add(key)
            if not np.isfinite(rec.value):
                raise ValueError(f"non-finite value for {key}")
        self._check_rectangular()

    def _check_rectangular(self) -> None:
        slices: dict = {}
        for rec in self.records:
            slices.setdefault((rec.metric, rec.class_id), []).append(rec)
        for (metric, class_id), recs in slices.items():
            models = sorted({r.model for r in recs})
            folds = sorted({r.fold for r in recs})
            present = {(r.model, r.fold) for r in recs}
            if len(present) != len(models) * len(folds):
                missing = [
                    (m, f) for m in models for f in folds if (m, f) not in present
                ]
                raise ValueError(
                    f"non-rectangular design in slice ({metric}, {class_id}): "
                    f"missing {missing[:4]}{'...' if len(missing) > 4 else ''}"
                )

    def models(self) -> list:
        return sorted({r.model for r in self.records})

    def metrics(self) -> list:
        return sorted({r.metric for r in self.records})

    def classes(self, metric: str) -> list:
        return sorted({r.class_id for r in self.records if r.metric == metric})

    def folds(self, metric: str, class_id: str) -> list:
        return sorted(
            {r.fold for r in self.records if r.metric == metric and r.class_id == class_id}
        )

    def slice_values(self, metric: str, class_id: str) -> dict:
        """Map model -> list of values in ascending fold order."""
        recs = [
            r for r in self.records if r.metric == metric and r.class_id == class_id
        ]
        if not recs:
            raise ValueError(f"empty slice ({metric}, {class_id})")
        folds = sorted({r.fold for r in recs})
        by_key = {(r.model, r.fold): r.value for r in recs}
        return {
            m: [by_key[(m, f)] for f in folds] for m in sorted({r.model for r in recs})
        }


def _parse_strict_float(token: str, context: str) -> float:
    if not _DECIMAL_RE.match(token.strip()):
        raise ValueError(f"{context}: value {token!r} is not a plain decimal")
    return float(token)


def read_score_table(path: str) -> ScoreTable:
    records = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != SCORE_HEADER:
            raise ValueError(
                f"{path}: bad header {header!r}, expected {','.join(SCORE_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            model, fold_s, metric, class_id, value_s = (f.strip() for f in row)
            try:
                fold = int(fold_s)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: fold {fold_s!r} is not an integer") from exc
            value = _parse_strict_float(value_s, f"{path}:{lineno}")
            records.append(ScoreRecord(model, fold, metric, class_id, value))
    return ScoreTable(records)


def write_score_table(table: ScoreTable, path: str) -> None:
    lines = [",".join(SCORE_HEADER)]
    for rec in table.records:
        lines.append(
            f"{rec.model},{rec.fold},{rec.metric},{rec.class_id},{rec.value!r}"
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Split plans
# ---------------------------------------------------------------------------


@dataclass
class SplitPlan:
    """Train/test index partition per fold over range(n_samples)."""

    protocol: str
    n_samples: int
    folds: list
    seed: int = 0
    k: int | None = None

    def __post_init__(self):
        if self.protocol not in ("loocv", "kfold"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples to split")
        universe = set(range(self.n_samples))
        seen_test: set = set()
        for i, (train, test) in enumerate(self.folds):
            train_s, test_s = set(train), set(test)
            if train_s & test_s:
                raise ValueError(f"fold {i}: train and test overlap")
            if train_s | test_s != universe:
                raise ValueError(f"fold {i}: train/test do not cover all samples")
            if not test_s:
                raise ValueError(f"fold {i}: empty test set")
            if seen_test & test_s:
                raise ValueError(f"fold {i}: test indices repeat across folds")
            seen_test |= test_s
        if seen_test != universe:
            raise ValueError("test sets do not cover all samples")

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "k": self.k,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "folds": [
                {"train": list(train), "test": list(test)} for train, test in self.folds
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitPlan":
        folds = [
            (tuple(f["train"]), tuple(f["test"])) for f in payload["folds"]
        ]
        return cls(
            protocol=payload["protocol"],
            n_samples=payload["n_samples"],
            folds=folds,
            seed=payload.get("seed", 0),
            k=payload.get("k"),
        )


# ---------------------------------------------------------------------------
# Parameter bundles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FocalParams:
    """Focal-loss shape parameters (weighting alpha, focusing gamma)."""

    alpha: float = 0.8
    gamma: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.gamma < 0.0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class CompositeWeights:
    """Mixing weights for the combined focal + dice training loss."""

    lambda_focal: float = 0.5
    lambda_dice: float = 0.5

    def __post_init__(self):
        if self.lambda_focal < 0.0 or self.lambda_dice < 0.0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_focal + self.lambda_dice <= 0.0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class XaiWeights:
    """Per-layer weights for the composite explanation map (5 layers)."""

    alphas: tuple = (1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        if len(self.alphas) != 5:
            raise ValueError(f"expected 5 layer weights, got {len(self.alphas)}")
        if any(a < 0.0 for a in self.alphas):
            raise ValueError("layer weights must be non-negative")
