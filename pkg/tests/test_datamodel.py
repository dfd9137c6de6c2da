"""File formats and validation: masks, probability maps, score tables, plans."""

import json
import os

import numpy as np
import pytest
from PIL import Image

from segstab.datamodel import (
    LabelMask,
    ProbMap,
    ScoreRecord,
    ScoreTable,
    SplitPlan,
    FocalParams,
    CompositeWeights,
    XaiWeights,
    atomic_write_text,
    read_grayscale_image,
    read_label_mask,
    read_prob_map,
    read_score_table,
    write_label_mask_png,
    write_label_mask_text,
    write_prob_map,
    write_score_table,
)


def _softmax_map(seed, h=6, w=5, k=3):
    rng = np.random.default_rng(seed)
    logits = rng.normal(size=(h, w, k))
    p = np.exp(logits)
    return p / p.sum(axis=2, keepdims=True)


# ---------------------------------------------------------------------------
# label masks
# ---------------------------------------------------------------------------


def test_label_mask_validation():
    LabelMask(np.zeros((2, 2), dtype=int), 1)
    with pytest.raises(ValueError, match="2-D"):
        LabelMask(np.zeros((2, 2, 2), dtype=int), 4)
    with pytest.raises(ValueError, match="integer"):
        LabelMask(np.zeros((2, 2)), 4)
    with pytest.raises(ValueError, match=r"\[0, 3\)"):
        LabelMask(np.full((2, 2), 3), 3)
    with pytest.raises(ValueError, match=r"\[0, 2\)"):
        LabelMask(np.array([[-1, 0]]), 2)


def test_label_mask_is_read_only_and_comparable():
    mask = LabelMask.from_array([[0, 1], [2, 1]])
    assert mask.num_classes == 3
    assert mask.labels.dtype == np.int64
    with pytest.raises(ValueError):
        mask.labels[0, 0] = 1
    assert mask == LabelMask(np.array([[0, 1], [2, 1]]), 3)
    assert mask != LabelMask(np.array([[0, 1], [2, 1]]), 4)


def test_mask_text_round_trip(tmp_path):
    mask = LabelMask.from_array([[0, 1, 2], [3, 0, 1]])
    path = str(tmp_path / "mask.txt")
    write_label_mask_text(mask, path)
    again = read_label_mask(path)
    assert again == mask


def test_mask_png_round_trip_and_sniffing(tmp_path):
    mask = LabelMask.from_array(np.arange(12).reshape(3, 4) % 4)
    path = str(tmp_path / "mask.png")
    write_label_mask_png(mask, path)
    again = read_label_mask(path)
    assert again == mask
    # the PNG signature, not the extension, selects the reader
    sneaky = str(tmp_path / "actually_png.txt")
    with open(path, "rb") as src, open(sneaky, "wb") as dst:
        dst.write(src.read())
    assert read_label_mask(sneaky) == mask


def test_mask_png_rejects_multichannel(tmp_path):
    path = str(tmp_path / "rgb.png")
    Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB").save(path)
    with pytest.raises(ValueError, match="mode L"):
        read_label_mask(path)


def test_mask_text_errors(tmp_path):
    ragged = tmp_path / "ragged.txt"
    ragged.write_text("0 1 2\n0 1\n")
    with pytest.raises(ValueError, match="non-rectangular"):
        read_label_mask(str(ragged))
    bad = tmp_path / "bad.txt"
    bad.write_text("0 x 2\n")
    with pytest.raises(ValueError, match="non-integer"):
        read_label_mask(str(bad))
    empty = tmp_path / "empty.txt"
    empty.write_text("\n\n")
    with pytest.raises(ValueError, match="empty"):
        read_label_mask(str(empty))


def test_read_label_mask_class_count_overrides(tmp_path):
    path = str(tmp_path / "m.txt")
    write_label_mask_text(LabelMask.from_array([[0, 1], [1, 0]]), path)
    assert read_label_mask(path).num_classes == 2
    assert read_label_mask(path, num_classes=4).num_classes == 4
    with pytest.raises(ValueError, match="at least 3"):
        read_label_mask(path, min_classes=3)


def test_read_grayscale_image_scales_to_unit(tmp_path):
    path = str(tmp_path / "img.png")
    Image.fromarray(np.array([[0, 128], [255, 64]], dtype=np.uint8), mode="L").save(path)
    img = read_grayscale_image(path)
    assert img.dtype == np.float64
    assert img[0, 0] == 0.0 and img[1, 0] == 1.0
    assert abs(img[0, 1] - 128 / 255) < 1e-12


# ---------------------------------------------------------------------------
# probability maps
# ---------------------------------------------------------------------------


def test_prob_map_validation():
    ProbMap(_softmax_map(0))
    with pytest.raises(ValueError, match="K >= 2"):
        ProbMap(np.ones((2, 2, 1)))
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        bad = _softmax_map(1)
        bad[0, 0, 0] = -0.01
        ProbMap(bad)
    with pytest.raises(ValueError, match="not normalized"):
        bad = _softmax_map(2).copy()
        bad[0, 0, :] *= 1.001
        ProbMap(bad)


def test_prob_map_sum_tolerance_boundary():
    p = np.full((1, 1, 2), 0.5)
    p[0, 0, 0] += 5e-5  # sums to 1 + 5e-5, inside the 1e-4 budget
    ProbMap(p.copy())
    p[0, 0, 0] += 1e-4  # now outside
    with pytest.raises(ValueError, match="not normalized"):
        ProbMap(p)


def test_prob_map_round_trip_is_float32_exact(tmp_path):
    pmap = ProbMap(np.asarray(_softmax_map(3), dtype=np.float32))
    path = str(tmp_path / "p.pmap")
    write_prob_map(pmap, path)
    again = read_prob_map(path)
    assert again.values.shape == pmap.values.shape
    assert np.array_equal(again.values, pmap.values)
    with open(path, "rb") as fh:
        header = fh.readline().decode()
    assert header == f"PMAP v1 {pmap.height} {pmap.width} {pmap.num_classes}\n"


def test_prob_map_header_and_payload_errors(tmp_path):
    good = str(tmp_path / "good.pmap")
    write_prob_map(ProbMap(_softmax_map(4)), good)
    payload = open(good, "rb").read()

    bad_magic = tmp_path / "magic.pmap"
    bad_magic.write_bytes(b"XMAP v1 2 2 2\n" + b"\x00" * 32)
    with pytest.raises(ValueError, match="bad magic"):
        read_prob_map(str(bad_magic))

    truncated = tmp_path / "short.pmap"
    truncated.write_bytes(payload[:-7])
    with pytest.raises(ValueError, match="length mismatch"):
        read_prob_map(str(truncated))

    headerless = tmp_path / "raw.pmap"
    headerless.write_bytes(b"\x01" * 300)
    with pytest.raises(ValueError, match="header"):
        read_prob_map(str(headerless))

    bad_dims = tmp_path / "dims.pmap"
    bad_dims.write_bytes(b"PMAP v1 0 2 2\n")
    with pytest.raises(ValueError, match="bad dimensions"):
        read_prob_map(str(bad_dims))

    unnorm = tmp_path / "unnorm.pmap"
    vals = np.full((1, 1, 2), 0.9, dtype="<f4")
    unnorm.write_bytes(b"PMAP v1 1 1 2\n" + vals.tobytes())
    with pytest.raises(ValueError, match="not normalized"):
        read_prob_map(str(unnorm))


# ---------------------------------------------------------------------------
# score tables
# ---------------------------------------------------------------------------


def _small_table():
    recs = [
        ScoreRecord(m, f, "dice", "macro", 0.5 + 0.01 * f + 0.1 * i)
        for i, m in enumerate(("a", "b"))
        for f in range(3)
    ]
    return ScoreTable(recs)


def test_score_table_accessors_and_slice_order():
    table = _small_table()
    assert table.models() == ["a", "b"]
    assert table.metrics() == ["dice"]
    assert table.classes("dice") == ["macro"]
    assert table.folds("dice", "macro") == [0, 1, 2]
    values = table.slice_values("dice", "macro")
    assert values["a"] == [0.5, 0.51, 0.52]
    assert values["b"] == [0.6, 0.61, 0.62]
    with pytest.raises(ValueError, match="empty slice"):
        table.slice_values("iou", "macro")


def test_score_table_rejects_duplicates_and_holes():
    rec = ScoreRecord("a", 0, "dice", "macro", 0.5)
    with pytest.raises(ValueError, match="duplicate"):
        ScoreTable([rec, ScoreRecord("a", 0, "dice", "macro", 0.6)])
    with pytest.raises(ValueError, match="non-rectangular"):
        ScoreTable(
            [
                rec,
                ScoreRecord("a", 1, "dice", "macro", 0.5),
                ScoreRecord("b", 0, "dice", "macro", 0.5),
            ]
        )
    with pytest.raises(ValueError, match="non-finite"):
        ScoreTable([ScoreRecord("a", 0, "dice", "macro", float("nan"))])


def test_score_csv_round_trip_preserves_floats(tmp_path):
    table = ScoreTable(
        [
            ScoreRecord("m", 0, "dice", "macro", 0.1 + 0.2),
            ScoreRecord("m", 1, "dice", "macro", 1e-17),
        ]
    )
    path = str(tmp_path / "scores.csv")
    write_score_table(table, path)
    again = read_score_table(path)
    assert [r.value for r in again.records] == [0.1 + 0.2, 1e-17]
    assert [r.fold for r in again.records] == [0, 1]


def test_score_csv_strictness(tmp_path):
    header = "model,fold,metric,class,value\n"
    cases = {
        "wrong_header.csv": ("model,fold,metric,klass,value\nm,0,dice,macro,0.5\n", "bad header"),
        "bad_fold.csv": (header + "m,first,dice,macro,0.5\n", "not an integer"),
        "bad_value.csv": (header + "m,0,dice,macro,fast\n", "not a plain decimal"),
        "short_row.csv": (header + "m,0,dice,macro\n", "expected 5 fields"),
        "empty.csv": ("", "empty file"),
    }
    for name, (content, message) in cases.items():
        path = tmp_path / name
        path.write_text(content)
        with pytest.raises(ValueError, match=message):
            read_score_table(str(path))


def test_score_csv_accepts_scientific_notation_and_blank_lines(tmp_path):
    path = tmp_path / "ok.csv"
    path.write_text("model,fold,metric,class,value\nm,0,dice,macro,5e-1\n\nm,1,dice,macro,.75\n")
    table = read_score_table(str(path))
    assert [r.value for r in table.records] == [0.5, 0.75]


# ---------------------------------------------------------------------------
# split plans
# ---------------------------------------------------------------------------


def test_split_plan_partition_validation():
    good = SplitPlan(
        protocol="kfold",
        n_samples=4,
        folds=[((2, 3), (0, 1)), ((0, 1), (2, 3))],
        seed=0,
        k=2,
    )
    assert good.k == 2
    with pytest.raises(ValueError, match="overlap"):
        SplitPlan("kfold", 4, [((0, 1, 2), (2, 3)), ((0, 1), (2, 3))], 0, 2)
    with pytest.raises(ValueError, match="cover"):
        SplitPlan("kfold", 4, [((2,), (0, 1)), ((0, 1), (2, 3))], 0, 2)
    with pytest.raises(ValueError, match="repeat"):
        SplitPlan("kfold", 4, [((2, 3), (0, 1)), ((0, 2), (1, 3))], 0, 2)
    with pytest.raises(ValueError, match="unknown protocol"):
        SplitPlan("holdout", 4, [((2, 3), (0, 1)), ((0, 1), (2, 3))], 0, 2)


def test_split_plan_json_round_trip():
    plan = SplitPlan("loocv", 3, [((1, 2), (0,)), ((0, 2), (1,)), ((0, 1), (2,))])
    again = SplitPlan.from_dict(json.loads(plan.to_json()))
    assert again == plan


# ---------------------------------------------------------------------------
# parameter bundles and atomic writes
# ---------------------------------------------------------------------------


def test_parameter_bundle_validation():
    assert FocalParams().alpha == 0.8 and FocalParams().gamma == 2.0
    with pytest.raises(ValueError):
        FocalParams(alpha=0.0)
    with pytest.raises(ValueError):
        FocalParams(gamma=-1.0)
    assert CompositeWeights() == CompositeWeights(0.5, 0.5)
    with pytest.raises(ValueError):
        CompositeWeights(-0.1, 0.5)
    with pytest.raises(ValueError):
        CompositeWeights(0.0, 0.0)
    assert len(XaiWeights().alphas) == 5
    with pytest.raises(ValueError):
        XaiWeights((1.0, 1.0))
    with pytest.raises(ValueError):
        XaiWeights((1.0, 1.0, 1.0, 1.0, -1.0))


def test_atomic_write_replaces_and_leaves_no_droppings(tmp_path):
    path = str(tmp_path / "out.txt")
    atomic_write_text(path, "first\n")
    atomic_write_text(path, "second\n")
    assert open(path).read() == "second\n"
    assert os.listdir(tmp_path) == ["out.txt"]
