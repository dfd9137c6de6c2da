"""Explanation layers against brute-force pixel oracles and worked examples."""

import numpy as np
import pytest
from PIL import Image

import oracles
from segstab.datamodel import LabelMask, ProbMap, XaiWeights
from segstab.xai import (
    ExplanationMap,
    class_attention_map,
    composite_map,
    entropy_bits,
    error_map,
    morphology_map,
    saliency_map,
    uncertainty_map,
    uncertainty_stability,
    write_map_png,
)


def _softmax(rng, h, w, k):
    logits = rng.normal(size=(h, w, k))
    p = np.exp(logits)
    return ProbMap(p / p.sum(axis=2, keepdims=True))


# ---------------------------------------------------------------------------
# container
# ---------------------------------------------------------------------------


def test_explanation_map_validation_and_clipping():
    emap = ExplanationMap(np.array([[0.0, 1.0], [-1e-13, 1.0 + 1e-13]]), "error")
    assert emap.values.min() == 0.0 and emap.values.max() == 1.0
    with pytest.raises(ValueError):
        emap.values[0, 0] = 0.5
    with pytest.raises(ValueError, match="outside"):
        ExplanationMap(np.array([[1.5]]), "error")
    with pytest.raises(ValueError, match="unknown layer"):
        ExplanationMap(np.zeros((2, 2)), "novelty")
    with pytest.raises(ValueError, match="2-D"):
        ExplanationMap(np.zeros((2, 2, 2)), "error")


# ---------------------------------------------------------------------------
# error and uncertainty
# ---------------------------------------------------------------------------


def test_error_map_is_symmetric_binary_disagreement():
    a = LabelMask(np.array([[0, 1], [2, 3]]), 4)
    b = LabelMask(np.array([[0, 2], [2, 0]]), 4)
    forward = error_map(a, b)
    assert forward.values.tolist() == [[0.0, 1.0], [0.0, 1.0]]
    assert np.array_equal(forward.values, error_map(b, a).values)


def test_entropy_extremes_and_normalization():
    one_hot = np.zeros((1, 2, 4))
    one_hot[0, 0, 2] = 1.0
    one_hot[0, 1, :] = 0.25
    probs = ProbMap(one_hot)
    bits = entropy_bits(probs)
    assert bits[0, 0] == 0.0
    assert bits[0, 1] == pytest.approx(2.0, abs=1e-12)
    normalized = uncertainty_map(probs)
    assert normalized.values[0, 0] == 0.0
    assert normalized.values[0, 1] == pytest.approx(1.0, abs=1e-12)


def test_entropy_matches_pixel_oracle():
    probs = _softmax(np.random.default_rng(0), 9, 7, 5)
    assert np.allclose(
        entropy_bits(probs), oracles.entropy_bits_grid(probs.values), atol=1e-12
    )


# ---------------------------------------------------------------------------
# texture layers
# ---------------------------------------------------------------------------


def test_morphology_zero_on_constant_image():
    flat = morphology_map(np.full((8, 8), 0.7))
    assert flat.values.max() == 0.0


def test_morphology_concentrates_near_a_step_edge():
    img = np.zeros((8, 8))
    img[:, 4:] = 1.0
    values = morphology_map(img).values
    active = sorted({c for r, c in zip(*np.nonzero(values))})
    assert active == [2, 3, 4, 5]  # within 2 px of the 3|4 edge
    assert values[:, 3:5].min() > values[:, 2].max() / 2


def test_morphology_agrees_with_loop_oracle():
    rng = np.random.default_rng(1)
    img = rng.random((10, 9))
    values = morphology_map(img).values
    std_ref = oracles.local_std_5x5(img)
    grad_ref = oracles.morph_gradient_3x3(img)
    expected = 0.5 * std_ref / std_ref.max() + 0.5 * grad_ref / grad_ref.max()
    assert np.allclose(values, expected, atol=1e-7)


def test_saliency_peaks_on_the_edge_and_transposes():
    img = np.zeros((7, 7))
    img[:, 3:] = 1.0
    values = saliency_map(img).values
    assert values[:, 0].max() == 0.0 and values[:, 6].max() == 0.0
    peak_cols = {c for r, c in zip(*np.where(values == 1.0))}
    assert peak_cols == {2, 3}
    flipped = saliency_map(img.T).values
    assert np.allclose(flipped, values.T, atol=1e-12)


def test_saliency_matches_loop_oracle():
    rng = np.random.default_rng(2)
    img = rng.random((8, 11))
    ref = oracles.sobel_magnitude(img)
    assert np.allclose(saliency_map(img).values, ref / ref.max(), atol=1e-12)


def test_image_layers_validate_input():
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        saliency_map(np.full((4, 4), 2.0))
    with pytest.raises(ValueError, match="2-D"):
        morphology_map(np.zeros((4, 4, 3)))


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------


def test_attention_worked_example():
    m1 = np.zeros((2, 4), dtype=int)
    m1[:, 0] = 1
    m2 = np.zeros((2, 4), dtype=int)
    m2[:, 1] = 1
    m3 = np.zeros((2, 4), dtype=int)
    m3[:, 2] = 1
    attn = class_attention_map([m1, m2, m3], [0.5, 0.75, 1.0])
    # deficits 0.5, 0.25, 0 over disjoint regions; total deficit 0.75 < 1
    # so the raw values pass through unscaled
    assert attn.values[0].tolist() == [0.5, 0.25, 0.0, 0.0]


def test_attention_matches_loop_oracle_with_overlap():
    rng = np.random.default_rng(3)
    masks = [(rng.random((6, 6)) > 0.5).astype(int) for _ in range(4)]
    dices = [0.2, 0.6, 0.9, 0.4]
    ours = class_attention_map(masks, dices).values
    assert np.allclose(ours, oracles.attention_grid(masks, dices), atol=1e-13)
    assert ours.max() <= 1.0


def test_attention_perfect_classes_contribute_nothing():
    m1 = np.ones((2, 2), dtype=int)
    m2 = np.ones((2, 2), dtype=int)
    m3 = np.eye(2, dtype=int)
    attn = class_attention_map([m1, m2, m3], [1.0, 1.0, 0.0])
    assert np.array_equal(attn.values, m3.astype(float))


def test_attention_validation():
    mask = np.ones((2, 2), dtype=int)
    with pytest.raises(ValueError, match="binary"):
        class_attention_map([mask * 2], [0.5])
    with pytest.raises(ValueError, match="equally many"):
        class_attention_map([mask], [0.5, 0.6])
    with pytest.raises(ValueError, match="one shape"):
        class_attention_map([mask, np.ones((3, 3), dtype=int)], [0.5, 0.5])
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        class_attention_map([mask], [1.5])


# ---------------------------------------------------------------------------
# composite
# ---------------------------------------------------------------------------


def test_composite_two_layer_arithmetic():
    a = ExplanationMap(np.full((2, 2), 0.2), "error")
    b = ExplanationMap(np.full((2, 2), 0.6), "saliency")
    mixed = composite_map([a, b], [1.0, 1.0])
    assert np.allclose(mixed.values, 0.4)
    assert mixed.layer_id == "composite"


def test_composite_weight_rescaling_invariance():
    rng = np.random.default_rng(4)
    layers = [
        ExplanationMap(rng.random((5, 5)), layer)
        for layer in ("error", "uncertainty", "morphology", "attention", "saliency")
    ]
    base = composite_map(layers, XaiWeights((1.0, 2.0, 0.5, 0.0, 3.0)))
    scaled = composite_map(layers, (7.0, 14.0, 3.5, 0.0, 21.0))
    assert np.allclose(base.values, scaled.values, atol=1e-15)


def test_composite_zero_weights_yield_zero_map():
    layers = [ExplanationMap(np.ones((3, 3)), "error")]
    assert composite_map(layers, [0.0]).values.max() == 0.0


def test_composite_validation():
    layer = ExplanationMap(np.zeros((2, 2)), "error")
    with pytest.raises(ValueError, match="weights"):
        composite_map([layer], [1.0, 1.0])
    with pytest.raises(ValueError, match="non-negative"):
        composite_map([layer], [-1.0])
    with pytest.raises(ValueError, match="no layers"):
        composite_map([], [])
    with pytest.raises(ValueError, match="one shape"):
        composite_map([layer, ExplanationMap(np.zeros((3, 3)), "error")], [1.0, 1.0])


# ---------------------------------------------------------------------------
# stability across folds
# ---------------------------------------------------------------------------


def test_stability_worked_example():
    maps = [
        ExplanationMap(np.full((2, 2), v), "uncertainty") for v in (0.2, 0.4, 0.6)
    ]
    result = uncertainty_stability(maps)
    assert np.allclose(result.mean_map.values, 0.4)
    assert np.allclose(result.variance_map, 0.08 / 3.0)
    assert result.n_folds == 3


def test_stability_matches_brute_force_oracle():
    rng = np.random.default_rng(5)
    stacks = [rng.random((16, 16)) for _ in range(4)]
    maps = [ExplanationMap(s, "uncertainty") for s in stacks]
    result = uncertainty_stability(maps)
    mean_ref, var_ref = oracles.stack_mean_variance(stacks)
    assert np.allclose(result.mean_map.values, mean_ref, atol=1e-12)
    assert np.allclose(result.variance_map, var_ref, atol=1e-12)


def test_stability_identical_maps_have_zero_variance():
    emap = ExplanationMap(np.random.default_rng(6).random((4, 4)), "composite")
    result = uncertainty_stability([emap, emap, emap])
    assert result.variance_map.max() == 0.0


def test_stability_validation():
    a = ExplanationMap(np.zeros((2, 2)), "error")
    with pytest.raises(ValueError, match="at least 2"):
        uncertainty_stability([a])
    with pytest.raises(ValueError, match="layer id"):
        uncertainty_stability([a, ExplanationMap(np.zeros((2, 2)), "saliency")])
    with pytest.raises(ValueError, match="one shape"):
        uncertainty_stability([a, ExplanationMap(np.zeros((3, 3)), "error")])


def test_write_map_png_quantizes_to_bytes(tmp_path):
    values = np.array([[0.0, 0.5], [0.25, 1.0]])
    path = str(tmp_path / "map.png")
    write_map_png(ExplanationMap(values, "composite"), path)
    read_back = np.asarray(Image.open(path))
    assert read_back.dtype == np.uint8
    assert np.array_equal(read_back, np.round(values * 255).astype(np.uint8))
