import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from magnet.metrics import (
    ConfusionTotals,
    binarize,
    confusion_totals,
    hamming_loss,
    metrics_record,
    micro_f1,
    micro_precision,
    micro_recall,
)


def _brute_force_counts(y, z):
    """Independent per-cell counting oracle."""
    tp = fp = fn = 0
    mism = 0
    for i in range(y.shape[0]):
        for j in range(y.shape[1]):
            if y[i, j] == 1 and z[i, j] == 1:
                tp += 1
            elif y[i, j] == 0 and z[i, j] == 1:
                fp += 1
            elif y[i, j] == 1 and z[i, j] == 0:
                fn += 1
            if y[i, j] != z[i, j]:
                mism += 1
    f1 = 2 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0
    return f1, mism / y.size


def test_perfect_predictions():
    y = np.array([[1, 0], [0, 1]])
    t = confusion_totals(y, y)
    assert micro_f1(t) == 1.0
    assert hamming_loss(y, y) == 0.0


def test_hand_example_micro_f1():
    t = ConfusionTotals(np.array([2, 1]), np.array([1, 0]), np.array([0, 1]), 4, 2)
    assert micro_f1(t) == pytest.approx(0.75)


def test_hand_example_hamming():
    y = np.array([[1, 0, 0], [0, 1, 1]])
    z = np.array([[1, 0, 1], [0, 1, 1]])
    assert hamming_loss(y, z) == pytest.approx(1 / 6)


def test_no_positive_predictions_scores_zero():
    y = np.array([[1, 1], [1, 0]])
    z = np.zeros_like(y)
    assert micro_f1(confusion_totals(y, z)) == 0.0


def test_complement_predictions_hamming_one():
    y = np.array([[1, 0], [0, 1]])
    assert hamming_loss(y, 1 - y) == 1.0


def test_empty_all_negative_f1_warns_and_zeroes(caplog):
    y = np.zeros((3, 4), dtype=int)
    with caplog.at_level("WARNING"):
        assert micro_f1(confusion_totals(y, y)) == 0.0
    assert any("micro_f1" in r.message for r in caplog.records)


def test_f1_equals_harmonic_mean_of_precision_recall(rng):
    for _ in range(50):
        y = (rng.random((6, 5)) > 0.5).astype(int)
        z = (rng.random((6, 5)) > 0.5).astype(int)
        t = confusion_totals(y, z)
        p, r = micro_precision(t), micro_recall(t)
        if p + r == 0:
            continue
        assert micro_f1(t) == pytest.approx(2 * p * r / (p + r), abs=1e-12)


def test_thousand_random_pairs_match_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        ell = int(rng.integers(1, 6))
        y = (rng.random((n, ell)) > 0.5).astype(int)
        z = (rng.random((n, ell)) > 0.5).astype(int)
        want_f1, want_hl = _brute_force_counts(y, z)
        assert micro_f1(confusion_totals(y, z)) == want_f1
        assert hamming_loss(y, z) == want_hl


@settings(max_examples=60)
@given(
    arrays(np.int8, (4, 3), elements=st.integers(0, 1)),
    arrays(np.int8, (4, 3), elements=st.integers(0, 1)),
)
def test_metrics_invariant_to_permutations(y, z):
    rng = np.random.default_rng(0)
    t = confusion_totals(y, z)
    base_f1, base_hl = micro_f1(t), hamming_loss(y, z)
    rows = rng.permutation(4)
    cols = rng.permutation(3)
    yp, zp = y[rows][:, cols], z[rows][:, cols]
    assert micro_f1(confusion_totals(yp, zp)) == pytest.approx(base_f1, abs=1e-12)
    assert hamming_loss(yp, zp) == pytest.approx(base_hl, abs=1e-12)


def test_binarize_thresholds_at_zero():
    logits = np.array([[-0.5, 0.0, 1e-9], [3.0, -2.0, 0.1]])
    np.testing.assert_array_equal(binarize(logits), [[0, 0, 1], [1, 0, 1]])


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError, match="shape"):
        hamming_loss(np.zeros((2, 3)), np.zeros((3, 2)))
    with pytest.raises(ValueError, match="shape"):
        confusion_totals(np.zeros((2, 3)), np.zeros((2, 4)))


def test_metrics_record_is_json_line_with_stable_fields():
    line = metrics_record(3, "eval", 0.25, 0.9, 0.05)
    obj = json.loads(line)
    assert list(obj) == ["epoch", "split", "loss", "micro_f1", "hamming_loss"]
    assert obj["epoch"] == 3 and obj["split"] == "eval"
