"""Engine tests: forward values, backward vs the finite-difference oracle,
tape semantics, and error reporting."""

import numpy as np
import pytest

from conftest import check_grads, rel_error

from magnet import diffcore as dc


# -- finite-difference oracle itself ------------------------------------------


def test_fd_oracle_sum():
    def f(x):
        return float(np.sum(x))

    got = dc.finite_difference_grad(f, np.array([1.0, 2.0]))
    np.testing.assert_allclose(got, [1.0, 1.0], atol=1e-9)


def test_fd_oracle_sum_of_squares():
    def f(x):
        return float(np.sum(x * x))

    got = dc.finite_difference_grad(f, np.array([2.0]))
    np.testing.assert_allclose(got, [4.0], atol=1e-8)


def test_fd_oracle_rejects_bad_step():
    with pytest.raises(ValueError):
        dc.finite_difference_grad(lambda x: 0.0, np.zeros(2), h=0.0)


def test_fd_oracle_rejects_non_finite_function():
    with pytest.raises(dc.NonFiniteError):
        dc.finite_difference_grad(lambda x: float("nan"), np.zeros(2))


# -- forward values ------------------------------------------------------------


def test_sigmoid_at_zero():
    out = dc.sigmoid(dc.tensor([0.0]))
    np.testing.assert_allclose(out.data, [0.5])


def test_softmax_rows_uniform():
    out = dc.softmax_rows(dc.tensor([[1.0, 1.0, 1.0]]))
    np.testing.assert_allclose(out.data, [[1 / 3, 1 / 3, 1 / 3]])


def test_matmul_ones():
    out = dc.matmul(dc.tensor(np.ones((2, 3))), dc.tensor(np.ones((3, 1))))
    np.testing.assert_allclose(out.data, [[3.0], [3.0]])


def test_masked_softmax_restricts_support():
    x = dc.tensor([[1.0, 5.0, 2.0], [4.0, 4.0, 4.0]])
    mask = np.array([[True, False, True], [False, False, False]])
    out = dc.softmax_rows(x, mask=mask)
    row0 = np.exp([1.0, 2.0]) / np.exp([1.0, 2.0]).sum()
    np.testing.assert_allclose(out.data[0], [row0[0], 0.0, row0[1]])
    np.testing.assert_allclose(out.data[1], [0.0, 0.0, 0.0])


def test_forward_op_dispatch_matches_helpers():
    a = dc.tensor(np.arange(6.0).reshape(2, 3))
    b = dc.tensor(np.arange(12.0).reshape(3, 4))
    np.testing.assert_array_equal(dc.forward_op("matmul", a, b).data, dc.matmul(a, b).data)
    np.testing.assert_array_equal(dc.forward_op("tanh", a).data, np.tanh(a.data))
    np.testing.assert_array_equal(
        dc.forward_op("slice", a, index=1).data, a.data[1]
    )
    with pytest.raises(ValueError, match="unknown op kind"):
        dc.forward_op("fft", a)


def test_forward_determinism_bitwise(rng):
    a = dc.tensor(rng.standard_normal((8, 8)))
    b = dc.tensor(rng.standard_normal((8, 8)))
    one = dc.softmax_rows(dc.matmul(dc.tanh(a), b)).data
    two = dc.softmax_rows(dc.matmul(dc.tanh(a), b)).data
    assert np.array_equal(one, two)


# -- backward basics -----------------------------------------------------------


def test_backward_sum_gives_ones():
    x = dc.param(np.arange(6.0).reshape(2, 3))
    with dc.Graph() as g:
        loss = dc.reduce_sum(x)
    dc.backward(g, loss)
    np.testing.assert_array_equal(x.grad, np.ones((2, 3)))


def test_backward_square_sum():
    x = dc.param([3.0])
    with dc.Graph() as g:
        loss = dc.reduce_sum(dc.mul(x, x))
    dc.backward(g, loss)
    np.testing.assert_allclose(x.grad, [6.0])


def test_fanout_accumulates():
    x = dc.param([1.5, -2.0])
    with dc.Graph() as g:
        y = dc.add(x, x)
        loss = dc.reduce_sum(y)
    dc.backward(g, loss)
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])


def test_five_parameter_graph_matches_fd_tightly(rng):
    x = dc.param(rng.standard_normal(5))

    def build():
        y = dc.tanh(x)
        z = dc.sigmoid(y)
        return dc.reduce_sum(dc.mul(y, z))

    errs = check_grads(build, {"x": x}, tol=1e-6)
    assert errs["x"] < 1e-6


def test_backward_requires_scalar_root():
    x = dc.param(np.ones(3))
    with dc.Graph() as g:
        y = dc.tanh(x)
    with pytest.raises(ValueError, match="scalar"):
        dc.backward(g, y)


def test_graph_consumed_error():
    x = dc.param(np.ones(3))
    with dc.Graph() as g:
        loss = dc.reduce_sum(x)
    dc.backward(g, loss)
    with pytest.raises(dc.GraphConsumedError):
        dc.backward(g, loss)


def test_nested_graph_rejected():
    with dc.Graph():
        with pytest.raises(RuntimeError, match="already active"):
            with dc.Graph():
                pass


# -- per-op gradient checks over random draws ----------------------------------


def _nudge_from_kinks(arr, margin=1e-3):
    """Shift values whose magnitude is below margin away from zero, so relu
    finite differences never straddle the kink."""
    small = np.abs(arr) < margin
    arr[small] = margin * np.where(arr[small] >= 0, 1.0, -1.0)
    return arr


@pytest.mark.parametrize("draw", range(20))
def test_primitive_ops_match_fd(draw):
    rng = np.random.default_rng(1000 + draw)
    a = dc.param(rng.standard_normal((3, 4)))
    b = dc.param(rng.standard_normal((4, 2)))
    c = dc.param(rng.standard_normal((3, 2)))
    v = dc.param(_nudge_from_kinks(rng.standard_normal(8)))
    mask = (rng.random((3, 2)) > 0.4) / 0.6
    ids = rng.integers(0, 3, size=5)  # repeats exercise scatter-add
    targets = (rng.random(4) > 0.5).astype(np.float64)

    def build():
        prod = dc.matmul(a, b)  # 3x2
        mixed = dc.add(prod, c)
        gated = dc.mul(mixed, c)
        soft = dc.softmax_rows(dc.relu(gated))
        dropped = dc.dropout_apply(dc.tanh(soft), mask)
        gathered = dc.gather_rows(dropped, ids)  # 5x2
        wide = dc.concat([gathered, gathered], axis=1)  # 5x4
        pooled = dc.reduce_mean(wide, axis=0)  # 4
        head = dc.sigmoid(dc.slice_range(v, 0, 4))
        tail = dc.slice_range(v, 4, 8)
        joined = dc.concat([dc.mul(pooled, head), tail])
        r = dc.row(dc.transpose(dc.matmul(dc.transpose(b), dc.transpose(a))), 1)
        scalar_scaled = dc.mul(dc.reduce_sum(r), 0.25)
        return dc.add(
            dc.bce_with_logits(dc.slice_range(joined, 0, 4), targets),
            dc.add(dc.reduce_mean(dc.mul(joined, joined)), scalar_scaled),
        )

    check_grads(build, {"a": a, "b": b, "c": c, "v": v}, tol=1e-4)


def test_matmul_vector_cases_match_fd(rng):
    m = dc.param(rng.standard_normal((4, 3)))
    x = dc.param(rng.standard_normal(3))
    y = dc.param(rng.standard_normal(4))

    def build():
        mv = dc.matmul(m, x)  # 2d @ 1d
        vm = dc.matmul(y, m)  # 1d @ 2d
        return dc.add(dc.reduce_sum(dc.tanh(mv)), dc.matmul(vm, x))  # 1d @ 1d

    check_grads(build, {"m": m, "x": x, "y": y}, tol=1e-4)


def test_masked_softmax_grads_match_fd(rng):
    x = dc.param(rng.standard_normal((4, 4)))
    mask = rng.random((4, 4)) > 0.3
    mask[2] = False  # one empty-support row

    def build():
        return dc.reduce_sum(dc.mul(dc.softmax_rows(x, mask=mask), x))

    check_grads(build, {"x": x}, tol=1e-4)


# -- bce values ------------------------------------------------------------------


def test_bce_at_zero_logits():
    for c in (1, 3, 7):
        loss = dc.bce_with_logits(dc.tensor(np.zeros(c)), np.ones(c))
        np.testing.assert_allclose(loss.item(), c * np.log(2.0), rtol=1e-12)


def test_bce_saturation_limit():
    loss = dc.bce_with_logits(dc.tensor([40.0, 40.0]), np.array([1.0, 1.0]))
    assert loss.item() < 1e-12


def test_bce_hand_value():
    # softplus(-2) + softplus(-1)
    expected = np.log1p(np.exp(-2.0)) + np.log1p(np.exp(-1.0))
    loss = dc.bce_with_logits(dc.tensor([2.0, -1.0]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(loss.item(), expected, rtol=1e-12)
    assert abs(loss.item() - 0.4402) < 1e-4


# -- error reporting -------------------------------------------------------------


def test_shape_error_names_op_and_shapes():
    a = dc.tensor(np.ones((2, 3)))
    b = dc.tensor(np.ones((4, 1)))
    with pytest.raises(dc.ShapeMismatchError) as err:
        dc.matmul(a, b)
    msg = str(err.value)
    assert "matmul" in msg and "(2, 3)" in msg and "(4, 1)" in msg


def test_add_shape_error():
    with pytest.raises(dc.ShapeMismatchError, match="add"):
        dc.add(dc.tensor(np.ones(3)), dc.tensor(np.ones(4)))


def test_non_finite_input_rejected():
    bad = dc.tensor([1.0])
    bad.data = np.array([np.nan])
    with pytest.raises(dc.NonFiniteError):
        dc.tanh(bad)


def test_concat_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        dc.concat([])


def test_tensor_invariant_shape_matches_data(rng):
    t = dc.tensor(rng.standard_normal((3, 5)))
    assert t.shape == (3, 5)
    assert t.data.size == 15
    assert t.grad is None
