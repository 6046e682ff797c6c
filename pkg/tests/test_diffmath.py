import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from emostim import diffmath as dm
from emostim import gradcheck as gc

finite = st.floats(-30, 30, allow_nan=False)


def test_as_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        dm.as_tensor([1.0, np.nan])
    with pytest.raises(ValueError):
        dm.Param([np.inf])
    assert dm.as_tensor([np.nan], check=False).shape == (1,)


def test_rng_streams_are_reproducible_and_distinct():
    a = dm.make_rng(7, 1).standard_normal(5)
    assert np.array_equal(a, dm.make_rng(7, 1).standard_normal(5))
    assert not np.array_equal(a, dm.make_rng(7, 2).standard_normal(5))


def test_affine_examples():
    W = dm.Param(np.zeros((2, 3)))
    b = dm.Param(np.zeros(2))
    assert np.array_equal(dm.affine(np.array([1.0, -2.0, 3.0]), W, b), [0.0, 0.0])
    W = dm.Param([[2.0, 3.0], [4.0, 5.0]])
    assert np.array_equal(dm.affine(np.array([1.0, 0.0]), W), [2.0, 4.0])


def test_affine_shape_mismatch():
    with pytest.raises(dm.ShapeError):
        dm.affine(np.ones(3), dm.Param(np.ones((2, 2))))
    with pytest.raises(dm.ShapeError):
        dm.affine(np.ones(2), dm.Param(np.ones((2, 2))), dm.Param(np.ones(3)))


def test_pointwise_examples():
    assert np.array_equal(dm.tanh_map(np.zeros(2)), [0.0, 0.0])
    assert dm.sigmoid_map(np.array([0.0]))[0] == 0.5
    assert np.all(np.isfinite(dm.sigmoid_map(np.array([-1000.0, 1000.0]))))


def test_softmax_examples():
    for c in (-3.0, 0.0, 12.5):
        np.testing.assert_array_equal(dm.softmax(np.full(4, c)), np.full(4, 0.25))
    np.testing.assert_allclose(dm.softmax(np.array([math.log(1), math.log(3)])), [0.25, 0.75], rtol=1e-15)
    with pytest.raises(dm.ShapeError):
        dm.softmax(np.array([]))


@given(arrays(np.float64, st.integers(1, 12), elements=finite), st.floats(-50, 50))
def test_softmax_is_a_shift_invariant_distribution(x, shift):
    p = dm.softmax(x)
    assert abs(p.sum() - 1.0) <= 1e-12
    assert np.all(p > 0) and np.all(p <= 1)
    np.testing.assert_allclose(dm.softmax(x + shift), p, rtol=1e-9, atol=1e-15)


def test_concat():
    assert np.array_equal(dm.concat([[1.0], [2.0, 3.0]]), [1.0, 2.0, 3.0])
    assert dm.concat([np.zeros(2048), np.zeros(512), np.zeros(512)]).shape == (3072,)
    x = np.array([4.0, 5.0])
    assert np.array_equal(dm.concat([x]), x)
    parts = dm.concat_backward([1, 2], np.array([7.0, 8.0, 9.0]))
    assert [p.tolist() for p in parts] == [[7.0], [8.0, 9.0]]


def test_mean_rows():
    assert np.array_equal(dm.mean_rows([[1.0, 1.0], [3.0, 3.0]]), [2.0, 2.0])
    assert np.array_equal(dm.mean_rows([[0.3, -1.7]]), [0.3, -1.7])
    with pytest.raises(dm.ShapeError):
        dm.mean_rows(np.zeros((0, 3)))


def test_weighted_sum_selection_and_mismatch():
    F = np.arange(12.0).reshape(4, 3) * 0.37
    for j in range(4):
        assert np.array_equal(dm.weighted_sum(F, np.eye(4)[j]), F[j])
    with pytest.raises(dm.ShapeError):
        dm.weighted_sum(F, np.ones(3) / 3)


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 8)), elements=finite))
def test_weighted_sum_accumulates_left_to_right(F):
    alpha = np.linspace(0.1, 1.0, F.shape[0])
    acc = alpha[0] * F[0]
    for i in range(1, F.shape[0]):
        acc = acc + alpha[i] * F[i]
    assert np.array_equal(dm.weighted_sum(F, alpha), acc)
    uniform = np.full(F.shape[0], 1.0 / F.shape[0])
    assert np.array_equal(dm.weighted_sum(F, uniform), dm.mean_rows(F))


def test_nll_examples():
    assert dm.nll_from_probs(np.array([0.0, 1.0, 0.0]), 1) == 0.0
    p = np.array([0.1003, 0.8997])
    assert dm.nll_from_probs(p, 0) == pytest.approx(2.30, abs=0.01)
    clamped = dm.nll_from_probs(np.array([0.0, 1.0]), 0)
    assert clamped == pytest.approx(-math.log(1e-12)) and clamped == pytest.approx(27.631021115928547)
    with pytest.raises(IndexError):
        dm.nll_from_probs(p, 2)


def test_finite_diff_examples():
    np.testing.assert_allclose(dm.finite_diff_grad(lambda x: float(np.sum(x * x)), [1.0, 2.0]), [2.0, 4.0], atol=1e-6)
    np.testing.assert_allclose(dm.finite_diff_grad(lambda x: 3.0, [1.0, 2.0, 5.0]), 0.0, atol=1e-9)


def test_finite_diff_matches_affine_softmax_nll_composite():
    rng = dm.make_rng(3)
    W = dm.Param(rng.standard_normal((4, 3)))
    x = rng.standard_normal(3)

    def f(xv):
        return dm.nll_from_probs(dm.softmax(dm.affine(xv, W)), 2)

    p = dm.softmax(dm.affine(x, W))
    gx = dm.affine_backward(x, W, None, dm.softmax_backward(p, dm.nll_backward(p, 2)))
    assert dm.grad_error(gx, dm.finite_diff_grad(f, x)) < 1e-4


def test_grad_error_floor():
    assert dm.grad_error([1e-9], [5e-8]) < 1e-4
    assert dm.grad_error([1.0], [1.001]) > 1e-4
    assert dm.grad_error([1.0], [1.0 + 1e-6]) < 1e-4


def test_backward_accumulates():
    rng = dm.make_rng(0)
    x = rng.standard_normal(3)
    W, b = dm.Param(rng.standard_normal((2, 3))), dm.Param(rng.standard_normal(2))
    gy = rng.standard_normal(2)
    dm.affine_backward(x, W, b, gy)
    once_W, once_b = W.grad.copy(), b.grad.copy()
    dm.affine_backward(x, W, b, gy)
    assert np.array_equal(W.grad, 2 * once_W) and np.array_equal(b.grad, 2 * once_b)
    W.zero_grad()
    assert not W.grad.any()


PRIMITIVES = ["affine", "tanh", "sigmoid", "softmax", "concat", "mean_rows", "weighted_sum", "nll_from_probs"]


@pytest.mark.parametrize("name", PRIMITIVES)
@pytest.mark.parametrize("seed", range(10))
def test_primitive_backward_matches_finite_differences(name, seed):
    assert gc.COMPONENTS[name](dm.make_rng(seed, 5)) < 1e-4
