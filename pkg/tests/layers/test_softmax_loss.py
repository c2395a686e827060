import math

import numpy as np
import pytest

from oracles import check_layer, random_blob
from portanet.blob import Blob
from portanet.errors import InputError
from portanet.layers import LossParams, SoftmaxWithLossLayer, softmax_loss_backward, softmax_loss_forward


def test_perfect_prediction():
    x = np.full((2, 3), -50, np.float32)
    x[0, 1] = x[1, 2] = 50
    loss, _ = softmax_loss_forward(x, [1, 2])
    assert 0 <= loss < 1e-6


def test_uniform_logits_give_ln10():
    loss, _ = softmax_loss_forward(np.zeros((4, 10), np.float32), [0, 3, 9, 5])
    assert abs(loss - math.log(10)) <= 1e-4


def test_matches_scalar_oracle(rng):
    x = rng.standard_normal((4, 3)).astype(np.float32)
    labels = [2, 0, 1, 1]
    expected = 0.0
    for row, lab in zip(x.astype(np.float64), labels):
        expected -= row[lab] - math.log(sum(math.exp(v) for v in row))
    loss, prob = softmax_loss_forward(x, labels)
    assert abs(loss - expected / 4) <= 1e-6 * max(1, abs(expected))
    assert prob.shape == (4, 3)


def test_log_floor_keeps_loss_finite():
    loss, _ = softmax_loss_forward(np.array([[0, 200]], np.float32), [0])
    assert math.isfinite(loss)


def test_backward_one_hot_is_zero():
    p = np.eye(3, dtype=np.float32)
    dx = np.ones_like(p)
    softmax_loss_backward(p, [0, 1, 2], 1.0, dx)
    assert not dx.any()


def test_backward_rows_sum_to_zero(rng):
    _, p = softmax_loss_forward(rng.standard_normal((5, 7)).astype(np.float32), [0, 1, 2, 3, 6])
    dx = np.empty_like(p)
    softmax_loss_backward(p, [0, 1, 2, 3, 6], 2.0, dx)
    assert np.abs(dx.astype(np.float64).sum(axis=1)).max() <= 1e-6


def test_labels_out_of_range():
    x = np.zeros((2, 3), np.float32)
    with pytest.raises(InputError):
        softmax_loss_forward(x, [0, 3])
    with pytest.raises(InputError):
        softmax_loss_forward(x, [0, -1])
    with pytest.raises(InputError):
        softmax_loss_backward(x, [0, 1.5], 1.0, np.zeros_like(x))


@pytest.mark.parametrize("weight", [1.0, 0.5])
def test_finite_differences(rng, weight):
    layer = SoftmaxWithLossLayer("loss", LossParams(loss_weight=weight))
    labels = Blob((3,))
    labels.data.array[...] = [1, 3, 0]
    bad = check_layer(layer, [random_blob(rng, (3, 4), scale=1.0), labels], rng,
                      propagate=[True, False])
    assert bad == []


def test_layer_writes_scalar_top(rng):
    layer = SoftmaxWithLossLayer("loss")
    scores, labels, top = Blob((2, 10)), Blob((2,)), Blob((1,))
    assert layer.setup([scores.shape, labels.shape]) == [(1,)]
    layer.forward([scores, labels], [top])
    assert abs(top.data.array[0] - math.log(10)) <= 1e-6
