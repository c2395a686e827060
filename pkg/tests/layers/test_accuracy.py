import numpy as np
import pytest

from portanet.blob import Blob
from portanet.errors import ConfigError, InputError
from portanet.layers import UNSUPPORTED_FEATURES, AccuracyLayer, AccuracyParams, accuracy


def test_one_hot_scores():
    labels = [2, 0, 1]
    assert accuracy(np.eye(3, dtype=np.float32)[labels], labels) == 1.0


def test_all_wrong():
    labels = [2, 0, 1]
    assert accuracy(np.eye(3, dtype=np.float32)[[0, 1, 2]], labels) == 0.0


def test_k_equal_to_classes(rng):
    s = rng.standard_normal((9, 5)).astype(np.float32)
    assert accuracy(s, rng.integers(0, 5, 9), k=5) == 1.0


def test_top_k_partial():
    s = np.array([[0.1, 0.5, 0.4], [0.7, 0.2, 0.1]], np.float32)
    assert accuracy(s, [2, 2], k=1) == 0.0
    assert accuracy(s, [2, 2], k=2) == 0.5


def test_ties_favour_lower_class():
    s = np.zeros((1, 4), np.float32)
    assert accuracy(s, [0]) == 1.0
    assert accuracy(s, [1]) == 0.0


def test_errors():
    s = np.zeros((2, 3), np.float32)
    with pytest.raises(InputError):
        accuracy(s, [0, 3])
    with pytest.raises(InputError):
        accuracy(s, [0, 1], k=4)
    with pytest.raises(ConfigError):
        AccuracyParams(top_k=0)


def test_layer():
    layer = AccuracyLayer("acc", AccuracyParams(top_k=1))
    scores, labels, top = Blob((2, 3)), Blob((2,)), Blob((1,))
    scores.data.array[...] = [[0, 1, 0], [1, 0, 0]]
    labels.data.array[...] = [1, 2]
    layer.setup([scores.shape, labels.shape])
    layer.forward([scores, labels], [top])
    assert top.data.array[0] == 0.5


def test_unsupported_variants_are_listed_and_rejected():
    assert any("ignore_label" in f for f in UNSUPPORTED_FEATURES)
    assert any("per-class" in f for f in UNSUPPORTED_FEATURES)
    with pytest.raises(ConfigError):
        AccuracyLayer.from_options("acc", {"ignore_label": "3"})
    with pytest.raises(ConfigError):
        AccuracyLayer.from_options("acc", {"axis": "2"})
