import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from portanet.errors import ShapeError
from portanet.tensor import (MatrixView, Tensor, as_matrix, check_shape, count, new_tensor,
                             reshape, strides_of, transpose)


def test_new_tensor_fills():
    t = new_tensor([2, 3], 0.0)
    assert t.shape == (2, 3)
    assert t.array.dtype == np.float32
    assert np.array_equal(t.array, np.zeros((2, 3)))
    assert new_tensor([1], 7.5).array.tolist() == [7.5]
    assert np.array_equal(new_tensor([2, 2, 2], 1.0).array, np.ones((2, 2, 2)))


@pytest.mark.parametrize("shape", [[0], [2, -1], [], [1, 1, 1, 1, 1]])
def test_invalid_shapes(shape):
    with pytest.raises(ShapeError):
        new_tensor(shape)


def test_reshape_row_major():
    t = Tensor.from_array([1, 2, 3, 4])
    r = reshape(t, [2, 2])
    assert r.array.tolist() == [[1, 2], [3, 4]]
    m = Tensor.from_array(np.arange(6).reshape(2, 3))
    assert reshape(m, [3, 2]).array.reshape(-1).tolist() == list(range(6))


def test_reshape_count_mismatch():
    with pytest.raises(ShapeError):
        reshape(new_tensor([6]), [7])


def test_reshape_aliases_storage():
    t = new_tensor([6])
    r = reshape(t, [2, 3])
    r[1, 0] = 5.0
    assert t[3] == 5.0


def test_transpose_examples(rng):
    assert transpose(Tensor.from_array([[1, 2], [3, 4]])).array.tolist() == [[1, 3], [2, 4]]
    row = Tensor.from_array(np.arange(5).reshape(1, 5))
    assert transpose(row).shape == (5, 1)
    a = Tensor.from_array(rng.standard_normal((3, 5)))
    assert np.array_equal(transpose(transpose(a)).array, a.array)


def test_transpose_stack_and_out():
    a = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
    t = transpose(a)
    assert t.shape == (2, 4, 3)
    assert np.array_equal(t.array, a.transpose(0, 2, 1))
    out = np.empty((4, 3), np.float32)
    transpose(a[0], out=out)
    assert np.array_equal(out, a[0].T)
    with pytest.raises(ShapeError):
        transpose(a[0], out=np.empty((3, 4), np.float32))


def test_as_matrix_row_major():
    t = Tensor.from_array([0, 1, 2, 3])
    m = as_matrix(t, 2, 2)
    assert m[1, 0] == 2.0
    assert m.rows == 2 and m.cols == 2
    blob_like = new_tensor([4, 3, 2, 2])
    assert as_matrix(blob_like, 4, 12).shape == (4, 12)
    with pytest.raises(ShapeError):
        as_matrix(t, 3, 2)


def test_view_writes_through():
    t = new_tensor([2, 3])
    v = as_matrix(t, 3, 2)
    v[2, 1] = 9.0
    assert t[1, 2] == 9.0
    assert isinstance(v, MatrixView)


def test_flat_index_matches_strides():
    t = new_tensor([2, 3, 4, 5])
    assert strides_of((2, 3, 4, 5)) == (60, 20, 5, 1)
    assert t.flat_index(1, 2, 3, 4) == 119
    with pytest.raises(IndexError):
        t.flat_index(2, 0, 0, 0)


def test_wrap_requires_float32_contiguous():
    with pytest.raises(ShapeError):
        Tensor.wrap(np.zeros(3, np.float64))
    with pytest.raises(ShapeError):
        Tensor.wrap(np.zeros((3, 4), np.float32).T)


shapes = st.lists(st.integers(1, 5), min_size=1, max_size=4)


@settings(max_examples=60, deadline=None)
@given(shapes, st.data())
def test_flat_index_property(shape, data):
    t = new_tensor(shape)
    coords = [data.draw(st.integers(0, d - 1)) for d in shape]
    flat = t.flat_index(*coords)
    assert flat == int(np.ravel_multi_index(coords, shape))
    assert count(shape) == t.size


@settings(max_examples=60, deadline=None)
@given(shapes, shapes)
def test_reshape_round_trip(a, b):
    if count(a) != count(b):
        b = [count(a)]
    t = Tensor.from_array(np.arange(count(a)).reshape(a))
    back = reshape(reshape(t, b), a)
    assert np.array_equal(back.array, t.array)
    assert check_shape(a) == tuple(a)
