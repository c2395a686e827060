"""Dense float32 containers with row-major layout.

A :class:`Tensor` owns (or aliases) one C-contiguous ``float32`` ndarray of
rank 1 to 4. :class:`MatrixView` is a rank-2 tensor that shares storage with
the tensor it was taken from, so writes through the view land in the source.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .errors import ShapeError

MAX_RANK = 4

DTYPE = np.float32


def check_shape(shape: Iterable[int]) -> tuple[int, ...]:
    """Validate extents and return them as a tuple of ints."""
    try:
        dims = tuple(int(d) for d in shape)
    except TypeError:
        dims = (int(shape),)
    if not 1 <= len(dims) <= MAX_RANK:
        raise ShapeError(f"rank must be between 1 and {MAX_RANK}, got shape {dims}")
    if any(d < 1 for d in dims):
        raise ShapeError(f"every extent must be >= 1, got shape {dims}")
    return dims


def count(shape: Iterable[int]) -> int:
    n = 1
    for d in shape:
        n *= int(d)
    return n


def strides_of(shape: tuple[int, ...]) -> tuple[int, ...]:
    """Element strides of a row-major layout (last axis fastest)."""
    out = [1] * len(shape)
    for a in range(len(shape) - 2, -1, -1):
        out[a] = out[a + 1] * shape[a + 1]
    return tuple(out)


class Tensor:
    """N-d dense single-precision array, row-major.

    ``array`` is always a C-contiguous float32 ndarray; kernels operate on it
    directly.
    """

    __slots__ = ("array",)

    def __init__(self, shape: Iterable[int], fill: float = 0.0):
        self.array = np.full(check_shape(shape), fill, dtype=DTYPE)

    @classmethod
    def wrap(cls, array: np.ndarray) -> "Tensor":
        """Alias an existing float32 C-contiguous array without copying."""
        if array.dtype != DTYPE or not array.flags.c_contiguous:
            raise ShapeError("wrap() needs a C-contiguous float32 array")
        check_shape(array.shape)
        t = cls.__new__(cls)
        t.array = array
        return t

    @classmethod
    def from_array(cls, values) -> "Tensor":
        """Copy ``values`` into a fresh tensor."""
        return cls.wrap(np.array(values, dtype=DTYPE, order="C", copy=True))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    def flat_index(self, *coords: int) -> int:
        if len(coords) != self.ndim:
            raise ShapeError(f"expected {self.ndim} coordinates, got {len(coords)}")
        for c, d in zip(coords, self.shape):
            if not 0 <= c < d:
                raise IndexError(f"coordinate {coords} out of bounds for {self.shape}")
        return sum(c * s for c, s in zip(coords, strides_of(self.shape)))

    def reshape(self, shape: Iterable[int]) -> "Tensor":
        """Same storage and flat order under a new shape."""
        dims = check_shape(shape)
        if count(dims) != self.size:
            raise ShapeError(f"cannot reshape {self.shape} ({self.size} elements) to {dims}")
        return Tensor.wrap(self.array.reshape(dims))

    def as_matrix(self, rows: int, cols: int) -> "MatrixView":
        return MatrixView(self, rows, cols)

    def fill(self, value: float) -> None:
        self.array.fill(value)

    def copy(self) -> "Tensor":
        return Tensor.wrap(self.array.copy())

    def __array__(self, dtype=None, copy=None):
        if dtype is None or np.dtype(dtype) == self.array.dtype:
            return self.array
        return self.array.astype(dtype)

    def __getitem__(self, key):
        return self.array[key]

    def __setitem__(self, key, value) -> None:
        self.array[key] = value

    def __len__(self) -> int:
        return self.shape[0]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(shape={self.shape})"


class MatrixView(Tensor):
    """A rows x cols window over a tensor's storage.

    Views built by :meth:`Tensor.as_matrix` alias the source. A view may
    instead hold a materialized copy with a ``writeback`` target; calling
    :meth:`release` (or leaving a ``with`` block) copies its contents back
    through ``writeback``.
    """

    __slots__ = ("_writeback",)

    def __init__(self, source: Tensor, rows: int, cols: int):
        rows, cols = int(rows), int(cols)
        if rows < 0 or cols < 0 or rows * cols != source.size:
            raise ShapeError(
                f"cannot view {source.size} elements as a {rows}x{cols} matrix"
            )
        self.array = source.array.reshape(rows, cols)
        self._writeback = None

    @classmethod
    def detached(cls, array: np.ndarray, writeback=None) -> "MatrixView":
        view = cls.__new__(cls)
        view.array = array
        view._writeback = writeback
        return view

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.array[i]

    def transpose(self) -> Tensor:
        return transpose(self)

    def release(self) -> None:
        if self._writeback is not None:
            self._writeback(self.array)
            self._writeback = None

    def __enter__(self) -> "MatrixView":
        return self

    def __exit__(self, *exc) -> None:
        self.release()


def new_tensor(shape: Iterable[int], fill: float = 0.0) -> Tensor:
    return Tensor(shape, fill)


def reshape(t: Tensor, shape: Iterable[int]) -> Tensor:
    return t.reshape(shape)


def as_matrix(t: Tensor, rows: int, cols: int) -> MatrixView:
    return MatrixView(t, rows, cols)


def transpose(m: Tensor, out: Optional[np.ndarray] = None) -> Tensor:
    """Materialize the transpose of a 2-D tensor (or of each matrix in a 3-D stack)."""
    a = np.asarray(m)
    if a.ndim == 2:
        t = a.T
    elif a.ndim == 3:
        t = a.transpose(0, 2, 1)
    else:
        raise ShapeError(f"transpose needs a matrix or a stack of matrices, got {a.shape}")
    if out is None:
        return Tensor.wrap(np.ascontiguousarray(t, dtype=DTYPE))
    if out.shape != t.shape:
        raise ShapeError(f"transpose output has shape {out.shape}, expected {t.shape}")
    out[...] = t
    return Tensor.wrap(out)
