"""Blob: paired data/gradient storage exchanged between layers."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from . import engine
from .engine import kernel
from .tensor import MatrixView, Tensor, check_shape, count, transpose


class Blob:
    """Two same-shaped tensors, ``data`` and ``diff``, with NCHW semantics.

    Lower ranks are allowed (inner-product weights are ``[N, K]``, biases ``[N]``).
    """

    __slots__ = ("name", "data", "diff")

    def __init__(self, shape: Iterable[int], name: str = ""):
        dims = check_shape(shape)
        self.name = name
        self.data = Tensor(dims)
        self.diff = Tensor(dims)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def count(self) -> int:
        return count(self.shape)

    def data_as_matrix(self, rows: int, cols: int, transposed: bool = False) -> MatrixView:
        return _as_matrix(self.data, rows, cols, transposed)

    def diff_as_matrix(self, rows: int, cols: int, transposed: bool = False) -> MatrixView:
        return _as_matrix(self.diff, rows, cols, transposed)

    def update(self) -> None:
        blob_update(self)

    def __repr__(self) -> str:
        return f"Blob({self.name!r}, shape={self.shape})"


def _as_matrix(t: Tensor, rows: int, cols: int, transposed: bool) -> MatrixView:
    """A rows x cols matrix over ``t``.

    Without ``transposed`` the view aliases ``t``. With it, ``t`` is read as a
    cols x rows matrix and its transpose is materialized; releasing the view
    writes the (possibly modified) contents back transposed.
    """
    if not transposed:
        return MatrixView(t, rows, cols)
    source = MatrixView(t, cols, rows)

    def writeback(values: np.ndarray) -> None:
        source.array[...] = values.T

    return MatrixView.detached(transpose(source).array, writeback)


def blob_new(shape: Iterable[int], name: str = "") -> Blob:
    return Blob(shape, name)


@kernel
def _update(lo, hi, data, diff):
    for i in range(lo, hi):
        data[i] -= diff[i]


def blob_update(b: Blob) -> None:
    """data -= diff."""
    engine.for_each_index(b.count(), _update, outputs=(b.data.array.reshape(-1),),
                          inputs=(b.diff.array.reshape(-1),))
