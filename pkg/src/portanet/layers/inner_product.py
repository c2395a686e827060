"""Fully connected (inner product) layer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .. import linalg
from ..blob import Blob
from ..errors import ShapeError
from ..tensor import count, transpose
from .base import Layer, Params, xavier_fill


@dataclass(frozen=True)
class IpParams(Params):
    num_output: int = 1
    bias: bool = True
    # False: weights stored [N, K]; True: stored [K, N]
    transpose: bool = False

    def __post_init__(self):
        if self.num_output < 1:
            raise ShapeError("num_output must be >= 1")

    def weight_shape(self, k: int) -> tuple[int, int]:
        return (k, self.num_output) if self.transpose else (self.num_output, k)


def _dims(bottom: Blob, weights: Blob, p: IpParams) -> tuple[int, int, int]:
    m = bottom.shape[0]
    k = bottom.count() // m
    if weights.shape != p.weight_shape(k):
        raise ShapeError(f"weights have shape {weights.shape}, expected {p.weight_shape(k)}")
    return m, k, p.num_output


def ip_forward(bottom: Blob, weights: Blob, bias: Optional[Blob], p: IpParams, top: Blob) -> None:
    """top = bottom · W^T (+ bias on every row), bottom viewed as M x K."""
    m, k, n = _dims(bottom, weights, p)
    if top.count() != m * n:
        raise ShapeError(f"top has shape {top.shape}, expected {m} x {n}")
    x = bottom.data_as_matrix(m, k)
    w = weights.data_as_matrix(k, n, transposed=not p.transpose)
    out = top.data_as_matrix(m, n)
    linalg.gemm(x, w, out)
    if p.bias and bias is not None:
        linalg.add_vector_to_rows(out, bias.data)


def ip_backward(top: Blob, bottom: Blob, weights: Blob, bias: Optional[Blob], p: IpParams,
                propagate_down: bool = True) -> None:
    """weights.diff += G^T·X, bias.diff += column sums of G, bottom.diff = G·W."""
    m, k, n = _dims(bottom, weights, p)
    grad = top.diff_as_matrix(m, n)
    x = bottom.data_as_matrix(m, k)
    if p.transpose:
        linalg.gemm(transpose(x), grad, weights.diff_as_matrix(k, n), accumulate=True)
    else:
        linalg.gemm(transpose(grad), x, weights.diff_as_matrix(n, k), accumulate=True)
    if p.bias and bias is not None:
        linalg.sum_columns_into(bias.diff, grad)
    if propagate_down:
        w = weights.data_as_matrix(n, k, transposed=p.transpose)
        linalg.gemm(grad, w, bottom.diff_as_matrix(m, k))


class InnerProductLayer(Layer):
    type_name = "inner_product"
    params_class = IpParams

    def setup(self, bottom_shapes):
        (shape,) = bottom_shapes
        m = shape[0]
        k = count(shape[1:])
        p: IpParams = self.params
        self.blobs = [Blob(p.weight_shape(k), f"{self.name}.weights")]
        if p.bias:
            self.blobs.append(Blob((p.num_output,), f"{self.name}.bias"))
        return [(m, p.num_output)]

    def init_params(self, rng):
        w = self.blobs[0]
        if self.params.transpose:
            # fan-in is K, the leading extent of a [K, N] blob
            tmp = Blob((w.shape[1], w.shape[0]))
            xavier_fill(tmp, rng)
            w.data.array[...] = tmp.data.array.T
        else:
            xavier_fill(w, rng)
        if self.params.bias:
            self.blobs[1].data.fill(0.0)

    def _bias(self) -> Optional[Blob]:
        return self.blobs[1] if self.params.bias else None

    def forward(self, bottom, top):
        ip_forward(bottom[0], self.blobs[0], self._bias(), self.params, top[0])

    def backward(self, top, propagate_down, bottom):
        ip_backward(top[0], bottom[0], self.blobs[0], self._bias(), self.params,
                    propagate_down[0])
