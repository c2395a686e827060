from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import engine
from ..engine import kernel
from ..errors import ConfigError, ShapeError
from .base import Layer, Params


@dataclass(frozen=True)
class ReluParams(Params):
    negative_slope: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.negative_slope) or self.negative_slope < 0:
            raise ConfigError(f"negative_slope must be finite and >= 0, got {self.negative_slope}")


@kernel
def _relu(lo, hi, y, x, slope):
    for i in range(lo, hi):
        v = x[i]
        y[i] = v if v > 0 else slope * v


@kernel
def _relu_grad(lo, hi, dx, dy, x, slope):
    for i in range(lo, hi):
        dx[i] = dy[i] if x[i] > 0 else slope * dy[i]


@kernel
def _relu_grad_inplace(lo, hi, d, x, slope):
    for i in range(lo, hi):
        if not x[i] > 0:
            d[i] = slope * d[i]


def _flat(a) -> np.ndarray:
    return np.asarray(a).reshape(-1)


def relu_forward(bottom, slope: float, top) -> None:
    """top = bottom where positive, slope·bottom elsewhere. ``top`` may be ``bottom``."""
    x, y = _flat(bottom), _flat(top)
    if x.size != y.size:
        raise ShapeError(f"relu sizes differ: {x.size} vs {y.size}")
    if np.may_share_memory(x, y):
        x = x.copy()
    engine.for_each_index(y.size, _relu, outputs=(y,), inputs=(x,), args=(np.float32(slope),))


def relu_backward(top_diff, bottom_data, slope: float, bottom_diff) -> None:
    """bottom_diff = top_diff · (1 if bottom_data > 0 else slope).

    ``bottom_data`` must hold the pre-activation input. ``bottom_diff`` may be
    the same buffer as ``top_diff``.
    """
    dy, x, dx = _flat(top_diff), _flat(bottom_data), _flat(bottom_diff)
    if not dy.size == x.size == dx.size:
        raise ShapeError("relu backward sizes differ")
    s = np.float32(slope)
    if np.may_share_memory(dx, dy):
        if dx.ctypes.data != dy.ctypes.data:
            raise ShapeError("relu backward buffers partially overlap")
        engine.for_each_index(dx.size, _relu_grad_inplace, outputs=(dx,), inputs=(x,), args=(s,))
    else:
        engine.for_each_index(dx.size, _relu_grad, outputs=(dx,), inputs=(dy, x), args=(s,))


class ReluLayer(Layer):
    """Leaky ReLU; usually run in place (top name == bottom name).

    The input is copied into a private buffer on every forward so the
    backward pass sees pre-activation values even when the data was overwritten.
    """

    type_name = "relu"
    params_class = ReluParams

    def setup(self, bottom_shapes):
        (shape,) = bottom_shapes
        self._input = np.zeros(shape, np.float32)
        return [tuple(shape)]

    def forward(self, bottom, top):
        np.copyto(self._input, bottom[0].data.array)
        relu_forward(self._input, self.params.negative_slope, top[0].data)

    def backward(self, top, propagate_down, bottom):
        if propagate_down[0]:
            relu_backward(top[0].diff, self._input, self.params.negative_slope, bottom[0].diff)
