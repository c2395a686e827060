"""Max and average pooling.

Both directions parallelize only over the (image, channel) planes; the window
loops inside a plane run sequentially, which keeps overlapping windows safe
in the backward scatter without atomics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional

import numpy as np

from .. import engine
from ..blob import Blob
from ..engine import kernel
from ..errors import ConfigError, ShapeError
from .base import Layer, Params, check_window, out_dim

MAX = "max"
AVERAGE = "average"


@dataclass(frozen=True)
class PoolParams(Params):
    method: str = MAX
    kernel_h: int = 2
    kernel_w: int = 2
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0

    aliases: ClassVar = {
        "kernel_size": ("kernel_h", "kernel_w"),
        "stride": ("stride_h", "stride_w"),
        "pad": ("pad_h", "pad_w"),
    }

    def __post_init__(self):
        if self.method not in (MAX, AVERAGE):
            raise ConfigError(f"pooling method must be 'max' or 'average', got {self.method!r}")
        check_window(self.kernel_h, self.kernel_w, self.stride_h, self.stride_w,
                     self.pad_h, self.pad_w)
        if self.pad_h >= self.kernel_h or self.pad_w >= self.kernel_w:
            raise ShapeError("pooling padding must be smaller than the kernel")

    def output_hw(self, height: int, width: int) -> tuple[int, int]:
        ho = out_dim(height, self.kernel_h, self.stride_h, self.pad_h)
        wo = out_dim(width, self.kernel_w, self.stride_w, self.pad_w)
        if ho < 1 or wo < 1:
            raise ShapeError(f"pooling window does not fit a {height}x{width} input")
        return ho, wo


@kernel
def _max_pool(lo, hi, top, mask, bottom, kh, kw, sh, sw, ph, pw):
    height = bottom.shape[1]
    width = bottom.shape[2]
    ho_n = top.shape[1]
    wo_n = top.shape[2]
    plane = height * width
    for q in range(lo, hi):
        for ho in range(ho_n):
            h0 = max(ho * sh - ph, 0)
            h1 = min(ho * sh - ph + kh, height)
            for wo in range(wo_n):
                w0 = max(wo * sw - pw, 0)
                w1 = min(wo * sw - pw + kw, width)
                best = -np.inf
                arg = -1
                for h in range(h0, h1):
                    for w in range(w0, w1):
                        v = bottom[q, h, w]
                        if arg < 0 or v > best:
                            best = v
                            arg = h * width + w
                top[q, ho, wo] = best
                mask[q, ho, wo] = q * plane + arg


@kernel
def _avg_pool(lo, hi, top, bottom, kh, kw, sh, sw, ph, pw):
    height = bottom.shape[1]
    width = bottom.shape[2]
    ho_n = top.shape[1]
    wo_n = top.shape[2]
    for q in range(lo, hi):
        for ho in range(ho_n):
            h0 = max(ho * sh - ph, 0)
            h1 = min(ho * sh - ph + kh, height)
            for wo in range(wo_n):
                w0 = max(wo * sw - pw, 0)
                w1 = min(wo * sw - pw + kw, width)
                acc = np.float32(0.0)
                for h in range(h0, h1):
                    for w in range(w0, w1):
                        acc += bottom[q, h, w]
                top[q, ho, wo] = acc / np.float32((h1 - h0) * (w1 - w0))


@kernel
def _max_unpool(lo, hi, bottom_diff, top_diff, mask):
    plane = bottom_diff.shape[1]
    outs = top_diff.shape[1]
    for q in range(lo, hi):
        for p in range(plane):
            bottom_diff[q, p] = 0.0
        for o in range(outs):
            local = mask[q, o] - q * plane
            if local < 0 or local >= plane:
                raise IndexError("pooling mask entry outside its input plane")
            bottom_diff[q, local] += top_diff[q, o]


@kernel
def _avg_unpool(lo, hi, bottom_diff, top_diff, kh, kw, sh, sw, ph, pw):
    height = bottom_diff.shape[1]
    width = bottom_diff.shape[2]
    ho_n = top_diff.shape[1]
    wo_n = top_diff.shape[2]
    for q in range(lo, hi):
        for h in range(height):
            for w in range(width):
                bottom_diff[q, h, w] = 0.0
        for ho in range(ho_n):
            h0 = max(ho * sh - ph, 0)
            h1 = min(ho * sh - ph + kh, height)
            for wo in range(wo_n):
                w0 = max(wo * sw - pw, 0)
                w1 = min(wo * sw - pw + kw, width)
                g = top_diff[q, ho, wo] / np.float32((h1 - h0) * (w1 - w0))
                for h in range(h0, h1):
                    for w in range(w0, w1):
                        bottom_diff[q, h, w] += g


def _window(p: PoolParams) -> tuple:
    return (p.kernel_h, p.kernel_w, p.stride_h, p.stride_w, p.pad_h, p.pad_w)


def _planes(bottom: Blob, top: Blob, p: PoolParams) -> tuple[int, int, int, int, int]:
    if len(bottom.shape) != 4:
        raise ShapeError(f"pooling input must be N x C x H x W, got {bottom.shape}")
    n, c, h, w = bottom.shape
    ho, wo = p.output_hw(h, w)
    if top.shape != (n, c, ho, wo):
        raise ShapeError(f"pooling top has shape {top.shape}, expected {(n, c, ho, wo)}")
    return n * c, h, w, ho, wo


def pool_forward(bottom: Blob, p: PoolParams, top: Blob,
                 mask: Optional[np.ndarray] = None) -> Optional[np.ndarray]:
    """Window max (recording its flat bottom index in ``mask``) or in-bounds mean.

    Ties in a max window go to the first position in row-major window order.
    Returns the mask for max pooling.
    """
    planes, h, w, ho, wo = _planes(bottom, top, p)
    src = bottom.data.array.reshape(planes, h, w)
    dst = top.data.array.reshape(planes, ho, wo)
    if p.method == MAX:
        if mask is None:
            mask = np.empty(top.shape, np.int64)
        elif mask.shape != top.shape or mask.dtype != np.int64:
            raise ShapeError(f"mask must be int64 with shape {top.shape}")
        engine.for_each_index(planes, _max_pool, outputs=(dst, mask.reshape(planes, ho, wo)),
                              inputs=(src,), args=_window(p))
        return mask
    engine.for_each_index(planes, _avg_pool, outputs=(dst,), inputs=(src,), args=_window(p))
    return None


def pool_backward(top: Blob, p: PoolParams, bottom: Blob,
                  mask: Optional[np.ndarray] = None) -> None:
    """Overwrite ``bottom.diff`` with the routed top gradient."""
    planes, h, w, ho, wo = _planes(bottom, top, p)
    grad = top.diff.array
    if p.method == MAX:
        if mask is None or mask.shape != top.shape:
            raise ShapeError("max pooling backward needs the mask from the forward pass")
        engine.for_each_index(planes, _max_unpool,
                              outputs=(bottom.diff.array.reshape(planes, h * w),),
                              inputs=(grad.reshape(planes, ho * wo), mask.reshape(planes, ho * wo)))
    else:
        engine.for_each_index(planes, _avg_unpool,
                              outputs=(bottom.diff.array.reshape(planes, h, w),),
                              inputs=(grad.reshape(planes, ho, wo),), args=_window(p))


class PoolingLayer(Layer):
    type_name = "pooling"
    params_class = PoolParams

    def setup(self, bottom_shapes):
        (shape,) = bottom_shapes
        if len(shape) != 4:
            raise ShapeError(f"{self.name}: pooling input must be N x C x H x W, got {shape}")
        n, c, h, w = shape
        ho, wo = self.params.output_hw(h, w)
        self.mask = np.zeros((n, c, ho, wo), np.int64) if self.params.method == MAX else None
        return [(n, c, ho, wo)]

    def forward(self, bottom, top):
        pool_forward(bottom[0], self.params, top[0], self.mask)

    def backward(self, top, propagate_down, bottom):
        if propagate_down[0]:
            pool_backward(top[0], self.params, bottom[0], self.mask)
