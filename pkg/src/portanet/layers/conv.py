"""2-D convolution lowered to matrix products (im2col + gemm)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Optional, Sequence

import numpy as np

from .. import engine, linalg
from ..blob import Blob
from ..engine import kernel
from ..errors import ShapeError
from ..tensor import transpose
from .base import Layer, Params, check_window, out_dim, xavier_fill


@dataclass(frozen=True)
class ConvParams(Params):
    num_output: int = 1
    kernel_h: int = 1
    kernel_w: int = 1
    stride_h: int = 1
    stride_w: int = 1
    pad_h: int = 0
    pad_w: int = 0
    bias: bool = True

    aliases: ClassVar = {
        "kernel_size": ("kernel_h", "kernel_w"),
        "stride": ("stride_h", "stride_w"),
        "pad": ("pad_h", "pad_w"),
    }

    def __post_init__(self):
        check_window(self.kernel_h, self.kernel_w, self.stride_h, self.stride_w,
                     self.pad_h, self.pad_w)
        if self.num_output < 1:
            raise ShapeError("num_output must be >= 1")

    def output_hw(self, height: int, width: int) -> tuple[int, int]:
        ho = out_dim(height, self.kernel_h, self.stride_h, self.pad_h)
        wo = out_dim(width, self.kernel_w, self.stride_w, self.pad_w)
        if ho < 1 or wo < 1:
            raise ShapeError(
                f"{self.kernel_h}x{self.kernel_w} window (pad {self.pad_h},{self.pad_w}) "
                f"does not fit a {height}x{width} input"
            )
        return ho, wo


@kernel
def _im2col(lo, hi, col, img, channels, height, width, kh, kw, sh, sw, ph, pw, ho_n, wo_n):
    # col and img are flat. Output element i of the (n, c·kh·kw, ho·wo)
    # layout is decoded once at the block start; the loop then walks runs
    # along wo and advances the decoded coordinates.
    spatial = ho_n * wo_n
    rows = channels * kh * kw
    if lo >= hi:
        return
    n = lo // (rows * spatial)
    rem = lo - n * rows * spatial
    ck = rem // spatial
    s = rem - ck * spatial
    c = ck // (kh * kw)
    kk = ck - c * kh * kw
    ki = kk // kw
    kj = kk - ki * kw
    ho = s // wo_n
    wo = s - ho * wo_n
    i = lo
    while i < hi:
        h = ho * sh - ph + ki
        run = min(wo_n - wo, hi - i)
        if 0 <= h < height:
            row = ((n * channels + c) * height + h) * width
            for t in range(run):
                w = (wo + t) * sw - pw + kj
                if 0 <= w < width:
                    col[i + t] = img[row + w]
                else:
                    col[i + t] = 0.0
        else:
            for t in range(run):
                col[i + t] = 0.0
        i += run
        wo += run
        if wo == wo_n:
            wo = 0
            ho += 1
            if ho == ho_n:
                ho = 0
                kj += 1
                if kj == kw:
                    kj = 0
                    ki += 1
                    if ki == kh:
                        ki = 0
                        c += 1
                        if c == channels:
                            c = 0
                            n += 1


@kernel
def _col2im(lo, hi, img, col, channels, height, width, kh, kw, sh, sw, ph, pw, ho_n, wo_n):
    # Gather form over flat arrays: element (n, c, h, w) sums the column
    # entries of every window position covering it, in ascending (ki, kj).
    spatial = ho_n * wo_n
    rows = channels * kh * kw
    plane = height * width
    if lo >= hi:
        return
    n = lo // (channels * plane)
    rem = lo - n * channels * plane
    c = rem // plane
    p = rem - c * plane
    h = p // width
    w = p - h * width
    for i in range(lo, hi):
        acc = np.float32(0.0)
        # only kernel offsets congruent to (h + ph) mod stride land on a window
        ki = (h + ph) % sh
        ho = (h + ph - ki) // sh
        kj0 = (w + pw) % sw
        wo0 = (w + pw - kj0) // sw
        base = (n * rows + c * kh * kw) * spatial
        while ki < kh and ho >= 0:
            if ho < ho_n:
                kj = kj0
                wo = wo0
                row = base + ki * kw * spatial + ho * wo_n
                while kj < kw and wo >= 0:
                    if wo < wo_n:
                        acc += col[row + kj * spatial + wo]
                    kj += sw
                    wo -= 1
            ki += sh
            ho -= 1
        img[i] = acc
        w += 1
        if w == width:
            w = 0
            h += 1
            if h == height:
                h = 0
                c += 1
                if c == channels:
                    c = 0
                    n += 1


def _as_batch(x) -> tuple[np.ndarray, bool]:
    a = np.asarray(x)
    if a.ndim == 3:
        return a.reshape(1, *a.shape), True
    if a.ndim == 4:
        return a, False
    raise ShapeError(f"expected C x H x W or N x C x H x W, got {a.shape}")


def _window_args(c: int, h: int, w: int, p: ConvParams) -> tuple:
    ho, wo = p.output_hw(h, w)
    return (c, h, w, p.kernel_h, p.kernel_w, p.stride_h, p.stride_w, p.pad_h, p.pad_w, ho, wo)


def col_shape(channels: int, height: int, width: int, p: ConvParams) -> tuple[int, int]:
    ho, wo = p.output_hw(height, width)
    return channels * p.kernel_h * p.kernel_w, ho * wo


def im2col(image, p: ConvParams, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Copy every convolution window into a column.

    A ``C x H x W`` image gives a ``(C·kh·kw) x (H_out·W_out)`` matrix whose
    rows are ordered (channel, kernel row, kernel column); padding reads as 0.
    A batch ``N x C x H x W`` gives a stack of N such matrices.
    """
    img, single = _as_batch(image)
    n, c, h, w = img.shape
    rows, cols = col_shape(c, h, w, p)
    shape = (n, rows, cols)
    if out is None:
        out = np.empty(shape, np.float32)
    elif out.size != n * rows * cols:
        raise ShapeError(f"im2col buffer has {out.size} elements, need {shape}")
    col = out.reshape(shape)
    engine.for_each_index(col.size, _im2col, outputs=(col.reshape(-1),),
                          inputs=(np.ascontiguousarray(img).reshape(-1),),
                          args=_window_args(c, h, w, p))
    return col[0] if single else col


def col2im(cols, p: ConvParams, channels: int, height: int, width: int,
           out: Optional[np.ndarray] = None) -> np.ndarray:
    """Adjoint of :func:`im2col`: sum each column entry back into the pixel it came from.

    Runs in gather form, one invocation per image element, so no two
    invocations write the same location.
    """
    col = np.asarray(cols)
    single = col.ndim == 2
    if single:
        col = col.reshape(1, *col.shape)
    rows, spatial = col_shape(channels, height, width, p)
    if col.ndim != 3 or col.shape[1:] != (rows, spatial):
        raise ShapeError(f"col2im input {np.asarray(cols).shape} does not match "
                         f"({rows}, {spatial}) for a {channels}x{height}x{width} image")
    shape = (col.shape[0], channels, height, width)
    if out is None:
        out = np.empty(shape, np.float32)
    elif out.size != col.shape[0] * channels * height * width:
        raise ShapeError(f"col2im output has {out.size} elements, need {shape}")
    else:
        out = out.reshape(shape)
    engine.for_each_index(out.size, _col2im, outputs=(out.reshape(-1),),
                          inputs=(np.ascontiguousarray(col).reshape(-1),),
                          args=_window_args(channels, height, width, p))
    return out[0] if single else out


def _check_conv(bottom: Blob, weights: Blob, p: ConvParams) -> tuple[int, ...]:
    if len(bottom.shape) != 4:
        raise ShapeError(f"convolution input must be N x C x H x W, got {bottom.shape}")
    n, c, h, w = bottom.shape
    expected = (p.num_output, c, p.kernel_h, p.kernel_w)
    if weights.shape != expected:
        raise ShapeError(f"weights have shape {weights.shape}, expected {expected}")
    ho, wo = p.output_hw(h, w)
    return n, c, h, w, ho, wo


def conv_forward(bottom: Blob, weights: Blob, bias: Optional[Blob], p: ConvParams,
                 top: Blob, col_buffer: Optional[np.ndarray] = None) -> None:
    """top(n) = W · im2col(bottom(n)) (+ bias per output channel)."""
    n, c, h, w, ho, wo = _check_conv(bottom, weights, p)
    f = p.num_output
    if top.shape != (n, f, ho, wo):
        raise ShapeError(f"top has shape {top.shape}, expected {(n, f, ho, wo)}")
    col = im2col(bottom.data.array, p, out=col_buffer)
    out = top.data.array.reshape(n, f, ho * wo)
    linalg.gemm(weights.data_as_matrix(f, c * p.kernel_h * p.kernel_w), col, out)
    if p.bias and bias is not None:
        linalg.add_vector_to_columns(out, bias.data)


def conv_backward(top: Blob, bottom: Blob, weights: Blob, bias: Optional[Blob], p: ConvParams,
                  propagate_down: bool = True, col_buffer: Optional[np.ndarray] = None) -> None:
    """Accumulate weight/bias gradients and overwrite ``bottom.diff``.

    With G(n) the top gradient of image n as an F x (H_out·W_out) matrix:
    weights.diff += G(n)·col(n)^T, bias.diff += row sums of G(n), and
    bottom.diff(n) = col2im(W^T·G(n)).
    """
    n, c, h, w, ho, wo = _check_conv(bottom, weights, p)
    f = p.num_output
    ck = c * p.kernel_h * p.kernel_w
    grad = top.diff.array.reshape(n, f, ho * wo)
    col = im2col(bottom.data.array, p, out=col_buffer)
    linalg.gemm_sum_batches(grad, transpose(col).array, weights.diff_as_matrix(f, ck))
    if p.bias and bias is not None:
        linalg.sum_rows_into(bias.diff, grad)
    if propagate_down:
        # the forward col buffer is dead here and has the right shape
        linalg.gemm(weights.data_as_matrix(ck, f, transposed=True), grad, col)
        col2im(col, p, c, h, w, out=bottom.diff.array)


class ConvolutionLayer(Layer):
    type_name = "convolution"
    params_class = ConvParams

    def setup(self, bottom_shapes):
        (shape,) = bottom_shapes
        if len(shape) != 4:
            raise ShapeError(f"{self.name}: convolution input must be N x C x H x W, got {shape}")
        n, c, h, w = shape
        p: ConvParams = self.params
        ho, wo = p.output_hw(h, w)
        self.blobs = [Blob((p.num_output, c, p.kernel_h, p.kernel_w), f"{self.name}.weights")]
        if p.bias:
            self.blobs.append(Blob((p.num_output,), f"{self.name}.bias"))
        rows, cols = col_shape(c, h, w, p)
        self._col = np.empty((n, rows, cols), np.float32)
        return [(n, p.num_output, ho, wo)]

    def init_params(self, rng):
        xavier_fill(self.blobs[0], rng)
        if self.params.bias:
            self.blobs[1].data.fill(0.0)

    def _bias(self) -> Optional[Blob]:
        return self.blobs[1] if self.params.bias else None

    def forward(self, bottom, top):
        conv_forward(bottom[0], self.blobs[0], self._bias(), self.params, top[0], self._col)

    def backward(self, top, propagate_down, bottom):
        conv_backward(top[0], bottom[0], self.blobs[0], self._bias(), self.params,
                      propagate_down[0], self._col)
