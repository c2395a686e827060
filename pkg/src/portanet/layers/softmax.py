"""Softmax, softmax cross-entropy loss and top-k accuracy.

Inputs are read as M x D matrices (first axis = sample). Per-row work is a
single kernel invocation; cross-row sums (loss, accuracy) are taken on the
orchestrating thread in fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .. import engine
from ..engine import kernel
from ..errors import ConfigError, InputError, ShapeError
from .base import Layer, Params

# ln() argument floor, keeps a zero probability from producing inf
LOG_FLOOR = np.float32(1e-37)


@kernel
def _softmax_rows(lo, hi, prob, x):
    d = x.shape[1]
    for i in range(lo, hi):
        mx = x[i, 0]
        for j in range(1, d):
            if x[i, j] > mx:
                mx = x[i, j]
        total = np.float32(0.0)
        for j in range(d):
            e = np.exp(x[i, j] - mx)
            prob[i, j] = e
            total += e
        for j in range(d):
            prob[i, j] = prob[i, j] / total


@kernel
def _softmax_grad_rows(lo, hi, dx, y, dy):
    d = y.shape[1]
    for i in range(lo, hi):
        dot = np.float32(0.0)
        for j in range(d):
            dot += dy[i, j] * y[i, j]
        for j in range(d):
            dx[i, j] = y[i, j] * (dy[i, j] - dot)


@kernel
def _nll_rows(lo, hi, out, prob, labels, floor):
    for i in range(lo, hi):
        p = prob[i, labels[i]]
        if p < floor:
            p = floor
        out[i] = -np.log(p)


@kernel
def _loss_grad_rows(lo, hi, dx, prob, labels, scale):
    d = prob.shape[1]
    for i in range(lo, hi):
        for j in range(d):
            v = prob[i, j]
            if j == labels[i]:
                v = v - np.float32(1.0)
            dx[i, j] = v * scale


@kernel
def _topk_hits(lo, hi, hits, scores, labels, k):
    d = scores.shape[1]
    for i in range(lo, hi):
        lab = labels[i]
        target = scores[i, lab]
        ahead = 0
        for j in range(d):
            s = scores[i, j]
            if s > target or (s == target and j < lab):
                ahead += 1
        hits[i] = 1 if ahead < k else 0


def _rows(a) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    return arr.reshape(arr.shape[0], -1)


def check_labels(labels, m: int, d: int) -> np.ndarray:
    lab = np.asarray(labels).reshape(-1)
    if lab.size != m:
        raise ShapeError(f"expected {m} labels, got {lab.size}")
    as_int = lab.astype(np.int64)
    if np.any(as_int != lab) or np.any(as_int < 0) or np.any(as_int >= d):
        raise InputError(f"labels must be integers in [0, {d})")
    return as_int


def softmax_forward(bottom, top) -> None:
    """Row-wise softmax with the row max subtracted before exponentiation."""
    x, y = _rows(bottom), _rows(top)
    if x.shape != y.shape:
        raise ShapeError(f"softmax shapes differ: {x.shape} vs {y.shape}")
    engine.for_each_index(x.shape[0], _softmax_rows, outputs=(y,), inputs=(x,))


def softmax_backward(top_data, top_diff, bottom_diff) -> None:
    """bottom_diff[i] = y[i] · (dy[i] − Σ_j dy[j]·y[j]) per row."""
    y, dy, dx = _rows(top_data), _rows(top_diff), _rows(bottom_diff)
    if not y.shape == dy.shape == dx.shape:
        raise ShapeError("softmax backward shapes differ")
    engine.for_each_index(y.shape[0], _softmax_grad_rows, outputs=(dx,), inputs=(y, dy))


def softmax_loss_forward(bottom, labels, prob: Optional[np.ndarray] = None
                         ) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood of the labels; returns (loss, probabilities)."""
    x = _rows(bottom)
    m, d = x.shape
    lab = check_labels(labels, m, d)
    if prob is None:
        prob = np.empty_like(x)
    softmax_forward(x, prob)
    per_row = np.empty(m, np.float32)
    engine.for_each_index(m, _nll_rows, outputs=(per_row,), inputs=(_rows(prob), lab),
                          args=(LOG_FLOOR,))
    loss = np.float32(0.0)
    for v in per_row:
        loss += v
    return float(loss / np.float32(m)), prob


def softmax_loss_backward(prob, labels, loss_weight: float, bottom_diff) -> None:
    """bottom_diff = loss_weight · (p − onehot(label)) / M."""
    p, dx = _rows(prob), _rows(bottom_diff)
    m, d = p.shape
    if dx.shape != p.shape:
        raise ShapeError("softmax loss backward shapes differ")
    lab = check_labels(labels, m, d)
    scale = np.float32(np.float32(loss_weight) / np.float32(m))
    engine.for_each_index(m, _loss_grad_rows, outputs=(dx,), inputs=(p, lab), args=(scale,))


def accuracy(bottom, labels, k: int = 1) -> float:
    """Fraction of rows whose label ranks in the top k (ties go to the lower class id)."""
    s = _rows(bottom)
    m, d = s.shape
    if not 1 <= k <= d:
        raise InputError(f"top_k must be in [1, {d}], got {k}")
    lab = check_labels(labels, m, d)
    hits = np.empty(m, np.int64)
    engine.for_each_index(m, _topk_hits, outputs=(hits,), inputs=(s, lab), args=(int(k),))
    return int(hits.sum()) / m


class SoftmaxLayer(Layer):
    type_name = "softmax"

    def setup(self, bottom_shapes):
        (shape,) = bottom_shapes
        return [tuple(shape)]

    def forward(self, bottom, top):
        softmax_forward(bottom[0].data, top[0].data)

    def backward(self, top, propagate_down, bottom):
        if propagate_down[0]:
            softmax_backward(top[0].data, top[0].diff, bottom[0].diff)


@dataclass(frozen=True)
class LossParams(Params):
    loss_weight: float = 1.0


class SoftmaxWithLossLayer(Layer):
    """Bottoms: scores, labels. Top: a one-element blob holding the loss."""

    type_name = "softmax_loss"
    params_class = LossParams
    n_bottom = (2, 2)
    is_loss = True

    def setup(self, bottom_shapes):
        scores, labels = bottom_shapes
        m = scores[0]
        if int(np.prod(labels)) != m:
            raise ShapeError(f"{self.name}: {int(np.prod(labels))} labels for {m} samples")
        self.prob = np.zeros((m, int(np.prod(scores[1:]))), np.float32)
        return [(1,)]

    def forward(self, bottom, top):
        loss, _ = softmax_loss_forward(bottom[0].data, bottom[1].data, self.prob)
        top[0].data.array[0] = loss
        self.loss = loss

    def backward(self, top, propagate_down, bottom):
        if propagate_down[0]:
            softmax_loss_backward(self.prob, bottom[1].data, self.params.loss_weight,
                                  bottom[0].diff)


@dataclass(frozen=True)
class AccuracyParams(Params):
    top_k: int = 1

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")


class AccuracyLayer(Layer):
    type_name = "accuracy"
    params_class = AccuracyParams
    n_bottom = (2, 2)

    def setup(self, bottom_shapes):
        scores, _ = bottom_shapes
        classes = int(np.prod(scores[1:]))
        if self.params.top_k > classes:
            raise ConfigError(f"{self.name}: top_k {self.params.top_k} exceeds {classes} classes")
        return [(1,)]

    def forward(self, bottom, top):
        top[0].data.array[0] = accuracy(bottom[0].data, bottom[1].data, self.params.top_k)
