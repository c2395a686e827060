"""BLAS-lite primitives written as engine kernels.

Each output row is produced by a single kernel invocation with ascending
inner loops, so results do not depend on how the engine partitions work.
Matrices may also be given as stacks of shape ``(batch, rows, cols)``; a
2-D operand is then shared by every matrix of the stack.
"""

from __future__ import annotations

import numpy as np

from . import engine
from .errors import ShapeError
from .engine import kernel


def _arr(x) -> np.ndarray:
    a = np.asarray(x)
    if a.dtype != np.float32:
        raise ShapeError(f"expected float32 data, got {a.dtype}")
    return a


def _stack(a: np.ndarray) -> np.ndarray:
    if a.ndim == 2:
        return a.reshape(1, *a.shape)
    if a.ndim == 3:
        return a
    raise ShapeError(f"expected a matrix or a stack of matrices, got shape {a.shape}")


@kernel
def _row_block(acc, a, sa, i, cnt, b, sb):
    # acc[t, :] = a[sa, i + t, :] · b[sb] for t < cnt. Four rows share each
    # pass over b; every element still sums over k in ascending order.
    n = acc.shape[1]
    kdim = a.shape[2]
    for t in range(cnt):
        for j in range(n):
            acc[t, j] = 0.0
    if cnt == 4:
        for k in range(kdim):
            a0 = a[sa, i, k]
            a1 = a[sa, i + 1, k]
            a2 = a[sa, i + 2, k]
            a3 = a[sa, i + 3, k]
            for j in range(n):
                bkj = b[sb, k, j]
                acc[0, j] += a0 * bkj
                acc[1, j] += a1 * bkj
                acc[2, j] += a2 * bkj
                acc[3, j] += a3 * bkj
    else:
        for t in range(cnt):
            for k in range(kdim):
                aik = a[sa, i + t, k]
                for j in range(n):
                    acc[t, j] += aik * b[sb, k, j]


@kernel
def _gemm_rows(lo, hi, c, a, b, accumulate):
    m = c.shape[1]
    n = c.shape[2]
    shared_a = a.shape[0] == 1
    shared_b = b.shape[0] == 1
    acc = np.empty((4, n), np.float32)
    r = lo
    while r < hi:
        s = r // m
        i = r - s * m
        cnt = min(4, hi - r, m - i)
        _row_block(acc, a, 0 if shared_a else s, i, cnt, b, 0 if shared_b else s)
        for t in range(cnt):
            if accumulate:
                for j in range(n):
                    c[s, i + t, j] += acc[t, j]
            else:
                for j in range(n):
                    c[s, i + t, j] = acc[t, j]
        r += cnt


@kernel
def _gemm_sum_rows(lo, hi, c, a, b, accumulate):
    nb = a.shape[0]
    n = c.shape[1]
    acc = np.empty((4, n), np.float32)
    i = lo
    while i < hi:
        cnt = min(4, hi - i)
        if not accumulate:
            for t in range(cnt):
                for j in range(n):
                    c[i + t, j] = 0.0
        for s in range(nb):
            _row_block(acc, a, s, i, cnt, b, s)
            for t in range(cnt):
                for j in range(n):
                    c[i + t, j] += acc[t, j]
        i += cnt


def gemm(A, B, C, accumulate: bool = False) -> None:
    """C = A·B (or C += A·B when ``accumulate``).

    With stacks, ``C[s] = A[s]·B[s]`` for every s; a 2-D ``A`` or ``B`` is
    reused for all s.
    """
    a, b, c = _arr(A), _arr(B), _arr(C)
    a3, b3, c3 = _stack(a), _stack(b), _stack(c)
    batch, m, n = c3.shape
    if (a3.shape[1] != m or b3.shape[2] != n or a3.shape[2] != b3.shape[1]
            or a3.shape[0] not in (1, batch) or b3.shape[0] not in (1, batch)
            or (c.ndim == 2 and (a.ndim == 3 or b.ndim == 3))):
        raise ShapeError(f"gemm shapes do not conform: {a.shape} x {b.shape} -> {c.shape}")
    engine.for_each_index(batch * m, _gemm_rows, outputs=(c3,), inputs=(a3, b3),
                          args=(bool(accumulate),))


def gemm_sum_batches(A, B, C, accumulate: bool = True) -> None:
    """C (+)= A[0]·B[0] + A[1]·B[1] + ..., each product added to C in batch order."""
    a, b, c = _stack(_arr(A)), _stack(_arr(B)), _arr(C)
    if (c.ndim != 2 or a.shape[0] != b.shape[0] or a.shape[1] != c.shape[0]
            or b.shape[2] != c.shape[1] or a.shape[2] != b.shape[1]):
        raise ShapeError(f"gemm shapes do not conform: {a.shape} x {b.shape} -> {c.shape}")
    engine.for_each_index(c.shape[0], _gemm_sum_rows, outputs=(c,), inputs=(a, b),
                          args=(bool(accumulate),))


@kernel
def _add_vector_rows(lo, hi, c, v):
    n = c.shape[1]
    for i in range(lo, hi):
        for j in range(n):
            c[i, j] += v[j]


def add_vector_to_rows(C, v) -> None:
    """C[i, j] += v[j] for every row i."""
    c, vec = _arr(C), _arr(v).reshape(-1)
    if c.ndim < 2 or c.shape[-1] != vec.size:
        raise ShapeError(f"vector of length {vec.size} does not match rows of {c.shape}")
    engine.for_each_row(c.reshape(-1, c.shape[-1]), _add_vector_rows, inputs=(vec,))


@kernel
def _add_vector_cols(lo, hi, c, v):
    m = c.shape[1]
    n = c.shape[2]
    for r in range(lo, hi):
        s = r // m
        i = r - s * m
        vi = v[i]
        for j in range(n):
            c[s, i, j] += vi


def add_vector_to_columns(C, v) -> None:
    """C[i, j] += v[i]; with a stack, applied to every matrix."""
    c3, vec = _stack(_arr(C)), _arr(v).reshape(-1)
    if c3.shape[1] != vec.size:
        raise ShapeError(f"vector of length {vec.size} does not match columns of {c3.shape}")
    engine.for_each_index(c3.shape[0] * c3.shape[1], _add_vector_cols, outputs=(c3,),
                          inputs=(vec,))


@kernel
def _sum_rows(lo, hi, v, m):
    nb = m.shape[0]
    n = m.shape[2]
    for i in range(lo, hi):
        for s in range(nb):
            acc = np.float32(0.0)
            for j in range(n):
                acc += m[s, i, j]
            v[i] += acc


def sum_rows_into(v, M) -> None:
    """v[i] += sum of row i, for each matrix of the stack in order."""
    vec, m3 = _arr(v).reshape(-1), _stack(_arr(M))
    if m3.shape[1] != vec.size:
        raise ShapeError(f"vector of length {vec.size} does not match rows of {m3.shape}")
    engine.for_each_index(vec.size, _sum_rows, outputs=(vec,), inputs=(m3,))


@kernel
def _sum_cols(lo, hi, v, m):
    rows = m.shape[0]
    for j in range(lo, hi):
        acc = np.float32(0.0)
        for i in range(rows):
            acc += m[i, j]
        v[j] += acc


def sum_columns_into(v, M) -> None:
    """v[j] += sum over i of M[i, j]."""
    vec, m = _arr(v).reshape(-1), _arr(M)
    if m.ndim != 2 or m.shape[1] != vec.size:
        raise ShapeError(f"vector of length {vec.size} does not match columns of {m.shape}")
    engine.for_each_index(vec.size, _sum_cols, outputs=(vec,), inputs=(m,))


@kernel
def _axpby(lo, hi, y, x, alpha, beta):
    for i in range(lo, hi):
        y[i] = alpha * x[i] + beta * y[i]


def axpby(alpha: float, X, beta: float, Y) -> None:
    """Y = alpha·X + beta·Y, elementwise in float32."""
    x, y = _arr(X), _arr(Y)
    if x.shape != y.shape:
        raise ShapeError(f"axpby shapes differ: {x.shape} vs {y.shape}")
    engine.for_each_index(y.size, _axpby, outputs=(y.reshape(-1),), inputs=(x.reshape(-1),),
                          args=(np.float32(alpha), np.float32(beta)))
