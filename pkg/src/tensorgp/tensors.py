"""Dense tensor algebra on a row-major vectorization convention.

A dense K-mode tensor is a C-contiguous ``float64`` :class:`numpy.ndarray`
whose shape is the dimension tuple ``(n_1, ..., n_K)``.  Vectorization stacks
entries in C order, so the 1-based multi-index ``(i_1, ..., i_K)`` lands at
1-based linear position

    j = i_K + sum_{k=1}^{K-1} (i_k - 1) * prod_{l=k+1}^{K} n_l.

With this ordering ``vec(W x_1 U1 ... x_K UK) == kron(U1, ..., UK) @ vec(W)``
for factor matrices in natural mode order, which every structured computation
in this package relies on.

Conventions at API boundaries:

* multi-indices are tuples of 1-based integers,
* Tucker factor collections are lists of 2-D arrays ordered by mode,
* all operations are pure and never mutate their inputs.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import ShapeError


def as_tensor(values) -> np.ndarray:
    """Coerce to a C-contiguous float64 array (a no-op for conforming input)."""
    return np.ascontiguousarray(values, dtype=np.float64)


def vec_index(idx: Sequence[int], dims: Sequence[int]) -> int:
    """1-based linear position of the 1-based multi-index ``idx`` in ``dims``.

    Raises IndexError if any component is out of range.
    """
    if len(idx) != len(dims):
        raise ShapeError(f"index order {len(idx)} != tensor order {len(dims)}")
    j = 0
    for i, n in zip(idx, dims):
        if not 1 <= i <= n:
            raise IndexError(f"index component {i} out of range [1, {n}]")
        j = j * n + (i - 1)
    return j + 1


def multi_index(j: int, dims: Sequence[int]) -> tuple[int, ...]:
    """Inverse of :func:`vec_index`: 1-based multi-index of linear position ``j``."""
    n = int(np.prod(dims))
    if not 1 <= j <= n:
        raise IndexError(f"linear position {j} out of range [1, {n}]")
    out = []
    rem = j - 1
    for size in reversed(dims):
        out.append(rem % size + 1)
        rem //= size
    return tuple(reversed(out))


def vectorize(t: np.ndarray) -> np.ndarray:
    """Stack entries into a length-n vector per the linear index map."""
    return as_tensor(t).ravel()


def devectorize(v: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Rebuild a tensor of shape ``dims`` from its vectorization."""
    v = np.asarray(v, dtype=np.float64)
    n = int(np.prod(dims))
    if v.size != n:
        raise ShapeError(f"vector length {v.size} != product of dims {n}")
    return v.reshape(tuple(dims)).copy()


def mode_k_product(t: np.ndarray, m: np.ndarray, k: int) -> np.ndarray:
    """Contract mode ``k`` (0-based) of ``t`` against the columns of ``m``.

    ``m`` has shape (rows, t.shape[k]); the result replaces dimension k by
    ``rows``.
    """
    t = np.asarray(t, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"mode-{k} factor must be a matrix, got ndim={m.ndim}")
    if not 0 <= k < t.ndim:
        raise ShapeError(f"mode {k} out of range for order-{t.ndim} tensor")
    if m.shape[1] != t.shape[k]:
        raise ShapeError(
            f"mode-{k} factor has {m.shape[1]} columns, tensor dimension is {t.shape[k]}"
        )
    out = np.tensordot(t, m, axes=([k], [1]))
    return np.ascontiguousarray(np.moveaxis(out, -1, k))


def tucker_multiply(core: np.ndarray, factors: Sequence[np.ndarray]) -> np.ndarray:
    """Apply one factor matrix per mode: ``core x_1 U1 x_2 ... x_K UK``."""
    core = np.asarray(core, dtype=np.float64)
    if len(factors) != core.ndim:
        raise ShapeError(f"{len(factors)} factors for an order-{core.ndim} tensor")
    out = core
    for k, u in enumerate(factors):
        out = mode_k_product(out, u, k)
    return out


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Entry-wise product of two tensors with identical dims."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a * b


def frobenius_norm_sq(t: np.ndarray) -> float:
    """Sum of squared entries."""
    t = np.asarray(t, dtype=np.float64)
    return float(np.vdot(t, t))


def multi_mode_vector_contract(d: np.ndarray, vecs: Sequence[np.ndarray]) -> float:
    """Contract every mode of ``d`` against a vector: ``d x_1 v1 ... x_K vK``.

    Equals ``dot(kron(v1, ..., vK), vec(d))`` without forming the Kronecker
    vector; cost is O(prod(dims)).
    """
    d = np.asarray(d, dtype=np.float64)
    if len(vecs) != d.ndim:
        raise ShapeError(f"{len(vecs)} vectors for an order-{d.ndim} tensor")
    out = d
    for v in vecs:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 1 or v.size != out.shape[0]:
            raise ShapeError(
                f"contraction vector of length {v.size} against dimension {out.shape[0]}"
            )
        out = np.tensordot(out, v, axes=([0], [0]))
    return float(out)
