"""Small dense helpers that work on float arrays and on object arrays of jets.

Tensor dimensions never exceed 6, so everything here is written as plain
loops; that keeps the code generic over the scalar type (floats and jets
share the arithmetic operators).
"""

from __future__ import annotations

import numpy as np

from .jets import scalar_value


class SingularMetricError(ValueError):
    """The metric tensor is numerically singular at the evaluation point."""


def omat(*shape):
    """Empty object array, the container for jet-valued tensors."""
    return np.empty(shape, dtype=object)


def values(arr):
    """Elementwise value part of an array of floats or jets."""
    a = np.asarray(arr)
    if a.dtype != object:
        return a.astype(float)
    out = np.empty(a.shape)
    flat_in = a.reshape(-1)
    flat_out = out.reshape(-1)
    for i in range(flat_in.shape[0]):
        flat_out[i] = scalar_value(flat_in[i])
    return out


def dot(u, v):
    """Sum_i u_i v_i for generic scalars."""
    acc = u[0] * v[0]
    for i in range(1, len(u)):
        acc = acc + u[i] * v[i]
    return acc


def mat_vec(A, v):
    n = len(v)
    out = omat(n)
    for i in range(n):
        out[i] = dot(A[i], v)
    return out


def quadratic_form(A, u, v):
    """Sum_ij u_i A_ij v_j for generic scalars."""
    acc = None
    n = len(u)
    for i in range(n):
        row = dot(A[i], v)
        term = u[i] * row
        acc = term if acc is None else acc + term
    return acc


def outer(u, v):
    n = len(u)
    out = omat(n, n)
    for i in range(n):
        for j in range(n):
            out[i, j] = u[i] * v[j]
    return out


def generic_inverse(A):
    """Gauss-Jordan inverse of a generic square matrix (floats or jets).

    Pivots are chosen by the magnitude of the value part.  Raises
    SingularMetricError when the best pivot is below 1e-12 relative to the
    matrix scale.
    """
    n = A.shape[0]
    work = omat(n, 2 * n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            work[i, j] = A[i, j]
            scale = max(scale, abs(scalar_value(A[i, j])))
            work[i, n + j] = 1.0 if i == j else 0.0
    if scale == 0.0:
        raise SingularMetricError("zero matrix")
    for col in range(n):
        pivot_row = max(range(col, n), key=lambda r: abs(scalar_value(work[r, col])))
        if abs(scalar_value(work[pivot_row, col])) < 1e-12 * scale:
            raise SingularMetricError("matrix is singular to working precision")
        if pivot_row != col:
            for j in range(2 * n):
                work[col, j], work[pivot_row, j] = work[pivot_row, j], work[col, j]
        inv_pivot = 1.0 / work[col, col]
        for j in range(2 * n):
            work[col, j] = work[col, j] * inv_pivot
        for r in range(n):
            if r == col:
                continue
            factor = work[r, col]
            if isinstance(factor, float) and factor == 0.0:
                continue
            for j in range(2 * n):
                work[r, j] = work[r, j] - factor * work[col, j]
    return work[:, n:].copy()


def sym_residual(A) -> float:
    """Max deviation from full symmetry over all index permutations."""
    A = np.asarray(A, dtype=float)
    worst = 0.0
    if A.ndim == 2:
        worst = float(np.abs(A - A.T).max())
    elif A.ndim == 3:
        for perm in ((0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)):
            worst = max(worst, float(np.abs(A - A.transpose(perm)).max()))
    else:
        raise ValueError("rank must be 2 or 3")
    return worst


def frob(A) -> float:
    return float(np.sqrt(np.sum(np.asarray(A, dtype=float) ** 2)))


def rel_residual(actual, reference) -> float:
    """Frobenius residual scaled by max(1, |reference|)."""
    a = np.asarray(actual, dtype=float)
    r = np.asarray(reference, dtype=float)
    return frob(a - r) / max(1.0, frob(r))
