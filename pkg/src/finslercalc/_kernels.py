"""Inner-loop kernels for truncated-series arithmetic.

The multiply of two truncated Taylor tables reduces to a sparse
multiply-accumulate over a precomputed index plan (ii, jj -> kk).  That loop
dominates the runtime of every tensor evaluation, so it is compiled with
numba when available.  Set ``FINSLERCALC_DISABLE_NUMBA=1`` to force the pure
numpy fallback (useful for debugging and for the benchmark in
``benchmarks/bench_jets.py``).

Both paths accumulate in identical plan order, so they produce bit-identical
results.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("FINSLERCALC_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

if not _DISABLE:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
else:
    njit = None


def _convolve_numpy(a, b, ii, jj, kk, size):
    # bincount adds weights sequentially in plan order
    return np.bincount(kk, weights=a[ii] * b[jj], minlength=size)


if njit is not None:

    @njit(cache=True)
    def _convolve_numba(a, b, ii, jj, kk, size):  # pragma: no cover - compiled
        out = np.zeros(size, dtype=np.float64)
        for t in range(ii.shape[0]):
            out[kk[t]] += a[ii[t]] * b[jj[t]]
        return out

    convolve = _convolve_numba
    BACKEND = "numba"
else:
    convolve = _convolve_numpy
    BACKEND = "numpy"


def backend_name() -> str:
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND


def convolve_reference(a, b, ii, jj, kk, size):
    """Pure numpy kernel, always available regardless of the active backend."""
    return _convolve_numpy(a, b, ii, jj, kk, size)
