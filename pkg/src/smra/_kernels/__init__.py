"""Hot kernels with a compiled backend and a numpy fallback.

The Cython extension is used when it has been built; otherwise, or when the
environment variable ``SMRA_FORCE_PYTHON`` is set, the numpy versions are
used.  ``BACKEND`` names the active one.
"""

import os

import numpy as np

from . import _fallback

try:
    if os.environ.get("SMRA_FORCE_PYTHON"):
        raise ImportError("forced")
    from . import _core
except ImportError:
    _core = None

BACKEND = "cython" if _core is not None else "python"


def pack_rows(dense):
    """Pack a (t, m) 0/1 matrix into (t, ceil(m/64)) little-bit-order words."""
    dense = np.ascontiguousarray(dense, dtype=np.uint8)
    t, m = dense.shape
    W = max(1, (m + 63) // 64)
    padded = np.zeros((t, W * 64), dtype=np.uint8)
    padded[:, :m] = dense
    packed = np.packbits(padded, axis=1, bitorder="little")
    return packed.view(np.uint64).reshape(t, W).copy()


def gf2_solve(rows, ncols, stop_when_full=True, backend=None):
    """Eliminate packed rows (rhs at column ``ncols``) in row order.

    Returns ``(pivot_row, rows_used, inconsistent, x)``; ``x`` is the unique
    solution when all ``ncols`` columns got a pivot, else ``None``.
    ``rows`` is modified in place.
    """
    backend = backend or BACKEND
    if ncols == 0:
        return np.zeros(0, dtype=np.int64), 0, False, np.zeros(0, dtype=np.uint8)
    if backend == "cython" and _core is not None:
        pivot_row, used, inconsistent = _core.gf2_prefix_eliminate(rows, ncols, stop_when_full)
        x = None
        if np.all(pivot_row >= 0):
            x = _core.gf2_back_substitute(rows, pivot_row, ncols)
        return pivot_row, used, inconsistent, x
    return _fallback.gf2_solve(rows, ncols, stop_when_full)


def bp_syndrome_decode(cptr, cvar, vptr, vedge, syndrome, llr, max_iters, backend=None):
    """Sum-product syndrome decoding; returns ``(x_hat, iterations, converged)``."""
    backend = backend or BACKEND
    if backend == "cython" and _core is not None:
        return _core.bp_syndrome_decode(cptr, cvar, vptr, vedge, syndrome, llr, int(max_iters))
    return _fallback.bp_syndrome_decode(cptr, cvar, vptr, vedge, syndrome, llr, max_iters)
