# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: GF(2) prefix elimination and syndrome belief propagation.

Every function here has a numpy twin in ``_fallback`` with the same contract.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, fabs
from libc.stdint cimport uint64_t, int64_t, uint8_t

cnp.import_array()


cdef extern from *:
    int __builtin_ctzll(unsigned long long w) nogil
    int __builtin_popcountll(unsigned long long w) nogil


def gf2_prefix_eliminate(cnp.ndarray[cnp.uint64_t, ndim=2] rows, Py_ssize_t ncols,
                         bint stop_when_full=True):
    """Row-order elimination of a packed GF(2) system, in place.

    Column ``ncols`` of each row holds the right-hand side.  Rows are consumed
    in order; a row that reduces to zero on the coefficient columns is
    dependent (and inconsistent if its rhs bit survives).

    Returns ``(pivot_row, rows_used, inconsistent)`` where ``pivot_row[c]`` is
    the row index holding pivot column ``c`` (or -1).
    """
    cdef Py_ssize_t t = rows.shape[0]
    cdef Py_ssize_t W = rows.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pivot_row = np.full(ncols, -1, dtype=np.int64)
    cdef uint64_t[:, ::1] R = rows
    cdef int64_t[::1] P = pivot_row
    cdef Py_ssize_t r, w, w0, k, col, pr, used = 0
    cdef Py_ssize_t rank = 0
    cdef bint inconsistent = False
    cdef uint64_t word, mask
    cdef Py_ssize_t rhs_word = ncols >> 6
    cdef uint64_t rhs_mask = (<uint64_t>1) << (ncols & 63)

    with nogil:
        for r in range(t):
            used = r + 1
            w0 = 0
            while True:
                # lowest set coefficient bit at or after word w0
                col = -1
                for w in range(w0, W):
                    word = R[r, w]
                    if w == rhs_word:
                        word = word & (rhs_mask - 1)
                    if word != 0:
                        col = (w << 6) + __builtin_ctzll(word)
                        w0 = w
                        break
                    if w == rhs_word:
                        break
                if col < 0:
                    if R[r, rhs_word] & rhs_mask:
                        inconsistent = True
                    break
                pr = P[col]
                if pr < 0:
                    P[col] = r
                    rank += 1
                    break
                for k in range(w0, W):
                    R[r, k] ^= R[pr, k]
            if stop_when_full and rank == ncols:
                break
    return pivot_row, used, bool(inconsistent)


def gf2_back_substitute(cnp.ndarray[cnp.uint64_t, ndim=2] rows,
                        cnp.ndarray[cnp.int64_t, ndim=1] pivot_row, Py_ssize_t ncols):
    """Solve an echelon system left by ``gf2_prefix_eliminate`` (full rank)."""
    cdef Py_ssize_t W = rows.shape[1]
    cdef uint64_t[:, ::1] R = rows
    cdef int64_t[::1] P = pivot_row
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] xp = np.zeros(W, dtype=np.uint64)
    cdef uint64_t[::1] X = xp
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(ncols, dtype=np.uint8)
    cdef uint8_t[::1] O = out
    cdef Py_ssize_t c, w, r
    cdef Py_ssize_t rhs_word = ncols >> 6
    cdef uint64_t rhs_mask = (<uint64_t>1) << (ncols & 63)
    cdef int par
    cdef uint64_t word
    with nogil:
        for c in range(ncols - 1, -1, -1):
            r = P[c]
            par = 1 if (R[r, rhs_word] & rhs_mask) else 0
            for w in range(c >> 6, rhs_word + 1):
                word = R[r, w] & X[w]
                par ^= __builtin_popcountll(word) & 1
            if par:
                O[c] = 1
                X[c >> 6] |= (<uint64_t>1) << (c & 63)
    return out


# caps check messages at about 28.3, the ceiling of the phi form in _fallback
cdef double TANH_CAP = 1.0 - 1e-12


def bp_syndrome_decode(cnp.ndarray[cnp.int64_t, ndim=1] cptr,
                       cnp.ndarray[cnp.int64_t, ndim=1] cvar,
                       cnp.ndarray[cnp.int64_t, ndim=1] vptr,
                       cnp.ndarray[cnp.int64_t, ndim=1] vedge,
                       cnp.ndarray[cnp.uint8_t, ndim=1] syndrome,
                       cnp.ndarray[cnp.float64_t, ndim=1] llr,
                       int max_iters):
    """Sum-product decoding against a check-node syndrome.

    Edges are numbered in check-major order (``cptr``/``cvar``); ``vedge``
    lists edge ids grouped per variable via ``vptr``.
    Returns ``(x_hat, iterations, converged)``.
    """
    cdef Py_ssize_t m = cptr.shape[0] - 1
    cdef Py_ssize_t n = llr.shape[0]
    cdef Py_ssize_t E = cvar.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] v2c_a = np.empty(E, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] c2v_a = np.zeros(E, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ph_a = np.empty(E, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tot_a = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] xh_a = np.empty(n, dtype=np.uint8)
    cdef double[::1] v2c = v2c_a
    cdef double[::1] c2v = c2v_a
    cdef double[::1] ph = ph_a
    cdef double[::1] tot = tot_a
    cdef uint8_t[::1] xh = xh_a
    cdef int64_t[::1] CP = cptr
    cdef int64_t[::1] CV = cvar
    cdef int64_t[::1] VP = vptr
    cdef int64_t[::1] VE = vedge
    cdef uint8_t[::1] S = syndrome
    cdef double[::1] L = llr
    cdef Py_ssize_t c, e, v, i
    cdef double s, a, mag
    cdef int neg, sgn, par
    cdef int it = 0
    cdef bint ok = False

    with nogil:
        for e in range(E):
            v2c[e] = L[CV[e]]
        for v in range(n):
            xh[v] = 1 if L[v] < 0 else 0
        # zero iterations when the hard decision already satisfies every check
        ok = True
        for c in range(m):
            par = S[c]
            for e in range(CP[c], CP[c + 1]):
                par ^= xh[CV[e]]
            if par:
                ok = False
                break
        while not ok and it < max_iters:
            it += 1
            for c in range(m):
                # tanh rule with leave-one-out products: one exp and one log per edge
                neg = S[c]
                s = 1.0
                for e in range(CP[c], CP[c + 1]):
                    a = v2c[e]
                    if a < 0:
                        neg ^= 1
                    a = fabs(a)
                    if a < 1e-12:
                        a = 1e-12
                    elif a > 50.0:
                        a = 50.0
                    a = exp(-a)
                    ph[e] = (1.0 - a) / (1.0 + a)
                    c2v[e] = s
                    s = s * ph[e]
                s = 1.0
                for e in range(CP[c + 1] - 1, CP[c] - 1, -1):
                    mag = c2v[e] * s
                    s = s * ph[e]
                    if mag > TANH_CAP:
                        mag = TANH_CAP
                    mag = log((1.0 + mag) / (1.0 - mag))
                    sgn = neg
                    if v2c[e] < 0:
                        sgn ^= 1
                    c2v[e] = -mag if sgn else mag
            for v in range(n):
                s = L[v]
                for i in range(VP[v], VP[v + 1]):
                    s = s + c2v[VE[i]]
                tot[v] = s
                xh[v] = 1 if s < 0 else 0
                for i in range(VP[v], VP[v + 1]):
                    e = VE[i]
                    v2c[e] = s - c2v[e]
            ok = True
            for c in range(m):
                par = S[c]
                for e in range(CP[c], CP[c + 1]):
                    par ^= xh[CV[e]]
                if par:
                    ok = False
                    break
    return xh_a, it, bool(ok)
