"""Pure numpy versions of the compiled kernels.

The elimination here works column by column (always picking the earliest
unused row as pivot), which yields the same row rank profile as the compiled
row-order scan, so both report identical prefix lengths.
"""

import numpy as np


def gf2_solve(rows, ncols, stop_when_full=True):
    t, W = rows.shape
    M = rows
    is_pivot = np.zeros(t, dtype=bool)
    pivot_row = np.full(ncols, -1, dtype=np.int64)
    one = np.uint64(1)
    for c in range(ncols):
        w, b = c >> 6, np.uint64(c & 63)
        bits = ((M[:, w] >> b) & one).astype(bool)
        cand = np.flatnonzero(bits & ~is_pivot)
        if cand.size == 0:
            continue
        r = cand[0]
        is_pivot[r] = True
        pivot_row[c] = r
        sel = np.flatnonzero(bits)
        sel = sel[sel != r]
        if sel.size:
            M[sel] ^= M[r]
    rank = int(is_pivot.sum())
    if stop_when_full and rank == ncols:
        used = int(pivot_row.max()) + 1 if ncols else 0
    else:
        used = t
    rhs_w, rhs_b = ncols >> 6, np.uint64(ncols & 63)
    rhs = ((M[:used, rhs_w] >> rhs_b) & one).astype(bool)
    coef = M[:used].copy()
    coef[:, rhs_w] &= (one << rhs_b) - one
    coef[:, rhs_w + 1:] = 0
    zero = ~coef.any(axis=1)
    inconsistent = bool(np.any(zero & rhs & ~is_pivot[:used]))
    x = None
    if rank == ncols:
        x = ((M[pivot_row, rhs_w] >> rhs_b) & one).astype(np.uint8)
    return pivot_row, used, inconsistent, x


def _phi(x):
    x = np.clip(x, 1e-12, 50.0)
    return -np.log(np.tanh(0.5 * x))


def bp_syndrome_decode(cptr, cvar, vptr, vedge, syndrome, llr, max_iters):
    m = cptr.shape[0] - 1
    n = llr.shape[0]
    echeck = np.repeat(np.arange(m), np.diff(cptr))
    s_odd = syndrome.astype(np.int64)

    def satisfied(xh):
        par = np.bincount(echeck, weights=xh[cvar], minlength=m).astype(np.int64)
        return not np.any((par + s_odd) & 1)

    v2c = llr[cvar].copy()
    xh = (llr < 0).astype(np.uint8)
    ok = satisfied(xh)
    it = 0
    while not ok and it < max_iters:
        it += 1
        neg = v2c < 0
        ph = _phi(np.abs(v2c))
        s = np.bincount(echeck, weights=ph, minlength=m)
        nneg = np.bincount(echeck, weights=neg, minlength=m).astype(np.int64)
        sgn = (nneg[echeck] + s_odd[echeck] + neg) & 1
        mag = _phi(s[echeck] - ph)
        c2v = np.where(sgn == 1, -mag, mag)
        tot = llr + np.bincount(cvar, weights=c2v, minlength=n)
        xh = (tot < 0).astype(np.uint8)
        v2c = tot[cvar] - c2v
        ok = satisfied(xh)
    return xh, it, ok
