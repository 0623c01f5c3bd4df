"""Incremental channel codes whose outputs nest by prefix.

Both codes store an *accumulated* check stream ``a_i = s_0 ^ ... ^ s_i`` where
``s_i`` is the parity of base row ``i`` over the source bits:

* LDPC-staircase: the staircase parity ``p_i = p_{i-1} ^ s_i`` is exactly this
  accumulation, with a left part of column weight ``N1``.
* LDPCA: a square regular syndrome former with the same accumulator.

The stream is released in a nested order (index ``P-1`` first, then a van der
Corput sweep), so every prefix is spread evenly over the base rows.  Two
consecutive received indices ``a < c`` give ``a_c ^ a_a`` = parity of the
merged rows ``a+1..c``; a prefix of length ``t`` therefore acts as ``t``
merged checks, and a longer prefix refines the shorter one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import DomainError, StorageInsufficient, UnsupportedChannelError
from .model import Kind
from .sources import ERASED

DEFAULT_N1 = 5
DEFAULT_DV = 3
DEFAULT_LEVELS = 66
BP_MAX_ITERS = 100


class Status(enum.Enum):
    RECOVERED = "recovered"
    AMBIGUOUS = "ambiguous"
    RANK_DEFICIENT = "rank_deficient"
    ITERATIONS_EXHAUSTED = "iterations_exhausted"
    INCONSISTENT = "inconsistent"


@dataclass
class DecodeOutcome:
    status: Status
    x_hat: np.ndarray | None = None
    stats: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status is Status.RECOVERED


def nested_order(P):
    """Release order of ``P`` accumulated indices; every prefix is evenly spread."""
    if P <= 0:
        return np.zeros(0, dtype=np.int64)
    K = 1
    while (1 << K) < 2 * P:
        K += 1
    j = np.arange(1, 1 << K, dtype=np.int64)
    rev = np.zeros_like(j)
    for b in range(K):
        rev |= ((j >> b) & 1) << (K - 1 - b)
    # van der Corput fractions rev / 2^K, mapped to the last row of their slot
    cand = np.concatenate([[P - 1], -(-P * rev // (1 << K)) - 1])
    cand = cand[cand >= 0]
    _, first = np.unique(cand, return_index=True)
    order = cand[np.sort(first)]
    assert order.size == P
    return order


def _csr_from_pairs(rows, cols, nrows):
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(nrows + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64)


def merge_segments(indptr, indices, seg_lo, seg_hi, ncols):
    """GF(2) sums of base-row ranges ``[seg_lo[q], seg_hi[q]]`` (inclusive).

    Returns CSR ``(mptr, mcols)`` of the merged rows; columns hit an even
    number of times cancel.
    """
    nseg = seg_lo.shape[0]
    lengths = seg_hi - seg_lo + 1
    seg_of_row = np.repeat(np.arange(nseg), lengths)
    offs = np.arange(seg_of_row.shape[0]) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    base_rows = seg_lo[seg_of_row] + offs
    deg = indptr[base_rows + 1] - indptr[base_rows]
    seg_nnz = np.repeat(seg_of_row, deg)
    starts = np.repeat(indptr[base_rows], deg)
    within = np.arange(starts.shape[0]) - np.repeat(np.cumsum(deg) - deg, deg)
    cols = indices[starts + within]
    keys = seg_nnz.astype(np.int64) * ncols + cols
    uniq, counts = np.unique(keys, return_counts=True)
    uniq = uniq[counts & 1 == 1]
    return _csr_from_pairs(uniq // ncols, uniq % ncols, nseg)


def _prefix_segments(order, t, P):
    """Merged-row ranges and closing/opening indices for the first ``t`` releases."""
    idx = np.sort(order[:t])
    prev = np.concatenate([[-1], idx[:-1]]) if t else idx.copy()
    return prev + 1, idx, prev


def _row_parity(indptr, indices, x):
    nrows = indptr.shape[0] - 1
    row_of = np.repeat(np.arange(nrows), np.diff(indptr))
    return (np.bincount(row_of, weights=x[indices], minlength=nrows).astype(np.int64) & 1).astype(np.uint8)


def _accumulate(s):
    return np.bitwise_xor.accumulate(s.astype(np.uint8)) if s.size else s.astype(np.uint8)


def _words(ncols):
    return ncols // 64 + 1


def _pack_sparse(ptr, cols, rhs, ncols):
    """Dense packed rows with the rhs bit stored at column ``ncols``."""
    nrows = ptr.shape[0] - 1
    M = np.zeros((nrows, _words(ncols)), dtype=np.uint64)
    row_of = np.repeat(np.arange(nrows), np.diff(ptr))
    one = np.uint64(1)
    np.bitwise_or.at(M, (row_of, cols >> 6), one << (cols & 63).astype(np.uint64))
    np.bitwise_or.at(M, (np.flatnonzero(rhs), np.full(int(rhs.sum()), ncols >> 6)),
                     one << np.uint64(ncols & 63))
    return M


# LDPC-staircase -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StaircaseCode:
    n: int
    p_count: int
    N1: int
    seed: int
    indptr: np.ndarray
    indices: np.ndarray
    order: np.ndarray

    @property
    def column_weight(self):
        return min(self.N1, self.p_count)

    def parity_check_dense(self):
        """Full ``H = [left | staircase]`` as a dense 0/1 matrix (small codes only)."""
        H = np.zeros((self.p_count, self.n + self.p_count), dtype=np.uint8)
        rows = np.repeat(np.arange(self.p_count), np.diff(self.indptr))
        H[rows, self.indices] = 1
        i = np.arange(self.p_count)
        H[i, self.n + i] = 1
        H[i[1:], self.n + i[:-1]] = 1
        return H


def _distinct_rows(rng, ncols, nrows, weight):
    """``weight`` distinct row ids per column, uniformly at random."""
    R = rng.integers(0, nrows, size=(ncols, weight))
    while True:
        R.sort(axis=1)
        dup = np.zeros(R.shape, dtype=bool)
        dup[:, 1:] = R[:, 1:] == R[:, :-1]
        if not dup.any():
            return R
        R[dup] = rng.integers(0, nrows, size=int(dup.sum()))


@lru_cache(maxsize=16)
def build_staircase(n, p_count=None, N1=DEFAULT_N1, seed=0):
    p_count = n if p_count is None else p_count
    if n < 1 or not 1 <= p_count <= n or N1 < 3:
        raise DomainError("need n >= 1, 1 <= p_count <= n, N1 >= 3")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(2, n))))
    w = min(N1, p_count)
    R = _distinct_rows(rng, n, p_count, w)
    cols = np.repeat(np.arange(n), w)
    indptr, indices = _csr_from_pairs(R.reshape(-1), cols, p_count)
    return StaircaseCode(n, p_count, N1, seed, indptr, indices, nested_order(p_count))


def staircase_parity(code, x):
    """Parity in natural index order, by forward substitution down the staircase."""
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (code.n,):
        raise DomainError(f"expected {code.n} source bits, got {x.shape}")
    return _accumulate(_row_parity(code.indptr, code.indices, x))


def release(code, stream_natural):
    """Reorder an accumulated stream into release order."""
    return np.asarray(stream_natural, dtype=np.uint8)[code.order]


def _erasure_equations(code, y, lo, hi, a_hi, a_lo):
    """Merged-row equations restricted to the erased source columns."""
    erased = np.flatnonzero(y == ERASED)
    mptr, mcols = merge_segments(code.indptr, code.indices, lo, hi, code.n)
    known = y[mcols] != ERASED
    row_of = np.repeat(np.arange(lo.shape[0]), np.diff(mptr))
    rhs = (a_hi ^ a_lo).astype(np.int64)
    rhs += np.bincount(row_of[known], weights=y[mcols[known]], minlength=lo.shape[0]).astype(np.int64)
    rhs = (rhs & 1).astype(np.uint8)
    remap = np.full(code.n, -1, dtype=np.int64)
    remap[erased] = np.arange(erased.shape[0])
    keep = ~known
    eptr = np.zeros(lo.shape[0] + 1, dtype=np.int64)
    eptr[1:] = np.cumsum(np.bincount(row_of[keep], minlength=lo.shape[0]))
    return erased, eptr, remap[mcols[keep]], rhs


def _peel(ptr, cols, rhs, ncols):
    """Iterative peeling; returns (values, resolved, residual rhs, residual degrees, peeled)."""
    nrows = ptr.shape[0] - 1
    deg = np.diff(ptr).astype(np.int64)
    rhs = rhs.astype(np.uint8).copy()
    row_of = np.repeat(np.arange(nrows), deg)
    tptr, trows = _csr_from_pairs(cols, row_of, ncols)
    resolved = np.zeros(ncols, dtype=bool)
    val = np.zeros(ncols, dtype=np.uint8)
    xor_cols = np.zeros(nrows, dtype=np.int64)
    np.bitwise_xor.at(xor_cols, row_of, cols)
    stack = list(np.flatnonzero(deg == 1))
    peeled = 0
    ptr_l, trows_l, tptr_l = ptr, trows.tolist(), tptr.tolist()
    while stack:
        r = stack.pop()
        if deg[r] != 1:
            continue
        c = int(xor_cols[r])
        if resolved[c]:
            continue
        v = rhs[r]
        resolved[c] = True
        val[c] = v
        peeled += 1
        for q in trows_l[tptr_l[c]:tptr_l[c + 1]]:
            deg[q] -= 1
            xor_cols[q] ^= c
            rhs[q] ^= v
            if deg[q] == 1:
                stack.append(q)
    return val, resolved, rhs, deg, peeled


def _solve_equations(ptr, cols, rhs, ncols, peel=True, backend=None):
    """Peel, then eliminate the residual; returns (status, x or None, stats)."""
    stats = {"peeled": 0, "ge_pivots": 0}
    if ncols == 0:
        consistent = not np.any(rhs)
        return (Status.RECOVERED if consistent else Status.INCONSISTENT), np.zeros(0, np.uint8), stats
    if peel:
        val, resolved, rhs2, deg, peeled = _peel(ptr, cols, rhs, ncols)
        stats["peeled"] = peeled
    else:
        val = np.zeros(ncols, dtype=np.uint8)
        resolved = np.zeros(ncols, dtype=bool)
        rhs2 = rhs.astype(np.uint8)
        deg = np.diff(ptr)
    left = np.flatnonzero(~resolved)
    row_of = np.repeat(np.arange(ptr.shape[0] - 1), np.diff(ptr))
    if np.any((deg == 0) & (rhs2 == 1)):
        return Status.INCONSISTENT, None, stats
    if left.size == 0:
        return Status.RECOVERED, val, stats
    keep = ~resolved[cols]
    live_rows = np.flatnonzero(deg > 0)
    remap_c = np.full(ncols, -1, dtype=np.int64)
    remap_c[left] = np.arange(left.size)
    remap_r = np.full(ptr.shape[0] - 1, -1, dtype=np.int64)
    remap_r[live_rows] = np.arange(live_rows.size)
    rr = remap_r[row_of[keep]]
    rptr = np.zeros(live_rows.size + 1, dtype=np.int64)
    rptr[1:] = np.cumsum(np.bincount(rr, minlength=live_rows.size))
    o = np.argsort(rr, kind="stable")
    M = _pack_sparse(rptr, remap_c[cols[keep]][o], rhs2[live_rows], left.size)
    pivot_row, _, inconsistent, sol = _kernels.gf2_solve(M, left.size, stop_when_full=False,
                                                         backend=backend)
    stats["ge_pivots"] = int(np.sum(pivot_row >= 0))
    if inconsistent:
        return Status.INCONSISTENT, None, stats
    if sol is None:
        return Status.RANK_DEFICIENT, None, stats
    val[left] = sol
    return Status.RECOVERED, val, stats


def erasure_decode(code, y, parity_prefix_len, parity, peel=True, backend=None):
    """Recover ``x`` from erased side information plus a released parity prefix.

    ``parity`` holds released symbols in release order (at least
    ``parity_prefix_len`` of them); anything past the prefix counts as erased.
    """
    y = np.asarray(y, dtype=np.uint8)
    t = int(parity_prefix_len)
    if y.shape != (code.n,):
        raise DomainError(f"expected {code.n} side-information symbols")
    if not 0 <= t <= code.p_count:
        raise DomainError("prefix longer than the parity stream")
    parity = np.asarray(parity, dtype=np.uint8)[:t]
    e = int(np.sum(y == ERASED))
    if e > t:
        return DecodeOutcome(Status.RANK_DEFICIENT, None, {"erased": e})
    lo, hi, prev = _prefix_segments(code.order, t, code.p_count)
    val_at = np.zeros(code.p_count, dtype=np.uint8)
    val_at[code.order[:t]] = parity
    a_hi = val_at[hi]
    a_lo = np.where(prev >= 0, val_at[np.maximum(prev, 0)], 0).astype(np.uint8)
    erased, eptr, ecols, rhs = _erasure_equations(code, y, lo, hi, a_hi, a_lo)
    status, vals, stats = _solve_equations(eptr, ecols, rhs, e, peel=peel, backend=backend)
    stats["erased"] = e
    if status is not Status.RECOVERED:
        return DecodeOutcome(status, None, stats)
    x = y.copy()
    x[erased] = vals
    return DecodeOutcome(Status.RECOVERED, x, stats)


def _arrival_neighbours(order):
    """For each release step, the nearest earlier-released index below and above."""
    P = order.shape[0]
    pos = np.sort(order)
    left = np.concatenate([[-1], pos[:-1]])
    right = np.concatenate([pos[1:], [-2]])
    lo_of = dict(zip(pos.tolist(), left.tolist()))
    hi_of = dict(zip(pos.tolist(), right.tolist()))
    pred = np.empty(P, dtype=np.int64)
    succ = np.empty(P, dtype=np.int64)
    # delete in reverse release order from a sorted doubly linked list
    for step in range(P - 1, -1, -1):
        c = int(order[step])
        a, b = lo_of[c], hi_of[c]
        pred[step], succ[step] = a, b
        if a >= 0:
            hi_of[a] = b
        if b >= 0:
            lo_of[b] = a
    return pred, succ


@lru_cache(maxsize=16)
def _arrivals(code):
    pred, succ = _arrival_neighbours(code.order)
    c = code.order
    # each release adds the shorter of (pred, c] and (c, succ] as a fresh equation
    use_right = (succ >= 0) & (succ - c < c - pred)
    lo = np.where(use_right, c + 1, pred + 1)
    hi = np.where(use_right, succ, c)
    a_idx = np.where(use_right, c, pred)
    b_idx = np.where(use_right, succ, c)
    return lo, hi, a_idx, b_idx


def erasure_min_prefix(code, x, y, backend=None):
    """Shortest release prefix whose merged checks determine every erased bit."""
    y = np.asarray(y, dtype=np.uint8)
    e = int(np.sum(y == ERASED))
    if e == 0:
        return 0
    a = staircase_parity(code, x)
    lo_all, hi_all, lo_idx, hi_idx = _arrivals(code)
    T = min(code.p_count, e + 64 + e // 8)
    while True:
        lo, hi = lo_all[:T], hi_all[:T]
        a_hi = a[hi_idx[:T]]
        a_lo = np.where(lo_idx[:T] >= 0, a[np.maximum(lo_idx[:T], 0)], 0).astype(np.uint8)
        _, eptr, ecols, rhs = _erasure_equations(code, y, lo, hi, a_hi, a_lo)
        M = _pack_sparse(eptr, ecols, rhs, e)
        pivot_row, used, _, _ = _kernels.gf2_solve(M, e, stop_when_full=True, backend=backend)
        if np.all(pivot_row >= 0):
            return int(used)
        if T == code.p_count:
            raise StorageInsufficient(f"{e} erasures not resolvable by the full parity stream")
        T = min(code.p_count, 2 * T)


# LDPCA ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LdpcaCode:
    n: int
    d_v: int
    seed: int
    indptr: np.ndarray
    indices: np.ndarray
    order: np.ndarray
    rate_ladder: tuple
    attempt: int = 0

    def base_dense(self):
        H = np.zeros((self.n, self.n), dtype=np.uint8)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        H[rows, self.indices] = 1
        return H


def default_ladder(n, levels=DEFAULT_LEVELS):
    step = max(1, n // levels)
    ladder = list(range(step, n, step))[: levels - 1] + [n]
    return tuple(sorted(set(ladder)))


def _regular_square(rng, n, d):
    """Random ``n x n`` matrix with ``d`` ones in every row and column, no repeats."""
    rows = np.repeat(np.arange(n), d)
    cols = np.repeat(np.arange(n), d)
    rng.shuffle(cols)
    for _ in range(1000):
        key = rows * n + cols
        srt = np.argsort(key, kind="stable")
        dup = np.zeros(key.shape[0], dtype=bool)
        dup[srt[1:]] = key[srt[1:]] == key[srt[:-1]]
        bad = np.flatnonzero(dup)
        if bad.size == 0:
            return rows, cols
        partners = rng.integers(0, cols.shape[0], size=bad.size)
        cols[bad], cols[partners] = cols[partners], cols[bad].copy()
    raise RuntimeError("could not build a repeat-free regular matrix")


def _full_rank(indptr, indices, n, backend=None):
    rhs = np.zeros(n, dtype=np.uint8)
    M = _pack_sparse(indptr, indices, rhs, n)
    pivot_row, _, _, _ = _kernels.gf2_solve(M, n, stop_when_full=True, backend=backend)
    return bool(np.all(pivot_row >= 0))


@lru_cache(maxsize=16)
def build_ldpca(n, d_v=DEFAULT_DV, seed=0, ladder=None):
    """Regular syndrome former, redrawn until invertible so the top level always decodes."""
    if n < 2 or d_v < 2 or d_v > n:
        raise DomainError("need n >= 2 and 2 <= d_v <= n")
    ladder = tuple(ladder) if ladder is not None else default_ladder(n)
    if list(ladder) != sorted(set(ladder)) or ladder[-1] != n or ladder[0] < 1:
        raise DomainError("ladder must be strictly increasing and end at n")
    for attempt in range(200):
        rng = np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(int(seed), spawn_key=(3, n, attempt))))
        rows, cols = _regular_square(rng, n, d_v)
        indptr, indices = _csr_from_pairs(rows, cols, n)
        if _full_rank(indptr, indices, n):
            return LdpcaCode(n, d_v, seed, indptr, indices, nested_order(n), ladder, attempt)
    raise RuntimeError("no invertible syndrome former found")


def ldpca_syndrome(code, x):
    """Accumulated syndrome ``a`` in natural index order."""
    x = np.asarray(x, dtype=np.uint8)
    if x.shape != (code.n,):
        raise DomainError(f"expected {code.n} source bits, got {x.shape}")
    return _accumulate(_row_parity(code.indptr, code.indices, x))


def _bsc_llr(y, p):
    p = min(max(float(p), 1e-9), 1 - 1e-9)
    return np.log((1 - p) / p) * (1.0 - 2.0 * np.asarray(y, dtype=np.float64))


def _transpose_edges(cptr, cvar, n):
    o = np.argsort(cvar, kind="stable")
    vptr = np.zeros(n + 1, dtype=np.int64)
    vptr[1:] = np.cumsum(np.bincount(cvar, minlength=n))
    return vptr, o.astype(np.int64)


def bsc_decode(code, y, p, level_t, received_bits, max_iters=BP_MAX_ITERS, backend=None):
    """Belief propagation on the merged checks of the first ``level_t`` releases.

    At the top level (``t = n``) a failed BP run falls back to exact GF(2)
    inversion of the base syndrome former.
    """
    y = np.asarray(y, dtype=np.uint8)
    t = int(level_t)
    if y.shape != (code.n,):
        raise DomainError(f"expected {code.n} side-information bits")
    if t != 0 and t not in code.rate_ladder:
        raise DomainError(f"level {t} is not on the rate ladder")
    received = np.asarray(received_bits, dtype=np.uint8)[:t]
    llr = _bsc_llr(y, p)
    if t == 0:
        return DecodeOutcome(Status.RECOVERED, (llr < 0).astype(np.uint8), {"iterations": 0})
    lo, hi, prev = _prefix_segments(code.order, t, code.n)
    val_at = np.zeros(code.n, dtype=np.uint8)
    val_at[code.order[:t]] = received
    synd = val_at[hi] ^ np.where(prev >= 0, val_at[np.maximum(prev, 0)], 0).astype(np.uint8)
    cptr, cvar = merge_segments(code.indptr, code.indices, lo, hi, code.n)
    empty = np.diff(cptr) == 0
    if np.any(empty & (synd == 1)):
        return DecodeOutcome(Status.INCONSISTENT, None, {"iterations": 0})
    if np.any(empty):
        keep = ~empty
        deg = np.diff(cptr)[keep]
        cptr = np.concatenate([[0], np.cumsum(deg)]).astype(np.int64)
        synd = synd[keep]
    vptr, vedge = _transpose_edges(cptr, cvar, code.n)
    x_hat, iters, ok = _kernels.bp_syndrome_decode(cptr, cvar, vptr, vedge, synd.astype(np.uint8),
                                                   llr, max_iters, backend=backend)
    stats = {"iterations": int(iters)}
    if ok:
        return DecodeOutcome(Status.RECOVERED, x_hat, stats)
    if t == code.n:
        s = val_at ^ np.concatenate([[0], val_at[:-1]]).astype(np.uint8)
        M = _pack_sparse(code.indptr, code.indices, s, code.n)
        pivot_row, _, _, sol = _kernels.gf2_solve(M, code.n, stop_when_full=True, backend=backend)
        stats["ge_pivots"] = int(np.sum(pivot_row >= 0))
        if sol is not None:
            return DecodeOutcome(Status.RECOVERED, sol, stats)
    return DecodeOutcome(Status.ITERATIONS_EXHAUSTED, None, stats)


# minimal prefixes -------------------------------------------------------------

def encode_stream(code, x):
    """The full release-ordered stream of either code."""
    if isinstance(code, StaircaseCode):
        return release(code, staircase_parity(code, x))
    return release(code, ldpca_syndrome(code, x))


def decode_prefix(code, y, channel, t, received, backend=None):
    if isinstance(code, StaircaseCode):
        return erasure_decode(code, y, t, received, backend=backend)
    return bsc_decode(code, y, channel.p, t, received, backend=backend)


def min_prefix_length(code, x, y, channel, start=0, stream=None, backend=None):
    """Fewest released symbols (at least ``start``) that decode ``y`` back to ``x`` exactly."""
    x = np.asarray(x, dtype=np.uint8)
    stream = encode_stream(code, x) if stream is None else stream
    if isinstance(code, StaircaseCode):
        if channel.kind is not Kind.ERASURE:
            raise UnsupportedChannelError("staircase codes serve erasure side information")
        t = max(int(start), erasure_min_prefix(code, x, y, backend=backend))
        # verification pass with the decoder a client will run
        out = erasure_decode(code, y, t, stream, backend=backend)
        if not out.ok or not np.array_equal(out.x_hat, x):
            raise StorageInsufficient("verification decode failed")
        return t
    if channel.kind is not Kind.BSC:
        raise UnsupportedChannelError("LDPCA codes serve binary symmetric side information")
    for t in (0,) + code.rate_ladder:
        if t < start:
            continue
        out = bsc_decode(code, y, channel.p, t, stream, backend=backend)
        if out.ok and np.array_equal(out.x_hat, x):
            return t
    raise StorageInsufficient("no ladder level decodes this realization")
