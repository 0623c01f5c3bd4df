"""Exhaustive embedded random binning for tiny block lengths.

Every ``x`` in ``{0,1}^n`` (encoded as an integer, bit ``i`` = symbol ``i``)
receives one uniform index per stage; the first ``m`` indices form the
stage-``m`` bin.  Decoding keeps the bin members that are conditionally
typical with the side information and succeeds when exactly one remains.

Ties: a deviation equal to ``eps`` up to ``TIE_TOL`` counts as outside the
open window (inside the closed one when ``closed=True``).  Float rounding
otherwise decides such boundary cases arbitrarily.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .codes import DecodeOutcome, Status
from .entropy_bounds import binary_entropy, conditional_entropy, symbol_count
from .errors import DomainError, UnsupportedChannelError
from .model import Kind

MAX_N = 16
MAX_TABLE_BITS = 30
TIE_TOL = 1e-9
CSV_COLUMNS = ("n", "sum_rate", "eps", "trials", "p_err", "ci_lo", "ci_hi")


def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True, eq=False)
class EmbeddedBinning:
    n: int
    stage_rates: tuple
    stage_bits: tuple
    assignment: np.ndarray  # (2**n, M) stage indices
    seed: int

    @property
    def stages(self):
        return len(self.stage_rates)

    def indices(self, x, m=None):
        m = self.stages if m is None else m
        return tuple(int(v) for v in self.assignment[int(x), :m])

    def keys(self, m):
        """One integer per sequence identifying its stage-``m`` bin."""
        key = np.zeros(self.assignment.shape[0], dtype=np.int64)
        for s in range(m):
            key = (key << self.stage_bits[s]) | self.assignment[:, s]
        return key


def build_binning(n, stage_rates, seed=0, rng=None):
    if not 1 <= n <= MAX_N:
        raise DomainError(f"n must be in 1..{MAX_N}")
    rates = tuple(float(r) for r in stage_rates)
    if not rates or any(r < 0 for r in rates):
        raise DomainError("need at least one nonnegative stage rate")
    bits = tuple(symbol_count(n, r) if r > 0 else 0 for r in rates)
    if sum(bits) > MAX_TABLE_BITS:
        raise DomainError(f"{sum(bits)} index bits exceed the cap of {MAX_TABLE_BITS}")
    rng = rng or _rng(seed, 4)
    A = np.empty((1 << n, len(rates)), dtype=np.int64)
    for s, b in enumerate(bits):
        A[:, s] = rng.integers(0, 1 << b, size=1 << n)
    return EmbeddedBinning(n, rates, bits, A, seed)


def _popcount_table(n):
    v = np.arange(1 << n, dtype=np.int64)
    c = np.zeros_like(v)
    for i in range(n):
        c += (v >> i) & 1
    return c


def _inside(dev, eps, closed):
    return dev <= eps + TIE_TOL if closed else dev < eps - TIE_TOL


def _bsc_typical_distances(n, p, eps, closed):
    """Which Hamming distances to ``y`` give a typical candidate."""
    H = binary_entropy(p)
    out = np.zeros(n + 1, dtype=bool)
    for d in range(n + 1):
        if p == 0.0:
            val = 0.0 if d == 0 else math.inf
        elif p == 1.0:
            val = 0.0 if d == n else math.inf
        else:
            val = -(d * math.log2(p) + (n - d) * math.log2(1.0 - p)) / n
        out[d] = _inside(abs(val - H), eps, closed)
    return out


def _check_channel(channel):
    if channel.kind not in (Kind.BSC, Kind.ERASURE):
        raise UnsupportedChannelError("typicality decoding needs a bsc or erasure channel")


def _side_info(x, channel, n, rng):
    """Returns (value bits, erasure mask) as integers."""
    flips = rng.random(n) < channel.p
    mask = int(sum(1 << i for i in range(n) if flips[i]))
    if channel.kind is Kind.BSC:
        return x ^ mask, 0
    return x & ~mask, mask


def _typical_mask(cands, y_val, y_mask, n, channel, eps, closed, pop):
    if channel.kind is Kind.BSC:
        return _bsc_typical_distances(n, channel.p, eps, closed)[pop[cands ^ y_val]]
    consistent = ((cands ^ y_val) & ~y_mask) == 0
    dev = abs(pop[y_mask] / n - conditional_entropy(channel))
    return consistent & _inside(dev, eps, closed)


def typicality_decode(binning, indices_prefix, y, channel, eps=0.1, closed=False):
    """Decode from the first ``len(indices_prefix)`` stage indices.

    ``y`` is a length-``n`` symbol vector (2 marks an erasure).
    """
    _check_channel(channel)
    n = binning.n
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (n,):
        raise DomainError(f"side information must have {n} symbols")
    weights = 1 << np.arange(n, dtype=np.int64)
    erased = y == 2
    y_val = int(np.sum(weights[(y == 1)]))
    y_mask = int(np.sum(weights[erased]))
    m = len(indices_prefix)
    pop = _popcount_table(n)
    target = 0
    for s in range(m):
        target = (target << binning.stage_bits[s]) | int(indices_prefix[s])
    cands = np.flatnonzero(binning.keys(m) == target)
    keep = cands[_typical_mask(cands, y_val, y_mask, n, channel, eps, closed, pop)]
    stats = {"bin_size": int(cands.size), "survivors": int(keep.size)}
    if keep.size == 1:
        xi = int(keep[0])
        x_hat = ((xi >> np.arange(n)) & 1).astype(np.uint8)
        return DecodeOutcome(Status.RECOVERED, x_hat, stats)
    return DecodeOutcome(Status.AMBIGUOUS, None, stats)


@dataclass(frozen=True)
class ErrorEstimate:
    n: int
    sum_rate: float
    eps: float
    trials: int
    errors: int
    ci_lo: float
    ci_hi: float
    atypical: int = 0
    ambiguous: int = 0

    @property
    def p_err(self):
        return self.errors / self.trials

    def row(self):
        return (self.n, self.sum_rate, self.eps, self.trials, self.p_err, self.ci_lo, self.ci_hi)


def wilson_interval(errors, trials, alpha=0.05):
    lo, hi = proportion_confint(errors, trials, alpha=alpha, method="wilson")
    return float(lo), float(hi)


def monte_carlo_error(n, stage_rates, channel, eps=0.1, trials=1000, seed=0, batch=100,
                      closed=False):
    """Empirical decoding error with a fresh binning every ``batch`` trials.

    All stages are sent, so the decoder works at ``sum(stage_rates)``.
    """
    _check_channel(channel)
    if trials < 1:
        raise DomainError("trials must be >= 1")
    rates = tuple(stage_rates)
    pop = _popcount_table(n)
    errors = atypical = ambiguous = 0
    done = 0
    b = 0
    while done < trials:
        size = min(batch, trials - done)
        binning = build_binning(n, rates, rng=_rng(seed, 4, b))
        keys = binning.keys(binning.stages)
        rng = _rng(seed, 5, b)
        xs = rng.integers(0, 1 << n, size=size)
        for x in xs.tolist():
            y_val, y_mask = _side_info(x, channel, n, rng)
            cands = np.flatnonzero(keys == keys[x])
            typ = _typical_mask(cands, y_val, y_mask, n, channel, eps, closed, pop)
            true_typ = bool(typ[np.searchsorted(cands, x)])
            count = int(typ.sum())
            if not true_typ:
                errors += 1
                atypical += 1
            elif count > 1:
                errors += 1
                ambiguous += 1
        done += size
        b += 1
    lo, hi = wilson_interval(errors, trials)
    return ErrorEstimate(n, float(sum(rates)), float(eps), trials, errors, lo, hi, atypical, ambiguous)


def atypicality_floor(n, channel, eps=0.1, closed=False):
    """Exact probability that the true sequence falls outside the typical window."""
    _check_channel(channel)
    p = channel.p
    if channel.kind is Kind.BSC:
        ok = _bsc_typical_distances(n, p, eps, closed)
    else:
        H = conditional_entropy(channel)
        ok = np.array([_inside(abs(e / n - H), eps, closed) for e in range(n + 1)])
    probs = np.array([math.comb(n, d) * p ** d * (1 - p) ** (n - d) for d in range(n + 1)])
    return float(1.0 - probs[ok].sum())


def write_csv(estimates, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for est in estimates:
        w.writerow(est.row())
