"""Correlated binary sources under the star model, empirical types, raw files.

Random streams: every ensemble draws from PCG64 seeded through
``numpy.random.SeedSequence(seed, spawn_key=...)``.  The requested source uses
spawn key ``(0,)`` and the side information of previous request ``j`` uses
``(1, j)``, so adding or removing one neighbour never perturbs the others.

Symbols are ``uint8``: 0/1 bits, and ``ERASED`` (2) for an erased position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError, UnsupportedChannelError
from .model import ChannelSpec, Kind

ERASED = 2


def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass
class SourceEnsemble:
    n: int
    x_k: np.ndarray
    side_infos: dict = field(default_factory=dict)
    seed: int = 0


def draw_side_info(x, ch, rng):
    n = x.shape[0]
    u = rng.random(n)
    y = x.copy()
    if ch.kind is Kind.ERASURE:
        y[u < ch.p] = ERASED
    elif ch.kind is Kind.BSC:
        y ^= (u < ch.p).astype(np.uint8)
    else:
        raise UnsupportedChannelError(f"cannot draw side information through {ch.kind.value}")
    return y


def generate(seed, n, channels):
    """Uniform ``x_k`` plus one side information per non-root channel."""
    if n < 1:
        raise DomainError("n must be >= 1")
    x = _rng(seed, 0).integers(0, 2, n, dtype=np.uint8)
    sides = {}
    for j, ch in sorted(channels.items()):
        if ch.kind is Kind.ROOT:
            continue
        sides[j] = draw_side_info(x, ch, _rng(seed, 1, j))
    return SourceEnsemble(n, x, sides, seed)


@dataclass
class ConditionalType:
    joint_counts: np.ndarray
    empirical_cond_entropy: float

    @property
    def n(self):
        return int(self.joint_counts.sum())


def conditional_type(x, y):
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    if x.shape != y.shape:
        raise DomainError("sequences must have equal length")
    ny = 3 if np.any(y == ERASED) else 2
    counts = np.zeros((2, ny), dtype=np.int64)
    np.add.at(counts, (x, y), 1)
    n = x.shape[0]
    H = 0.0
    col = counts.sum(axis=0)
    for a in range(2):
        for b in range(ny):
            c = counts[a, b]
            if c:
                H -= c * math.log2(c / col[b])
    return ConditionalType(counts, H / n if n else 0.0)


def estimate_channel(x, y, kind=None):
    """Erasure fraction, or disagreement fraction on unerased positions.

    Without a ``kind`` hint the presence of erasures decides the channel kind.
    """
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    if x.size == 0:
        raise DomainError("empty input")
    if x.shape != y.shape:
        raise DomainError("sequences must have equal length")
    erased = y == ERASED
    if kind is None:
        kind = Kind.ERASURE if erased.any() else Kind.BSC
    if kind is Kind.ERASURE:
        return ChannelSpec.erasure(erased.mean())
    keep = ~erased
    if not keep.any():
        return ChannelSpec.bsc(0.5)
    return ChannelSpec.bsc(float(np.mean(x[keep] != y[keep])))


# raw source files ---------------------------------------------------------
# header line "<n>\n" for bit vectors or "<n>:2\n" for 2-bit symbols,
# followed by the MSB-first packed payload.

def dump_raw(symbols):
    symbols = np.asarray(symbols, dtype=np.uint8)
    n = symbols.shape[0]
    if np.any(symbols > ERASED):
        raise DomainError("symbols must be 0, 1 or 2")
    if np.any(symbols == ERASED):
        bits = np.stack([(symbols >> 1) & 1, symbols & 1], axis=1).reshape(-1)
        return f"{n}:2\n".encode() + np.packbits(bits).tobytes()
    return f"{n}\n".encode() + np.packbits(symbols).tobytes()


def load_raw(data):
    head, sep, body = data.partition(b"\n")
    if not sep:
        raise FormatError("missing header line")
    text = head.decode("ascii", "replace")
    width = 1
    if text.endswith(":2"):
        width, text = 2, text[:-2]
    try:
        n = int(text)
    except ValueError:
        raise FormatError(f"bad header {head!r}") from None
    if n < 0:
        raise FormatError("negative length")
    need = (n * width + 7) // 8
    if len(body) != need:
        raise FormatError(f"payload has {len(body)} bytes, expected {need}")
    bits = np.unpackbits(np.frombuffer(body, dtype=np.uint8))[: n * width]
    if width == 1:
        return bits.astype(np.uint8)
    sym = (bits[0::2] << 1) | bits[1::2]
    if np.any(sym > ERASED):
        raise FormatError("invalid 2-bit symbol 3")
    return sym.astype(np.uint8)
