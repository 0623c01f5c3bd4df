"""Offline encoding into one prefix-nested stored stream, online extraction, decoding.

A stored stream for source ``k`` holds the released check symbols of one
incremental code (staircase parity for erasure neighbours, accumulated LDPCA
syndromes for binary symmetric neighbours).  Its payload is cut into level
segments, one per possible previous request, ordered by increasing
conditional entropy.  The request with rank ``m`` receives segments ``1..m``.
When the root can precede ``k`` a systematic copy of ``x_k`` is appended.

Codes are rebuilt from ``(mode, n)`` with seed ``CODE_SEED``; no code
description is stored.
"""

from __future__ import annotations

import enum
import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import codes
from .entropy_bounds import RateStorageBound, conditional_entropy, symbol_count
from .errors import (ChecksumMismatch, DomainError, FormatError, IntegrityError, RequestError,
                     TruncatedStream, UnsupportedChannelError)
from .model import ChannelSpec, Kind
from .navigation import one_hop
from .sources import ERASED, conditional_type, estimate_channel

CODE_SEED = 0
MAGIC = b"SMRA"
TX_MAGIC = b"SMTX"
VERSION = 1

FLAG_UNIVERSAL = 1
FLAG_ROOT = 2
FLAG_TYPE_TABLE = 4


class Mode(enum.IntEnum):
    ERASURE_PARITY = 0
    BSC_SYNDROME = 1


@dataclass(frozen=True)
class Level:
    prev_id: int
    channel_param: float
    segment_bits: int


@dataclass(frozen=True)
class EmbeddedBitstream:
    source_id: int
    n: int
    mode: Mode
    levels: tuple
    payload: np.ndarray
    learning: tuple | None = None
    root_segment: np.ndarray | None = None
    type_table: bool = False

    def __post_init__(self):
        if any(lv.segment_bits < 0 for lv in self.levels):
            raise DomainError("negative segment length")
        if sum(lv.segment_bits for lv in self.levels) != self.payload.shape[0]:
            raise DomainError("segment lengths do not add up to the payload length")
        if self.learning is not None and len(self.learning) != len(self.levels):
            raise DomainError("one learning string per level")

    @property
    def universal(self):
        return self.learning is not None

    @property
    def prev_ids(self):
        return [lv.prev_id for lv in self.levels]

    def prefix_bits(self, m):
        """Payload bits covering levels ``1..m``."""
        return sum(lv.segment_bits for lv in self.levels[:m])

    def rank(self, j):
        for m, lv in enumerate(self.levels, 1):
            if lv.prev_id == j:
                return m
        raise RequestError(f"source {self.source_id} has no level for previous request {j}")

    @property
    def learning_bits(self):
        return sum(len(s) for s in self.learning) if self.learning else 0

    @property
    def root_bits(self):
        return 0 if self.root_segment is None else self.root_segment.shape[0]


@dataclass(frozen=True)
class Transmission:
    """What the server sends for one request: a payload prefix plus metadata."""
    source_id: int
    prev_id: int
    n: int
    mode: Mode
    level: int
    channel_param: float
    bits: np.ndarray
    learning: np.ndarray | None = None
    type_table: bool = False
    root_bits: int = 0

    @property
    def payload_bits(self):
        return self.bits.shape[0] - self.root_bits

    def total_bits(self):
        extra = 0 if self.learning is None else self.learning.shape[0]
        return self.bits.shape[0] + extra


@dataclass
class RateReport:
    n: int
    storage_bits: int
    payload_bits: int
    file_bits: int
    transmission: dict
    theoretical: RateStorageBound
    channel_rates: dict
    prefix_symbols: dict = field(default_factory=dict)

    @property
    def storage_rate(self):
        return self.storage_bits / self.n

    @property
    def payload_rate(self):
        return self.payload_bits / self.n

    @property
    def file_rate(self):
        return self.file_bits / self.n

    def transmission_rate(self, j):
        return self.transmission[j] / self.n

    def to_json(self):
        return {
            "n": self.n,
            "storage_bits": self.storage_bits,
            "storage_rate": self.storage_rate,
            "payload_bits": self.payload_bits,
            "payload_rate": self.payload_rate,
            "file_bits": self.file_bits,
            "file_rate": self.file_rate,
            "per_request": {str(j): {"transmission_bits": b, "transmission_rate": b / self.n}
                            for j, b in sorted(self.transmission.items())},
            "theoretical": self.theoretical.to_json(),
            "theoretical_symbols": {str(j): s for j, s in self.theoretical.symbols(self.n).items()},
            "channel_rates": {str(m): r for m, r in sorted(self.channel_rates.items())},
        }


# learning strings ---------------------------------------------------------------

def learning_width(n):
    return max(1, math.ceil(math.log2(n + 1)))


def _to_bits(value, width):
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _from_bits(bits):
    v = 0
    for b in np.asarray(bits, dtype=np.int64).tolist():
        v = (v << 1) | b
    return v


def learning_string(x, y, mode, type_table=False):
    n = x.shape[0]
    w = learning_width(n)
    if type_table:
        counts = conditional_type(x, y).joint_counts
        ny = 3 if mode is Mode.ERASURE_PARITY else 2
        full = np.zeros((2, ny), dtype=np.int64)
        full[:, : counts.shape[1]] = counts
        return np.concatenate([_to_bits(int(c), w) for c in full.reshape(-1)])
    if mode is Mode.ERASURE_PARITY:
        count = int(np.sum(y == ERASED))
    else:
        count = int(np.sum(x != y))
    return _to_bits(count, w)


def channel_from_learning(bits, n, mode, type_table=False):
    w = learning_width(n)
    bits = np.asarray(bits, dtype=np.uint8)
    if type_table:
        vals = [_from_bits(bits[i:i + w]) for i in range(0, bits.shape[0], w)]
        if mode is Mode.ERASURE_PARITY:
            if len(vals) != 6:
                raise FormatError("erasure type table needs 6 counts")
            count = vals[2] + vals[5]
        else:
            if len(vals) != 4:
                raise FormatError("binary type table needs 4 counts")
            count = vals[1] + vals[2]
    else:
        if bits.shape[0] != w:
            raise FormatError(f"learning string must have {w} bits")
        count = _from_bits(bits)
    if count > n:
        raise FormatError("learning string count exceeds n")
    p = count / n
    return ChannelSpec.erasure(p) if mode is Mode.ERASURE_PARITY else ChannelSpec.bsc(p)


# encoder -------------------------------------------------------------------------

def code_for(mode, n):
    if mode is Mode.ERASURE_PARITY:
        return codes.build_staircase(n, seed=CODE_SEED)
    return codes.build_ldpca(n, seed=CODE_SEED)


def _mode_of(channels):
    kinds = {ch.kind for ch in channels.values()}
    if Kind.GAUSSIAN in kinds:
        raise UnsupportedChannelError("Gaussian neighbours cannot be encoded losslessly")
    if len(kinds) > 1:
        raise UnsupportedChannelError("neighbours of one source must share a channel kind")
    if kinds == {Kind.BSC}:
        return Mode.BSC_SYNDROME
    return Mode.ERASURE_PARITY


def offline_encode(ensemble, graph, model, k, universal=False, type_table=False, backend=None):
    """Encode ``ensemble.x_k`` once for every possible previous request of ``k``.

    Returns ``(EmbeddedBitstream, RateReport)``.  In universal mode the
    channels are estimated from the realizations (``model`` may be ``None``)
    and each level carries a learning string.
    """
    x = np.asarray(ensemble.x_k, dtype=np.uint8)
    n = x.shape[0]
    J = sorted(one_hop(graph, k))
    if not J:
        raise DomainError(f"source {k} has no possible previous request")
    informative = [j for j in J if j != 0]
    for j in informative:
        if j not in ensemble.side_infos:
            raise DomainError(f"missing realization of previous request {j}")
    side = {j: np.asarray(ensemble.side_infos[j], dtype=np.uint8) for j in informative}

    if universal:
        hint = None
        if model is not None and informative and model.has_entry(k, informative[0]):
            hint = model.channel(k, informative[0]).kind
        channels = {j: estimate_channel(x, side[j], hint) for j in informative}
        if hint is None and len({c.kind for c in channels.values()}) > 1:
            # a side information without erasures reads as bsc; unify on erasure
            channels = {j: estimate_channel(x, side[j], Kind.ERASURE) for j in informative}
    else:
        channels = {j: model.channel(k, j) for j in informative}
    mode = _mode_of(channels) if channels else Mode.ERASURE_PARITY

    learn = {}
    if universal:
        learn = {j: learning_string(x, side[j], mode, type_table) for j in informative}
        channels = {j: channel_from_learning(learn[j], n, mode, type_table) for j in informative}

    order = [j for _, j in sorted((conditional_entropy(channels[j]), j) for j in informative)]
    code = code_for(mode, n) if order else None
    stream = codes.encode_stream(code, x) if code is not None else np.zeros(0, np.uint8)

    cumulative = []
    c = 0
    for j in order:
        c = codes.min_prefix_length(code, x, side[j], channels[j], start=c, stream=stream,
                                    backend=backend)
        cumulative.append(c)
    seg = np.diff([0] + cumulative).astype(int).tolist()
    levels = tuple(Level(j, math.nan if universal else float(channels[j].param), s)
                   for j, s in zip(order, seg))
    payload = stream[: cumulative[-1]].copy() if cumulative else np.zeros(0, np.uint8)
    root = x.copy() if 0 in J else None
    bs = EmbeddedBitstream(k, n, mode, levels, payload,
                           tuple(learn[j] for j in order) if universal else None, root,
                           bool(universal and type_table))

    theo_channels = dict(channels)
    if 0 in J:
        theo_channels[0] = ChannelSpec.root()
    rates = {j: conditional_entropy(ch) for j, ch in sorted(theo_channels.items())}
    theo = RateStorageBound(rates, max(rates.values()),
                            [j for _, j in sorted((r, j) for j, r in rates.items())])
    return bs, rate_report(bs, theo)


def rate_report(bs, theoretical):
    n = bs.n
    tx = {lv.prev_id: extract_bits(bs, lv.prev_id) for lv in bs.levels}
    if bs.root_segment is not None:
        tx[0] = extract_bits(bs, 0)
    prefix = {m: bs.prefix_bits(m) for m in range(1, len(bs.levels) + 1)}
    # one stored check symbol is one bit in both modes
    ch = {m: n / (n + p) for m, p in prefix.items()}
    return RateReport(n=n,
                      storage_bits=bs.payload.shape[0] + bs.root_bits + bs.learning_bits,
                      payload_bits=bs.payload.shape[0],
                      file_bits=8 * len(serialize(bs)),
                      transmission=tx, theoretical=theoretical, channel_rates=ch,
                      prefix_symbols=prefix)


def theoretical_symbols(report):
    return {j: symbol_count(report.n, r) for j, r in report.theoretical.transmission_per_prev.items()}


# extraction and decoding ----------------------------------------------------------

def extract_bits(bs, j_star):
    """Bits sent to a client that holds ``j_star`` (learning string included)."""
    tx = online_extract(bs, j_star)
    return tx.total_bits()


def online_extract(bs, j_star):
    """Slice the stored stream for previous request ``j_star``; reads nothing else."""
    j_star = int(j_star)
    if j_star == 0 and bs.root_segment is not None:
        bits = np.concatenate([bs.payload, bs.root_segment])
        return Transmission(bs.source_id, 0, bs.n, bs.mode, 0, math.nan, bits,
                            root_bits=bs.root_bits)
    m = bs.rank(j_star)
    lv = bs.levels[m - 1]
    bits = bs.payload[: bs.prefix_bits(m)].copy()
    learning = bs.learning[m - 1].copy() if bs.learning is not None else None
    return Transmission(bs.source_id, j_star, bs.n, bs.mode, m, lv.channel_param, bits,
                        learning, bs.type_table)


def transmission_channel(tx):
    if tx.learning is not None:
        return channel_from_learning(tx.learning, tx.n, tx.mode, tx.type_table)
    if math.isnan(tx.channel_param):
        raise IntegrityError("transmission carries no channel parameter")
    if tx.mode is Mode.ERASURE_PARITY:
        return ChannelSpec.erasure(tx.channel_param)
    return ChannelSpec.bsc(tx.channel_param)


def decode(tx, y=None, channel=None, backend=None):
    """Recover ``x`` from a transmission and the realization of the previous request."""
    if tx.root_bits:
        return tx.bits[-tx.root_bits:].copy()
    if y is None:
        raise DomainError("side information required for a non-root transmission")
    y = np.asarray(y, dtype=np.uint8)
    if y.shape != (tx.n,):
        raise DomainError(f"expected {tx.n} side-information symbols, got {y.shape}")
    if tx.mode is Mode.BSC_SYNDROME and np.any(y == ERASED):
        raise IntegrityError("erased symbols in binary side information")
    channel = channel or transmission_channel(tx)
    code = code_for(tx.mode, tx.n)
    t = tx.payload_bits
    try:
        out = codes.decode_prefix(code, y, channel, t, tx.bits, backend=backend)
    except DomainError as exc:
        raise IntegrityError(str(exc)) from exc
    if not out.ok:
        raise IntegrityError(f"decoding failed at {t} symbols ({out.status.value})")
    return out.x_hat


# serialization ---------------------------------------------------------------------

def _pack(bits):
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def _unpack(data, nbits):
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:nbits].astype(np.uint8)


def serialize(bs):
    flags = (FLAG_UNIVERSAL if bs.universal else 0) | (FLAG_ROOT if bs.root_segment is not None else 0)
    if bs.type_table:
        flags |= FLAG_TYPE_TABLE
    out = [struct.pack("<HBBQIH", VERSION, int(bs.mode), flags, bs.n, bs.source_id, len(bs.levels))]
    for lv in bs.levels:
        out.append(struct.pack("<IdQ", lv.prev_id, lv.channel_param, lv.segment_bits))
    learning = _pack(np.concatenate(bs.learning)) if bs.learning else b""
    out.append(struct.pack("<I", len(learning)) + learning)
    out.append(struct.pack("<Q", bs.root_bits))
    body = np.concatenate([bs.payload] + ([bs.root_segment] if bs.root_segment is not None else []))
    out.append(_pack(body))
    blob = b"".join(out)
    return MAGIC + blob + struct.pack("<I", zlib.crc32(blob))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, size):
        if self.pos + size > len(self.data):
            raise TruncatedStream(f"need {size} bytes at offset {self.pos}, stream ends at {len(self.data)}")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def deserialize(data):
    data = bytes(data)
    if len(data) < 4:
        raise TruncatedStream("shorter than the magic")
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    if len(data) < 8:
        raise TruncatedStream("missing header")
    blob, (crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    r = _Reader(blob)
    version, mode, flags, n, source_id, M = r.unpack("<HBBQIH")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    levels = tuple(Level(*r.unpack("<IdQ")) for _ in range(M))
    (lbytes,) = r.unpack("<I")
    lraw = r.take(lbytes)
    (root_bits,) = r.unpack("<Q")
    payload_bits = sum(lv.segment_bits for lv in levels)
    need = (payload_bits + root_bits + 7) // 8
    if len(blob) - r.pos < need:
        raise TruncatedStream("payload shorter than its declared length")
    if zlib.crc32(blob) != crc:
        raise ChecksumMismatch("CRC32 does not match")
    if len(blob) - r.pos != need:
        raise FormatError("trailing bytes after the payload")
    try:
        mode = Mode(mode)
    except ValueError:
        raise FormatError(f"unknown mode {mode}") from None
    body = _unpack(r.take(need), payload_bits + root_bits)
    learning = None
    type_table = bool(flags & FLAG_TYPE_TABLE)
    if flags & FLAG_UNIVERSAL:
        w = learning_width(n) * ((6 if mode is Mode.ERASURE_PARITY else 4) if type_table else 1)
        lbits = _unpack(lraw, w * M)
        if lbits.shape[0] != w * M:
            raise FormatError("learning section too short")
        learning = tuple(lbits[i * w:(i + 1) * w] for i in range(M))
    root = body[payload_bits:] if flags & FLAG_ROOT else None
    if root is None and root_bits:
        raise FormatError("root bits declared without the root flag")
    return EmbeddedBitstream(source_id, n, mode, levels, body[:payload_bits], learning, root,
                             type_table)


def serialize_transmission(tx):
    flags = (FLAG_UNIVERSAL if tx.learning is not None else 0) | (FLAG_ROOT if tx.root_bits else 0)
    if tx.type_table:
        flags |= FLAG_TYPE_TABLE
    learning = b"" if tx.learning is None else _pack(tx.learning)
    nlearn = 0 if tx.learning is None else tx.learning.shape[0]
    blob = b"".join([
        struct.pack("<HBBQIIHd", VERSION, int(tx.mode), flags, tx.n, tx.source_id, tx.prev_id,
                    tx.level, tx.channel_param),
        struct.pack("<II", nlearn, len(learning)), learning,
        struct.pack("<QQ", tx.bits.shape[0], tx.root_bits), _pack(tx.bits),
    ])
    return TX_MAGIC + blob + struct.pack("<I", zlib.crc32(blob))


def deserialize_transmission(data):
    data = bytes(data)
    if data[:4] != TX_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}")
    if len(data) < 8:
        raise TruncatedStream("missing header")
    blob, (crc,) = data[4:-4], struct.unpack("<I", data[-4:])
    r = _Reader(blob)
    version, mode, flags, n, source_id, prev_id, level, param = r.unpack("<HBBQIIHd")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    nlearn, lbytes = r.unpack("<II")
    lraw = r.take(lbytes)
    nbits, root_bits = r.unpack("<QQ")
    raw = r.take((nbits + 7) // 8)
    if zlib.crc32(blob) != crc:
        raise ChecksumMismatch("CRC32 does not match")
    learning = _unpack(lraw, nlearn) if flags & FLAG_UNIVERSAL else None
    return Transmission(source_id, prev_id, n, Mode(mode), level, param, _unpack(raw, nbits),
                        learning, bool(flags & FLAG_TYPE_TABLE), root_bits)
