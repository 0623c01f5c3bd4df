"""Channel specifications and the star correlation model.

A model maps ``(k, j)`` to the channel through which source ``j`` is observed
as a noisy copy of the requested source ``k``.  Text format, one edge per
line::

    # comment
    3<-1 erasure:0.1
    3<-2 bsc:0.05
    3<-0 root
    4<-1 gaussian:1.0,0.9
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import DomainError, FormatError, ModelError


class Kind(enum.Enum):
    ERASURE = "erasure"
    BSC = "bsc"
    GAUSSIAN = "gaussian"
    ROOT = "root"


@dataclass(frozen=True)
class ChannelSpec:
    kind: Kind
    p: float = 0.0
    sigma: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind in (Kind.ERASURE, Kind.BSC):
            if not (0.0 <= self.p <= 1.0) or math.isnan(self.p):
                raise DomainError(f"probability out of [0, 1]: {self.p}")
        if self.kind is Kind.GAUSSIAN:
            if not self.sigma > 0:
                raise DomainError(f"sigma must be positive: {self.sigma}")
            if not abs(self.rho) <= 1:
                raise DomainError(f"|rho| must be <= 1: {self.rho}")

    @classmethod
    def erasure(cls, p):
        return cls(Kind.ERASURE, p=float(p))

    @classmethod
    def bsc(cls, p):
        return cls(Kind.BSC, p=float(p))

    @classmethod
    def gaussian(cls, sigma, rho):
        return cls(Kind.GAUSSIAN, sigma=float(sigma), rho=float(rho))

    @classmethod
    def root(cls):
        return cls(Kind.ROOT)

    @classmethod
    def parse(cls, text):
        """Parse ``erasure:0.1``, ``bsc:0.05``, ``gaussian:1.0,0.9`` or ``root``."""
        text = text.strip().lower()
        kind, _, arg = text.partition(":")
        try:
            if kind == "root" and not arg:
                return cls.root()
            if kind in ("erasure", "bsc"):
                return cls(Kind(kind), p=float(arg))
            if kind == "gaussian":
                sigma, rho = arg.split(",")
                return cls.gaussian(float(sigma), float(rho))
        except ValueError as exc:
            if isinstance(exc, DomainError):
                raise
            raise FormatError(f"bad channel spec {text!r}") from exc
        raise FormatError(f"bad channel spec {text!r}")

    def __str__(self):
        if self.kind is Kind.ROOT:
            return "root"
        if self.kind is Kind.GAUSSIAN:
            return f"gaussian:{self.sigma!r},{self.rho!r}"
        return f"{self.kind.value}:{self.p!r}"

    @property
    def param(self):
        """The scalar stored in bitstream level records."""
        return self.rho if self.kind is Kind.GAUSSIAN else self.p


class CorrelationModel:
    """Star-model channels keyed by ``(requested, previous)``.

    Missing ``(k, 0)`` entries default to the root channel.
    """

    def __init__(self, channels=None):
        self._channels = dict(channels or {})

    def __contains__(self, key):
        k, j = key
        return j == 0 or (k, j) in self._channels

    def has_entry(self, k, j):
        return (k, j) in self._channels

    def channel(self, k, j):
        try:
            return self._channels[(k, j)]
        except KeyError:
            if j == 0:
                return ChannelSpec.root()
            raise ModelError(f"no channel for {k}<-{j}") from None

    def set(self, k, j, spec):
        self._channels[(k, j)] = spec

    def items(self):
        return sorted(self._channels.items())

    def __eq__(self, other):
        return isinstance(other, CorrelationModel) and self._channels == other._channels

    @classmethod
    def parse(cls, text):
        channels = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                edge, spec = line.split(None, 1)
                k, j = edge.split("<-")
                channels[(int(k), int(j))] = ChannelSpec.parse(spec)
            except ValueError as exc:
                if isinstance(exc, DomainError):
                    raise
                raise FormatError(f"line {lineno}: cannot parse {raw!r}") from exc
        return cls(channels)

    def dumps(self):
        return "".join(f"{k}<-{j} {spec}\n" for (k, j), spec in self.items())

    @classmethod
    def load(cls, path):
        return cls.parse(Path(path).read_text())
