"""Closed-form rate and storage bounds.

All rates are in bits per source symbol, sources are binary i.i.d. uniform
(lossless part) or Gaussian (lossy part), and side informations follow the
star model: every previous request is an independent channel output of the
requested source.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import DomainError, GraphError, UnsupportedChannelError
from .model import Kind
from .navigation import is_rooted_path, one_hop, previous_request_subsets

_LOSSLESS = (Kind.ERASURE, Kind.BSC, Kind.ROOT)


def binary_entropy(p):
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability out of [0, 1]: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def conditional_entropy(ch):
    if ch.kind is Kind.ERASURE:
        return ch.p
    if ch.kind is Kind.BSC:
        return binary_entropy(ch.p)
    if ch.kind is Kind.ROOT:
        return 1.0
    raise UnsupportedChannelError("Gaussian channels have no lossless conditional entropy")


def _bsc_star_entropy(ps):
    # H(X | Y_1..Y_m), X uniform, Y_i = X xor Z_i with Z_i ~ Bern(p_i)
    total = 0.0
    for ys in itertools.product((0, 1), repeat=len(ps)):
        like0 = math.prod(p if y else 1.0 - p for p, y in zip(ps, ys))
        like1 = math.prod(1.0 - p if y else p for p, y in zip(ps, ys))
        py = 0.5 * (like0 + like1)
        if py > 0:
            total += py * binary_entropy(0.5 * like1 / py)
    return total


def multi_conditional_entropy(chs):
    """Entropy of the requested source given several star-model side informations."""
    chs = list(chs)
    if not chs:
        raise DomainError("need at least one channel")
    for ch in chs:
        if ch.kind not in _LOSSLESS:
            raise UnsupportedChannelError(f"{ch.kind.value} channel in lossless conditioning")
    informative = [ch for ch in chs if ch.kind is not Kind.ROOT]
    if not informative:
        return 1.0
    kinds = {ch.kind for ch in informative}
    if len(kinds) > 1:
        raise UnsupportedChannelError("mixed erasure/bsc side informations")
    if Kind.ERASURE in kinds:
        return math.prod(ch.p for ch in informative)
    return _bsc_star_entropy([ch.p for ch in informative])


def symbol_count(n, rate):
    """``ceil(n * rate)`` robust to float noise in ``n * rate``."""
    return math.ceil(n * rate - 1e-9)


@dataclass
class RateStorageBound:
    transmission_per_prev: dict
    storage: float
    ordering: list

    def to_json(self):
        return {
            "transmission_per_prev": {str(j): r for j, r in self.transmission_per_prev.items()},
            "storage": self.storage,
            "ordering": list(self.ordering),
        }

    def symbols(self, n):
        return {j: symbol_count(n, r) for j, r in self.transmission_per_prev.items()}


@dataclass
class FullMemoryBound:
    transmission_per_subset: dict
    storage: float
    storage_single: float
    ordering: list = field(default_factory=list)

    def to_json(self):
        return {
            "transmission_per_subset": [
                {"subset": sorted(s), "rate": r}
                for s, r in sorted(self.transmission_per_subset.items(), key=lambda kv: sorted(kv[0]))
            ],
            "storage": self.storage,
            "storage_single": self.storage_single,
        }


def _neighbors(k, graph):
    J = one_hop(graph, k)
    if not J:
        raise GraphError(f"source {k} has no possible previous request")
    return J


def rate_storage_single_memory(k, graph, model):
    J = _neighbors(k, graph)
    rates = {j: conditional_entropy(model.channel(k, j)) for j in sorted(J)}
    order = [j for _, j in sorted((r, j) for j, r in rates.items())]
    return RateStorageBound(rates, max(rates.values()), order)


def _subset_channels(k, subset, model):
    # sources of the subset without a modelled channel to k carry no information here
    return [model.channel(k, l) for l in sorted(subset) if l == 0 or model.has_entry(k, l)]


def rate_storage_full_memory(k, graph, model, cap=None):
    single = rate_storage_single_memory(k, graph, model)
    kwargs = {} if cap is None else {"cap": cap}
    family = previous_request_subsets(graph, k, **kwargs)
    rates = {E: multi_conditional_entropy(_subset_channels(k, E, model)) for E in family}
    order = [E for _, _, E in sorted((r, sorted(E), E) for E, r in rates.items())]
    return FullMemoryBound(rates, max(rates.values()), single.storage, order)


def request_set_rates(K, graph, model):
    """Sum transmission and sum storage rates for the request path ``K``."""
    K = list(K)
    if not K or not is_rooted_path(graph, K):
        raise GraphError(f"{K} is not a path starting at the root")
    held = [0]
    sum_tx = 0.0
    for k in K:
        sum_tx += multi_conditional_entropy(_subset_channels(k, held, model))
        held.append(k)
    sum_storage = sum(rate_storage_full_memory(k, graph, model).storage for k in dict.fromkeys(K))
    return sum_tx, sum_storage


def universal_overhead(n, alphabet_size, M, per_request=False):
    """Bits/symbol spent describing conditional types when statistics are unknown."""
    if n < 1 or alphabet_size < 2 or M < 1:
        raise DomainError("need n >= 1, alphabet_size >= 2, M >= 1")
    per = alphabet_size ** 2 * math.log2(n + 1) / n
    return per if per_request else M * per


@dataclass(frozen=True)
class GaussianPoint:
    distortion: float
    rate: float


def gaussian_wz(sigma_k, rho, delta):
    if not sigma_k > 0 or not delta > 0:
        raise DomainError("sigma_k and delta must be positive")
    if abs(rho) >= 1:
        raise DomainError("|rho| = 1 leaves no residual uncertainty (degenerate channel)")
    resid = sigma_k ** 2 * (1.0 - rho ** 2)
    D = delta * resid / (resid + delta * rho ** 2)
    R = 0.5 * math.log2(resid / D) if resid > D else 0.0
    return GaussianPoint(D, R)


def gaussian_region(k, graph, model, delta, sigma_k=1.0):
    """Per-neighbour Wyner-Ziv points and the storage rate (their max)."""
    points = {}
    for j in sorted(_neighbors(k, graph)):
        ch = model.channel(k, j)
        if ch.kind is Kind.ROOT:
            # nothing at the decoder: classical R(D)
            points[j] = gaussian_wz(sigma_k, 0.0, delta)
            continue
        if ch.kind is not Kind.GAUSSIAN:
            raise UnsupportedChannelError(f"{k}<-{j} is {ch.kind.value}, not gaussian")
        points[j] = gaussian_wz(sigma_k, ch.rho, delta)
    return points, max(pt.rate for pt in points.values())
