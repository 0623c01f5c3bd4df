"""Theoretical vs practical symbol counts for one source and six neighbours.

Each seed draws one source and one side information per channel of the
table; every row reports ``ceil(n H)`` next to the minimal prefix found by
simulated decoding (mean and max over seeds).  The stored column is the
largest requirement over the rows of a seed.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codec, codes
from .entropy_bounds import conditional_entropy, symbol_count
from .model import ChannelSpec, Kind
from .sources import generate

TABLE_PS = (0.01, 0.05, 0.1, 0.15, 0.2, 0.25)


class Table(enum.Enum):
    ERASURE_N40000 = "erasure40000"
    BSC_N396 = "bsc396"
    BSC_N6336 = "bsc6336"
    CUSTOM = "custom"


@dataclass
class ExperimentConfig:
    table: Table
    n: int
    channels: tuple
    seeds: tuple = (0, 1, 2)
    trials: int = 1
    output: str | None = None
    fmt: str = "csv"


BUILTIN = {
    Table.ERASURE_N40000: (40000, tuple(ChannelSpec.erasure(p) for p in TABLE_PS)),
    Table.BSC_N396: (396, tuple(ChannelSpec.bsc(p) for p in TABLE_PS)),
    Table.BSC_N6336: (6336, tuple(ChannelSpec.bsc(p) for p in TABLE_PS)),
}


def builtin_config(table, seeds=(0, 1, 2), **kw):
    table = Table(table)
    n, chans = BUILTIN[table]
    return ExperimentConfig(table, n, chans, tuple(seeds), **kw)


@dataclass
class Row:
    channel: ChannelSpec
    theoretical: int
    practical: list = field(default_factory=list)

    @property
    def mean(self):
        return float(np.mean(self.practical)) if self.practical else float("nan")

    @property
    def max(self):
        return int(max(self.practical)) if self.practical else 0


@dataclass
class TableResult:
    config: ExperimentConfig
    rows: list
    stored_theoretical: int
    stored_practical: list

    def csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "n", "channel", "theoretical", "practical_mean", "practical_max", "seeds"])
        tname = self.config.table.value
        for r in self.rows:
            w.writerow([tname, self.config.n, str(r.channel), r.theoretical, f"{r.mean:.2f}", r.max,
                        len(r.practical)])
        w.writerow([tname, self.config.n, "stored", self.stored_theoretical,
                    f"{np.mean(self.stored_practical):.2f}", max(self.stored_practical),
                    len(self.stored_practical)])
        return buf.getvalue()

    def json(self):
        return json.dumps({
            "table": self.config.table.value,
            "n": self.config.n,
            "seeds": list(self.config.seeds),
            "rows": [{"channel": str(r.channel), "theoretical": r.theoretical,
                      "practical_mean": r.mean, "practical_max": r.max,
                      "practical": list(r.practical)} for r in self.rows],
            "stored": {"theoretical": self.stored_theoretical,
                       "practical_mean": float(np.mean(self.stored_practical)),
                       "practical_max": int(max(self.stored_practical))},
        }, indent=2)

    def console(self):
        head = ["", *(f"p={r.channel.p:g}" for r in self.rows), "stored"]
        theo = ["theoretical", *(str(r.theoretical) for r in self.rows), str(self.stored_theoretical)]
        prac = ["practical mean", *(f"{r.mean:.1f}" for r in self.rows),
                f"{np.mean(self.stored_practical):.1f}"]
        worst = ["practical max", *(str(r.max) for r in self.rows), str(max(self.stored_practical))]
        widths = [max(len(c[i]) for c in (head, theo, prac, worst)) for i in range(len(head))]
        fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        return "\n".join([f"n = {self.config.n}", fmt(head), fmt(theo), fmt(prac), fmt(worst)])


def theoretical_row(n, channels):
    return [symbol_count(n, conditional_entropy(ch)) for ch in channels]


def _code(n, kind):
    return codec.code_for(codec.Mode.ERASURE_PARITY if kind is Kind.ERASURE else codec.Mode.BSC_SYNDROME, n)


def run_seed(n, channels, seed):
    """Minimal prefix per channel for one realization; channels indexed 1..len."""
    kinds = {ch.kind for ch in channels}
    if len(kinds) != 1:
        raise ValueError("a table uses a single channel kind")
    code = _code(n, kinds.pop())
    ens = generate(seed, n, {j: ch for j, ch in enumerate(channels, 1)})
    stream = codes.encode_stream(code, ens.x_k)
    return [codes.min_prefix_length(code, ens.x_k, ens.side_infos[j], ch, stream=stream)
            for j, ch in enumerate(channels, 1)]


def _workers():
    try:
        return max(1, int(os.environ.get("SMRA_THREADS", "1")))
    except ValueError:
        return 1


def run_table_experiment(cfg, workers=None):
    channels = list(cfg.channels)
    theo = theoretical_row(cfg.n, channels)
    workers = _workers() if workers is None else workers
    seeds = sorted(cfg.seeds)
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            per_seed = list(pool.map(run_seed, [cfg.n] * len(seeds), [channels] * len(seeds), seeds))
    else:
        per_seed = [run_seed(cfg.n, channels, s) for s in seeds]
    rows = [Row(ch, t, [res[i] for res in per_seed]) for i, (ch, t) in enumerate(zip(channels, theo))]
    return TableResult(cfg, rows, max(theo), [max(res) for res in per_seed])
