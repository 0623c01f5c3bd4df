"""Compiled vs numpy kernels on table-scale inputs.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the median wall time of each kernel per backend and the speedup.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from smra import _kernels, codes
from smra.model import ChannelSpec
from smra.sources import generate


def timed(fn, repeat):
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.median(out)


def gf2_case(n=4000, p=0.25, seed=0):
    """Dense elimination behind the exact staircase prefix search."""
    code = codes.build_staircase(n)
    ens = generate(seed, n, {1: ChannelSpec.erasure(p)})
    x, y = ens.x_k, ens.side_infos[1]

    def run(backend):
        return lambda: codes.erasure_min_prefix(code, x, y, backend=backend)

    return f"gf2 prefix search n={n} p={p}", run


def bp_case(n=6336, p=0.1, seed=0, frac=2 / 3):
    """Sum-product decoding at one ladder level (low levels run all iterations)."""
    code = codes.build_ldpca(n)
    ens = generate(seed, n, {1: ChannelSpec.bsc(p)})
    x, y = ens.x_k, ens.side_infos[1]
    stream = codes.encode_stream(code, x)
    t = code.rate_ladder[int(len(code.rate_ladder) * frac)]

    def run(backend):
        return lambda: codes.bsc_decode(code, y, p, t, stream[:t], backend=backend)

    return f"bp decode n={n} p={p} t={t}", run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    if _kernels.BACKEND != "cython":
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    backends = ["python"] + (["cython"] if _kernels.BACKEND == "cython" else [])
    print(f"{'kernel':<38}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, run in (gf2_case(), bp_case(), bp_case(frac=0.45)):
        times = [timed(run(b), a.repeat) for b in backends]
        speed = f"{times[0] / times[-1]:>9.1f}x" if len(times) > 1 else ""
        print(f"{name:<38}" + "".join(f"{t * 1e3:>10.1f}ms" for t in times) + speed)


if __name__ == "__main__":
    main()
