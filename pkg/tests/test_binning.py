import io
import math

import numpy as np
import pytest

from smra.binning import (
    CSV_COLUMNS, atypicality_floor, build_binning, monte_carlo_error, typicality_decode,
    wilson_interval, write_csv,
)
from smra.codes import Status
from smra.entropy_bounds import binary_entropy
from smra.errors import DomainError, UnsupportedChannelError
from smra.model import ChannelSpec as C

H02 = binary_entropy(0.2)


def bits_of(x, n):
    return ((x >> np.arange(n)) & 1).astype(np.uint8)


class TestBuild:
    def test_rate_one_single_stage(self):
        b = build_binning(8, [1.0], seed=3)
        assert b.stage_bits == (8,)
        keys = b.keys(1)
        counts = np.bincount(keys, minlength=256)
        assert counts.sum() == 256
        # exact collision count of this table equals pairs sharing a bin
        collisions = int(sum(c * (c - 1) // 2 for c in counts))
        assert collisions == int(sum(math.comb(int(c), 2) for c in counts))

    def test_zero_rate_single_bin(self):
        b = build_binning(6, [0.0])
        assert np.all(b.keys(1) == 0)

    def test_nesting(self):
        b = build_binning(10, [0.3, 0.4, 0.2], seed=1)
        for x in range(0, 1024, 37):
            assert b.indices(x, 1) == b.indices(x)[:1]
            assert b.indices(x, 2) == b.indices(x)[:2]
        k1, k2 = b.keys(1), b.keys(2)
        assert np.array_equal(k2 >> b.stage_bits[1], k1)

    def test_caps(self):
        with pytest.raises(DomainError):
            build_binning(17, [0.5])
        with pytest.raises(DomainError):
            build_binning(16, [1.0, 1.0])
        with pytest.raises(DomainError):
            build_binning(8, [])


class TestDecode:
    def test_huge_eps_full_rate(self):
        b = build_binning(6, [1.0, 1.0])
        # every sequence in its own bin up to collisions; check one that is alone
        keys = b.keys(2)
        uniq = [x for x in range(64) if np.sum(keys == keys[x]) == 1]
        x = uniq[0]
        y = bits_of(x, 6)
        out = typicality_decode(b, b.indices(x), y, C.bsc(0.1), eps=100.0)
        assert out.status is Status.RECOVERED and np.array_equal(out.x_hat, bits_of(x, 6))

    def test_more_stages_shrink_candidates(self):
        b = build_binning(10, [0.3, 0.4], seed=5)
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = int(rng.integers(0, 1024))
            y = bits_of(x, 10) ^ (rng.random(10) < 0.2).astype(np.uint8)
            one = typicality_decode(b, b.indices(x, 1), y, C.bsc(0.2))
            two = typicality_decode(b, b.indices(x, 2), y, C.bsc(0.2))
            assert two.stats["survivors"] <= one.stats["survivors"]
            if one.ok:
                assert two.ok

    def test_erasure_channel(self):
        b = build_binning(8, [0.5], seed=2)
        x = 0b10110010
        y = bits_of(x, 8).astype(np.uint8)
        y[[0, 3]] = 2
        out = typicality_decode(b, b.indices(x), y, C.erasure(0.25), eps=0.05)
        assert out.stats["survivors"] >= 1

    def test_gaussian_rejected(self):
        b = build_binning(4, [0.5])
        with pytest.raises(UnsupportedChannelError):
            typicality_decode(b, (0,), np.zeros(4), C.gaussian(1, 0.5))


class TestMonteCarlo:
    def test_below_entropy_mostly_fails(self):
        est = monte_carlo_error(12, [H02 - 0.2], C.bsc(0.2), 0.1, 2000, seed=1)
        assert est.p_err > 0.5
        assert est.ci_lo <= est.p_err <= est.ci_hi

    def test_high_rate_reaches_atypicality_floor(self):
        floor = atypicality_floor(12, C.bsc(0.2))
        est = monte_carlo_error(12, [1.6], C.bsc(0.2), 0.1, 4000, seed=2)
        assert est.ci_lo - 0.01 <= floor <= est.ci_hi + 0.01

    def test_floor_exact(self):
        # open window keeps distance 2 only; distance 3 sits exactly on the boundary
        p2 = math.comb(12, 2) * 0.2 ** 2 * 0.8 ** 10
        p3 = math.comb(12, 3) * 0.2 ** 3 * 0.8 ** 9
        assert atypicality_floor(12, C.bsc(0.2)) == pytest.approx(1 - p2, abs=1e-12)
        assert atypicality_floor(12, C.bsc(0.2), closed=True) == pytest.approx(1 - p2 - p3, abs=1e-12)

    def test_rate_sweep_nonincreasing(self):
        ests = [monte_carlo_error(12, [r], C.bsc(0.2), 0.1, 2000, seed=3)
                for r in (0.4, 0.6, 0.8, 1.0, 1.2)]
        for a, b in zip(ests, ests[1:]):
            assert b.ci_lo <= a.ci_hi

    @pytest.mark.parametrize("n", [8, 12, 16])
    def test_error_never_below_floor(self, n):
        floor = atypicality_floor(n, C.bsc(0.2), 0.2, closed=True)
        est = monte_carlo_error(n, [H02 + 0.3], C.bsc(0.2), 0.2, 1000, seed=4, closed=True)
        assert est.ci_hi >= floor
        assert est.atypical / est.trials == pytest.approx(floor, abs=0.06)

    def test_deterministic_channel(self):
        est = monte_carlo_error(10, [0.2], C.bsc(0.0), 0.1, 500, seed=5)
        assert est.errors == 0

    def test_multi_stage_equals_sum(self):
        est = monte_carlo_error(10, [0.5, 0.5], C.bsc(0.1), 0.1, 300, seed=6)
        assert est.sum_rate == 1.0

    def test_reproducible(self):
        a = monte_carlo_error(10, [0.7], C.bsc(0.2), 0.1, 500, seed=7)
        b = monte_carlo_error(10, [0.7], C.bsc(0.2), 0.1, 500, seed=7)
        assert a == b


def test_wilson():
    lo, hi = wilson_interval(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-12) and 0.03 < hi < 0.04
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and hi - 0.5 == pytest.approx(0.5 - lo)


def test_csv():
    ests = [monte_carlo_error(8, [0.5], C.bsc(0.1), 0.1, 50, seed=0)]
    buf = io.StringIO()
    write_csv(ests, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1].startswith("8,0.5,0.1,50,")
