import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binom

from conftest import make_event
from jumpscat.cojump import (CoJump, average_normalized_profile, correlation_rho,
                             fit_tail_exponent, group, indicators, quadrant,
                             sign_alignment, size_distribution)
from jumpscat.errors import DataError, TailRangeError
from jumpscat.wavelets import WINDOW_LEN, WINDOW_RADIUS


def _events_at(minute, tickers, day=None, d1=None, d3=None, signs=None):
    day = day or dt.date(2021, 1, 4)
    events = []
    for k, t in enumerate(tickers):
        e = make_event(ticker=t, minute=minute, day=day, seed=k)
        if d1 is not None:
            e.d1 = d1[k]
        if d3 is not None:
            e.d3 = d3[k]
        if signs is not None:
            e.sign = signs[k]
            e.window[WINDOW_RADIUS] = 6.0 * signs[k]
        events.append(e)
    return events


def _cojump(d3=None, d1=None, signs=None, minute=700):
    n = len(d3 or d1 or signs)
    events = _events_at(minute, [f"T{k}" for k in range(n)], d1=d1, d3=d3,
                        signs=signs)
    return CoJump(cojump_id=0, day=events[0].day, minute_of_day=minute,
                  members=events)


class TestGroup:
    def test_same_minute_three_tickers(self):
        events = _events_at(697, ["A", "B", "C"])
        cjs, drops = group(events)
        assert len(cjs) == 1 and cjs[0].size == 3
        assert drops == {"dropped_groups": 0, "dropped_jumps": 0}
        assert all(e.cojump_id == 0 for e in events)

    def test_distinct_minutes_all_singles(self):
        events = [make_event(ticker=t, minute=600 + 10 * k)
                  for k, t in enumerate("ABC")]
        cjs, _ = group(events)
        assert [c.size for c in cjs] == [1, 1, 1]

    def test_oversize_group_dropped_and_counted(self):
        events = _events_at(700, [f"T{k}" for k in range(251)])
        events += _events_at(800, ["X", "Y"])
        cjs, drops = group(events, max_cojump_size=250)
        assert [c.size for c in cjs] == [2]
        assert drops == {"dropped_groups": 1, "dropped_jumps": 251}

    def test_partition_property(self):
        rng = np.random.default_rng(1)
        events = [make_event(ticker=f"T{k}", minute=int(rng.integers(600, 650)))
                  for k in range(120)]
        cjs, _ = group(events)
        grouped = [e for c in cjs for e in c.members]
        assert sorted(id(e) for e in grouped) == sorted(id(e) for e in events)


class TestIndicators:
    def test_mean_min_max_arithmetic(self):
        cj = _cojump(d1=[-1.0, 0.0, 3.0])
        indicators([cj])
        assert cj.mean_d1 == pytest.approx(2 / 3)
        assert cj.min_d1 == -1.0 and cj.max_d1 == 3.0

    def test_identical_spread_sigma(self):
        # five size-3 co-jumps, all with member scores {0, 1, 2} -> spread 1
        cjs = [_cojump(d1=[0.0, 1.0, 2.0], minute=600 + k) for k in range(5)]
        indicators(cjs)
        expected = np.std([0.0, 1.0, 2.0], ddof=1)
        for cj in cjs:
            assert cj.sigma_size == pytest.approx(expected)
            assert cj.mean_norm == pytest.approx(1.0 / expected)

    def test_sigma_brute_force_oracle(self):
        rng = np.random.default_rng(2)
        cjs = []
        minute = 600
        for _ in range(60):
            size = int(rng.integers(3, 8))
            cjs.append(_cojump(d1=list(rng.standard_normal(size)), minute=minute))
            minute += 1
        indicators(cjs, min_pool=5)
        # brute-force recomputation with the same pooling rule
        spreads = {}
        for cj in cjs:
            spreads.setdefault(cj.size, []).append(
                np.std([e.d1 for e in cj.members], ddof=1))
        sizes = sorted(spreads)
        pools, cur, cnt = [], [], 0
        for s in sizes:
            cur.append(s)
            cnt += len(spreads[s])
            if cnt >= 5:
                pools.append(cur)
                cur, cnt = [], 0
        if cur:
            pools[-1].extend(cur)
        expected = {}
        for pool in pools:
            vals = [v for s in pool for v in spreads[s]]
            for s in pool:
                expected[s] = np.mean(vals)
        for cj in cjs:
            assert cj.sigma_size == pytest.approx(expected[cj.size], rel=1e-12)

    def test_size_two_excluded_from_quadrants(self):
        cjs = [_cojump(d1=[0.0, 1.0], minute=600)]
        cjs += [_cojump(d1=[0.0, 1.0, 2.0], minute=601 + k) for k in range(5)]
        indicators(cjs)
        assert cjs[0].quadrant is None and cjs[0].sigma_size is None
        assert all(c.quadrant is not None for c in cjs[1:])


class TestQuadrant:
    def _stub(self, mean, mn, sigma):
        cj = _cojump(d1=[0.0, 0.0, 0.0])
        cj.mean_d1, cj.min_d1, cj.sigma_size = mean, mn, sigma
        return cj

    def test_ll_when_spread_significant(self):
        # normalized (mean, min) = (-2, -3) with sigma such that spread = 3 sigma
        sigma = 1.0 / 3.0
        assert quadrant(self._stub(-2 * sigma, -3 * sigma, sigma)) == "LL"

    def test_exact_one_sigma_is_gray(self):
        sigma = 1.0
        assert quadrant(self._stub(2.0, 1.0, sigma)) == "gray"

    def test_lr(self):
        assert quadrant(self._stub(2.0, -2.0, 1.0)) == "LR"

    def test_ur(self):
        assert quadrant(self._stub(3.0, 1.0, 1.0)) == "UR"

    @given(st.floats(-5, 5), st.floats(0, 5), st.floats(0.01, 3))
    def test_exhaustive_and_exclusive(self, mean, drop, sigma):
        stub = self._stub(mean, mean - drop, sigma)
        q = quadrant(stub)
        assert q in {"LL", "LR", "UR", "gray"}
        if stub.mean_d1 - stub.min_d1 <= sigma:
            assert q == "gray"
        elif stub.mean_d1 < 0:
            assert q == "LL"


class TestSizeDistribution:
    def test_histogram(self):
        dist = size_distribution(np.array([2, 2, 3]))
        assert dist.sizes.tolist() == [2, 3]
        assert dist.counts.tolist() == [2, 1]
        assert dist.ccdf.tolist() == [1.0, pytest.approx(1 / 3)]

    def test_ccdf_monotone(self):
        rng = np.random.default_rng(3)
        dist = size_distribution(rng.integers(1, 50, size=500))
        assert (np.diff(dist.ccdf) <= 0).all()

    def test_endogenous_min_filter(self):
        keep = _cojump(d1=[-3.0, 0.5, 1.0], minute=600)    # min<0, spread>sigma
        drop = _cojump(d1=[0.5, 1.0, 1.5], minute=601)     # min>0
        cjs = [keep, drop] + [_cojump(d1=[-3.0, 0.0, 3.0], minute=602 + k)
                              for k in range(4)]
        indicators(cjs)
        dist = size_distribution(cjs, restrict="endogenous_min")
        assert dist.n_total == 5  # all but the positive-minimum one


class TestTailFit:
    def test_zipf_sample(self):
        rng = np.random.default_rng(4)
        from scipy.stats import zipf
        sizes = zipf(2.0).rvs(size=100_000, random_state=rng)
        fit = fit_tail_exponent(sizes, (10, 100))
        assert fit.tau == pytest.approx(1.0, abs=0.1)
        assert fit.tau_mle == pytest.approx(1.0, abs=0.1)
        assert fit.n_obs >= 50

    def test_stderr_shrinks_with_sample_size(self):
        from scipy.stats import zipf
        fits = []
        for n in (20_000, 80_000):
            sizes = zipf(2.0).rvs(size=n, random_state=np.random.default_rng(5))
            fits.append(fit_tail_exponent(sizes, (10, 100)))
        ratio = fits[1].stderr_mle / fits[0].stderr_mle
        assert ratio == pytest.approx(0.5, abs=0.15)  # ~ n^{-1/2}

    def test_too_few_observations(self):
        with pytest.raises(TailRangeError):
            fit_tail_exponent(np.array([12, 14, 20]), (10, 100))

    def test_bad_range(self):
        with pytest.raises(TailRangeError):
            fit_tail_exponent(np.arange(1, 1000), (100, 10))


class TestRho:
    def test_all_equal_gives_one(self):
        cj = _cojump(d3=[0.7, 0.7, 0.7, 0.7])
        assert correlation_rho(cj) == pytest.approx(1.0, abs=1e-12)

    def test_zero_sum_gives_minus_one_over_s_minus_one(self):
        cj = _cojump(d3=[1.0, -0.5, -0.5])
        assert correlation_rho(cj) == pytest.approx(-0.5, abs=1e-12)

    def test_single_nonzero_gives_zero(self):
        cj = _cojump(d3=[0.0, 0.0, 1.3, 0.0])
        assert correlation_rho(cj) == pytest.approx(0.0, abs=1e-12)

    def test_all_zero_flagged(self):
        cj = _cojump(d3=[0.0, 0.0, 0.0])
        assert correlation_rho(cj) is None

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=30))
    def test_bounds(self, d3):
        if sum(v * v for v in d3) == 0.0:  # includes subnormal underflow
            return
        cj = _cojump(d3=d3)
        rho = correlation_rho(cj)
        s = len(d3)
        assert -1.0 / (s - 1) - 1e-12 <= rho <= 1.0 + 1e-12

    def test_size_one_rejected(self):
        with pytest.raises(DataError):
            correlation_rho(_cojump(d3=[1.0]))


class TestAverageProfile:
    def test_two_identical_members(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(WINDOW_LEN)
        x[WINDOW_RADIUS] = 6.0
        a = make_event(ticker="A", window=x.copy())
        b = make_event(ticker="B", window=x.copy())
        cj = CoJump(cojump_id=0, day=a.day, minute_of_day=700, members=[a, b])
        profile, used = average_normalized_profile(cj)
        assert used == 2
        rms = np.sqrt(np.mean(x ** 2))
        assert np.allclose(profile, x / rms, atol=1e-14)

    def test_cancellation_off_center(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(WINDOW_LEN)
        x[WINDOW_RADIUS] = 6.0
        y = -x.copy()
        y[WINDOW_RADIUS] = 6.0
        a = make_event(ticker="A", window=x)
        b = make_event(ticker="B", window=y)
        cj = CoJump(cojump_id=0, day=a.day, minute_of_day=700, members=[a, b])
        profile, _ = average_normalized_profile(cj)
        off = np.delete(profile, WINDOW_RADIUS)
        assert np.max(np.abs(off)) < 1e-2  # only the slightly different rms leaks
        assert profile[WINDOW_RADIUS] > 1.0

    def test_planted_common_profile(self):
        rng = np.random.default_rng(8)
        common = np.sin(np.linspace(-4, 4, WINDOW_LEN)) * 2.0
        common[WINDOW_RADIUS] = 8.0
        members = []
        for k in range(12):
            w = common + 0.3 * rng.standard_normal(WINDOW_LEN)
            members.append(make_event(ticker=f"T{k}", window=w))
        cj = CoJump(cojump_id=0, day=members[0].day, minute_of_day=700,
                    members=members)
        profile, _ = average_normalized_profile(cj)
        corr = np.corrcoef(profile, common)[0, 1]
        assert corr > 0.95

    def test_zero_rms_member_skipped(self):
        a = make_event(ticker="A", window=np.zeros(WINDOW_LEN))
        b = make_event(ticker="B")
        cj = CoJump(cojump_id=0, day=a.day, minute_of_day=700, members=[a, b])
        with pytest.warns(UserWarning, match="zero-RMS"):
            profile, used = average_normalized_profile(cj)
        assert used == 1


class TestSignAlignment:
    def test_fully_aligned(self):
        cj = _cojump(signs=[1, 1, 1, 1])
        assert sign_alignment([cj]) == {4: 1.0}

    def test_size_two_opposite(self):
        cj = _cojump(signs=[1, -1])
        assert sign_alignment([cj]) == {2: 0.0}

    def test_random_signs_match_folded_binomial(self):
        rng = np.random.default_rng(9)
        S, n_cj = 64, 4000
        cjs = []
        for k in range(n_cj):
            signs = rng.choice([-1, 1], size=S).tolist()
            cjs.append(_cojump(signs=signs, minute=600 + k % 300))
        got = sign_alignment(cjs)[S]
        # exact folded-binomial oracle: E|2B - S| / S with B ~ Bin(S, 1/2)
        b = np.arange(S + 1)
        exact = float(np.sum(binom(S, 0.5).pmf(b) * np.abs(2 * b - S)) / S)
        assert got == pytest.approx(exact, abs=0.01)
        assert exact == pytest.approx(np.sqrt(2 / (np.pi * S)), rel=0.05)
