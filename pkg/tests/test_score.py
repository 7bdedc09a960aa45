import datetime as dt
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_event
from jumpscat.detect import JumpEvent
from jumpscat.errors import DataError
from jumpscat.panel import NewsFeed
from jumpscat.score import (QuantileConfig, asymmetry, asymmetry_of_profile,
                            average_profiles, classify, d1_score, fit_directions,
                            fit_power_law, match_news, mr_score, power_law_profile,
                            score_events, trend_score)
from jumpscat.synth import BenchmarkSpec, generate_benchmark
from jumpscat.wavelets import WINDOW_LEN, WINDOW_RADIUS, embed

N = WINDOW_RADIUS


def _embeddings(n=120, seed=0, bank=None):
    from jumpscat.wavelets import build_filter_bank, embed_window
    bank = bank or build_filter_bank()
    rng = np.random.default_rng(seed)
    embs, events = [], []
    for i in range(n):
        x = rng.standard_normal(WINDOW_LEN)
        x[N] = 6.0
        embs.append(embed_window(x, 1, bank))
        events.append(make_event(window=x))
    return embs, events


class TestDirections:
    def test_duplication_invariance(self, bank):
        embs, _ = _embeddings(110, seed=1, bank=bank)
        m1 = fit_directions(embs, min_events=100)
        m2 = fit_directions(embs + embs, min_events=100)
        assert np.allclose(m1.weights, m2.weights, atol=1e-12)
        assert np.allclose(m1.mean, m2.mean, atol=1e-15)

    def test_power_iteration_oracle(self, bank):
        embs, _ = _embeddings(150, seed=2, bank=bank)
        model = fit_directions(embs, min_events=100)
        X = np.array([e.imag_second for e in embs])
        Z = (X - X.mean(0)) / X.std(0)
        cov = Z.T @ Z / len(Z)
        v = np.ones(cov.shape[0]) / math.sqrt(cov.shape[0])
        for _ in range(3000):
            v = cov @ v
            v /= np.linalg.norm(v)
        if np.dot(v, model.weights) < 0:
            v = -v
        assert np.max(np.abs(v - model.weights)) < 1e-8

    def test_unit_norm_weights(self, bank):
        embs, _ = _embeddings(120, seed=3, bank=bank)
        model = fit_directions(embs, min_events=100)
        assert np.linalg.norm(model.weights) == pytest.approx(1.0, abs=1e-12)
        assert 0.0 < model.explained_variance <= 1.0

    def test_orientation_follows_asymmetry(self, bank):
        embs, events = _embeddings(120, seed=4, bank=bank)
        asym = [asymmetry(e) for e in events]
        model = fit_directions(embs, asymmetries=asym, min_events=100)
        d1 = [d1_score(e, model) for e in embs]
        assert np.corrcoef(d1, asym)[0, 1] > 0

    def test_too_few_embeddings(self, bank):
        embs, _ = _embeddings(20, seed=5, bank=bank)
        with pytest.raises(DataError):
            fit_directions(embs, min_events=100)

    def test_full_block_mode(self, bank):
        embs, _ = _embeddings(120, seed=6, bank=bank)
        model = fit_directions(embs, block="full", min_events=100)
        assert model.weights.shape == (42,)
        assert np.isfinite(d1_score(embs[0], model))

    def test_even_window_scores_standardized_origin(self, bank):
        from jumpscat.wavelets import embed_window
        embs, _ = _embeddings(120, seed=7, bank=bank)
        model = fit_directions(embs, min_events=100)
        rng = np.random.default_rng(8)
        half = rng.standard_normal(N + 1)
        half[0] = 6.0
        even = np.concatenate([half[-1:0:-1], half])
        emb = embed_window(even, 1, bank)
        expected = model.orientation * ((np.zeros(15) - model.mean) / model.scale) @ model.weights
        assert d1_score(emb, model) == pytest.approx(expected, abs=1e-7)

    def test_time_reversal_reflects_score(self, bank):
        from jumpscat.wavelets import embed_window
        embs, _ = _embeddings(120, seed=9, bank=bank)
        model = fit_directions(embs, min_events=100)
        rng = np.random.default_rng(10)
        x = rng.standard_normal(WINDOW_LEN)
        x[N] = 6.0
        d1 = d1_score(embed_window(x, 1, bank), model)
        d1_rev = d1_score(embed_window(x[::-1], 1, bank), model)
        origin = model.orientation * ((np.zeros(15) - model.mean) / model.scale) @ model.weights
        assert d1_rev == pytest.approx(2 * origin - d1, abs=1e-7)


class TestHandcraftedScores:
    def test_mr_filter_itself(self, bank):
        e = make_event(window=bank.mr_filter.copy())
        e.sign = 1
        assert mr_score(e, bank) == pytest.approx(1.0, abs=1e-12)
        assert trend_score(e, bank) == pytest.approx(0.0, abs=1e-12)

    def test_even_window_zero_mr(self, bank):
        rng = np.random.default_rng(11)
        half = rng.standard_normal(N + 1)
        x = np.concatenate([half[-1:0:-1], half])
        e = make_event(window=x)
        assert mr_score(e, bank) == pytest.approx(0.0, abs=1e-12)

    def test_block_reversal_example(self, bank):
        # +1 for t in [-5,-1], -1 for t in [1,5]: mean-reverting, trend-free
        x = np.zeros(WINDOW_LEN)
        x[N - 5:N] = 1.0
        x[N + 1:N + 6] = -1.0
        e = make_event(window=x)
        e.sign = 1
        assert mr_score(e, bank) > 0
        assert trend_score(e, bank) == pytest.approx(0.0, abs=1e-14)

    def test_sign_flip_invariance(self, bank):
        rng = np.random.default_rng(12)
        x = rng.standard_normal(WINDOW_LEN)
        x[N] = 6.0
        a = make_event(window=x, sign=1)
        b = make_event(window=-x, sign=-1)
        assert mr_score(a, bank) == mr_score(b, bank)
        assert trend_score(a, bank) == trend_score(b, bank)

    def test_positive_rescaling_invariance(self, bank):
        rng = np.random.default_rng(13)
        x = rng.standard_normal(WINDOW_LEN)
        x[N] = 6.0
        a = make_event(window=x)
        b = make_event(window=37.5 * x)
        assert mr_score(a, bank) == pytest.approx(mr_score(b, bank), abs=1e-12)


class TestAsymmetry:
    def test_hand_example(self):
        # pre side [0, 1], post side [0, 3] -> A_<=1, A_>=3, A = 0.5
        x = np.zeros(WINDOW_LEN)
        x[N - 2], x[N - 1] = 0.0, 1.0
        x[N + 1], x[N + 2] = 0.0, 3.0
        x[N] = 5.0
        assert asymmetry_of_profile(x) == pytest.approx(0.5, abs=1e-15)

    def test_mirror_symmetric_zero(self):
        rng = np.random.default_rng(14)
        half = rng.standard_normal(N + 1)
        x = np.concatenate([half[-1:0:-1], half])
        assert asymmetry_of_profile(x) == 0.0

    def test_reversal_antisymmetry_exact(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            x = rng.standard_normal(WINDOW_LEN)
            assert asymmetry_of_profile(x[::-1]) == -asymmetry_of_profile(x)

    def test_constant_window_zero(self):
        assert asymmetry_of_profile(np.ones(WINDOW_LEN)) == 0.0

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_bounded(self, seed):
        x = np.random.default_rng(seed).standard_normal(WINDOW_LEN) * 3
        assert abs(asymmetry_of_profile(x)) <= 1.0


class TestPowerLawFit:
    def test_noiseless_recovery_appendix_point(self):
        t = np.arange(-N, N + 1, dtype=float)
        truth = (1.0, 1.0, 0.7, 0.7, -0.5, 0.5)
        fit = fit_power_law(power_law_profile(t, *truth))
        assert fit.converged and fit.accepted
        rel = np.abs(np.array(fit.as_tuple()) - truth) / np.abs(truth)
        assert np.max(rel) < 0.05

    def test_constant_profile_degenerate(self):
        fit = fit_power_law(np.full(WINDOW_LEN, 0.37))
        assert fit.d == pytest.approx(0.37, abs=1e-6)
        assert fit.n_pre < 1e-6 and fit.n_post < 1e-6

    def test_post_tail_mass_decreases_with_exponent(self):
        t = np.arange(-N, N + 1, dtype=float)
        masses = []
        for p_post in (0.5, 1.0):
            y = power_law_profile(t, 1.0, 1.0, 0.7, p_post, -0.5, 0.5)
            fit = fit_power_law(y)
            post = power_law_profile(t, 0.0, fit.n_post, 0.7, fit.p_post,
                                     fit.t_c, 0.0)[N + 3:]
            masses.append(post.sum())
        assert masses[1] < masses[0]

    def test_accept_flag_tracks_residual(self):
        rng = np.random.default_rng(16)
        y = np.abs(rng.standard_normal(WINDOW_LEN)) * 4 + 0.1
        fit = fit_power_law(y, max_rel_residual=1e-9)
        assert not fit.accepted


class TestNews:
    def _feed(self, ticker="AAA", minute=700, day=None):
        day = day or dt.date(2021, 1, 4)
        return NewsFeed(events=((day, minute, ticker),))

    def test_within_three_minutes(self):
        e = make_event(ticker="AAA", minute=700)
        match_news([e], self._feed(minute=702))
        assert e.news_related is True

    def test_beyond_three_minutes(self):
        e = make_event(ticker="AAA", minute=700)
        match_news([e], self._feed(minute=704))
        assert e.news_related is False

    def test_exactly_three_minutes_inclusive(self):
        e = make_event(ticker="AAA", minute=700)
        match_news([e], self._feed(minute=703))
        assert e.news_related is True

    def test_other_ticker_no_match(self):
        e = make_event(ticker="BBB", minute=700)
        match_news([e], self._feed(ticker="AAA", minute=700))
        assert e.news_related is False

    def test_market_wide_matches_everyone(self):
        es = [make_event(ticker=t, minute=700) for t in ("AAA", "BBB", "CCC")]
        match_news(es, self._feed(ticker=None, minute=700))
        assert all(e.news_related for e in es)

    def test_other_day_no_match(self):
        e = make_event(ticker="AAA", minute=700, day=dt.date(2021, 1, 5))
        match_news([e], self._feed(minute=700))
        assert e.news_related is False


def _scored_events(n=200, seed=0):
    rng = np.random.default_rng(seed)
    events = []
    for i in range(n):
        e = make_event(ticker=f"T{i}", minute=600 + i % 300)
        e.d1, e.d2, e.d3 = rng.standard_normal(3)
        events.append(e)
    return events


class _StubModel:
    pass


class TestClassify:
    def _model(self, bank):
        embs, events = _embeddings(110, seed=20, bank=bank)
        return fit_directions(embs, min_events=100)

    def test_requires_model(self):
        with pytest.raises(DataError):
            classify(_scored_events(50), None)

    def test_max_event_is_exogenous(self, bank):
        events = _scored_events(300, seed=21)
        model = self._model(bank)
        classify(events, model)
        top = max(events, key=lambda e: e.d1)
        assert top.d1_bin == 4
        assert top.class_label.startswith("exogenous")

    def test_majority_positive_d2_shifts_median_threshold(self, bank):
        events = _scored_events(1000, seed=22)
        rng = np.random.default_rng(23)
        for e in events:  # plant 60% positive mean-reversion scores
            e.d2 = abs(e.d2) if rng.random() < 0.6 else -abs(e.d2)
        model = self._model(bank)
        _, thr = classify(events, model)
        # zero sits below the 0.5-quantile boundary; the 0.1 boundary is negative
        assert thr.d2[1] > 0
        assert thr.d2[0] < 0

    def test_permutation_invariance(self, bank):
        events = _scored_events(400, seed=24)
        model = self._model(bank)
        classify(events, model)
        bins = {e.ticker: (e.d1_bin, e.d2_bin, e.d3_bin, e.grid_mr, e.grid_tr)
                for e in events}
        rng = np.random.default_rng(25)
        shuffled = list(events)
        rng.shuffle(shuffled)
        classify(shuffled, model)
        for e in shuffled:
            assert bins[e.ticker] == (e.d1_bin, e.d2_bin, e.d3_bin, e.grid_mr, e.grid_tr)

    def test_monotone_transform_invariance(self, bank):
        events = _scored_events(350, seed=26)
        model = self._model(bank)
        classify(events, model)
        bins = [(e.d1_bin, e.d2_bin, e.d3_bin) for e in events]
        for e in events:  # strictly increasing transforms of each score
            e.d1 = math.expm1(0.7 * e.d1)
            e.d2 = e.d2 ** 3 + 2.0 * e.d2
            e.d3 = math.atan(e.d3)
        classify(events, model)
        assert bins == [(e.d1_bin, e.d2_bin, e.d3_bin) for e in events]

    def test_bin_names(self, bank):
        events = _scored_events(500, seed=27)
        model = self._model(bank)
        classify(events, model)
        labels = {e.d1_bin for e in events}
        assert labels == {0, 1, 2, 3, 4}
        for e in events:
            if e.d2_bin == 3:
                assert "post-jump-mean-reverting" in e.class_label
            if e.d3_bin == 0:
                assert "trend-anti-aligned" in e.class_label


class TestProfiles:
    def test_single_event_bin(self, bank):
        events = _scored_events(200, seed=28)
        model = TestClassify()._model(bank)
        classify(events, model)
        target = [e for e in events if e.d1_bin == 4][0]
        solo = [e for e in events if e.d1_bin != 4 or e is target]
        rows = average_profiles(solo, "d1")
        row4 = [r for r in rows if r.bin_id == 4][0]
        assert row4.count == 1
        assert np.array_equal(row4.mean_abs, np.abs(target.window))
        assert np.array_equal(row4.mean_aligned, target.aligned_window)

    def test_plus_minus_pair(self, bank):
        x = np.random.default_rng(29).standard_normal(WINDOW_LEN)
        x[N] = 6.0
        a = make_event(window=x, sign=1)
        b = make_event(window=-x, sign=-1)
        for e, (i, j) in zip((a, b), [(0, 0), (0, 0)]):
            e.d1_bin = e.d2_bin = e.d3_bin = 0
            e.grid_mr = e.grid_tr = (i, j)
        rows = average_profiles([a, b], "d1")
        row0 = rows[0]
        assert row0.count == 2
        assert np.allclose(row0.mean_abs, np.abs(x), atol=1e-15)
        assert np.allclose(row0.mean_aligned, a.aligned_window, atol=1e-15)

    def test_empty_bin_reported(self, bank):
        events = _scored_events(120, seed=30)
        model = TestClassify()._model(bank)
        classify(events, model)
        for e in events:
            e.d1_bin = 2  # collapse everything into one bin
        rows = average_profiles(events, "d1")
        empties = [r for r in rows if r.count == 0]
        assert len(empties) == 4
        assert all(r.mean_abs is None for r in empties)


class TestScoreEvents:
    def test_fills_all_slots(self, bank):
        events = generate_benchmark(BenchmarkSpec(n_series=110, seed=31))
        for e in events:
            e.embedding = embed(e, bank)
        model = fit_directions([e.embedding for e in events],
                               asymmetries=[asymmetry(e) for e in events],
                               min_events=100)
        score_events(events, model, bank)
        for e in events:
            assert all(v is not None for v in (e.d1, e.d2, e.d3, e.a_jump))

    def test_requires_embedding(self, bank):
        e = make_event()
        with pytest.raises(DataError):
            score_events([e], TestClassify()._model(bank), bank)
