"""Jump-score computation, extreme-value detection, cluster pruning, window extraction.

The jump score is x(t) = r(t) / (f(t) * sigma(t)): the raw 1-minute return
deseasonalized by the intraday periodicity f (the "U-shape") and a local
volatility estimate sigma.  Deseasonalization is per-ticker independent;
everything downstream of the immutable ScorePanel is pure and parallelizable.
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import DataError, DegenerateVolatilityError
from .wavelets import WINDOW_LEN, WINDOW_RADIUS

# For N(0, s): E|r| = s*sqrt(2/pi), median|r| = 0.6745 s.
_ABS_TO_SIGMA = np.sqrt(np.pi / 2.0)
_MEDIAN_TO_MEAN_ABS = np.sqrt(2.0 / np.pi) / norm.ppf(0.75)


@dataclass
class DetectConfig:
    threshold: float = 4.0          # |x| cut in the fixed mode
    threshold_mode: str = "fixed"   # "fixed" | "gumbel"
    gumbel_alpha: float = 0.01      # per-(ticker, day) max-test significance
    prune_window: int = 60          # minutes; replicas after an initial jump
    halflife_days: float = 5.0      # EWMA halflife of the volatility tracker
    winsor_k: float = 4.0           # clip |u| at k sigma before updating
    init_days: int = 10             # burn-in window for the robust init
    min_days: int = 10              # minimum active days required
    min_slot_obs: int = 5           # observations needed per minute-of-day slot


@dataclass(frozen=True)
class ScorePanel:
    """Jump scores x(t) plus the estimated periodicity and local volatility."""

    panel: "ReturnPanel"
    scores: np.ndarray       # (n_tickers, M) float64, NaN where undefined
    periodicity: dict        # minute_of_day -> f value (mean 1 over slots)
    local_vol: np.ndarray    # (n_tickers, M) sigma(t) used at each minute

    @property
    def in_session(self):
        return self.panel.in_session

    @property
    def active_columns(self):
        return self.panel.active_columns


@dataclass
class JumpPoint:
    """One detected exceedance, before window extraction."""

    ticker: str
    day: dt.date
    minute_of_day: int
    col: int
    score: float


@dataclass
class JumpEvent:
    """A detected jump with its 119-point score window and derived slots.

    `window` holds x(t) for t = -59..+59 grid minutes around the jump; the
    center value is the detected score.  Score/label slots start empty and
    are filled by the scoring and co-jump stages.
    """

    ticker: str
    day: dt.date
    minute_of_day: int
    sign: int
    window: np.ndarray
    col: int | None = None
    embedding: object = None
    d1: float | None = None
    d2: float | None = None
    d3: float | None = None
    a_jump: float | None = None
    powerlaw: object = None
    news_related: bool | None = None
    d1_bin: int | None = None
    d2_bin: int | None = None
    d3_bin: int | None = None
    class_label: str | None = None
    grid_mr: tuple | None = None
    grid_tr: tuple | None = None
    cojump_id: int | None = None
    planted: dict | None = None   # synthetic provenance, ignored by the pipeline

    def __post_init__(self):
        self.window = np.asarray(self.window, dtype=float)
        if self.window.shape != (WINDOW_LEN,):
            raise DataError(f"jump window must have {WINDOW_LEN} points")

    @property
    def score(self):
        return float(self.window[WINDOW_RADIUS])

    @property
    def aligned_window(self):
        """x_bar(t) = sign(x(0)) * x(t); the center is always >= 0."""
        return self.sign * self.window

    @property
    def timestamp(self):
        return self.day, self.minute_of_day


def deseasonalize(panel, cfg=None):
    """Estimate f and sigma, and return the ScorePanel of x = r / (f * sigma).

    f(t): median of |r| over all (ticker, active minute) pairs per
    minute-of-day slot, normalized to mean 1 across slots.

    sigma(t): per ticker, a causal exponentially weighted mean absolute
    deviation of r/f, winsorized at `winsor_k` sigma so jumps do not inflate
    their own scale, rescaled so x has unit variance under Gaussian residuals.
    The tracker is initialized from a robust median fit over the first
    `init_days` active days.
    """
    cfg = cfg or DetectConfig()
    n_days = len(panel.dates)
    if n_days < cfg.min_days:
        raise DataError(f"need >= {cfg.min_days} trading days, have {n_days}")

    # Estimation runs on all days with data: the robust estimators tolerate
    # shock days, and the exclusion mask gates detection, not estimation.
    returns = panel.returns
    mods = panel.minute_of_day

    # --- intraday periodicity -------------------------------------------------
    f_by_slot = {}
    for slot in np.unique(mods):
        vals = np.abs(returns[:, mods == slot])
        vals = vals[np.isfinite(vals)]
        if vals.size >= cfg.min_slot_obs:
            f_by_slot[slot] = float(np.median(vals))
    if not f_by_slot:
        raise DataError("no minute-of-day slot has enough observations")
    level = np.mean(list(f_by_slot.values()))
    if level <= 0.0 or any(v <= 0.0 for v in f_by_slot.values()):
        raise DegenerateVolatilityError("periodicity estimate is not positive")
    f_by_slot = {slot: v / level for slot, v in f_by_slot.items()}
    f_cols = np.array([f_by_slot.get(m, np.nan) for m in mods])

    # --- per-ticker volatility tracker ----------------------------------------
    lam = 1.0 - 0.5 ** (1.0 / (cfg.halflife_days * panel.minutes_per_day()))
    scores = np.full_like(returns, np.nan)
    local_vol = np.full_like(returns, np.nan)
    in_burn_in = panel.day_index < cfg.init_days

    for i, ticker in enumerate(panel.tickers):
        u = returns[i] / f_cols
        valid = np.isfinite(u)
        if not valid.any():
            warnings.warn(f"ticker {ticker}: no usable returns, skipped", stacklevel=2)
            continue
        init_sel = valid & in_burn_in
        init_sel = init_sel if init_sel.any() else valid
        m = float(np.median(np.abs(u[init_sel]))) * _MEDIAN_TO_MEAN_ABS
        if m == 0.0:
            raise DegenerateVolatilityError(f"ticker {ticker}: zero dispersion in burn-in")
        for c in np.where(valid)[0]:
            sigma = m * _ABS_TO_SIGMA
            local_vol[i, c] = sigma
            scores[i, c] = u[c] / sigma
            w = min(abs(u[c]), cfg.winsor_k * sigma)
            m += lam * (w - m)

    return ScorePanel(panel=panel, scores=scores, periodicity=f_by_slot,
                      local_vol=local_vol)


def gumbel_threshold(n, alpha):
    """|x| threshold for the day-maximum test at significance alpha.

    Under iid N(0,1) scores the day maximum of |x| over n minutes is
    asymptotically Gumbel; rejecting at level alpha gives
    P(|x| > theta) = -ln(1 - alpha) / (2 n) per minute.
    """
    if n < 1:
        return np.inf
    tail = -np.log1p(-alpha) / (2.0 * n)
    return float(norm.isf(tail))


def detect_jumps(score_panel, cfg=None):
    """All (ticker, minute) in-session exceedances of the threshold.

    Sign-equivariant: depends on |x| only.  Out-of-session or excluded-day
    minutes are never flagged.
    """
    cfg = cfg or DetectConfig()
    panel = score_panel.panel
    eligible = score_panel.in_session & score_panel.active_columns
    x = score_panel.scores
    jumps = []
    for i, ticker in enumerate(panel.tickers):
        finite = np.isfinite(x[i]) & eligible
        if cfg.threshold_mode == "fixed":
            hits = finite & (np.abs(x[i]) > cfg.threshold)
        elif cfg.threshold_mode == "gumbel":
            hits = np.zeros_like(finite)
            for d in np.unique(panel.day_index[finite]):
                day_sel = finite & (panel.day_index == d)
                theta = gumbel_threshold(int(day_sel.sum()), cfg.gumbel_alpha)
                hits |= day_sel & (np.abs(x[i]) > theta)
        else:
            raise DataError(f"unknown threshold mode {cfg.threshold_mode!r}")
        for c in np.where(hits)[0]:
            day, minute = panel.column_timestamp(c)
            jumps.append(JumpPoint(ticker=ticker, day=day, minute_of_day=minute,
                                   col=int(c), score=float(x[i, c])))
    jumps.sort(key=lambda j: (j.day, j.minute_of_day, j.ticker))
    return jumps


def prune_clusters(jumps, window=60):
    """Keep only initial jumps: drop any jump within `window` minutes of a
    retained jump of the same ticker on the same day.

    Idempotent; a jump exactly `window` minutes after a retained one is
    still considered part of its cluster and dropped.
    """
    by_series = {}
    for j in jumps:
        by_series.setdefault((j.ticker, j.day), []).append(j)
    kept = []
    for series in by_series.values():
        series.sort(key=lambda j: j.minute_of_day)
        last = None
        for j in series:
            if last is None or j.minute_of_day - last > window:
                kept.append(j)
                last = j.minute_of_day
    kept.sort(key=lambda j: (j.day, j.minute_of_day, j.ticker))
    return kept


def extract_window(score_panel, ticker, col):
    """JumpEvent for the jump of `ticker` at grid column `col`, or None.

    Requires 59 in-session, same-day, consecutive-minute, finite scores on
    each side of the jump; otherwise the jump is skipped (reason returned).
    """
    panel = score_panel.panel
    i = panel.ticker_index(ticker)
    lo, hi = col - WINDOW_RADIUS, col + WINDOW_RADIUS
    if lo < 0 or hi >= panel.n_minutes:
        return None, "session_edge"
    cols = np.arange(lo, hi + 1)
    if (panel.day_index[cols] != panel.day_index[col]).any():
        return None, "session_edge"
    if not score_panel.in_session[cols].all():
        return None, "session_edge"
    expected = panel.minute_of_day[col] + np.arange(-WINDOW_RADIUS, WINDOW_RADIUS + 1)
    if (panel.minute_of_day[cols] != expected).any():
        return None, "grid_gap"
    window = score_panel.scores[i, cols]
    if not np.all(np.isfinite(window)):
        return None, "missing_scores"
    center = window[WINDOW_RADIUS]
    day, minute = panel.column_timestamp(col)
    event = JumpEvent(ticker=ticker, day=day, minute_of_day=minute,
                      sign=1 if center >= 0 else -1,
                      window=window.copy(), col=int(col))
    return event, None


def extract_windows(score_panel, jumps):
    """Extract windows for all jumps; returns (events, skip counts by reason)."""
    events, skipped = [], {}
    for j in jumps:
        event, reason = extract_window(score_panel, j.ticker, j.col)
        if event is None:
            skipped[reason] = skipped.get(reason, 0) + 1
        else:
            events.append(event)
    return events, skipped
