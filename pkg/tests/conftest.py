import datetime as dt

import numpy as np
import pytest
from hypothesis import settings

from jumpscat.detect import JumpEvent, ScorePanel
from jumpscat.panel import ReturnPanel
from jumpscat.wavelets import WINDOW_LEN, WINDOW_RADIUS

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("ci")


def make_panel(n_tickers=2, n_days=5, minutes_per_day=390, seed=0, scale=1e-3,
               session=(570, 959), day_shape=None, returns=None):
    """Synthetic panel: Gaussian returns, full grid starting 09:30 each day."""
    rng = np.random.default_rng(seed)
    start = dt.date(2021, 1, 4)
    dates = tuple(start + dt.timedelta(days=d) for d in range(n_days))
    day_index = np.repeat(np.arange(n_days), minutes_per_day)
    mods = np.tile(np.arange(570, 570 + minutes_per_day), n_days)
    if returns is None:
        returns = rng.standard_normal((n_tickers, n_days * minutes_per_day)) * scale
        if day_shape is not None:
            g = day_shape(np.arange(570, 570 + minutes_per_day).astype(float))
            returns = returns * np.tile(g, n_days)[None, :]
    return ReturnPanel(tickers=tuple(f"T{i}" for i in range(n_tickers)),
                       dates=dates, day_index=day_index, minute_of_day=mods,
                       returns=returns, session_window=session)


def make_score_panel(scores, session=(0, 1439), minutes_per_day=None, seed=0):
    """Wrap a raw score matrix in a ScorePanel with a permissive session."""
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    n_tickers, m = scores.shape
    mpd = minutes_per_day or min(m, 1380)
    n_days = (m + mpd - 1) // mpd
    start = dt.date(2021, 1, 4)
    dates = tuple(start + dt.timedelta(days=d) for d in range(n_days))
    day_index = np.repeat(np.arange(n_days), mpd)[:m]
    mods = np.tile(np.arange(30, 30 + mpd), n_days)[:m]
    panel = ReturnPanel(tickers=tuple(f"T{i}" for i in range(n_tickers)),
                        dates=dates, day_index=day_index, minute_of_day=mods,
                        returns=scores.copy(), session_window=session)
    return ScorePanel(panel=panel, scores=scores,
                      periodicity={int(s): 1.0 for s in np.unique(mods)},
                      local_vol=np.ones_like(scores))


def make_event(window=None, sign=1, ticker="T0", day=None, minute=700, seed=None,
               center=6.0):
    if window is None:
        rng = np.random.default_rng(0 if seed is None else seed)
        window = rng.standard_normal(WINDOW_LEN)
        window[WINDOW_RADIUS] = center * sign
    return JumpEvent(ticker=ticker, day=day or dt.date(2021, 1, 4),
                     minute_of_day=minute, sign=sign, window=np.asarray(window, float))


@pytest.fixture(scope="session")
def bank():
    from jumpscat.wavelets import build_filter_bank
    return build_filter_bank()
