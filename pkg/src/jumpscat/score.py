"""Per-jump scores and classification.

D1 is the leading principal direction of the standardized imaginary
second-order scattering block and quantifies volatility time-asymmetry
("reflexivity"): negative = anticipatory, near zero = endogenous, large
positive = exogenous.  D2/D3 are inner products of the aligned window with
the handcrafted mean-reversion and trend filters.  All class boundaries are
dataset-relative quantiles, so classification depends only on score ranks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigError, DataError, NumericalError
from .wavelets import WINDOW_LEN, WINDOW_RADIUS

D1_QUANTILES = (0.1, 0.25, 0.35, 0.9)
D23_QUANTILES = (0.1, 0.5, 0.9)
GRID_QUANTILES = (0.05, 0.35, 0.65, 0.95)

D1_BIN_NAMES = ("anticipatory", "transition", "endogenous", "transition", "exogenous")
D2_BIN_NAMES = ("mean-reverting-on-trend", None, None, "post-jump-mean-reverting")
D3_BIN_NAMES = ("trend-anti-aligned", None, None, "trend-aligned")


@dataclass
class DirectionModel:
    """Fitted reflexivity direction: standardization + unit-norm weights."""

    weights: np.ndarray        # unit l2 norm
    mean: np.ndarray
    scale: np.ndarray
    orientation: int           # +-1, fixed so corr(D1, A_jump) > 0 on the fit set
    explained_variance: float  # leading eigenvalue fraction
    block: str = "imag_second"  # which part of the embedding is scored
    n_fit: int = 0

    def features(self, embedding):
        if self.block == "imag_second":
            return embedding.imag_second
        if self.block == "full":
            return embedding.flat
        raise ConfigError(f"unknown feature block {self.block!r}")


def _leading_eigvec(cov):
    vals, vecs = np.linalg.eigh(cov)
    lead = vecs[:, -1]
    lead = lead / np.linalg.norm(lead)
    # canonical base sign before orientation is applied
    if lead[np.argmax(np.abs(lead))] < 0:
        lead = -lead
    evr = float(vals[-1] / vals.sum()) if vals.sum() > 0 else 0.0
    return lead, evr, vals


def fit_directions(embeddings, asymmetries=None, block="imag_second", min_events=100):
    """PCA fit of the reflexivity direction on a set of embeddings.

    `asymmetries` (one value per embedding, e.g. A_jump) fixes the sign of
    the direction; without it the canonical eigenvector sign is kept.
    """
    if len(embeddings) < min_events:
        raise DataError(f"need >= {min_events} embeddings to fit, have {len(embeddings)}")
    if block == "imag_second":
        X = np.array([e.imag_second for e in embeddings])
    elif block == "full":
        X = np.array([e.flat for e in embeddings])
    else:
        raise ConfigError(f"unknown feature block {block!r}")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    dead = scale == 0.0
    if dead.any():
        warnings.warn(f"{int(dead.sum())} constant coefficients in the PCA block",
                      stacklevel=2)
        scale = np.where(dead, 1.0, scale)
    Z = (X - mean) / scale

    cov = Z.T @ Z / len(Z)
    weights, evr, vals = _leading_eigvec(cov)
    if np.sum(vals > 1e-14 * vals[-1]) < len(vals):
        warnings.warn("covariance is rank-deficient; PCA restricted to its "
                      "nonzero subspace", stacklevel=2)

    orientation = 1
    if asymmetries is not None:
        a = np.asarray(asymmetries, dtype=float)
        if a.shape[0] != len(Z):
            raise DataError("asymmetries must align with embeddings")
        raw = Z @ weights
        if np.std(raw) > 0 and np.std(a) > 0:
            c = float(np.corrcoef(raw, a)[0, 1])
            if c < 0:
                orientation = -1
    return DirectionModel(weights=weights, mean=mean, scale=scale,
                          orientation=orientation, explained_variance=evr,
                          block=block, n_fit=len(Z))


def d1_score(embedding, model):
    """Reflexivity score: standardized feature block dotted with the direction."""
    z = (model.features(embedding) - model.mean) / model.scale
    return float(model.orientation * (z @ model.weights))


def _normalized_aligned(event):
    xa = event.aligned_window
    norm = np.linalg.norm(xa)
    return xa / norm if norm > 0 else None


def mr_score(event, bank):
    """Mean-reversion score: <x_bar / ||x_bar||, psi_MR>.

    Positive when the pre-jump trend points with the jump and returns flip
    sign right after it.  Scale-free and invariant to the jump's sign.
    """
    xa = _normalized_aligned(event)
    return 0.0 if xa is None else float(xa @ bank.mr_filter)


def trend_score(event, bank):
    """Trend score: <x_bar / ||x_bar||, psi_TR>; positive = trend aligned."""
    xa = _normalized_aligned(event)
    return 0.0 if xa is None else float(xa @ bank.tr_filter)


def asymmetry_of_profile(abs_window):
    """A_jump of an absolute profile: (A> - A<) / (A> + A<), zero if empty.

    A< and A> sum |x(t)| minus the side minimum over t < 0 and t > 0
    respectively (the jump minute itself is excluded).  Activity mostly
    after the jump gives A > 0; mirror-symmetric profiles give 0.
    """
    y = np.abs(np.asarray(abs_window, dtype=float))
    pre = y[:WINDOW_RADIUS]
    post = y[WINDOW_RADIUS + 1:][::-1]  # reversed: time reversal then swaps the
    a_lt = float(np.sum(pre - pre.min()))   # sides bitwise, so A -> -A exactly
    a_gt = float(np.sum(post - post.min()))
    total = a_gt + a_lt
    return (a_gt - a_lt) / total if total > 0 else 0.0


def asymmetry(event):
    return asymmetry_of_profile(event.window)


# ---------------------------------------------------------------------------
# Power-law profile fit
# ---------------------------------------------------------------------------

@dataclass
class PowerLawFit:
    """Least-squares fit of the two-sided power-law profile with offset."""

    n_pre: float
    n_post: float
    p_pre: float
    p_post: float
    t_c: float
    d: float
    rel_residual: float
    accepted: bool
    converged: bool = True

    def as_tuple(self):
        return (self.n_pre, self.n_post, self.p_pre, self.p_post, self.t_c, self.d)


def power_law_profile(t, n_pre, n_post, p_pre, p_post, t_c, d):
    """|x(t)| model: N/|t - t_c|^p on each side of t_c, plus a floor d."""
    t = np.asarray(t, dtype=float)
    gap = np.abs(t - t_c)
    gap = np.maximum(gap, 1e-8)
    out = np.full_like(t, d)
    pre = t < t_c
    post = t > t_c
    out[pre] += n_pre * gap[pre] ** (-p_pre)
    out[post] += n_post * gap[post] ** (-p_post)
    return out


def fit_power_law(event_or_profile, max_rel_residual=0.5, t_c_starts=None):
    """Fit the power-law profile to |x(t)|; multi-start over the t_c grid.

    Returns a PowerLawFit with `converged=False` (and NaN parameters) when
    no start produces a usable optimum.
    """
    profile = getattr(event_or_profile, "window", event_or_profile)
    y = np.abs(np.asarray(profile, dtype=float))
    if y.shape != (WINDOW_LEN,):
        raise DataError(f"profile must have {WINDOW_LEN} points")
    t = np.arange(-WINDOW_RADIUS, WINDOW_RADIUS + 1, dtype=float)
    if t_c_starts is None:
        t_c_starts = (-1.75, -1.25, -0.75, -0.25, 0.25, 0.75, 1.25, 1.75)

    d0 = float(np.percentile(y, 25))
    near = float(np.mean(y[WINDOW_RADIUS - 3: WINDOW_RADIUS + 4]))
    n0 = max(near - d0, 1e-3)
    lower = [0.0, 0.0, 0.0, 0.0, -2.0, 0.0]
    upper = [np.inf, np.inf, 3.0, 3.0, 2.0, np.inf]

    def residual(theta):
        return power_law_profile(t, *theta) - y

    best = None
    for tc0 in t_c_starts:
        x0 = [n0, n0, 0.7, 0.7, tc0, max(d0, 1e-6)]
        try:
            res = least_squares(residual, x0, bounds=(lower, upper), method="trf")
        except Exception:
            continue
        if not np.all(np.isfinite(res.x)):
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        nan = float("nan")
        return PowerLawFit(nan, nan, nan, nan, nan, nan, nan,
                           accepted=False, converged=False)

    y_norm = np.linalg.norm(y)
    rel = float(np.linalg.norm(residual(best.x)) / y_norm) if y_norm > 0 else np.inf
    n_pre, n_post, p_pre, p_post, t_c, d = (float(v) for v in best.x)
    return PowerLawFit(n_pre, n_post, p_pre, p_post, t_c, d,
                       rel_residual=rel, accepted=rel < max_rel_residual)


# ---------------------------------------------------------------------------
# News labels and classification
# ---------------------------------------------------------------------------

def match_news(events, feed, window_minutes=3):
    """Flag events with a same-ticker or market-wide news within +-3 minutes."""
    by_ticker = {}
    market_wide = {}
    for date, minute, ticker in feed.events:
        target = market_wide if ticker is None else by_ticker.setdefault(ticker, {})
        target.setdefault(date, []).append(minute)

    def hit(minutes_by_date, event):
        minutes = minutes_by_date.get(event.day)
        if not minutes:
            return False
        return any(abs(m - event.minute_of_day) <= window_minutes for m in minutes)

    for e in events:
        e.news_related = hit(market_wide, e) or hit(by_ticker.get(e.ticker, {}), e)
    return events


def _rank_quantiles(values, qs):
    """Order-statistic quantiles (no interpolation), so bins are rank-pure."""
    return np.quantile(np.asarray(values, dtype=float), qs, method="inverted_cdf")


def _bin_of(value, thresholds):
    return int(np.searchsorted(thresholds, value, side="right"))


@dataclass
class QuantileConfig:
    d1: tuple = D1_QUANTILES
    d23: tuple = D23_QUANTILES
    grid: tuple = GRID_QUANTILES


@dataclass
class ClassThresholds:
    """Dataset-relative score thresholds actually used for the assignment."""

    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray
    grid_d1: np.ndarray
    grid_d2: np.ndarray
    grid_d3: np.ndarray


def classify(events, model, quantiles=None):
    """Assign D1/D2/D3 bins, 2D grid cells and the composite class label.

    Quantiles are computed over the full event set, so every assignment is
    order-free and invariant under monotone transforms of the scores.
    """
    if model is None or not isinstance(model, DirectionModel):
        raise DataError("classification requires a fitted DirectionModel")
    qcfg = quantiles or QuantileConfig()
    missing = [e for e in events if e.d1 is None or e.d2 is None or e.d3 is None]
    if missing:
        raise DataError(f"{len(missing)} events lack scores; run score_events first")

    d1s = np.array([e.d1 for e in events])
    d2s = np.array([e.d2 for e in events])
    d3s = np.array([e.d3 for e in events])
    thr = ClassThresholds(
        d1=_rank_quantiles(d1s, qcfg.d1),
        d2=_rank_quantiles(d2s, qcfg.d23),
        d3=_rank_quantiles(d3s, qcfg.d23),
        grid_d1=_rank_quantiles(d1s, qcfg.grid),
        grid_d2=_rank_quantiles(d2s, qcfg.grid),
        grid_d3=_rank_quantiles(d3s, qcfg.grid),
    )
    for e in events:
        e.d1_bin = _bin_of(e.d1, thr.d1)
        e.d2_bin = _bin_of(e.d2, thr.d2)
        e.d3_bin = _bin_of(e.d3, thr.d3)
        e.grid_mr = (_bin_of(e.d1, thr.grid_d1), _bin_of(e.d2, thr.grid_d2))
        e.grid_tr = (_bin_of(e.d1, thr.grid_d1), _bin_of(e.d3, thr.grid_d3))
        parts = [D1_BIN_NAMES[e.d1_bin]]
        if D2_BIN_NAMES[e.d2_bin]:
            parts.append(D2_BIN_NAMES[e.d2_bin])
        if D3_BIN_NAMES[e.d3_bin]:
            parts.append(D3_BIN_NAMES[e.d3_bin])
        e.class_label = "+".join(parts)
    return events, thr


@dataclass
class ProfileRow:
    bin_id: object
    count: int
    mean_abs: np.ndarray | None
    mean_aligned: np.ndarray | None


_BINNINGS = {
    "d1": (lambda e: e.d1_bin, 5),
    "d2": (lambda e: e.d2_bin, 4),
    "d3": (lambda e: e.d3_bin, 4),
    "grid_d1_d2": (lambda e: e.grid_mr, 25),
    "grid_d1_d3": (lambda e: e.grid_tr, 25),
}


def average_profiles(events, binning="d1"):
    """Pointwise mean |x(t)| and aligned profiles per bin, with counts."""
    if binning not in _BINNINGS:
        raise ConfigError(f"unknown binning {binning!r}")
    key, n_bins = _BINNINGS[binning]
    if binning.startswith("grid"):
        bins = [(i, j) for i in range(5) for j in range(5)]
    else:
        bins = list(range(n_bins))
    members = {b: [] for b in bins}
    for e in events:
        b = key(e)
        if b is None:
            raise DataError("events are not classified yet")
        members[b].append(e)
    rows = []
    for b in bins:
        evs = members[b]
        if not evs:
            rows.append(ProfileRow(bin_id=b, count=0, mean_abs=None, mean_aligned=None))
            continue
        absW = np.mean([np.abs(e.window) for e in evs], axis=0)
        alW = np.mean([e.aligned_window for e in evs], axis=0)
        rows.append(ProfileRow(bin_id=b, count=len(evs), mean_abs=absW, mean_aligned=alW))
    return rows


def score_events(events, model, bank, fit_profiles=False):
    """Fill d1/d2/d3/a_jump (and optionally the power-law fit) on each event.

    Pure per-event computation; events must already carry embeddings for d1.
    """
    for e in events:
        if e.embedding is None:
            raise DataError(f"event {e.ticker}@{e.day} has no embedding")
        e.d1 = d1_score(e.embedding, model)
        e.d2 = mr_score(e, bank)
        e.d3 = trend_score(e, bank)
        e.a_jump = asymmetry(e)
        if fit_profiles:
            try:
                e.powerlaw = fit_power_law(e)
            except NumericalError:
                e.powerlaw = None
    return events
