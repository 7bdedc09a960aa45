"""Co-jump grouping, reflexivity indicators, quadrants, size statistics.

A co-jump is the set of jumps sharing one minute; its size S is the member
count.  Reflexivity indicators aggregate the members' D1 scores and are
normalized by sigma_size, the average within-co-jump D1 spread among co-jumps
of the same size (sparse sizes pooled).  Per-co-jump computations are
independent; sigma_size and the tail fit are dataset-wide reductions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import linregress

from .errors import DataError, TailRangeError


@dataclass
class CoJump:
    """Jumps of several tickers in one minute, with derived indicators."""

    cojump_id: int
    day: object
    minute_of_day: int
    members: list                    # JumpEvents, same minute
    mean_d1: float | None = None
    min_d1: float | None = None
    max_d1: float | None = None
    sigma_size: float | None = None  # size-matched normalizer
    mean_norm: float | None = None
    min_norm: float | None = None
    quadrant: str | None = None      # LL | LR | UR | gray
    rho: float | None = None
    degenerate_sigma: bool = False

    @property
    def size(self):
        return len(self.members)

    @property
    def sign_mean(self):
        return float(np.mean([e.sign for e in self.members]))

    @property
    def news_related(self):
        """Any-member rule: one matched member marks the whole co-jump."""
        return any(bool(e.news_related) for e in self.members)


def group(events, max_cojump_size=250):
    """Partition events by minute into co-jumps (singles have S = 1).

    Groups larger than `max_cojump_size` are dropped entirely (major market
    shocks) and counted.  Returns (cojumps, drop stats).
    """
    buckets = {}
    for e in events:
        buckets.setdefault((e.day, e.minute_of_day), []).append(e)
    cojumps, dropped_groups, dropped_jumps = [], 0, 0
    for key in sorted(buckets, key=lambda k: (k[0], k[1])):
        members = sorted(buckets[key], key=lambda e: e.ticker)
        if len(members) > max_cojump_size:
            dropped_groups += 1
            dropped_jumps += len(members)
            continue
        cid = len(cojumps)
        for e in members:
            e.cojump_id = cid
        cojumps.append(CoJump(cojump_id=cid, day=key[0], minute_of_day=key[1],
                              members=members))
    return cojumps, {"dropped_groups": dropped_groups, "dropped_jumps": dropped_jumps}


def _pooled_sigma_by_size(spread_by_size, min_pool=5):
    """Average within-co-jump spread per size, pooling sizes with few co-jumps.

    Sizes are scanned in ascending order and merged into consecutive pools
    until each pool holds at least `min_pool` co-jumps; a short leftover pool
    merges backwards.  Every size in a pool shares the pool's mean spread.
    """
    sizes = sorted(spread_by_size)
    pools, current = [], []
    count = 0
    for s in sizes:
        current.append(s)
        count += len(spread_by_size[s])
        if count >= min_pool:
            pools.append(current)
            current, count = [], 0
    if current:
        if pools:
            pools[-1].extend(current)
        else:
            pools.append(current)
    sigma = {}
    for pool in pools:
        spreads = [v for s in pool for v in spread_by_size[s]]
        value = float(np.mean(spreads))
        for s in pool:
            sigma[s] = value
    return sigma


def indicators(cojumps, min_pool=5):
    """Attach mean/min/max member D1 and the size-matched normalization.

    Only co-jumps of size > 2 enter the sigma_size estimate and receive
    normalized indicators and quadrants.
    """
    spread_by_size = {}
    for cj in cojumps:
        d1s = np.array([e.d1 for e in cj.members], dtype=float)
        if np.isnan(d1s).any():
            raise DataError("co-jump members lack D1 scores")
        cj.mean_d1 = float(d1s.mean())
        cj.min_d1 = float(d1s.min())
        cj.max_d1 = float(d1s.max())
        if cj.size > 2:
            spread_by_size.setdefault(cj.size, []).append(float(d1s.std(ddof=1)))

    sigma_by_size = _pooled_sigma_by_size(spread_by_size, min_pool) if spread_by_size else {}
    for cj in cojumps:
        if cj.size <= 2:
            continue
        cj.sigma_size = sigma_by_size.get(cj.size)
        if cj.sigma_size is None:
            continue
        if cj.sigma_size == 0.0:
            cj.degenerate_sigma = True
            warnings.warn(f"sigma_size is zero for size {cj.size}; "
                          "normalization skipped", stacklevel=2)
        else:
            cj.mean_norm = cj.mean_d1 / cj.sigma_size
            cj.min_norm = cj.min_d1 / cj.sigma_size
        cj.quadrant = quadrant(cj)
    return cojumps


def quadrant(cj):
    """LL / LR / UR / gray from the (mean, min) D1 indicators.

    gray when mean - min does not exceed sigma_size strictly (insignificant
    spread, ties included); otherwise LL if mean < 0, UR if min > 0, else LR.
    """
    if cj.mean_d1 is None or cj.min_d1 is None:
        raise DataError("indicators not computed")
    sigma = cj.sigma_size or 0.0
    if not cj.mean_d1 - cj.min_d1 > sigma:
        return "gray"
    if cj.mean_d1 < 0:
        return "LL"
    if cj.min_d1 > 0:
        return "UR"
    return "LR"


@dataclass
class SizeDistribution:
    sizes: np.ndarray      # distinct sizes, ascending
    counts: np.ndarray     # histogram
    ccdf: np.ndarray       # P(S >= size)
    n_total: int


def size_distribution(cojumps_or_sizes, restrict=None):
    """Histogram and CCDF of co-jump sizes.

    `restrict="endogenous_min"` keeps only co-jumps whose minimum D1 is
    negative and more than one sigma below the mean (the LL and LR regions).
    """
    if restrict not in (None, "all", "endogenous_min"):
        raise DataError(f"unknown size filter {restrict!r}")
    if len(cojumps_or_sizes) and isinstance(cojumps_or_sizes[0], CoJump):
        cjs = cojumps_or_sizes
        if restrict == "endogenous_min":
            cjs = [cj for cj in cjs
                   if cj.min_d1 is not None and cj.sigma_size is not None
                   and cj.min_d1 < 0
                   and cj.min_d1 < cj.mean_d1 - cj.sigma_size]
        sizes = np.array([cj.size for cj in cjs], dtype=np.int64)
    else:
        sizes = np.asarray(cojumps_or_sizes, dtype=np.int64)
    if sizes.size == 0:
        return SizeDistribution(sizes=np.array([], dtype=np.int64),
                                counts=np.array([], dtype=np.int64),
                                ccdf=np.array([]), n_total=0)
    distinct, counts = np.unique(sizes, return_counts=True)
    cum_from_above = np.cumsum(counts[::-1])[::-1]
    return SizeDistribution(sizes=distinct, counts=counts,
                            ccdf=cum_from_above / sizes.size, n_total=sizes.size)


@dataclass
class TailFit:
    """Tail exponent tau of P(S) ~ S^-(1+tau) over a size range."""

    tau: float              # log-log least squares on the CCDF
    stderr: float
    tau_mle: float          # truncated discrete power-law MLE cross-check
    stderr_mle: float
    fit_range: tuple
    n_obs: int
    method: str = "ccdf-ls+truncated-mle"


def _truncated_mle(samples, s_min, s_max):
    """MLE of alpha for P(s) ~ s^-alpha on integers in [s_min, s_max]."""
    s = np.arange(s_min, s_max + 1, dtype=float)
    log_s = np.log(samples)
    n = len(samples)

    def neg_loglik(alpha):
        z = np.sum(s ** (-alpha))
        return alpha * log_s.sum() + n * np.log(z)

    res = minimize_scalar(neg_loglik, bounds=(1.0 + 1e-6, 6.0), method="bounded")
    alpha = float(res.x)
    # observed Fisher information = n * Var(ln s) under the fitted law
    w = s ** (-alpha)
    w /= w.sum()
    var_log = float(np.sum(w * np.log(s) ** 2) - np.sum(w * np.log(s)) ** 2)
    stderr = 1.0 / np.sqrt(n * var_log) if var_log > 0 else np.inf
    return alpha, stderr


def fit_tail_exponent(sizes, fit_range=(10, 100), min_obs=50):
    """Fit tau on the CCDF over `fit_range`, with an MLE cross-check.

    The least-squares fit regresses log CCDF on log size over the distinct
    sizes inside the range; the MLE fits the truncated discrete power law to
    the samples in range.  Both exponents are reported.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    s_min, s_max = fit_range
    if s_min >= s_max or s_min < 1:
        raise TailRangeError(f"bad fit range {fit_range}")
    in_range = sizes[(sizes >= s_min) & (sizes <= s_max)]
    if in_range.size < min_obs:
        raise TailRangeError(
            f"only {in_range.size} observations in [{s_min}, {s_max}]; need {min_obs}")

    dist = size_distribution(sizes)
    sel = (dist.sizes >= s_min) & (dist.sizes <= s_max)
    xs = np.log(dist.sizes[sel].astype(float))
    ys = np.log(dist.ccdf[sel])
    if len(xs) < 3:
        raise TailRangeError("fewer than 3 distinct sizes in range")
    reg = linregress(xs, ys)
    tau_ls = float(-reg.slope)

    alpha, stderr_mle = _truncated_mle(in_range.astype(float), s_min, s_max)
    return TailFit(tau=tau_ls, stderr=float(reg.stderr),
                   tau_mle=alpha - 1.0, stderr_mle=stderr_mle,
                   fit_range=(int(s_min), int(s_max)), n_obs=int(in_range.size))


def correlation_rho(cj):
    """Average cross-correlation of member trend scores.

    rho = sum_{k != k'} d3_k d3_k' / ((S-1) sum_k d3_k^2); equals 1 when all
    members share one trend score and -1/(S-1) when scores sum to zero.
    Undefined (None, flagged) when every member score is zero.
    """
    if cj.size < 2:
        raise DataError("rho needs a co-jump of size >= 2")
    d3 = np.array([e.d3 for e in cj.members], dtype=float)
    if np.isnan(d3).any():
        raise DataError("co-jump members lack D3 scores")
    ssq = float(np.sum(d3 ** 2))
    if ssq == 0.0:
        cj.rho = None
        return None
    total = float(np.sum(d3))
    rho = (total ** 2 - ssq) / ((cj.size - 1) * ssq)
    cj.rho = rho
    return rho


def average_normalized_profile(cj):
    """Mean over members of the aligned window scaled to unit RMS.

    Members with a zero-RMS window are skipped (flagged via the returned
    count); returns (profile, used_members) or (None, 0).
    """
    if cj.size < 2:
        raise DataError("average profile needs a co-jump of size >= 2")
    rows = []
    for e in cj.members:
        rms = float(np.sqrt(np.mean(e.aligned_window ** 2)))
        if rms == 0.0:
            warnings.warn(f"zero-RMS member {e.ticker} skipped", stacklevel=2)
            continue
        rows.append(e.aligned_window / rms)
    if not rows:
        return None, 0
    return np.mean(rows, axis=0), len(rows)


def sign_alignment(cojumps):
    """Per size: mean of |sum of member signs| / S; 1 = fully aligned."""
    by_size = {}
    for cj in cojumps:
        signs = np.array([e.sign for e in cj.members], dtype=float)
        by_size.setdefault(cj.size, []).append(abs(signs.sum()) / cj.size)
    return {s: float(np.mean(v)) for s, v in sorted(by_size.items())}
