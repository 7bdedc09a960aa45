"""Synthetic benchmarks: controlled-asymmetry jump windows and branching avalanches.

The benchmark builds jump windows from the two-sided power-law profile with a
swept pre/post balance, multiplied by one shared Gaussian noise path, so the
embedding's reflexivity score can be validated against a known asymmetry.
The branching simulator produces avalanche-size samples from a near-critical
Galton-Watson process with random distance-to-criticality, the reference
model for the co-jump size distribution (tau = 1 + gamma/2).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .detect import JumpEvent
from .errors import ConfigError
from .score import asymmetry_of_profile, power_law_profile
from .wavelets import WINDOW_LEN, WINDOW_RADIUS

_SYNTH_EPOCH = dt.date(2020, 1, 6)
_MINUTES_PER_SYNTH_DAY = 390


@dataclass
class BenchmarkSpec:
    """Sweep of power-law jump profiles from pre- to post-dominant activity."""

    n_series: int = 100
    t_c: float = -0.5
    d: float = 0.5
    p_exponent: float = 0.7
    spike: float = 8.0          # |x(0)|, above any detection threshold
    noise_sigma: float = 1.0
    seed: int = 7
    asymmetry_grid: list | None = None  # (n_pre, n_post, p_pre, p_post) tuples

    def grid(self):
        if self.asymmetry_grid is not None:
            return [(float(a), float(b), float(c), float(e), lam / max(len(self.asymmetry_grid) - 1, 1))
                    for lam, (a, b, c, e) in enumerate(self.asymmetry_grid)]
        lams = np.linspace(0.0, 1.0, self.n_series)
        return [(1.0 - lam, lam, self.p_exponent, self.p_exponent, float(lam))
                for lam in lams]


def generate_benchmark(spec=None):
    """Labeled synthetic jump events sweeping the asymmetry parameter.

    Every series uses the same noise path; signs are the noise's own
    (Rademacher off-center) with a positive spike at t = 0.  Each event's
    `planted` dict carries the sweep parameter and the analytic A_jump of
    the noiseless profile.
    """
    spec = spec or BenchmarkSpec()
    rng = np.random.default_rng(spec.seed)
    noise = spec.noise_sigma * rng.standard_normal(WINDOW_LEN)
    t = np.arange(-WINDOW_RADIUS, WINDOW_RADIUS + 1, dtype=float)

    events = []
    for i, (n_pre, n_post, p_pre, p_post, lam) in enumerate(spec.grid()):
        profile = power_law_profile(t, n_pre, n_post, p_pre, p_post, spec.t_c, spec.d)
        window = profile * noise
        window[WINDOW_RADIUS] = spec.spike
        day = _SYNTH_EPOCH + dt.timedelta(days=i // _MINUTES_PER_SYNTH_DAY)
        minute = 600 + (i % _MINUTES_PER_SYNTH_DAY)
        events.append(JumpEvent(
            ticker=f"SYN{i:04d}", day=day, minute_of_day=minute, sign=1,
            window=window,
            planted={"lambda": lam,
                     "params": [n_pre, n_post, p_pre, p_post, spec.t_c, spec.d],
                     "a_jump_noiseless": asymmetry_of_profile(profile)}))
    return events


@dataclass
class BranchingSpec:
    """Near-critical Galton-Watson avalanches with random epsilon = 1 - phi.

    Epsilon laws: "uniform" on [eps_min, 1]; "power" with density ~ eps^gamma
    on (0, 1]; "fixed" pins epsilon at eps_min (the conditional-law oracle).
    """

    law: str = "uniform"
    eps_min: float = 0.1
    gamma: float = 1.0
    offspring: str = "poisson"  # "poisson" | "binomial"
    n_avalanches: int = 100_000
    max_size: int = 10_000_000
    seed: int = 7

    def __post_init__(self):
        if self.law not in ("uniform", "power", "fixed"):
            raise ConfigError(f"unknown epsilon law {self.law!r}")
        if self.offspring not in ("poisson", "binomial"):
            raise ConfigError(f"unknown offspring law {self.offspring!r}")
        if self.law in ("uniform", "fixed") and not 0.0 < self.eps_min <= 1.0:
            raise ConfigError("eps_min must be in (0, 1]")
        if self.law == "power" and self.gamma < 0.0:
            raise ConfigError("gamma must be >= 0")
        if self.max_size < 1:
            raise ConfigError("max_size must be >= 1")


@dataclass
class BranchingSample:
    sizes: np.ndarray
    cap_hits: int
    spec: BranchingSpec


def _draw_epsilon(rng, spec, n):
    if spec.law == "uniform":
        return rng.uniform(spec.eps_min, 1.0, size=n)
    if spec.law == "fixed":
        return np.full(n, spec.eps_min)
    # density (gamma+1) eps^gamma on (0, 1]: inverse-CDF sampling
    return rng.uniform(0.0, 1.0, size=n) ** (1.0 / (spec.gamma + 1.0))


def simulate_branching(spec=None):
    """Total-progeny sample of the branching process, one avalanche per draw.

    Vectorized over avalanches generation by generation; an avalanche hitting
    `max_size` is frozen at the cap and counted.  Offspring are Poisson with
    mean 1 - eps (or Binomial(2, (1-eps)/2) in binomial mode).
    """
    spec = spec or BranchingSpec()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_avalanches
    eps = _draw_epsilon(rng, spec, n)
    mu = 1.0 - eps

    sizes = np.ones(n, dtype=np.int64)
    alive = np.ones(n, dtype=np.int64)   # current generation headcount
    capped = np.zeros(n, dtype=bool)
    while True:
        active = np.where(alive > 0)[0]
        if active.size == 0:
            break
        if spec.offspring == "poisson":
            children = rng.poisson(mu[active] * alive[active])
        else:
            children = rng.binomial(2 * alive[active], mu[active] / 2.0)
        sizes[active] += children
        alive[active] = children
        over = active[sizes[active] >= spec.max_size]
        if over.size:
            capped[over] = True
            sizes[over] = spec.max_size
            alive[over] = 0
    return BranchingSample(sizes=sizes, cap_hits=int(capped.sum()), spec=spec)
