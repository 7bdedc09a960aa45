"""Flat pipeline configuration with strict key checking and a provenance hash.

Every artifact the pipeline writes records the hash of the fully resolved
configuration, so outputs can always be traced to the exact settings that
produced them.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

from .errors import ConfigError

ENV_CONFIG_PATH = "JUMPSCAT_CONFIG"


@dataclass
class PipelineConfig:
    # ingest / session
    session: str = "10:30-15:00"
    # detection
    threshold: float = 4.0
    threshold_mode: str = "fixed"
    gumbel_alpha: float = 0.01
    prune_window: int = 60
    halflife_days: float = 5.0
    winsor_k: float = 4.0
    init_days: int = 10
    min_days: int = 10
    min_slot_obs: int = 5
    # wavelet bank
    wavelet_scales: int = 6
    wavelet_order: int = 3
    boundary: str = "zero"
    mr_support: int = 8
    mr_peak: float = 1.0
    mr_width: float = 2.5
    # scoring / classification
    quantiles_d1: tuple = (0.1, 0.25, 0.35, 0.9)
    quantiles_d23: tuple = (0.1, 0.5, 0.9)
    grid_quantiles: tuple = (0.05, 0.35, 0.65, 0.95)
    news_window: int = 3
    fit_profiles: bool = False
    max_rel_residual: float = 0.5
    pca_block: str = "imag_second"
    min_fit_events: int = 100
    # co-jumps
    max_cojump_size: int = 250
    tail_range: str = "10:100"
    tail_min_obs: int = 50
    min_pool: int = 5
    min_quadrant_size: int = 3
    # misc
    seed: int = 7
    threads: int = 1
    plots: bool = True

    @classmethod
    def field_names(cls):
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - cls.field_names()
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            if isinstance(getattr(cls, f.name, None), tuple) and isinstance(value, list):
                value = tuple(value)
            kwargs[f.name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path=None, overrides=None):
        """Resolve defaults < config file < overrides; path falls back to $JUMPSCAT_CONFIG."""
        path = path or os.environ.get(ENV_CONFIG_PATH)
        data = {}
        if path:
            try:
                with open(path) as fh:
                    data = json.load(fh)
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
        if overrides:
            data.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(data)

    def as_dict(self):
        out = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    def hash(self):
        blob = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def tail_range_pair(self):
        try:
            lo, hi = self.tail_range.split(":")
            return int(lo), int(hi)
        except ValueError:
            raise ConfigError(f"bad tail_range {self.tail_range!r}; expected LO:HI") from None
