"""Price-jump detection, wavelet-scattering classification, and co-jump analysis."""

from .config import PipelineConfig
from .cojump import (CoJump, TailFit, average_normalized_profile, correlation_rho,
                     fit_tail_exponent, group, indicators, quadrant,
                     sign_alignment, size_distribution)
from .detect import (DetectConfig, JumpEvent, ScorePanel, deseasonalize,
                     detect_jumps, extract_window, extract_windows,
                     gumbel_threshold, prune_clusters)
from .panel import (ExclusionCalendar, NewsFeed, ReturnPanel, apply_exclusions,
                    clear_exclusions, load_exclusions, load_news, load_panel,
                    write_panel)
from .score import (DirectionModel, PowerLawFit, asymmetry, asymmetry_of_profile,
                    classify, average_profiles, d1_score, fit_directions,
                    fit_power_law, match_news, mr_score, power_law_profile,
                    score_events, trend_score)
from .synth import (BenchmarkSpec, BranchingSpec, generate_benchmark,
                    simulate_branching)
from .wavelets import (FilterBank, ScatterEmbedding, build_filter_bank, convolve,
                       convolve_at, embed, embed_window)

__version__ = "0.1.0"
