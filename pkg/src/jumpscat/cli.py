"""Command-line interface.

Subcommands: detect, embed, score, cojump, synth, report, run.
Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
Config resolution: built-in defaults < JSON config file (--config or
$JUMPSCAT_CONFIG) < command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import sys

from .config import PipelineConfig
from .errors import ConfigError, DataError, JumpscatError, NumericalError
from . import pipeline

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def _add_common(p):
    p.add_argument("--config", help="JSON config file (default: $JUMPSCAT_CONFIG)")
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--threads", type=int, help="worker bound for parallel stages")
    p.add_argument("--seed", type=int, help="master random seed")


def _add_detect_flags(p):
    p.add_argument("--threshold", type=float, help="|x| detection threshold")
    p.add_argument("--threshold-mode", choices=["fixed", "gumbel"], dest="threshold_mode")
    p.add_argument("--prune-window", type=int, dest="prune_window",
                   help="minutes after an initial jump to drop replicas")
    p.add_argument("--session", help="analysis window, e.g. 10:30-15:00")
    p.add_argument("--sector-map", dest="sector_map",
                   help="CSV ticker,sector map; detection runs on sector averages")


def _add_score_flags(p):
    p.add_argument("--quantiles-d1", dest="quantiles_d1",
                   help="comma list, e.g. 0.1,0.25,0.35,0.9")
    p.add_argument("--grid-quantiles", dest="grid_quantiles",
                   help="comma list, e.g. 0.05,0.35,0.65,0.95")
    p.add_argument("--news", help="news CSV (date,time[,ticker])")
    p.add_argument("--fit-profiles", action="store_true", dest="fit_profiles",
                   default=None, help="run the power-law profile fit per jump")
    p.add_argument("--no-plots", action="store_false", dest="plots", default=None)


def _add_cojump_flags(p):
    p.add_argument("--tail-range", dest="tail_range", help="LO:HI sizes for the tail fit")
    p.add_argument("--max-cojump-size", type=int, dest="max_cojump_size")
    p.add_argument("--min-quadrant-size", type=int, dest="min_quadrant_size")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jumpscat",
        description="Detect intraday price jumps, embed them into wavelet "
                    "scattering coordinates, classify them, and analyze co-jumps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="jump detection on a returns panel")
    _add_common(p)
    _add_detect_flags(p)
    p.add_argument("--returns", required=True, help="returns CSV")
    p.add_argument("--exclusions", help="exclusion calendar (one date per line)")

    p = sub.add_parser("embed", help="scattering embedding of detected jumps")
    _add_common(p)
    p.add_argument("--jumps", help="jump records (default: <out>/jumps.jsonl)")

    p = sub.add_parser("score", help="direction fit, scores, classes, profiles")
    _add_common(p)
    _add_score_flags(p)
    p.add_argument("--jumps", help="embedded records (default: <out>/embedded.jsonl)")

    p = sub.add_parser("cojump", help="co-jump grouping and statistics")
    _add_common(p)
    _add_cojump_flags(p)
    p.add_argument("--jumps", help="scored records (default: <out>/scored.jsonl)")

    p = sub.add_parser("report", help="summary tables and plots from artifacts")
    _add_common(p)

    p = sub.add_parser("run", help="full pipeline with per-stage resume")
    _add_common(p)
    _add_detect_flags(p)
    _add_score_flags(p)
    _add_cojump_flags(p)
    p.add_argument("--returns", required=True)
    p.add_argument("--exclusions")

    p = sub.add_parser("synth", help="synthetic generators")
    synth_sub = p.add_subparsers(dest="synth_kind", required=True)
    b = synth_sub.add_parser("benchmark", help="asymmetry-swept jump windows")
    _add_common(b)
    b.add_argument("--n", type=int, default=100, help="number of series")
    g = synth_sub.add_parser("branching", help="avalanche-size sample")
    _add_common(g)
    g.add_argument("--law", choices=["uniform", "power"], default="uniform")
    g.add_argument("--eps-min", type=float, default=0.1, dest="eps_min")
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--n", type=int, default=100_000)
    g.add_argument("--tail-range", dest="tail_range")
    return parser


def _csv_floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"bad quantile list {text!r}") from None


def _config_from_args(args):
    overrides = {}
    for key in PipelineConfig.field_names():
        if hasattr(args, key) and getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    for key in ("quantiles_d1", "grid_quantiles"):
        if key in overrides and isinstance(overrides[key], str):
            overrides[key] = _csv_floats(overrides[key])
    return PipelineConfig.load(path=getattr(args, "config", None), overrides=overrides)


def _load_sector_map(path):
    mapping = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if len(row) >= 2 and row[0].strip() and not row[0].startswith("#"):
                if row[0].strip().lower() == "ticker":
                    continue
                mapping[row[0].strip()] = row[1].strip()
    if not mapping:
        raise DataError(f"{path}: no ticker,sector rows")
    return mapping


def _log(msg):
    print(msg, file=sys.stderr)


def _dispatch(args):
    cfg = _config_from_args(args)
    import os
    os.makedirs(args.out, exist_ok=True)

    if args.command == "detect":
        sector_map = _load_sector_map(args.sector_map) if args.sector_map else None
        _, summary = pipeline.run_detect(cfg, args.returns, args.out,
                                         exclusions_path=args.exclusions,
                                         sector_map=sector_map)
        _log(f"detected {summary['n_events']} jump events "
             f"({summary['n_raw']} raw, {summary['n_initial']} initial)")
    elif args.command == "embed":
        events, _ = pipeline.run_embed(cfg, args.out, jumps_path=args.jumps)
        _log(f"embedded {len(events)} events")
    elif args.command == "score":
        events, model, _ = pipeline.run_score(cfg, args.out,
                                              embedded_path=args.jumps,
                                              news_path=args.news)
        _log(f"scored {len(events)} events "
             f"(explained variance {model.explained_variance:.3f})")
    elif args.command == "cojump":
        cojumps, summary = pipeline.run_cojump(cfg, args.out, scored_path=args.jumps)
        _log(f"{summary['n_proper']} co-jumps of size >= 2 "
             f"({summary['n_singles']} singles)")
    elif args.command == "report":
        payload = pipeline.run_report(cfg, args.out)
        _log(f"report written ({payload['n_events']} events)")
    elif args.command == "run":
        sector_map = _load_sector_map(args.sector_map) if args.sector_map else None
        pipeline.run_pipeline(cfg, args.returns, args.out,
                              news_path=args.news, exclusions_path=args.exclusions,
                              sector_map=sector_map, log=_log)
        _log("pipeline complete")
    elif args.command == "synth":
        if args.synth_kind == "benchmark":
            events = pipeline.run_synth_benchmark(cfg, args.out, n_series=args.n,
                                                  seed=args.seed)
            _log(f"wrote {len(events)} benchmark windows")
        else:
            sample = pipeline.run_synth_branching(cfg, args.out, law=args.law,
                                                  eps_min=args.eps_min,
                                                  gamma=args.gamma, n=args.n,
                                                  seed=args.seed)
            _log(f"simulated {len(sample.sizes)} avalanches "
                 f"({sample.cap_hits} cap hits)")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        return EXIT_CONFIG
    except DataError as exc:
        _log(f"data error: {exc}")
        return EXIT_DATA
    except NumericalError as exc:
        _log(f"numerical failure: {exc}")
        return EXIT_NUMERICAL
    except JumpscatError as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
