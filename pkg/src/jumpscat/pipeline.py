"""Stage orchestration: detect -> embed -> score -> cojump -> report.

Each stage persists its artifacts (line-delimited JSON records and CSV
tables) tagged with the resolved config hash.  A stage whose outputs all
exist with the current hash is skipped on re-runs, so deleting one stage's
outputs recomputes exactly that stage.  Nothing written here contains a
timestamp; identical config + inputs give byte-identical artifacts.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cojump as cj_mod
from . import detect as detect_mod
from . import records, score as score_mod, svg, synth as synth_mod
from .config import PipelineConfig
from .errors import DataError, TailRangeError
from .panel import (apply_exclusions, load_exclusions, load_news, load_panel,
                    minute_str, parse_session)
from .wavelets import build_filter_bank, embed

STAGE_OUTPUTS = {
    "detect": ("jumps.jsonl", "detect_summary.json"),
    "embed": ("embedded.jsonl",),
    "score": ("model.json", "scored.jsonl", "thresholds.json",
              "profiles_d1.csv", "profiles_d2.csv", "profiles_d3.csv",
              "projection_mr.csv", "projection_tr.csv"),
    "cojump": ("cojumps.jsonl", "size_distribution.csv", "tail_fit.json",
               "quadrants.csv", "calendar.csv", "sign_alignment.csv",
               "cojump_summary.json"),
    "report": ("report.json",),
}


def detect_config(cfg):
    return detect_mod.DetectConfig(
        threshold=cfg.threshold, threshold_mode=cfg.threshold_mode,
        gumbel_alpha=cfg.gumbel_alpha, prune_window=cfg.prune_window,
        halflife_days=cfg.halflife_days, winsor_k=cfg.winsor_k,
        init_days=cfg.init_days, min_days=cfg.min_days,
        min_slot_obs=cfg.min_slot_obs)


def bank_from_config(cfg):
    return build_filter_bank(J=cfg.wavelet_scales, order=cfg.wavelet_order,
                             boundary=cfg.boundary, mr_support=cfg.mr_support,
                             mr_peak=cfg.mr_peak, mr_width=cfg.mr_width)


def stage_fresh(out_dir, stage, config_hash):
    """True when every artifact of the stage exists with the current hash."""
    for name in STAGE_OUTPUTS[stage]:
        path = os.path.join(out_dir, name)
        if records.file_config_hash(path) != config_hash:
            return False
    return True


def sector_average_panel(panel, sector_map):
    """Average member-ticker returns per sector into a sector-level panel."""
    sectors = {}
    for ticker, sector in sector_map.items():
        if ticker in panel.tickers:
            sectors.setdefault(sector, []).append(panel.ticker_index(ticker))
    if not sectors:
        raise DataError("sector map matches no panel ticker")
    names = sorted(sectors)
    rows = np.full((len(names), panel.n_minutes), np.nan)
    for k, name in enumerate(names):
        block = panel.returns[sectors[name]]
        with np.errstate(invalid="ignore"):
            counts = np.sum(np.isfinite(block), axis=0)
            sums = np.nansum(np.where(np.isfinite(block), block, 0.0), axis=0)
        rows[k, counts > 0] = sums[counts > 0] / counts[counts > 0]
    from dataclasses import replace
    return replace(panel, tickers=tuple(names), returns=rows)


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def run_detect(cfg, returns_path, out_dir, exclusions_path=None, sector_map=None):
    panel = load_panel(returns_path, session_window=parse_session(cfg.session))
    max_size = cfg.max_cojump_size
    if exclusions_path:
        calendar = load_exclusions(exclusions_path, max_cojump_size=max_size)
        panel = apply_exclusions(panel, calendar)
    if sector_map:
        panel = sector_average_panel(panel, sector_map)

    dcfg = detect_config(cfg)
    scores = detect_mod.deseasonalize(panel, dcfg)
    raw = detect_mod.detect_jumps(scores, dcfg)
    pruned = detect_mod.prune_clusters(raw, window=cfg.prune_window)
    events, skipped = detect_mod.extract_windows(scores, pruned)

    h = cfg.hash()
    records.write_jsonl(os.path.join(out_dir, "jumps.jsonl"),
                        (records.event_to_record(e) for e in events),
                        h, stage="detect")
    summary = {
        "n_raw": len(raw), "n_initial": len(pruned), "n_events": len(events),
        "skipped": skipped,
        "n_tickers": panel.n_tickers,
        "n_days": len(panel.dates),
        "n_active_days": len(panel.active_days),
    }
    records.write_json(os.path.join(out_dir, "detect_summary.json"), summary, h)
    return events, summary


def run_embed(cfg, out_dir, jumps_path=None):
    jumps_path = jumps_path or os.path.join(out_dir, "jumps.jsonl")
    _, events = records.read_events(jumps_path)
    bank = bank_from_config(cfg)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            embeddings = list(pool.map(lambda e: embed(e, bank), events))
    else:
        embeddings = [embed(e, bank) for e in events]
    for e, emb in zip(events, embeddings):
        e.embedding = emb
    h = cfg.hash()
    records.write_jsonl(os.path.join(out_dir, "embedded.jsonl"),
                        (records.event_to_record(e) for e in events),
                        h, stage="embed", extra_meta={"bank": bank.metadata()})
    return events, bank


def _event_category(e, sizes_by_minute):
    if e.news_related:
        return "news"
    if sizes_by_minute.get((e.day, e.minute_of_day), 0) > 2:
        return "cojump"
    return "other"


def run_score(cfg, out_dir, embedded_path=None, news_path=None):
    embedded_path = embedded_path or os.path.join(out_dir, "embedded.jsonl")
    _, events = records.read_events(embedded_path)
    if not events:
        raise DataError("no events to score")
    bank = bank_from_config(cfg)

    asym = [score_mod.asymmetry(e) for e in events]
    model = score_mod.fit_directions([e.embedding for e in events],
                                     asymmetries=asym, block=cfg.pca_block,
                                     min_events=min(cfg.min_fit_events, len(events)))
    score_mod.score_events(events, model, bank, fit_profiles=cfg.fit_profiles)

    if news_path:
        feed = load_news(news_path)
        score_mod.match_news(events, feed, window_minutes=cfg.news_window)

    qcfg = score_mod.QuantileConfig(d1=cfg.quantiles_d1, d23=cfg.quantiles_d23,
                                    grid=cfg.grid_quantiles)
    _, thresholds = score_mod.classify(events, model, qcfg)

    h = cfg.hash()
    records.write_json(os.path.join(out_dir, "model.json"),
                       records.model_to_dict(model, bank.metadata()), h)
    records.write_jsonl(os.path.join(out_dir, "scored.jsonl"),
                        (records.event_to_record(e) for e in events),
                        h, stage="score")
    records.write_json(os.path.join(out_dir, "thresholds.json"), {
        "d1": [float(v) for v in thresholds.d1],
        "d2": [float(v) for v in thresholds.d2],
        "d3": [float(v) for v in thresholds.d3],
        "grid_d1": [float(v) for v in thresholds.grid_d1],
        "grid_d2": [float(v) for v in thresholds.grid_d2],
        "grid_d3": [float(v) for v in thresholds.grid_d3],
    }, h)

    t_axis = list(range(-len(events[0].window) // 2 + 1, len(events[0].window) // 2 + 1))
    for binning, fname in (("d1", "profiles_d1.csv"), ("d2", "profiles_d2.csv"),
                           ("d3", "profiles_d3.csv")):
        rows = []
        for pr in score_mod.average_profiles(events, binning):
            if pr.count == 0:
                rows.append([pr.bin_id, 0, None, None, None])
                continue
            for t, a, s in zip(t_axis, pr.mean_abs, pr.mean_aligned):
                rows.append([pr.bin_id, pr.count, t, a, s])
        header = ["bin", "count", "t", "mean_abs", "mean_aligned"]
        records.write_table(os.path.join(out_dir, fname), header, rows, h)

    sizes_by_minute = {}
    for e in events:
        key = (e.day, e.minute_of_day)
        sizes_by_minute[key] = sizes_by_minute.get(key, 0) + 1
    for second, fname in (("d2", "projection_mr.csv"), ("d3", "projection_tr.csv")):
        rows = [[e.ticker, e.day.isoformat(), minute_str(e.minute_of_day),
                 e.d1, getattr(e, second), _event_category(e, sizes_by_minute)]
                for e in events]
        records.write_table(os.path.join(out_dir, fname),
                            ["ticker", "date", "time", "d1", second, "category"],
                            rows, h)
        if cfg.plots:
            xs = [e.d1 for e in events]
            ys = [getattr(e, second) for e in events]
            cats = [_event_category(e, sizes_by_minute) for e in events]
            label = "mean-reversion D2" if second == "d2" else "trend D3"
            thr2 = thresholds.grid_d2 if second == "d2" else thresholds.grid_d3
            svg.scatter_svg(os.path.join(out_dir, fname.replace(".csv", ".svg")),
                            xs, ys, cats,
                            title=f"reflexivity vs {label}",
                            xlabel="reflexivity D1", ylabel=label,
                            config_hash=h,
                            vlines=[float(v) for v in thresholds.grid_d1],
                            hlines=[float(v) for v in thr2])
    return events, model, thresholds


def run_cojump(cfg, out_dir, scored_path=None):
    scored_path = scored_path or os.path.join(out_dir, "scored.jsonl")
    _, events = records.read_events(scored_path)
    cojumps, drops = cj_mod.group(events, max_cojump_size=cfg.max_cojump_size)
    cj_mod.indicators(cojumps, min_pool=cfg.min_pool)
    for cj in cojumps:
        if cj.size >= 2:
            cj_mod.correlation_rho(cj)

    h = cfg.hash()
    records.write_jsonl(os.path.join(out_dir, "cojumps.jsonl"),
                        (records.cojump_to_record(c) for c in cojumps),
                        h, stage="cojump", extra_meta=drops)

    dist_all = cj_mod.size_distribution(cojumps)
    dist_endo = cj_mod.size_distribution(cojumps, restrict="endogenous_min")
    rows = []
    for kind, dist in (("all", dist_all), ("endogenous_min", dist_endo)):
        for s, c, p in zip(dist.sizes, dist.counts, dist.ccdf):
            rows.append([kind, s, c, p])
    records.write_table(os.path.join(out_dir, "size_distribution.csv"),
                        ["subset", "size", "count", "ccdf"], rows, h)

    tail_payload = {}
    try:
        fit = cj_mod.fit_tail_exponent([c.size for c in cojumps],
                                       fit_range=cfg.tail_range_pair(),
                                       min_obs=cfg.tail_min_obs)
        tail_payload = {"tau": fit.tau, "stderr": fit.stderr,
                        "tau_mle": fit.tau_mle, "stderr_mle": fit.stderr_mle,
                        "fit_range": list(fit.fit_range), "n_obs": fit.n_obs,
                        "method": fit.method}
    except TailRangeError as exc:
        tail_payload = {"skipped": str(exc)}
    records.write_json(os.path.join(out_dir, "tail_fit.json"), tail_payload, h)

    quad_rows = [[c.cojump_id, c.size, c.mean_d1, c.min_d1, c.max_d1,
                  c.sigma_size, c.mean_norm, c.min_norm, c.quadrant,
                  c.rho, int(c.news_related)]
                 for c in cojumps if c.size >= cfg.min_quadrant_size]
    records.write_table(os.path.join(out_dir, "quadrants.csv"),
                        ["cojump_id", "size", "mean_d1", "min_d1", "max_d1",
                         "sigma_size", "mean_norm", "min_norm", "quadrant",
                         "rho", "news_related"],
                        quad_rows, h)

    cal_rows = [[c.day.isoformat(), minute_str(c.minute_of_day), c.size,
                 int(c.news_related)] for c in cojumps]
    records.write_table(os.path.join(out_dir, "calendar.csv"),
                        ["date", "time", "size", "news_related"], cal_rows, h)

    align = cj_mod.sign_alignment(cojumps)
    records.write_table(os.path.join(out_dir, "sign_alignment.csv"),
                        ["size", "mean_abs_sign"],
                        [[s, v] for s, v in align.items()], h)

    quad_counts = {}
    for c in cojumps:
        if c.quadrant:
            quad_counts[c.quadrant] = quad_counts.get(c.quadrant, 0) + 1
    summary = {
        "n_cojumps": len(cojumps),
        "n_proper": sum(1 for c in cojumps if c.size >= 2),
        "n_singles": sum(1 for c in cojumps if c.size == 1),
        "dropped": drops,
        "quadrant_counts": quad_counts,
        "news_fraction": (float(np.mean([c.news_related for c in cojumps]))
                          if cojumps else 0.0),
    }
    records.write_json(os.path.join(out_dir, "cojump_summary.json"), summary, h)
    return cojumps, summary


def run_report(cfg, out_dir):
    h = cfg.hash()
    detect_summary = records.read_json(os.path.join(out_dir, "detect_summary.json")) \
        if os.path.exists(os.path.join(out_dir, "detect_summary.json")) else {}
    cj_summary = records.read_json(os.path.join(out_dir, "cojump_summary.json")) \
        if os.path.exists(os.path.join(out_dir, "cojump_summary.json")) else {}
    tail = records.read_json(os.path.join(out_dir, "tail_fit.json")) \
        if os.path.exists(os.path.join(out_dir, "tail_fit.json")) else {}
    _, events = records.read_events(os.path.join(out_dir, "scored.jsonl"))

    class_counts = {}
    for e in events:
        if e.class_label:
            class_counts[e.class_label] = class_counts.get(e.class_label, 0) + 1
    news_fraction = (float(np.mean([bool(e.news_related) for e in events]))
                     if events else 0.0)
    d2_positive = (float(np.mean([e.d2 > 0 for e in events])) if events else 0.0)

    payload = {
        "n_events": len(events),
        "news_fraction": news_fraction,
        "d2_positive_fraction": d2_positive,
        "class_counts": class_counts,
        "detect": {k: v for k, v in detect_summary.items() if k != "config_hash"},
        "cojump": {k: v for k, v in cj_summary.items() if k != "config_hash"},
        "tail_fit": {k: v for k, v in tail.items() if k != "config_hash"},
    }
    records.write_json(os.path.join(out_dir, "report.json"), payload, h)

    quad_path = os.path.join(out_dir, "quadrants.csv")
    if os.path.exists(quad_path) and cfg.plots:
        xs, ys, cats = [], [], []
        with open(quad_path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        header = lines[0].strip().split(",")
        idx = {name: k for k, name in enumerate(header)}
        for line in lines[1:]:
            cells = line.rstrip("\n").split(",")
            if cells[idx["mean_norm"]] and cells[idx["min_norm"]]:
                xs.append(float(cells[idx["mean_norm"]]))
                ys.append(float(cells[idx["min_norm"]]))
                cats.append(cells[idx["quadrant"]])
        if xs:
            svg.scatter_svg(os.path.join(out_dir, "quadrants.svg"), xs, ys, cats,
                            title="co-jump reflexivity indicators",
                            xlabel="mean D1 / sigma", ylabel="min D1 / sigma",
                            config_hash=h, vlines=[0.0], hlines=[0.0])

    if cfg.plots:
        dist_path = os.path.join(out_dir, "size_distribution.csv")
        if os.path.exists(dist_path):
            xs, ys = [], []
            with open(dist_path) as fh:
                lines = [ln for ln in fh if not ln.startswith("#")]
            for line in lines[1:]:
                subset, s, _, p = line.rstrip("\n").split(",")
                if subset == "all" and float(p) > 0 and int(s) > 0:
                    xs.append(float(s))
                    ys.append(float(p))
            if xs:
                svg.scatter_svg(os.path.join(out_dir, "size_distribution.svg"),
                                xs, ys, ["other"] * len(xs),
                                title="co-jump size CCDF", xlabel="size S",
                                ylabel="P(size >= S)", config_hash=h,
                                logx=True, logy=True)
    return payload


def run_pipeline(cfg, returns_path, out_dir, news_path=None, exclusions_path=None,
                 sector_map=None, log=lambda msg: None):
    """All stages with per-stage resume; returns the report payload."""
    os.makedirs(out_dir, exist_ok=True)
    h = cfg.hash()
    if stage_fresh(out_dir, "detect", h):
        log("detect: up-to-date")
    else:
        log("detect: running")
        run_detect(cfg, returns_path, out_dir, exclusions_path=exclusions_path,
                   sector_map=sector_map)
    if stage_fresh(out_dir, "embed", h):
        log("embed: up-to-date")
    else:
        log("embed: running")
        run_embed(cfg, out_dir)
    if stage_fresh(out_dir, "score", h):
        log("score: up-to-date")
    else:
        log("score: running")
        run_score(cfg, out_dir, news_path=news_path)
    if stage_fresh(out_dir, "cojump", h):
        log("cojump: up-to-date")
    else:
        log("cojump: running")
        run_cojump(cfg, out_dir)
    if stage_fresh(out_dir, "report", h):
        log("report: up-to-date")
        return records.read_json(os.path.join(out_dir, "report.json"))
    log("report: running")
    return run_report(cfg, out_dir)


def run_synth_benchmark(cfg, out_dir, n_series=None, seed=None):
    spec = synth_mod.BenchmarkSpec(n_series=n_series or 100, seed=seed if seed is not None else cfg.seed)
    events = synth_mod.generate_benchmark(spec)
    h = cfg.hash()
    os.makedirs(out_dir, exist_ok=True)
    records.write_jsonl(os.path.join(out_dir, "jumps.jsonl"),
                        (records.event_to_record(e) for e in events),
                        h, stage="synth-benchmark",
                        extra_meta={"n_series": spec.n_series, "seed": spec.seed})
    return events


def run_synth_branching(cfg, out_dir, law="uniform", eps_min=0.1, gamma=1.0,
                        n=100_000, seed=None):
    spec = synth_mod.BranchingSpec(law=law, eps_min=eps_min, gamma=gamma,
                                   n_avalanches=n,
                                   seed=seed if seed is not None else cfg.seed)
    sample = synth_mod.simulate_branching(spec)
    h = cfg.hash()
    os.makedirs(out_dir, exist_ok=True)
    dist = cj_mod.size_distribution(sample.sizes)
    records.write_table(os.path.join(out_dir, "sizes.csv"),
                        ["size", "count", "ccdf"],
                        [[s, c, p] for s, c, p in zip(dist.sizes, dist.counts, dist.ccdf)],
                        h)
    payload = {"law": law, "eps_min": eps_min, "gamma": gamma, "n": n,
               "seed": spec.seed, "cap_hits": sample.cap_hits}
    try:
        fit = cj_mod.fit_tail_exponent(sample.sizes, fit_range=cfg.tail_range_pair(),
                                       min_obs=cfg.tail_min_obs)
        payload.update({"tau": fit.tau, "stderr": fit.stderr,
                        "tau_mle": fit.tau_mle})
    except TailRangeError as exc:
        payload["tail_fit_skipped"] = str(exc)
    records.write_json(os.path.join(out_dir, "branching_summary.json"), payload, h)
    return sample
