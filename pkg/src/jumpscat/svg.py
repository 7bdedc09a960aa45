"""Tiny dependency-free SVG scatter plots for the report stage.

Deterministic output: fixed float formatting, no timestamps, config hash in a
leading comment.
"""

from __future__ import annotations

import math

_WIDTH, _HEIGHT = 640, 480
_MARGIN = 56
_PALETTE = {
    "news": "#1f77b4",       # blue: news-related
    "cojump": "#ff7f0e",     # orange: in a co-jump of size > 2, no news
    "other": "#2ca02c",      # green: everything else
    "LL": "#d62728", "LR": "#ff7f0e", "UR": "#1f77b4", "gray": "#bbbbbb",
}


def _fmt(x):
    return f"{x:.3f}"


def _ticks(lo, hi, n=5):
    if not math.isfinite(lo) or not math.isfinite(hi) or lo == hi:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


class _Frame:
    def __init__(self, xs, ys, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        tx = [math.log10(x) for x in xs] if logx else list(xs)
        ty = [math.log10(y) for y in ys] if logy else list(ys)
        self.x_lo, self.x_hi = min(tx), max(tx)
        self.y_lo, self.y_hi = min(ty), max(ty)
        if self.x_lo == self.x_hi:
            self.x_lo, self.x_hi = self.x_lo - 0.5, self.x_hi + 0.5
        if self.y_lo == self.y_hi:
            self.y_lo, self.y_hi = self.y_lo - 0.5, self.y_hi + 0.5
        pad_x = 0.04 * (self.x_hi - self.x_lo)
        pad_y = 0.04 * (self.y_hi - self.y_lo)
        self.x_lo -= pad_x; self.x_hi += pad_x
        self.y_lo -= pad_y; self.y_hi += pad_y

    def px(self, x):
        t = math.log10(x) if self.logx else x
        u = (t - self.x_lo) / (self.x_hi - self.x_lo)
        return _MARGIN + u * (_WIDTH - 2 * _MARGIN)

    def py(self, y):
        t = math.log10(y) if self.logy else y
        u = (t - self.y_lo) / (self.y_hi - self.y_lo)
        return _HEIGHT - _MARGIN - u * (_HEIGHT - 2 * _MARGIN)

    def x_tick_values(self):
        vals = _ticks(self.x_lo, self.x_hi)
        return [10 ** v for v in vals] if self.logx else vals

    def y_tick_values(self):
        vals = _ticks(self.y_lo, self.y_hi)
        return [10 ** v for v in vals] if self.logy else vals


def scatter_svg(path, xs, ys, categories, title, xlabel, ylabel, config_hash,
                vlines=(), hlines=(), logx=False, logy=False, radius=2.5):
    """Write a categorical scatter plot; category names pick palette colors."""
    if len(xs) == 0:
        xs, ys, categories = [0.0], [0.0], ["other"]
    frame = _Frame(xs, ys, logx=logx, logy=logy)
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f"<!-- config_hash: {config_hash} -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.0f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    ax = (f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{_WIDTH - 2 * _MARGIN}" '
          f'height="{_HEIGHT - 2 * _MARGIN}" fill="none" stroke="#333" stroke-width="1"/>')
    parts.append(ax)
    for v in frame.x_tick_values():
        x = frame.px(v)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_HEIGHT - _MARGIN}" x2="{_fmt(x)}" '
                     f'y2="{_HEIGHT - _MARGIN + 5}" stroke="#333"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_HEIGHT - _MARGIN + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{v:.3g}</text>')
    for v in frame.y_tick_values():
        y = frame.py(v)
        parts.append(f'<line x1="{_MARGIN - 5}" y1="{_fmt(y)}" x2="{_MARGIN}" '
                     f'y2="{_fmt(y)}" stroke="#333"/>')
        parts.append(f'<text x="{_MARGIN - 8}" y="{_fmt(y + 3)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{v:.3g}</text>')
    for v in vlines:
        x = frame.px(v)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_MARGIN}" x2="{_fmt(x)}" '
                     f'y2="{_HEIGHT - _MARGIN}" stroke="#999" stroke-dasharray="4,3"/>')
    for v in hlines:
        y = frame.py(v)
        parts.append(f'<line x1="{_MARGIN}" y1="{_fmt(y)}" x2="{_WIDTH - _MARGIN}" '
                     f'y2="{_fmt(y)}" stroke="#999" stroke-dasharray="4,3"/>')
    for x, y, cat in zip(xs, ys, categories):
        color = _PALETTE.get(cat, "#555555")
        parts.append(f'<circle cx="{_fmt(frame.px(x))}" cy="{_fmt(frame.py(y))}" '
                     f'r="{radius}" fill="{color}" fill-opacity="0.6"/>')
    seen = []
    for cat in categories:
        if cat not in seen:
            seen.append(cat)
    for i, cat in enumerate(sorted(seen)):
        y = _MARGIN + 14 + 14 * i
        color = _PALETTE.get(cat, "#555555")
        parts.append(f'<circle cx="{_WIDTH - _MARGIN - 70}" cy="{y}" r="4" fill="{color}"/>')
        parts.append(f'<text x="{_WIDTH - _MARGIN - 60}" y="{y + 4}" '
                     f'font-family="sans-serif" font-size="11">{cat}</text>')
    parts.append(f'<text x="{_WIDTH / 2:.0f}" y="{_HEIGHT - 14}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">{xlabel}</text>')
    parts.append(f'<text x="16" y="{_HEIGHT / 2:.0f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" '
                 f'transform="rotate(-90 16 {_HEIGHT / 2:.0f})">{ylabel}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
