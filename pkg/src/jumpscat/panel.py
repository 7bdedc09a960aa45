"""Minute-bar return panels, news feeds and exclusion calendars.

A :class:`ReturnPanel` is the canonical input of the pipeline: a dense
(ticker, minute) matrix of 1-minute log-returns on a shared minute grid,
with NaN as the explicit missing marker (never silently zero-filled).
Panels are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AlignmentError, DataError, ParseError

DEFAULT_SESSION = (10 * 60 + 30, 15 * 60)  # 10:30-15:00, closed interval


def _parse_date(text, line):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"bad date {text!r}", line=line) from None


def _parse_minute(text, line):
    """HH:MM (or HH:MM:00) -> minutes since midnight."""
    parts = text.strip().split(":")
    if len(parts) not in (2, 3):
        raise ParseError(f"bad time {text!r}", line=line)
    try:
        h, m = int(parts[0]), int(parts[1])
        s = int(parts[2]) if len(parts) == 3 else 0
    except ValueError:
        raise ParseError(f"bad time {text!r}", line=line) from None
    if not (0 <= h < 24 and 0 <= m < 60) or s != 0:
        raise ParseError(f"time {text!r} is not minute-aligned", line=line)
    return h * 60 + m


def parse_session(text):
    """Parse a session string like '10:30-15:00' into minute bounds."""
    try:
        lo, hi = text.split("-")
        bounds = (_parse_minute(lo, None), _parse_minute(hi, None))
    except (ValueError, ParseError):
        raise DataError(f"bad session window {text!r}") from None
    if bounds[0] >= bounds[1]:
        raise DataError(f"empty session window {text!r}")
    return bounds


def minute_str(minute_of_day):
    return f"{minute_of_day // 60:02d}:{minute_of_day % 60:02d}"


@dataclass(frozen=True)
class ReturnPanel:
    """Per-stock, per-minute rescaled-return matrix plus calendar metadata.

    ``returns[i, c]`` is the 1-minute log-return of ``tickers[i]`` at column
    ``c``; columns run chronologically over all trading minutes.  NaN marks a
    missing cell.  ``excluded_days`` is a reversible mask: the underlying data
    are never altered.
    """

    tickers: tuple
    dates: tuple  # sorted unique trading days
    day_index: np.ndarray  # (M,) int, index into dates per column
    minute_of_day: np.ndarray  # (M,) int, minutes since midnight
    returns: np.ndarray  # (n_tickers, M) float64, NaN = missing
    session_window: tuple = DEFAULT_SESSION
    excluded_days: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        n, m = self.returns.shape
        if n != len(self.tickers) or m != len(self.day_index) or m != len(self.minute_of_day):
            raise DataError("panel shape mismatch")
        # strictly increasing minutes within each day
        same_day = np.diff(self.day_index) == 0
        if np.any(np.diff(self.minute_of_day)[same_day] <= 0):
            raise AlignmentError("minute grid not strictly increasing within a day")

    @property
    def n_tickers(self):
        return len(self.tickers)

    @property
    def n_minutes(self):
        return self.returns.shape[1]

    @property
    def in_session(self):
        lo, hi = self.session_window
        return (self.minute_of_day >= lo) & (self.minute_of_day <= hi)

    @property
    def active_columns(self):
        """Columns on non-excluded trading days."""
        if not self.excluded_days:
            return np.ones(self.n_minutes, dtype=bool)
        excluded = np.array([d in self.excluded_days for d in self.dates])
        return ~excluded[self.day_index]

    @property
    def active_days(self):
        return [d for d in self.dates if d not in self.excluded_days]

    def ticker_index(self, ticker):
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise DataError(f"unknown ticker {ticker!r}") from None

    def column_timestamp(self, col):
        return self.dates[self.day_index[col]], int(self.minute_of_day[col])

    def minutes_per_day(self):
        """Typical number of grid minutes per trading day (median count)."""
        counts = np.bincount(self.day_index, minlength=len(self.dates))
        return int(np.median(counts[counts > 0]))


@dataclass(frozen=True)
class NewsFeed:
    """Sorted, deduplicated news timestamps; ticker None means market-wide."""

    events: tuple  # of (date, minute_of_day, ticker-or-None)

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class ExclusionCalendar:
    """Trading dates to mask out plus the co-jump size cut."""

    excluded_dates: frozenset
    max_cojump_size: int = 250


_RETURNS_SCHEMA = {"date": "date", "time": "time", "ticker": "ticker",
                   "return": "return", "price": "price"}


def load_panel(path, schema=None, session_window=DEFAULT_SESSION):
    """Load a returns CSV into a ReturnPanel.

    Expects header columns date,time,ticker and either return or price
    (prices are differenced to within-day log-returns; each day's first
    minute stays missing).  Column names can be remapped via ``schema``.
    """
    colmap = dict(_RETURNS_SCHEMA)
    if schema:
        colmap.update(schema)

    cells = {}  # (date, minute, ticker) -> (value, line)
    dates = set()
    minutes_by_date = {}
    tickers = set()

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        pos = {name: header.index(colmap[name]) for name in ("date", "time", "ticker")
               if colmap[name] in header}
        if len(pos) != 3:
            missing = [colmap[n] for n in ("date", "time", "ticker") if n not in pos]
            raise DataError(f"{path}: missing columns {missing}")
        value_col = price_mode = None
        if colmap["return"] in header:
            value_col = header.index(colmap["return"])
            price_mode = False
        elif colmap["price"] in header:
            value_col = header.index(colmap["price"])
            price_mode = True
        else:
            raise DataError(f"{path}: need a '{colmap['return']}' or '{colmap['price']}' column")

        for line, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) <= max(*pos.values(), value_col):
                raise ParseError("too few fields", line=line)
            date = _parse_date(row[pos["date"]], line)
            minute = _parse_minute(row[pos["time"]], line)
            ticker = row[pos["ticker"]].strip()
            if not ticker:
                raise ParseError("empty ticker", line=line)
            raw = row[value_col].strip()
            if raw == "" or raw.lower() == "nan":
                value = np.nan  # explicit missing marker
            else:
                try:
                    value = float(raw)
                except ValueError:
                    raise ParseError(
                        f"non-numeric {'price' if price_mode else 'return'} {raw!r}",
                        line=line) from None
                if not np.isfinite(value):
                    raise ParseError(f"non-finite value {raw!r}", line=line)
            key = (date, minute, ticker)
            if key in cells:
                raise AlignmentError(
                    f"line {line}: duplicate cell for {ticker} at {date} {minute_str(minute)} "
                    f"(first seen on line {cells[key][1]})")
            cells[key] = (value, line)
            dates.add(date)
            minutes_by_date.setdefault(date, set()).add(minute)
            tickers.add(ticker)

    if not cells:
        raise DataError(f"{path}: no data rows")

    date_list = sorted(dates)
    ticker_list = sorted(tickers)
    grid = [(d, m) for d in date_list for m in sorted(minutes_by_date[d])]
    col_of = {dm: c for c, dm in enumerate(grid)}
    day_index = np.array([date_list.index(d) for d, _ in grid], dtype=np.int64)
    minute_of_day = np.array([m for _, m in grid], dtype=np.int64)

    values = np.full((len(ticker_list), len(grid)), np.nan)
    tick_of = {t: i for i, t in enumerate(ticker_list)}
    for (date, minute, ticker), (value, _) in cells.items():
        values[tick_of[ticker], col_of[(date, minute)]] = value

    if price_mode:
        rets = np.full_like(values, np.nan)
        same_day = np.diff(day_index) == 0
        prev_ok = np.where(same_day)[0]  # columns c where c and c+1 share a day
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = values[:, prev_ok + 1] / values[:, prev_ok]
            rets[:, prev_ok + 1] = np.where(ratio > 0, np.log(ratio), np.nan)
        values = rets

    return ReturnPanel(
        tickers=tuple(ticker_list),
        dates=tuple(date_list),
        day_index=day_index,
        minute_of_day=minute_of_day,
        returns=values,
        session_window=tuple(session_window),
    )


def write_panel(panel, path):
    """Write a panel back to CSV (return schema); round-trips bitwise."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "time", "ticker", "return"])
        for c in range(panel.n_minutes):
            date, minute = panel.column_timestamp(c)
            for i, ticker in enumerate(panel.tickers):
                v = panel.returns[i, c]
                writer.writerow([date.isoformat(), minute_str(minute), ticker,
                                 "" if np.isnan(v) else repr(float(v))])


def load_news(path):
    """Load a news CSV (date,time[,ticker]) into a sorted, deduplicated feed."""
    events = set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            return NewsFeed(events=())
        try:
            d_col, t_col = header.index("date"), header.index("time")
        except ValueError:
            raise DataError(f"{path}: news file needs date,time[,ticker] columns") from None
        k_col = header.index("ticker") if "ticker" in header else None
        for line, row in enumerate(reader, start=2):
            if not row or all(not f.strip() for f in row):
                continue
            date = _parse_date(row[d_col], line)
            minute = _parse_minute(row[t_col], line)
            ticker = None
            if k_col is not None and k_col < len(row) and row[k_col].strip():
                ticker = row[k_col].strip()
            events.add((date, minute, ticker))
    key = lambda e: (e[0], e[1], e[2] or "")
    return NewsFeed(events=tuple(sorted(events, key=key)))


def load_exclusions(path, max_cojump_size=250):
    """Load an exclusion calendar: one ISO date per line, '#' comments allowed."""
    dates = set()
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if text:
                dates.add(_parse_date(text, line_no))
    return ExclusionCalendar(excluded_dates=frozenset(dates),
                             max_cojump_size=max_cojump_size)


def apply_exclusions(panel, calendar):
    """Mask the calendar's dates; returns a new panel, data untouched."""
    unknown = calendar.excluded_dates - set(panel.dates)
    if unknown:
        import warnings
        warnings.warn(f"{len(unknown)} exclusion dates not in panel "
                      f"(e.g. {sorted(unknown)[0]})", stacklevel=2)
    masked = calendar.excluded_dates & set(panel.dates)
    return replace(panel, excluded_days=frozenset(panel.excluded_days | masked))


def clear_exclusions(panel):
    """Drop the exclusion mask, restoring the original active set."""
    return replace(panel, excluded_days=frozenset())
