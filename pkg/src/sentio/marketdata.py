"""Price/sentiment ingestion, alignment and per-step feature extraction.

Everything here is immutable once built, so a single dataset can back any
number of environments.
"""
from __future__ import annotations

import csv
import enum
import io
import logging
import re
from dataclasses import dataclass, field
from datetime import date
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, EmptyInputError, InsufficientOverlapError, ParseError, WindowUnderflowError

log = logging.getLogger(__name__)

OHLCV_HEADER = ("Date", "Open", "High", "Low", "Close", "Volume")
SENTIMENT_HEADER = ("Date", "Symbol", "Label")
DEFAULT_WINDOW = 5

_ISO_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")


class SentimentLabel(enum.IntEnum):
    ExtremelyNegative = 0
    Negative = 1
    Neutral = 2
    Positive = 3
    ExtremelyPositive = 4

    @classmethod
    def parse(cls, text: str) -> "SentimentLabel":
        key = text.strip().lower()
        for label in cls:
            if label.name.lower() == key:
                return label
        raise ValueError(f"unknown sentiment label {text!r}")


def label_to_score(label: SentimentLabel) -> float:
    """Map the five ordered labels onto the uniform grid -1, -0.5, 0, 0.5, 1."""
    return -1.0 + int(label) / 2.0


def parse_date(text: str) -> date:
    text = text.strip()
    if not _ISO_DATE.match(text):
        raise ValueError(f"date {text!r} is not ISO-8601 (YYYY-MM-DD)")
    return date.fromisoformat(text)


@dataclass(frozen=True)
class OhlcvBar:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        prices = (self.open, self.high, self.low, self.close)
        if not all(np.isfinite(p) and p > 0 for p in prices):
            raise ValueError("prices must be finite and positive")
        if not (np.isfinite(self.volume) and self.volume >= 0):
            raise ValueError("volume must be finite and non-negative")
        lo, hi = min(self.open, self.close), max(self.open, self.close)
        if not (self.low <= lo and hi <= self.high):
            raise ValueError(
                f"OHLC ordering violated: low={self.low} open={self.open} "
                f"close={self.close} high={self.high}"
            )


def _check_header(row, expected, source):
    got = tuple(cell.strip() for cell in row)
    if got != expected:
        raise ParseError(f"expected header {','.join(expected)}, got {','.join(got)}", line=1, source=source)


def parse_ohlcv_csv(text: str, source: str | None = None) -> list[OhlcvBar]:
    """Parse ``Date,Open,High,Low,Close,Volume`` rows into bars sorted by date."""
    rows = [r for r in csv.reader(io.StringIO(text))]
    numbered = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not numbered:
        raise EmptyInputError(f"{source or 'OHLCV input'} is empty")
    _check_header(numbered[0][1], OHLCV_HEADER, source)
    bars = []
    seen: dict[date, int] = {}
    for lineno, row in numbered[1:]:
        if len(row) != len(OHLCV_HEADER):
            raise ParseError(f"expected {len(OHLCV_HEADER)} fields, got {len(row)}", lineno, source)
        try:
            day = parse_date(row[0])
            o, h, lo, c, v = (float(x) for x in row[1:])
            bar = OhlcvBar(day, o, h, lo, c, v)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        if day in seen:
            raise ParseError(f"duplicate date {day} (first seen on line {seen[day]})", lineno, source)
        seen[day] = lineno
        bars.append(bar)
    bars.sort(key=lambda b: b.date)
    return bars


def parse_sentiment_csv(text: str, source: str | None = None) -> dict[str, dict[date, SentimentLabel]]:
    """Parse ``Date,Symbol,Label`` rows into ``{symbol: {date: label}}``."""
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text))) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyInputError(f"{source or 'sentiment input'} is empty")
    _check_header(rows[0][1], SENTIMENT_HEADER, source)
    out: dict[str, dict[date, SentimentLabel]] = {}
    for lineno, row in rows[1:]:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno, source)
        try:
            day = parse_date(row[0])
            label = SentimentLabel.parse(row[2])
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        symbol = row[1].strip()
        per_symbol = out.setdefault(symbol, {})
        if day in per_symbol:
            raise ParseError(f"duplicate sentiment for {symbol} on {day}", lineno, source)
        per_symbol[day] = label
    return out


@dataclass(frozen=True)
class AssetSeries:
    symbol: str
    bars: tuple[OhlcvBar, ...]
    scores: tuple[float, ...]
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if len(self.bars) != len(self.scores):
            raise DataError(f"{self.symbol}: {len(self.bars)} bars but {len(self.scores)} scores")
        for a, b in zip(self.bars, self.bars[1:]):
            if not a.date < b.date:
                raise DataError(f"{self.symbol}: dates not strictly ascending at {b.date}")
        for s in self.scores:
            if not -1.0 <= s <= 1.0:
                raise DataError(f"{self.symbol}: sentiment score {s} outside [-1, 1]")

    def __len__(self):
        return len(self.bars)

    @cached_property
    def dates(self) -> tuple[date, ...]:
        return tuple(b.date for b in self.bars)

    @cached_property
    def ohlcv(self) -> np.ndarray:
        arr = np.array([(b.open, b.high, b.low, b.close, b.volume) for b in self.bars], dtype=float)
        arr = arr.reshape(len(self.bars), 5)
        arr.setflags(write=False)
        return arr

    @cached_property
    def closes(self) -> np.ndarray:
        return self.ohlcv[:, 3]

    @cached_property
    def score_array(self) -> np.ndarray:
        arr = np.array(self.scores, dtype=float)
        arr.setflags(write=False)
        return arr

    def window_table(self, w: int = DEFAULT_WINDOW) -> np.ndarray:
        """Flattened ``normalize_window`` for every index (NaN rows before ``w-1``)."""
        key = ("window", w)
        if key not in self._cache:
            table = np.full((len(self), w * 5), np.nan)
            for t in range(w - 1, len(self)):
                table[t] = normalize_window(self, t, w).ravel()
            table.setflags(write=False)
            self._cache[key] = table
        return self._cache[key]

    def volatility_table(self, w: int = DEFAULT_WINDOW) -> np.ndarray:
        key = ("vol", w)
        if key not in self._cache:
            table = np.array([rolling_volatility(self, t, w) for t in range(len(self))])
            table.setflags(write=False)
            self._cache[key] = table
        return self._cache[key]


def merge_series(symbol: str, bars: Sequence[OhlcvBar], sentiment: Mapping[date, SentimentLabel]) -> AssetSeries:
    """Attach a score to every bar; days without sentiment get a neutral 0."""
    scores = [label_to_score(sentiment[b.date]) if b.date in sentiment else 0.0 for b in bars]
    return AssetSeries(symbol, tuple(bars), tuple(scores))


@dataclass(frozen=True)
class MarketDataset:
    assets: tuple[AssetSeries, ...]

    def __post_init__(self):
        object.__setattr__(self, "assets", tuple(self.assets))
        if not self.assets:
            raise DataError("dataset needs at least one asset")
        ref = self.assets[0].dates
        for a in self.assets[1:]:
            if a.dates != ref:
                raise DataError(f"{a.symbol} dates differ from {self.assets[0].symbol}")
        symbols = [a.symbol for a in self.assets]
        if len(set(symbols)) != len(symbols):
            raise DataError(f"duplicate symbols in dataset: {symbols}")

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(a.symbol for a in self.assets)

    @property
    def dates(self) -> tuple[date, ...]:
        return self.assets[0].dates

    def __len__(self):
        return len(self.assets[0])

    def __getitem__(self, symbol: str) -> AssetSeries:
        for a in self.assets:
            if a.symbol == symbol:
                return a
        raise KeyError(symbol)

    def subset(self, symbols: Iterable[str]) -> "MarketDataset":
        return MarketDataset(tuple(self[s] for s in symbols))


def align_dataset(series: Sequence[AssetSeries], window: int = DEFAULT_WINDOW) -> MarketDataset:
    """Restrict every series to the dates common to all of them."""
    if not series:
        raise DataError("align_dataset needs at least one series")
    common = set(series[0].dates)
    for s in series[1:]:
        common &= set(s.dates)
    if len(common) < window + 2:
        raise InsufficientOverlapError(
            f"only {len(common)} common dates across {', '.join(s.symbol for s in series)}; "
            f"need at least {window + 2}",
            symbols=[s.symbol for s in series],
        )
    aligned = []
    for s in series:
        keep = [i for i, d in enumerate(s.dates) if d in common]
        if len(keep) == len(s):
            aligned.append(s)
        else:
            aligned.append(AssetSeries(s.symbol, tuple(s.bars[i] for i in keep), tuple(s.scores[i] for i in keep)))
    return MarketDataset(tuple(aligned))


def normalize_window(series: AssetSeries, t: int, w: int = DEFAULT_WINDOW) -> np.ndarray:
    """Return the ``w x 5`` OHLCV block ending at ``t``, scaled into (0, 1].

    Prices are divided by the window's highest high, volume by the window's
    largest volume (1.0 when all volumes are zero).
    """
    if w < 1:
        raise ValueError("window must be >= 1")
    if t < w - 1 or t >= len(series):
        raise WindowUnderflowError(f"index {t} cannot hold a window of {w} over {len(series)} bars")
    block = series.ohlcv[t - w + 1 : t + 1]
    out = np.empty_like(block)
    out[:, :4] = block[:, :4] / block[:, 1].max()
    vmax = block[:, 4].max()
    out[:, 4] = block[:, 4] / (vmax if vmax > 0 else 1.0)
    return out


def rolling_volatility(series: AssetSeries, t: int, w: int = DEFAULT_WINDOW) -> float:
    """Population std of simple returns over the last ``min(w, t+1)`` closes."""
    closes = series.closes[max(0, t - w + 1) : t + 1]
    if len(closes) < 3:
        return 0.0
    returns = np.diff(closes) / closes[:-1]
    return float(np.std(returns))


def load_dataset(
    data_dir: str | Path,
    symbols: Sequence[str],
    sentiment_path: str | Path | None = None,
    window: int = DEFAULT_WINDOW,
) -> tuple[MarketDataset, dict[str, float]]:
    """Read ``<SYMBOL>.csv`` files and optional sentiment, then align.

    Returns the dataset and the per-symbol fraction of days whose score came
    from the neutral fill.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise DataError(f"data directory {data_dir} does not exist")
    labels: dict[str, dict[date, SentimentLabel]] = {}
    if sentiment_path is not None:
        path = Path(sentiment_path)
        if not path.is_file():
            raise DataError(f"sentiment file {path} does not exist")
        labels = parse_sentiment_csv(path.read_text(encoding="utf-8"), source=str(path))
    series = []
    for sym in symbols:
        path = data_dir / f"{sym}.csv"
        if not path.is_file():
            log.warning("no OHLCV file for %s at %s; skipping", sym, path)
            continue
        bars = parse_ohlcv_csv(path.read_text(encoding="utf-8"), source=str(path))
        series.append(merge_series(sym, bars, labels.get(sym, {})))
    if not series:
        raise DataError(f"none of the symbols {list(symbols)} have data in {data_dir}")
    dataset = align_dataset(series, window)
    fill = {}
    for a in dataset.assets:
        known = labels.get(a.symbol, {})
        fill[a.symbol] = sum(d not in known for d in a.dates) / len(a)
    return dataset, fill
