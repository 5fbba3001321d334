"""Deterministic synthetic price series for tests, demos and fixtures."""
from __future__ import annotations

from datetime import date, timedelta

import numpy as np

from .marketdata import AssetSeries, OhlcvBar, SentimentLabel


def trading_days(start: date, n: int) -> list[date]:
    """``n`` consecutive weekdays starting at (or after) ``start``."""
    days = []
    d = start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def bars_from_closes(closes, start: date = date(2024, 1, 2), volume: float = 1e6, spread: float = 0.0) -> list[OhlcvBar]:
    """Bars whose open is the previous close and whose range pads by ``spread``."""
    closes = np.asarray(closes, dtype=float)
    out = []
    for i, (d, c) in enumerate(zip(trading_days(start, len(closes)), closes)):
        o = closes[i - 1] if i else c
        hi = max(o, c) * (1.0 + spread)
        lo = min(o, c) * (1.0 - spread)
        out.append(OhlcvBar(d, float(o), float(hi), float(lo), float(c), float(volume)))
    return out


def series_from_closes(symbol: str, closes, scores=None, **kwargs) -> AssetSeries:
    bars = bars_from_closes(closes, **kwargs)
    if scores is None:
        scores = np.zeros(len(bars))
    return AssetSeries(symbol, tuple(bars), tuple(float(s) for s in scores))


def geometric_closes(n: int, daily_return: float, start_price: float = 100.0) -> np.ndarray:
    return start_price * (1.0 + daily_return) ** np.arange(n)


def foresight_series(symbol: str, n: int, rng: np.random.Generator, step: float = 0.01,
                     start_price: float = 100.0) -> AssetSeries:
    """Random +/-``step`` walk whose score on each day is the sign of the next day's move.

    Strong moves (|r| above ``step``) get the extreme labels.
    """
    moves = rng.choice([-1.0, 1.0], size=n - 1) * rng.uniform(0.5, 1.5, size=n - 1) * step
    closes = start_price * np.concatenate([[1.0], np.cumprod(1.0 + moves)])
    scores = np.zeros(n)
    scores[:-1] = np.where(np.abs(moves) > step, 1.0, 0.5) * np.sign(moves)
    return series_from_closes(symbol, closes, scores, spread=0.002)


def score_label(score: float) -> SentimentLabel:
    return SentimentLabel(int(round((score + 1.0) * 2.0)))
