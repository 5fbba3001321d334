"""Regenerate the small 3-symbol demo dataset under fixtures/.

    python tools/make_fixtures.py
"""
from __future__ import annotations

import csv
from datetime import date
from pathlib import Path

import numpy as np

from sentio.synthetic import trading_days

ROOT = Path(__file__).resolve().parents[1] / "fixtures"
SYMBOLS = {"AAA": (120.0, 0.0006, 0.014), "BBB": (45.0, 0.0002, 0.010), "CCC": (310.0, -0.0001, 0.018)}
UP = ["{s} shares surge after earnings beat", "analysts upgrade {s} on strong growth",
      "{s} posts record profit and raises dividend", "{s} rally continues on robust demand"]
DOWN = ["{s} shares fall after revenue miss", "{s} downgraded amid weak outlook",
        "{s} faces lawsuit and probe over recall", "{s} warns of slowdown; shares drop"]
FLAT = ["{s} holds annual shareholder meeting", "{s} announces board appointment"]


def main(n_days: int = 260, seed: int = 7) -> None:
    rng = np.random.default_rng(seed)
    days = trading_days(date(2024, 1, 2), n_days)
    (ROOT / "market").mkdir(parents=True, exist_ok=True)
    news_rows = []
    for sym, (p0, drift, vol) in SYMBOLS.items():
        rets = drift + vol * rng.standard_normal(n_days)
        closes = p0 * np.cumprod(1.0 + rets)
        opens = np.concatenate([[p0], closes[:-1]]) * (1.0 + 0.002 * rng.standard_normal(n_days))
        highs = np.maximum(opens, closes) * (1.0 + np.abs(0.006 * rng.standard_normal(n_days)))
        lows = np.minimum(opens, closes) * (1.0 - np.abs(0.006 * rng.standard_normal(n_days)))
        volumes = rng.integers(200_000, 2_000_000, n_days)
        with open(ROOT / "market" / f"{sym}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["Date", "Open", "High", "Low", "Close", "Volume"])
            for row in zip(days, opens, highs, lows, closes, volumes):
                w.writerow([row[0].isoformat(), *(f"{x:.2f}" for x in row[1:5]), int(row[5])])
        for i in range(n_days - 1):
            if rng.random() < 0.25:
                continue  # no coverage that day
            nxt = rets[i + 1]
            pool = UP if nxt > vol / 2 else DOWN if nxt < -vol / 2 else FLAT
            for _ in range(int(rng.integers(1, 4))):
                news_rows.append((days[i].isoformat(), sym, pool[int(rng.integers(len(pool)))].format(s=sym)))
    news_rows.sort()
    with open(ROOT / "news.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["Date", "Symbol", "Text"])
        w.writerows(news_rows)


if __name__ == "__main__":
    main()
