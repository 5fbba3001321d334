"""Daily news -> sentiment label providers.

Only an offline keyword lexicon ships here. Anything that can map a day's
concatenated headline text to a :class:`SentimentLabel` can stand in for it
(an LLM client, a FinBERT pipeline, ...) by subclassing
:class:`SentimentProvider`.
"""
from __future__ import annotations

import abc
import csv
import io
import re
from datetime import date

from .errors import EmptyInputError, ParseError
from .marketdata import SENTIMENT_HEADER, SentimentLabel, parse_date

NEWS_HEADER = ("Date", "Symbol", "Text")

POSITIVE_WORDS = frozenset("""
    beat beats exceeded exceeds surge surges surged soar soars soared rally rallies rallied gain gains gained
    growth grow grows record strong stronger strength upgrade upgraded upgrades outperform outperforms
    profit profits profitable bullish rise rises rose boost boosted boosts expand expands expansion
    optimistic optimism approval approved breakthrough win wins won jump jumps jumped raise raised
    dividend buyback recovery rebound rebounds robust success successful innovative launch
""".split())

NEGATIVE_WORDS = frozenset("""
    miss missed misses plunge plunges plunged slump slumps slumped fall falls fell drop drops dropped
    loss losses weak weaker weakness downgrade downgraded downgrades underperform underperforms
    bearish decline declines declined cut cuts layoffs layoff lawsuit lawsuits probe investigation
    recall recalls fraud bankruptcy default warning warns warned slowdown crash crashes crashed
    fine fined penalty risk risks concern concerns halt halted shortfall tumble tumbles tumbled
""".split())

# net keyword hits (positive minus negative) -> label
EXTREME_HITS = 3

_WORD = re.compile(r"[a-z]+")


class SentimentProvider(abc.ABC):
    @abc.abstractmethod
    def label(self, day: date, text: str) -> SentimentLabel:
        """Classify one day's concatenated news text."""


class LexiconProvider(SentimentProvider):
    """Counts keyword hits; ties (including empty text) are Neutral.

    ======================  ======================
    positive - negative     label
    ======================  ======================
    >= 3                    ExtremelyPositive
    1 .. 2                  Positive
    0                       Neutral
    -2 .. -1                Negative
    <= -3                   ExtremelyNegative
    ======================  ======================
    """

    def __init__(self, positive=POSITIVE_WORDS, negative=NEGATIVE_WORDS, extreme_hits: int = EXTREME_HITS):
        self.positive = frozenset(positive)
        self.negative = frozenset(negative)
        self.extreme_hits = extreme_hits

    def net_hits(self, text: str) -> int:
        words = _WORD.findall(text.lower())
        return sum(w in self.positive for w in words) - sum(w in self.negative for w in words)

    def label(self, day: date, text: str) -> SentimentLabel:
        net = self.net_hits(text)
        if net >= self.extreme_hits:
            return SentimentLabel.ExtremelyPositive
        if net > 0:
            return SentimentLabel.Positive
        if net <= -self.extreme_hits:
            return SentimentLabel.ExtremelyNegative
        if net < 0:
            return SentimentLabel.Negative
        return SentimentLabel.Neutral


def parse_news_csv(text: str, source: str | None = None) -> dict[tuple[date, str], str]:
    """Group ``Date,Symbol,Text`` rows into one concatenated text per (date, symbol)."""
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text))) if any(c.strip() for c in r)]
    if not rows:
        raise EmptyInputError(f"{source or 'news input'} is empty")
    header = tuple(c.strip() for c in rows[0][1])
    if header != NEWS_HEADER:
        raise ParseError(f"expected header {','.join(NEWS_HEADER)}, got {','.join(header)}", 1, source)
    grouped: dict[tuple[date, str], list[str]] = {}
    for lineno, row in rows[1:]:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", lineno, source)
        try:
            day = parse_date(row[0])
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        symbol = row[1].strip()
        if not symbol:
            raise ParseError("empty symbol", lineno, source)
        grouped.setdefault((day, symbol), []).append(row[2].strip())
    return {key: " ".join(parts) for key, parts in grouped.items()}


def label_news(news: dict[tuple[date, str], str], provider: SentimentProvider) -> str:
    """Label each (date, symbol) group and render a ``Date,Symbol,Label`` CSV."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SENTIMENT_HEADER)
    for (day, symbol) in sorted(news):
        writer.writerow([day.isoformat(), symbol, provider.label(day, news[(day, symbol)]).name])
    return out.getvalue()
