"""Evaluation protocol: episode runner, summary statistics, buy-and-hold
baseline and report files."""
from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import plotting
from .errors import DataError, SentioError

log = logging.getLogger(__name__)

DEFAULT_EPISODES = 100
DEFAULT_STEPS = 2000
EPISODES_HEADER = ("episode", "final_net_worth", "final_balance", "profit")
SUMMARY_HEADER = ("metric", "mean", "median", "q1", "q3", "min", "max")
TIMESERIES_HEADER = ("step", "net_worth", "balance", "profit")
BASELINE_HEADER = ("step", "net_worth", "profit")


@dataclass
class EpisodeMetrics:
    initial_balance: float
    final_net_worth: float
    final_balance: float
    cumulative_profit: float
    # index 0 is the reset state, index k the state after step k
    net_worth: np.ndarray
    balance: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.net_worth) - 1

    @property
    def profit(self) -> np.ndarray:
        return self.net_worth - self.initial_balance


@dataclass(frozen=True)
class Distribution:
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float

    @classmethod
    def of(cls, values) -> "Distribution":
        v = np.asarray(values, dtype=float)
        q1, med, q3 = np.percentile(v, [25, 50, 75], method="linear")
        return cls(float(v.mean()), float(med), float(q1), float(q3), float(v.min()), float(v.max()))

    def as_row(self):
        return (self.mean, self.median, self.q1, self.q3, self.min, self.max)


@dataclass(frozen=True)
class SummaryStats:
    episodes: int
    net_worth: Distribution
    balance: Distribution
    profit: Distribution


def run_episode(model, env, deterministic: bool = False, max_steps: int | None = None,
                rng: np.random.Generator | None = None) -> EpisodeMetrics:
    """Roll ``model`` through a freshly reset ``env`` until done or ``max_steps``."""
    if rng is None:
        rng = np.random.default_rng()
    info = env.info()
    b0 = env.config.initial_balance
    net_worth = [info["net_worth"]]
    balance = [info["balance"]]
    obs = env.observation()
    limit = env.config.max_steps if max_steps is None else max_steps
    for _ in range(limit):
        action = model.act(obs, env.action_low, env.action_high, rng=rng, deterministic=deterministic)
        result = env.step(action)
        net_worth.append(result.info["net_worth"])
        balance.append(result.info["balance"])
        obs = result.observation
        if result.done:
            break
    nw = np.array(net_worth)
    return EpisodeMetrics(b0, float(nw[-1]), float(balance[-1]), float(nw[-1]) - b0, nw, np.array(balance))


def _run_seeded(model, env_factory, seed, steps, deterministic):
    env = env_factory()
    env.reset(seed=seed)
    return run_episode(model, env, deterministic, steps, np.random.default_rng(seed))


def evaluate(model, env_factory: Callable[[], object], episodes: int = DEFAULT_EPISODES,
             steps: int = DEFAULT_STEPS, seed: int = 0, deterministic: bool = False,
             jobs: int = 1) -> tuple[list[EpisodeMetrics], SummaryStats]:
    """Run ``episodes`` independent episodes; episode ``i`` is seeded with ``seed + i``.

    With ``jobs > 1`` episodes run in worker processes (``env_factory`` must
    then be picklable); results are identical to ``jobs=1``.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    seeds = [seed + i for i in range(episodes)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_seeded, model, env_factory, s, steps, deterministic) for s in seeds]
            metrics = [f.result() for f in futures]
    else:
        metrics = [_run_seeded(model, env_factory, s, steps, deterministic) for s in seeds]
    return metrics, summarize(metrics)


def summarize(metrics: Sequence[EpisodeMetrics]) -> SummaryStats:
    if not metrics:
        raise ValueError("cannot summarize an empty episode list")
    return SummaryStats(
        len(metrics),
        Distribution.of([m.final_net_worth for m in metrics]),
        Distribution.of([m.final_balance for m in metrics]),
        Distribution.of([m.cumulative_profit for m in metrics]),
    )


def buy_and_hold(closes, initial: float = 10_000.0) -> np.ndarray:
    """Net worth of ``initial`` invested at the first close and never traded."""
    closes = np.asarray(closes, dtype=float)
    if closes.size == 0:
        raise DataError("buy_and_hold needs a non-empty price series")
    if not np.all(closes > 0):
        raise DataError("buy_and_hold needs positive prices")
    return initial * closes / closes[0]


def equal_split_buy_and_hold(close_rows: Sequence, initial: float = 10_000.0) -> np.ndarray:
    """Buy-and-hold with ``initial`` split equally across several price series."""
    if len(close_rows) == 0:
        raise DataError("equal split needs at least one series")
    share = initial / len(close_rows)
    total = None
    for closes in close_rows:
        leg = buy_and_hold(closes, share)
        total = leg if total is None else total + leg
    return total


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise SentioError(f"cannot write {path}: {exc}") from exc


def write_baseline_csv(path, series, initial: float) -> Path:
    path = Path(path)
    _write_csv(path, BASELINE_HEADER, ((i, _fmt(v), _fmt(v - initial)) for i, v in enumerate(series)))
    return path


def write_summary_csv(path, stats: SummaryStats) -> Path:
    path = Path(path)
    rows = [
        (name, *map(_fmt, dist.as_row()))
        for name, dist in (("net_worth", stats.net_worth), ("balance", stats.balance), ("profit", stats.profit))
    ]
    _write_csv(path, SUMMARY_HEADER, rows)
    return path


def read_summary_csv(path) -> dict[str, Distribution]:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if not rows or tuple(rows[0]) != SUMMARY_HEADER:
        raise DataError(f"{path}: not a summary file")
    return {r[0]: Distribution(*(float(x) for x in r[1:])) for r in rows[1:]}


def emit_report(run_label: str, metrics: Sequence[EpisodeMetrics], stats: SummaryStats,
                baseline=None, out_dir=".") -> dict[str, Path]:
    """Write CSVs and SVG charts under ``out_dir/run_label``; returns name -> path."""
    run_dir = Path(out_dir) / run_label
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SentioError(f"cannot create report directory {run_dir}: {exc}") from exc
    files = {}
    files["episodes.csv"] = run_dir / "episodes.csv"
    _write_csv(files["episodes.csv"], EPISODES_HEADER, (
        (i + 1, _fmt(m.final_net_worth), _fmt(m.final_balance), _fmt(m.cumulative_profit))
        for i, m in enumerate(metrics)
    ))
    files["summary.csv"] = write_summary_csv(run_dir / "summary.csv", stats)
    last = metrics[-1]
    files["timeseries.csv"] = run_dir / "timeseries.csv"
    _write_csv(files["timeseries.csv"], TIMESERIES_HEADER, (
        (k, _fmt(nw), _fmt(bal), _fmt(p))
        for k, (nw, bal, p) in enumerate(zip(last.net_worth, last.balance, last.profit))
    ))

    nws = [m.final_net_worth for m in metrics]
    profits = [m.cumulative_profit for m in metrics]
    try:
        files["episodes.svg"] = plotting.plot_episode_lines(run_dir / "episodes.svg", nws, profits, f"{run_label}: per-episode results")
        files["timeseries.svg"] = plotting.plot_timeseries(run_dir / "timeseries.svg", last.net_worth, last.balance,
                                                           last.profit, f"{run_label}: last episode")
        files["boxplot.svg"] = plotting.plot_boxplot(run_dir / "boxplot.svg", nws, profits, f"{run_label}: distribution")
        if baseline is not None:
            files["comparison.svg"] = plotting.plot_comparison(
                run_dir / "comparison.svg",
                {"net_worth": last.net_worth, "baseline": np.asarray(baseline, dtype=float)},
                f"{run_label}: agent vs buy-and-hold",
            )
    except OSError as exc:
        raise SentioError(f"cannot write chart under {run_dir}: {exc}") from exc
    if baseline is not None:
        files["baseline.csv"] = write_baseline_csv(run_dir / "baseline.csv", baseline, last.initial_balance)
    return files
