"""``sentio`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import functools
import logging
import sys
from pathlib import Path

import numpy as np

from . import evalkit, plotting
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, NumericError, SentioError, ShapeError
from .marketdata import MarketDataset, load_dataset, parse_ohlcv_csv
from .nn import load_model, save_model
from .portfolio_env import PortfolioEnv
from .ppo import TrainedModel, train, write_training_log
from .sentiment import LexiconProvider, label_news, parse_news_csv
from .trading_env import EnvConfig, TradingEnv

log = logging.getLogger("sentio")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MODEL_FILE = "model.sentio"
TRAINING_LOG = "training_log.csv"
DATASET_CHECK = "dataset.check"
EFFECTIVE_CONFIG = "effective_config"
COMPARISON_CSV = "comparison.csv"
BASELINE_LABEL = "baseline"


def build_env(dataset: MarketDataset, env_cfg: EnvConfig, mode: str):
    if mode == "single":
        return TradingEnv(dataset.assets[0], env_cfg)
    return PortfolioEnv(dataset, env_cfg)


def env_factory(dataset, env_cfg, mode):
    # partial of a module-level function so worker processes can unpickle it
    return functools.partial(build_env, dataset, env_cfg, mode)


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    (out / EFFECTIVE_CONFIG).write_text(cfg.to_text(), encoding="utf-8")
    return out


def _load(cfg: RunConfig):
    cfg.validate()
    return load_dataset(cfg.data_dir, cfg.symbols, cfg.effective_sentiment_file, cfg.env.window)


def cmd_ingest(cfg: RunConfig) -> dict:
    """Validate, merge and align the inputs; write ``dataset.check``."""
    dataset, fill = _load(cfg)
    out = _prepare_out(cfg)
    overall = float(np.mean(list(fill.values())))
    summary = {
        "symbols": ",".join(dataset.symbols),
        "first_date": dataset.dates[0].isoformat(),
        "last_date": dataset.dates[-1].isoformat(),
        "days": len(dataset),
        "sentiment_file": str(cfg.effective_sentiment_file or "none"),
        "neutral_fill_ratio": overall,
    }
    for sym in dataset.symbols:
        summary[f"count.{sym}"] = len(dataset[sym])
        summary[f"neutral_fill_ratio.{sym}"] = fill[sym]
    missing = [s for s in cfg.symbols if s not in dataset.symbols]
    if missing:
        summary["skipped"] = ",".join(missing)
    lines = [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in summary.items()]
    (out / DATASET_CHECK).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return summary


def cmd_label(news_path, output_path, provider=None) -> Path:
    """Label a ``Date,Symbol,Text`` news file into a ``Date,Symbol,Label`` file."""
    news_path = Path(news_path)
    if not news_path.is_file():
        raise DataError(f"news file {news_path} does not exist")
    grouped = parse_news_csv(news_path.read_text(encoding="utf-8"), source=str(news_path))
    text = label_news(grouped, provider or LexiconProvider())
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(text, encoding="utf-8")
    return output_path


def cmd_train(cfg: RunConfig) -> TrainedModel:
    dataset, _ = _load(cfg)
    out = _prepare_out(cfg)
    factory = env_factory(dataset, cfg.env_config, cfg.mode)
    model = train(factory, cfg.ppo_config)
    save_model(model.params, out / MODEL_FILE)
    write_training_log(model.log, out / TRAINING_LOG)
    return model


def _baseline_series(cfg: RunConfig, dataset: MarketDataset) -> np.ndarray:
    initial = cfg.env.initial_balance
    if cfg.baseline_series is not None:
        path = Path(cfg.baseline_series)
        if not path.is_file():
            raise DataError(f"baseline series {path} does not exist")
        bars = parse_ohlcv_csv(path.read_text(encoding="utf-8"), source=str(path))
        return evalkit.buy_and_hold([b.close for b in bars], initial)
    if cfg.mode == "single":
        return evalkit.buy_and_hold(dataset.assets[0].closes, initial)
    return evalkit.equal_split_buy_and_hold([a.closes for a in dataset.assets], initial)


def cmd_evaluate(cfg: RunConfig, model_path=None, jobs: int = 1) -> dict:
    dataset, _ = _load(cfg)
    out = _prepare_out(cfg)
    params = load_model(model_path or out / MODEL_FILE)
    env_cfg = dataclasses.replace(cfg.env_config, max_steps=cfg.eval_steps)
    factory = env_factory(dataset, env_cfg, cfg.mode)
    probe = factory()
    if params.obs_dim != probe.obs_dim or params.action_dim != probe.action_dim:
        raise ShapeError(
            f"model/environment dimension mismatch: model expects {params.obs_dim} observations and "
            f"{params.action_dim} actions, environment provides {probe.obs_dim} and {probe.action_dim}"
        )
    metrics, stats = evalkit.evaluate(TrainedModel(params), factory, cfg.eval_episodes, cfg.eval_steps,
                                      seed=cfg.seed, deterministic=cfg.eval_deterministic, jobs=jobs)
    return evalkit.emit_report(cfg.label, metrics, stats, _baseline_series(cfg, dataset), out)


def cmd_baseline(cfg: RunConfig) -> dict:
    dataset, _ = _load(cfg)
    out = _prepare_out(cfg)
    series = _baseline_series(cfg, dataset)
    initial = cfg.env.initial_balance
    run_dir = out / BASELINE_LABEL
    run_dir.mkdir(parents=True, exist_ok=True)
    final = float(series[-1])
    metric = evalkit.EpisodeMetrics(initial, final, 0.0, final - initial, series, np.zeros_like(series))
    files = {
        "baseline.csv": evalkit.write_baseline_csv(run_dir / "baseline.csv", series, initial),
        "summary.csv": evalkit.write_summary_csv(run_dir / "summary.csv", evalkit.summarize([metric])),
        "baseline.svg": plotting.plot_comparison(run_dir / "baseline.svg", {"baseline": series},
                                                 "buy-and-hold net worth"),
    }
    return files


def _money(x: float) -> str:
    return f"-${-x:,.2f}" if x < 0 else f"${x:,.2f}"


def cmd_compare(run_dirs, out_dir=None) -> list[tuple[str, float, float]]:
    """Average profit / net worth per run, written to ``comparison.csv`` and printed."""
    if len(run_dirs) < 2:
        raise ConfigError("compare needs at least two run directories")
    rows = []
    for d in map(Path, run_dirs):
        summary = d / "summary.csv"
        if not summary.is_file():
            raise DataError(f"run directory {d} has no summary.csv")
        dists = evalkit.read_summary_csv(summary)
        try:
            rows.append((d.name, dists["profit"].mean, dists["net_worth"].mean))
        except KeyError as exc:
            raise DataError(f"{summary} lacks a {exc.args[0]} row") from None
    out = Path(out_dir) if out_dir is not None else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    with open(out / COMPARISON_CSV, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["run", "average_profit", "average_net_worth"])
        writer.writerows((name, repr(p), repr(nw)) for name, p, nw in rows)
    width = max(len("Run"), *(len(r[0]) for r in rows))
    print(f"{'Run':<{width}}  {'Average Profit':>16}  {'Average Net Worth':>18}")
    for name, p, nw in rows:
        print(f"{name:<{width}}  {_money(p):>16}  {_money(nw):>18}")
    return rows


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", type=Path, default=default, help="run configuration file")
    parser.add_argument("--seed", type=int, default=default, help="master seed (overrides config)")
    parser.add_argument("--out", type=Path, default=default, help="output directory (overrides config)")
    parser.add_argument("--jobs", type=int, default=default, help="worker processes for evaluation (1 = bit-exact)")
    parser.add_argument("-v", "--verbose", action="store_true", default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentio", description="Sentiment-aware PPO trading: ingest, label, train, evaluate, baseline, compare.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "ingest": "validate, merge and align price and sentiment data",
        "label": "label a news CSV with the lexicon provider",
        "train": "train a PPO agent",
        "evaluate": "evaluate a trained agent and write a report",
        "baseline": "buy-and-hold baseline report",
        "compare": "tabulate average profit / net worth across run directories",
    }
    subs = {}
    for name, help_text in commands.items():
        subs[name] = p = sub.add_parser(name, help=help_text)
        _global_flags(p, suppress=True)
    subs["label"].add_argument("--news", type=Path, help="news CSV (Date,Symbol,Text); default: config news_file")
    subs["label"].add_argument("--output", type=Path, help="sentiment CSV to write; default: <out>/sentiment.csv")
    subs["evaluate"].add_argument("--model", type=Path, help=f"model file; default: <out>/{MODEL_FILE}")
    subs["compare"].add_argument("run_dirs", nargs="+", type=Path)
    return parser


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig(out_dir=Path("runs").resolve())
    return cfg.with_overrides(seed=args.seed, out_dir=args.out)


def run(args) -> None:
    jobs = args.jobs or 1
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    if args.command == "compare":
        cmd_compare(args.run_dirs, args.out)
        return
    cfg = _config(args)
    if args.command == "label":
        news = args.news or cfg.news_file
        if news is None:
            raise ConfigError("label needs --news or news_file in the config")
        out = cmd_label(news, args.output or cfg.sentiment_file or Path(cfg.out_dir) / "sentiment.csv")
        log.info("wrote %s", out)
    elif args.command == "ingest":
        summary = cmd_ingest(cfg)
        for k, v in summary.items():
            print(f"{k} = {v}")
    elif args.command == "train":
        model = cmd_train(cfg)
        last = model.log[-1] if model.log else None
        print(f"trained {len(model.log)} iterations; final mean episode reward "
              f"{last.mean_ep_reward if last else float('nan'):.5f}")
    elif args.command == "evaluate":
        files = cmd_evaluate(cfg, args.model, jobs)
        print(f"report written to {files['summary.csv'].parent}")
    elif args.command == "baseline":
        files = cmd_baseline(cfg)
        print(f"baseline written to {files['summary.csv'].parent}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run(args)
    except ConfigError as exc:
        print(f"sentio: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"sentio: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ShapeError) as exc:
        print(f"sentio: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SentioError as exc:
        print(f"sentio: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
