"""Run configuration: a flat ``key = value`` file with dotted sections.

Example::

    data_dir = market
    symbols = AAA, BBB
    mode = portfolio
    sentiment_enabled = true
    env.max_steps = 2000
    ppo.total_timesteps = 20000
    eval.episodes = 100

Blank lines and ``#`` comments are ignored. Relative paths are resolved
against the directory holding the config file.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .evalkit import DEFAULT_EPISODES, DEFAULT_STEPS
from .ppo import PpoConfig
from .trading_env import EnvConfig

MODES = ("single", "portfolio")
_PATH_KEYS = ("data_dir", "out_dir", "sentiment_file", "news_file", "baseline.series")
# seeds and the sentiment flag live at the top level
_ENV_KEYS = tuple(f.name for f in dataclasses.fields(EnvConfig) if f.name not in ("seed", "sentiment_enabled"))
_PPO_KEYS = tuple(f.name for f in dataclasses.fields(PpoConfig) if f.name != "seed")
_FLOAT_OR_NONE = ("net_worth_floor_frac",)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(name: str, default, text: str):
    if name in _FLOAT_OR_NONE:
        return None if text.strip().lower() in ("", "none", "default") else float(text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        return tuple(int(x) for x in text.split(",") if x.strip())
    return text.strip()


@dataclass(frozen=True)
class RunConfig:
    data_dir: Path | None = None
    symbols: tuple[str, ...] = ()
    mode: str = "single"
    sentiment_enabled: bool = False
    sentiment_file: Path | None = None
    news_file: Path | None = None
    out_dir: Path = Path("runs")
    run_label: str | None = None
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    eval_episodes: int = DEFAULT_EPISODES
    eval_steps: int = DEFAULT_STEPS
    eval_deterministic: bool = False
    baseline_series: Path | None = None

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.symbols:
            raise ConfigError("symbols must list at least one ticker")
        if self.mode == "single" and len(self.symbols) != 1:
            raise ConfigError(f"single mode needs exactly one symbol, got {len(self.symbols)}")
        if self.data_dir is None:
            raise ConfigError("data_dir is required")
        if self.eval_episodes < 1:
            raise ConfigError("eval.episodes must be >= 1")
        if self.eval_steps < 0:
            raise ConfigError("eval.steps must be >= 0")
        return self

    @property
    def label(self) -> str:
        if self.run_label:
            return self.run_label
        return f"{self.mode}_{'sentiment' if self.sentiment_enabled else 'no_sentiment'}"

    @property
    def env_config(self) -> EnvConfig:
        return dataclasses.replace(self.env, sentiment_enabled=self.sentiment_enabled, seed=self.seed)

    @property
    def ppo_config(self) -> PpoConfig:
        return dataclasses.replace(self.ppo, seed=self.seed)

    @property
    def effective_sentiment_file(self) -> Path | None:
        """Configured sentiment file, else ``<out_dir>/sentiment.csv`` if ``label`` wrote one."""
        if self.sentiment_file is not None:
            return self.sentiment_file
        candidate = self.out_dir / "sentiment.csv"
        return candidate if candidate.is_file() else None

    def with_overrides(self, seed=None, out_dir=None) -> "RunConfig":
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if out_dir is not None:
            changes["out_dir"] = Path(out_dir).resolve()
        return dataclasses.replace(self, **changes) if changes else self

    def to_text(self) -> str:
        def fmt(v):
            if v is None:
                return "none"
            if isinstance(v, bool):
                return "true" if v else "false"
            if isinstance(v, tuple):
                return ", ".join(str(x) for x in v)
            if isinstance(v, float):
                return repr(v)
            return str(v)

        lines = [
            f"data_dir = {fmt(self.data_dir)}",
            f"symbols = {fmt(self.symbols)}",
            f"mode = {self.mode}",
            f"sentiment_enabled = {fmt(self.sentiment_enabled)}",
        ]
        for key in ("sentiment_file", "news_file", "run_label"):
            if getattr(self, key) is not None:
                lines.append(f"{key} = {getattr(self, key)}")
        lines += [f"out_dir = {self.out_dir}", f"seed = {self.seed}"]
        if self.baseline_series is not None:
            lines.append(f"baseline.series = {self.baseline_series}")
        lines += [f"env.{k} = {fmt(getattr(self.env, k))}" for k in _ENV_KEYS]
        lines += [f"ppo.{k} = {fmt(getattr(self.ppo, k))}" for k in _PPO_KEYS]
        lines += [
            f"eval.episodes = {self.eval_episodes}",
            f"eval.steps = {self.eval_steps}",
            f"eval.deterministic = {fmt(self.eval_deterministic)}",
        ]
        return "\n".join(lines) + "\n"


def parse_config(text: str, base_dir: Path | str = ".", source: str = "config") -> RunConfig:
    base_dir = Path(base_dir)
    top: dict = {}
    env: dict = {}
    ppo: dict = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            if key in _PATH_KEYS:
                path = None if value.lower() == "none" else (base_dir / value).resolve()
                top["baseline_series" if key == "baseline.series" else key] = path
            elif key == "symbols":
                top["symbols"] = tuple(s.strip() for s in value.split(",") if s.strip())
            elif key in ("mode", "run_label"):
                top[key] = value
            elif key == "sentiment_enabled":
                top[key] = _parse_bool(value)
            elif key == "seed":
                top[key] = int(value)
            elif key.startswith("env.") and key[4:] in _ENV_KEYS:
                name = key[4:]
                env[name] = _convert(name, getattr(EnvConfig(), name), value)
            elif key.startswith("ppo.") and key[4:] in _PPO_KEYS:
                name = key[4:]
                ppo[name] = _convert(name, getattr(PpoConfig(), name), value)
            elif key == "eval.episodes":
                top["eval_episodes"] = int(value)
            elif key == "eval.steps":
                top["eval_steps"] = int(value)
            elif key == "eval.deterministic":
                top["eval_deterministic"] = _parse_bool(value)
            else:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    top.setdefault("out_dir", (base_dir / "runs").resolve())
    return RunConfig(env=EnvConfig(**env), ppo=PpoConfig(**ppo), **top)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.resolve().parent, str(path))
