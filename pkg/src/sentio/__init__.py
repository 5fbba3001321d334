"""Sentiment-aware PPO trading agents: environments, trainer and evaluation."""

from .errors import (
    ConfigError,
    DataError,
    EpisodeFinishedError,
    InvalidActionError,
    ModelFormatError,
    NumericError,
    ParseError,
    SentioError,
    ShapeError,
)
from .marketdata import AssetSeries, MarketDataset, OhlcvBar, SentimentLabel, label_to_score
from .portfolio_env import PortfolioEnv
from .ppo import PpoConfig, TrainedModel, train
from .trading_env import EnvConfig, TradingEnv

__version__ = "0.1.0"
