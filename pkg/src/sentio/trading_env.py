"""Single-stock trading environment with optional sentiment fusion.

Actions are ``(kind, amount)`` pairs: kind below 1 buys, exactly 1 holds,
above 1 sells; amount is the fraction of cash (buys) or of the held shares
(sells) to trade. Trades fill at the current close, the clock then advances
one bar and the account is marked at the new close.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .errors import ConfigError, DataError, EpisodeFinishedError, InvalidActionError, ShapeError
from .marketdata import AssetSeries

KIND_MAX = 2.0
AMOUNT_MAX = 0.5
# buy/sell fractions shift by score / 10
BIAS_DIVISOR = 10.0
SENTIMENT_BIAS = 1.0 / BIAS_DIVISOR
FRACTION_MAX = AMOUNT_MAX + SENTIMENT_BIAS
ACCOUNT_SLOTS = 4


@dataclass(frozen=True)
class EnvConfig:
    initial_balance: float = 10_000.0
    window: int = 5
    max_steps: int = 2000
    tx_cost_rate: float = 0.001
    stability_coef: float = 0.01
    sentiment_coef: float = 0.01
    vol_damping: float = 10.0
    # None -> environment default (0.0 single stock, 0.1 portfolio)
    net_worth_floor_frac: float | None = None
    sentiment_enabled: bool = False
    seed: int | None = None

    def __post_init__(self):
        if not self.initial_balance > 0:
            raise ConfigError("initial_balance must be positive")
        if self.window < 2:
            raise ConfigError("window must be >= 2")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        for name in ("tx_cost_rate", "stability_coef", "sentiment_coef", "vol_damping"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        floor = self.net_worth_floor_frac
        if floor is not None and not 0.0 <= floor < 1.0:
            raise ConfigError("net_worth_floor_frac must lie in [0, 1)")

    def floor_frac(self, default: float) -> float:
        return default if self.net_worth_floor_frac is None else self.net_worth_floor_frac


class Side(enum.Enum):
    BUY = "buy"
    SELL = "sell"
    HOLD = "hold"


class RawAction(NamedTuple):
    kind: float
    amount: float


@dataclass(frozen=True)
class TradeDecision:
    side: Side
    fraction: float = 0.0

    def __post_init__(self):
        if self.side is Side.HOLD and self.fraction != 0.0:
            object.__setattr__(self, "fraction", 0.0)
        if not 0.0 <= self.fraction <= 1.0:
            raise InvalidActionError(f"trade fraction {self.fraction} outside [0, 1]")


@dataclass(frozen=True)
class AccountState:
    balance: float
    shares_held: float
    cost_basis: float
    net_worth: float
    initial_balance: float

    @classmethod
    def fresh(cls, initial_balance: float) -> "AccountState":
        return cls(initial_balance, 0.0, 0.0, initial_balance, initial_balance)

    def mark(self, price: float) -> "AccountState":
        return AccountState(self.balance, self.shares_held, self.cost_basis,
                            self.balance + self.shares_held * price, self.initial_balance)


@dataclass
class StepResult:
    observation: Any
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def decode_action(raw) -> TradeDecision:
    """Clamp a raw ``(kind, amount)`` pair into bounds and decode it."""
    try:
        kind, amount = (float(x) for x in raw)
    except (TypeError, ValueError):
        raise InvalidActionError(f"action must be a (kind, amount) pair, got {raw!r}") from None
    if not (math.isfinite(kind) and math.isfinite(amount)):
        raise InvalidActionError(f"non-finite action ({kind}, {amount})")
    kind = min(max(kind, 0.0), KIND_MAX)
    amount = min(max(amount, 0.0), AMOUNT_MAX)
    if kind < 1.0:
        return TradeDecision(Side.BUY, amount)
    if kind > 1.0:
        return TradeDecision(Side.SELL, amount)
    return TradeDecision(Side.HOLD)


def apply_sentiment_bias(decision: TradeDecision, score: float, enabled: bool = True) -> TradeDecision:
    """Lean buys up and sells down on positive sentiment (and vice versa)."""
    if not enabled or decision.side is Side.HOLD:
        return decision
    # scaled form keeps decimal cases exact, e.g. 0.2 and +1 give 0.3 rather than 0.30000000000000004
    scaled = decision.fraction * BIAS_DIVISOR
    if decision.side is Side.BUY:
        frac = (scaled + score) / BIAS_DIVISOR
    else:
        frac = (scaled - score) / BIAS_DIVISOR
    return TradeDecision(decision.side, min(max(frac, 0.0), FRACTION_MAX))


def execute_trade(account: AccountState, decision: TradeDecision, price: float) -> tuple[AccountState, float]:
    """Fill ``decision`` at ``price``; returns the new account and trade notional."""
    if not price > 0:
        raise DataError(f"execution price must be positive, got {price}")
    if decision.side is Side.HOLD or decision.fraction == 0.0:
        return account.mark(price), 0.0
    if decision.side is Side.BUY:
        bought = (account.balance / price) * decision.fraction
        cost = bought * price
        shares = account.shares_held + bought
        basis = account.cost_basis
        if shares > 0:
            basis = (account.shares_held * account.cost_basis + cost) / shares
        balance = max(account.balance - cost, 0.0)
        new = AccountState(balance, shares, basis, balance + shares * price, account.initial_balance)
        return new, cost
    sold = account.shares_held * decision.fraction
    proceeds = sold * price
    shares = max(account.shares_held - sold, 0.0)
    basis = account.cost_basis if shares > 0 else 0.0
    balance = account.balance + proceeds
    return AccountState(balance, shares, basis, balance + shares * price, account.initial_balance), proceeds


def alignment(score: float, price_delta: float, volatility: float, vol_damping: float) -> float:
    """Sentiment/price agreement bonus in [0, 1], damped by recent volatility."""
    if score == 0.0 or price_delta == 0.0 or (score > 0) != (price_delta > 0):
        return 0.0
    return abs(score) / (1.0 + vol_damping * volatility)


def combine_reward(delta_nw, balance, notional, align, cfg: EnvConfig) -> float:
    b0 = cfg.initial_balance
    r = delta_nw / b0 - cfg.stability_coef * abs(balance - b0) / b0 - cfg.tx_cost_rate * notional / b0
    if cfg.sentiment_enabled:
        r += cfg.sentiment_coef * align
    return r


def compute_reward(
    prev: AccountState,
    curr: AccountState,
    notional: float,
    score: float,
    price_delta: float,
    volatility: float,
    cfg: EnvConfig,
) -> float:
    align = alignment(score, price_delta, volatility, cfg.vol_damping)
    return combine_reward(curr.net_worth - prev.net_worth, curr.balance, notional, align, cfg)


def action_bounds(n_assets: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension env bounds, ``(kind, amount)`` interleaved per asset."""
    low = np.zeros(2 * n_assets)
    high = np.tile([KIND_MAX, AMOUNT_MAX], n_assets)
    return low, high


class TradingEnv:
    """Gym-style single-stock environment over one :class:`AssetSeries`."""

    floor_default = 0.0
    n_assets = 1

    def __init__(self, series: AssetSeries, config: EnvConfig | None = None):
        self.config = config or EnvConfig()
        w = self.config.window
        if len(series) < w + 2:
            raise DataError(f"{series.symbol}: {len(series)} bars, need at least window+2 = {w + 2}")
        self.series = series
        # plain lists: scalar indexing is much cheaper than on ndarrays
        self.closes = series.closes.tolist()
        self.scores = series.score_array.tolist()
        self.windows = series.window_table(w)
        self.vols = series.volatility_table(w).tolist()
        self.floor = self.config.floor_frac(self.floor_default) * self.config.initial_balance
        self.rng = np.random.default_rng(self.config.seed)
        self.obs_dim = w * 5 + ACCOUNT_SLOTS + int(self.config.sentiment_enabled)
        self.action_dim = 2
        self.action_low, self.action_high = action_bounds(1)
        self.t = w - 1
        self.steps = 0
        self.done = False
        self.account = AccountState.fresh(self.config.initial_balance)

    def _draw_start(self, seed):
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        return int(self.rng.integers(self.config.window - 1, len(self.closes) - 1))

    def _advance(self, t: int) -> int:
        t += 1
        return self.config.window - 1 if t >= len(self.closes) else t

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.t = self._draw_start(seed)
        self.steps = 0
        self.done = False
        self.account = AccountState.fresh(self.config.initial_balance)
        return self.observation()

    def observation(self) -> np.ndarray:
        t, acct, b0 = self.t, self.account, self.config.initial_balance
        price = self.closes[t]
        obs = np.empty(self.obs_dim)
        n = self.windows.shape[1]
        obs[:n] = self.windows[t]
        obs[n] = acct.balance / b0
        obs[n + 1] = acct.net_worth / b0
        obs[n + 2] = acct.shares_held * price / b0
        obs[n + 3] = acct.cost_basis / price if acct.shares_held > 0 else 0.0
        if self.config.sentiment_enabled:
            obs[n + 4] = self.scores[t]
        return obs

    def info(self) -> dict:
        acct = self.account
        return {
            "net_worth": acct.net_worth,
            "balance": acct.balance,
            "shares_held": acct.shares_held,
            "cumulative_profit": acct.net_worth - acct.initial_balance,
        }

    def step(self, action) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("episode finished; call reset()")
        if np.shape(action) != (2,):
            raise ShapeError(f"expected action of shape (2,), got {np.shape(action)}")
        cfg = self.config
        decision = decode_action(action)
        score = self.scores[self.t]
        decision = apply_sentiment_bias(decision, score, cfg.sentiment_enabled)
        prev = self.account
        old_t = self.t
        acct, notional = execute_trade(prev, decision, self.closes[old_t])
        self.t = self._advance(old_t)
        price = self.closes[self.t]
        acct = acct.mark(price)
        self.account = acct
        reward = compute_reward(prev, acct, notional, score, price - self.closes[old_t], self.vols[self.t], cfg)
        self.steps += 1
        self.done = acct.net_worth <= self.floor or self.steps >= cfg.max_steps
        return StepResult(self.observation(), reward, self.done, self.info())
