"""Multi-asset version of the trading environment.

One ``(kind, amount)`` pair per asset. Within a step all sells fill first,
then buys draw sequentially on the remaining cash, both in dataset order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, EpisodeFinishedError, ShapeError
from .marketdata import MarketDataset
from .trading_env import (
    AccountState,
    EnvConfig,
    Side,
    StepResult,
    action_bounds,
    alignment,
    apply_sentiment_bias,
    combine_reward,
    decode_action,
    execute_trade,
)

ROW_ACCOUNT_SLOTS = 3


@dataclass(frozen=True)
class PortfolioAccount:
    balance: float
    shares: tuple[float, ...]
    cost_basis: tuple[float, ...]
    net_worth: float
    initial_balance: float

    @classmethod
    def fresh(cls, initial_balance: float, n: int) -> "PortfolioAccount":
        return cls(initial_balance, (0.0,) * n, (0.0,) * n, initial_balance, initial_balance)

    def value_at(self, prices) -> float:
        total = self.balance
        for s, p in zip(self.shares, prices):
            total += s * p
        return total


@dataclass(frozen=True)
class PortfolioObservation:
    matrix: np.ndarray
    net_worth: float

    def flatten(self) -> np.ndarray:
        return np.append(self.matrix.ravel(), self.net_worth)


class PortfolioEnv:
    """Gym-style environment over an aligned :class:`MarketDataset`."""

    floor_default = 0.1

    def __init__(self, dataset: MarketDataset, config: EnvConfig | None = None):
        if not isinstance(dataset, MarketDataset):
            raise DataError("PortfolioEnv needs an aligned MarketDataset")
        self.config = config or EnvConfig()
        w = self.config.window
        if len(dataset) < w + 2:
            raise DataError(f"dataset has {len(dataset)} dates, need at least window+2 = {w + 2}")
        self.dataset = dataset
        self.n_assets = n = len(dataset.assets)
        self.closes = np.stack([a.closes for a in dataset.assets]).T.tolist()
        self.scores = np.stack([a.score_array for a in dataset.assets]).T.tolist()
        self.windows = np.stack([a.window_table(w) for a in dataset.assets], axis=1)
        self._close_rows = np.asarray(self.closes)
        self._score_rows = np.asarray(self.scores)
        self.vols = np.stack([a.volatility_table(w) for a in dataset.assets]).T.tolist()
        self.floor = self.config.floor_frac(self.floor_default) * self.config.initial_balance
        self.rng = np.random.default_rng(self.config.seed)
        self.row_dim = w * 5 + ROW_ACCOUNT_SLOTS + int(self.config.sentiment_enabled)
        self.obs_dim = n * self.row_dim + 1
        self.action_dim = 2 * n
        self.action_low, self.action_high = action_bounds(n)
        self.t = w - 1
        self.steps = 0
        self.done = False
        self.account = PortfolioAccount.fresh(self.config.initial_balance, n)

    @property
    def length(self) -> int:
        return len(self.closes)

    def reset(self, seed: int | None = None) -> PortfolioObservation:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = int(self.rng.integers(self.config.window - 1, self.length - 1))
        self.steps = 0
        self.done = False
        self.account = PortfolioAccount.fresh(self.config.initial_balance, self.n_assets)
        return self.observation()

    def observation(self) -> PortfolioObservation:
        t, acct, b0 = self.t, self.account, self.config.initial_balance
        mat = np.empty((self.n_assets, self.row_dim))
        k = self.windows.shape[2]
        prices = self._close_rows[t]
        shares = np.array(acct.shares)
        mat[:, :k] = self.windows[t]
        mat[:, k] = shares * prices / b0
        mat[:, k + 1] = np.where(shares > 0, np.array(acct.cost_basis) / prices, 0.0)
        mat[:, k + 2] = acct.balance / b0
        if self.config.sentiment_enabled:
            mat[:, k + 3] = self._score_rows[t]
        return PortfolioObservation(mat, acct.net_worth / b0)

    def info(self) -> dict:
        acct = self.account
        return {
            "net_worth": acct.net_worth,
            "balance": acct.balance,
            "holdings": dict(zip(self.dataset.symbols, acct.shares)),
            "cumulative_profit": acct.net_worth - acct.initial_balance,
        }

    def step(self, action) -> StepResult:
        if self.done:
            raise EpisodeFinishedError("episode finished; call reset()")
        if np.shape(action) != (self.action_dim,):
            raise ShapeError(f"expected action of length {self.action_dim}, got shape {np.shape(action)}")
        action = np.asarray(action, dtype=float).tolist()
        cfg, n, old_t = self.config, self.n_assets, self.t
        scores = self.scores[old_t]
        decisions = [
            apply_sentiment_bias(decode_action((action[2 * i], action[2 * i + 1])), scores[i], cfg.sentiment_enabled)
            for i in range(n)
        ]
        prev = self.account
        prices = self.closes[old_t]
        balance = prev.balance
        shares, basis = list(prev.shares), list(prev.cost_basis)
        notional = 0.0
        for side in (Side.SELL, Side.BUY):
            for i, d in enumerate(decisions):
                if d.side is not side:
                    continue
                leg = AccountState(balance, shares[i], basis[i], 0.0, cfg.initial_balance)
                leg, traded = execute_trade(leg, d, prices[i])
                balance, shares[i], basis[i] = leg.balance, leg.shares_held, leg.cost_basis
                notional += traded
        self.t = self._advance(old_t)
        new_prices = self.closes[self.t]
        net_worth = balance
        for s, p in zip(shares, new_prices):
            net_worth += s * p
        acct = PortfolioAccount(balance, tuple(shares), tuple(basis), net_worth, cfg.initial_balance)
        self.account = acct
        align = 0.0
        if cfg.sentiment_enabled:
            for i in range(n):
                align += alignment(scores[i], new_prices[i] - prices[i], self.vols[self.t][i], cfg.vol_damping)
            align /= n
        reward = combine_reward(acct.net_worth - prev.net_worth, balance, notional, align, cfg)
        self.steps += 1
        self.done = acct.net_worth <= self.floor or self.steps >= cfg.max_steps
        return StepResult(self.observation(), reward, self.done, self.info())

    def _advance(self, t: int) -> int:
        t += 1
        return self.config.window - 1 if t >= self.length else t
