import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentio.errors import DataError, EpisodeFinishedError, ShapeError
from sentio.marketdata import MarketDataset, align_dataset
from sentio.portfolio_env import PortfolioEnv
from sentio.synthetic import series_from_closes
from sentio.trading_env import EnvConfig, TradingEnv

B0 = 10_000.0


def _dataset(*closes, scores=None):
    series = [series_from_closes(f"S{i}", c, None if scores is None else scores[i]) for i, c in enumerate(closes)]
    return align_dataset(series)


def test_reset_state_and_observation():
    ds = _dataset(np.full(20, 100.0), np.full(20, 50.0))
    env = PortfolioEnv(ds)
    obs = env.reset(seed=0)
    assert env.info()["net_worth"] == B0
    assert obs.matrix.shape == (2, 28)
    assert np.all(obs.matrix[:, 25:27] == 0.0)
    assert np.all(obs.matrix[:, 27] == 1.0)
    assert obs.net_worth == 1.0
    assert obs.flatten().shape == (env.obs_dim,) == (57,)


def test_sentiment_row_tail():
    scores = [np.linspace(-1, 1, 20), np.linspace(1, -1, 20)]
    ds = _dataset(np.full(20, 100.0), np.full(20, 50.0), scores=scores)
    env = PortfolioEnv(ds, EnvConfig(sentiment_enabled=True))
    obs = env.reset(seed=2)
    assert obs.matrix.shape == (2, 29)
    assert obs.matrix[:, -1].tolist() == [scores[0][env.t], scores[1][env.t]]


def test_n_rows():
    ds = _dataset(*[np.full(15, 10.0 + i) for i in range(4)])
    assert PortfolioEnv(ds).reset(seed=0).matrix.shape[0] == 4


def test_same_seed_same_start():
    ds = _dataset(np.linspace(10, 20, 50), np.linspace(20, 10, 50))
    a, b = PortfolioEnv(ds), PortfolioEnv(ds)
    a.reset(seed=7)
    b.reset(seed=7)
    assert a.t == b.t


def test_sequential_buys():
    ds = _dataset(np.full(10, 100.0), np.full(10, 50.0))
    env = PortfolioEnv(ds)
    env.reset(seed=0)
    res = env.step(np.array([0.0, 0.5, 0.0, 0.5]))
    assert res.info["holdings"] == {"S0": 50.0, "S1": 50.0}
    assert res.info["balance"] == 2500.0


def test_sells_before_buys_allow_rotation():
    ds = _dataset(np.full(10, 100.0), np.full(10, 50.0))
    env = PortfolioEnv(ds)
    env.reset(seed=0)
    env.step(np.array([0.0, 0.5, 1.0, 0.0]))
    env.step(np.array([0.0, 0.5, 1.0, 0.0]))
    # all cash is now in S0 except 2500; sell half of S0 and buy S1 in one step
    before = env.account
    res = env.step(np.array([2.0, 0.5, 0.0, 0.5]))
    proceeds = before.shares[0] * 0.5 * 100.0
    expected_balance = (before.balance + proceeds) * 0.5
    assert res.info["balance"] == pytest.approx(expected_balance, rel=1e-15)
    assert res.info["holdings"]["S1"] == pytest.approx((before.balance + proceeds) * 0.5 / 50.0, rel=1e-15)


def test_hold_constant_zero_reward():
    ds = _dataset(np.full(30, 100.0), np.full(30, 50.0))
    env = PortfolioEnv(ds, EnvConfig(sentiment_enabled=True))
    env.reset(seed=1)
    for _ in range(50):
        assert env.step(np.array([1.0, 0.5, 1.0, 0.5])).reward == 0.0


def test_threshold_done():
    # three sentiment-boosted buys of 60% leave 6.4% cash, then the price collapses
    closes = [100.0] * 7 + [1.0] * 5
    ds = _dataset(closes, scores=[np.ones(12)])
    env = PortfolioEnv(ds, EnvConfig(sentiment_enabled=True))
    env.reset(seed=0)
    env.t = 4
    dones = [env.step(np.array([0.0, 0.5])).done for _ in range(3)]
    assert dones == [False, False, True]
    assert env.account.net_worth <= 0.1 * B0 < env.account.balance + 100 * sum(env.account.shares)


def test_errors():
    ds = _dataset(np.full(10, 1.0), np.full(10, 2.0))
    env = PortfolioEnv(ds, EnvConfig(max_steps=1))
    env.reset(seed=0)
    with pytest.raises(ShapeError):
        env.step(np.zeros(2))
    env.step(np.zeros(4))
    with pytest.raises(EpisodeFinishedError):
        env.step(np.zeros(4))
    with pytest.raises(DataError):
        PortfolioEnv([series_from_closes("A", [1.0] * 10)])
    with pytest.raises(DataError):
        PortfolioEnv(MarketDataset((series_from_closes("A", [1.0] * 6),)))


@pytest.mark.parametrize("sentiment", [False, True])
def test_single_asset_equivalence(noisy_series, sentiment):
    cfg = EnvConfig(sentiment_enabled=sentiment, net_worth_floor_frac=0.0, seed=3)
    single = TradingEnv(noisy_series, cfg)
    port = PortfolioEnv(MarketDataset((noisy_series,)), cfg)
    single.reset(seed=11)
    port.reset(seed=11)
    assert single.t == port.t
    actions = np.random.default_rng(2).uniform([0, 0], [2, 0.5], size=(10, 2))
    for a in actions:
        r1, r2 = single.step(a), port.step(a)
        assert r1.reward == r2.reward
        assert r1.done == r2.done
        assert r1.info["net_worth"] == r2.info["net_worth"]
        assert r1.info["balance"] == r2.info["balance"]
        assert r1.info["shares_held"] == r2.info["holdings"]["NOISY"]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 4), st.booleans())
def test_fuzz_accounting_cash_and_sentiment_bound(seed, n, sentiment):
    rng = np.random.default_rng(seed)
    closes = [30 * np.cumprod(1 + 0.04 * rng.standard_normal(25)).clip(0.05) for _ in range(n)]
    scores = [rng.choice([-1, -0.5, 0, 0.5, 1], size=25) for _ in range(n)]
    cfg = EnvConfig(sentiment_enabled=sentiment, max_steps=120, stability_coef=0.0, tx_cost_rate=0.0)
    env = PortfolioEnv(_dataset(*closes, scores=scores), cfg)
    env.reset(seed=seed)
    for _ in range(120):
        before = env.account
        old_t = env.t
        a = rng.uniform(-0.2, 2.2, size=2 * n)
        res = env.step(a)
        acct = env.account
        prices = env.closes[env.t]
        ident = acct.balance + sum(s * p for s, p in zip(acct.shares, prices))
        assert abs(acct.net_worth - ident) <= 1e-9 * max(1.0, acct.net_worth)
        assert acct.balance >= 0 and min(acct.shares) >= 0
        # cash moves only by trade flows at the old close
        old = env.closes[old_t]
        flow = sum((s0 - s1) * p for s0, s1, p in zip(before.shares, acct.shares, old))
        assert acct.balance == pytest.approx(before.balance + flow, rel=1e-9, abs=1e-7)
        # with the other terms zeroed, reward minus the net-worth term is the sentiment term
        sent = res.reward - (acct.net_worth - before.net_worth) / cfg.initial_balance
        assert abs(sent) <= cfg.sentiment_coef + 1e-12
        if not sentiment:
            assert abs(sent) <= 1e-12
        if res.done:
            break
