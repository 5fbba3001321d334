import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ToyEnv, discounted_advantages, random_policy_case, td_errors
from sentio.errors import ConfigError, NumericError
from sentio.nn import Mlp, PolicyParams, forward, gaussian_entropy, gaussian_log_prob
from sentio.ppo import (
    TRAINING_LOG_HEADER,
    Minibatch,
    PpoConfig,
    RolloutBuffer,
    clip_by_global_norm,
    compute_gae,
    grad_check,
    normalize_advantages,
    numeric_gradient_error,
    ppo_loss,
    train,
    write_training_log,
)
from sentio.synthetic import series_from_closes
from sentio.trading_env import EnvConfig, TradingEnv


def test_gae_single_terminal():
    adv, ret = compute_gae([1.0], [0.0], [1.0], 5.0, 0.99, 0.95)
    assert adv.tolist() == [1.0] and ret.tolist() == [1.0]


def test_gae_two_steps():
    adv, _ = compute_gae([1.0, 1.0], [0.0, 0.0], [0.0, 1.0], 0.0, 1.0, 1.0)
    assert adv.tolist() == [2.0, 1.0]
    assert adv.tolist() == discounted_advantages([1, 1], [0, 0], [0, 1], 0.0, 1.0)


def test_gae_bootstrap_and_lambda_zero():
    r, v, d = [0.5, -1.0, 2.0], [0.1, 0.2, 0.3], [0.0, 0.0, 0.0]
    adv, ret = compute_gae(r, v, d, 4.0, 0.9, 0.0)
    assert adv.tolist() == td_errors(r, v, d, 4.0, 0.9)
    assert np.array_equal(ret, adv + np.array(v))
    adv1, _ = compute_gae(r, v, d, 4.0, 0.9, 1.0)
    assert adv1 == pytest.approx(discounted_advantages(r, v, d, 4.0, 0.9), abs=1e-12)


def test_gae_length_mismatch():
    with pytest.raises(ValueError):
        compute_gae([1.0, 2.0], [0.0], [0.0, 0.0], 0.0, 0.99, 0.95)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 16), st.integers(0, 2**31), st.floats(0.5, 1.0))
def test_gae_matches_oracles(n, seed, gamma):
    rng = np.random.default_rng(seed)
    r, v = rng.normal(size=n), rng.normal(size=n)
    d = (rng.random(n) < 0.25).astype(float)
    boot = float(rng.normal())
    adv, _ = compute_gae(r, v, d, boot, gamma, 1.0)
    assert np.max(np.abs(adv - discounted_advantages(r, v, d, boot, gamma))) <= 1e-8
    adv0, _ = compute_gae(r, v, d, boot, gamma, 0.0)
    assert adv0.tolist() == td_errors(r.tolist(), v.tolist(), d.tolist(), boot, gamma)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=64))
def test_normalize_advantages(values):
    adv = np.array(values)
    if np.ptp(adv) < 1e-3:
        return
    out = normalize_advantages(adv)
    assert abs(out.mean()) <= 1e-6
    assert abs(out.std() - 1) <= 1e-6


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 10), st.floats(-10, 10), st.floats(0.01, 0.5))
def test_clipped_below_unclipped(rho, adv, eps):
    assert min(rho * adv, float(np.clip(rho, 1 - eps, 1 + eps)) * adv) <= rho * adv


def _linear_params(obs_dim=1, act=1):
    """Zero-weight nets: the mean and value are just the output biases."""
    return PolicyParams(Mlp.zeros([obs_dim, act]), np.zeros(act), Mlp.zeros([obs_dim, 1]))


def _batch_for_ratio(params, ratio, adv, returns=None):
    obs = np.zeros((len(adv), params.obs_dim))
    actions = np.zeros((len(adv), params.action_dim))
    mu, log_std, value = forward(params, obs)
    new = gaussian_log_prob(actions, mu, log_std)
    returns = value if returns is None else returns
    return Minibatch(obs, actions, new - np.log(ratio), np.asarray(adv, float), np.asarray(returns, float))


def test_loss_clip_example():
    p = _linear_params()
    cfg = PpoConfig(clip_eps=0.2, value_coef=0.0, entropy_coef=0.0)
    _, _, stats = ppo_loss(p, _batch_for_ratio(p, np.array([2.0]), [1.0]), cfg)
    assert stats["policy_loss"] == pytest.approx(-1.2, abs=1e-12)


def test_loss_identity_ratio():
    p = _linear_params()
    adv = np.array([0.5, -1.5, 2.0, 0.25])
    _, _, stats = ppo_loss(p, _batch_for_ratio(p, np.ones(4), adv), PpoConfig())
    assert stats["policy_loss"] == pytest.approx(-adv.mean(), abs=1e-15)


def test_loss_entropy_only():
    p = _linear_params(2, 2)
    p.log_std[:] = [0.3, -0.4]
    cfg = PpoConfig(entropy_coef=0.05)
    loss, _, _ = ppo_loss(p, _batch_for_ratio(p, np.ones(3), np.zeros(3)), cfg)
    assert loss == pytest.approx(-0.05 * gaussian_entropy(p.log_std), abs=1e-15)


def test_loss_value_term():
    p = _linear_params()
    p.critic.biases[0][:] = 1.0
    batch = _batch_for_ratio(p, np.ones(2), np.zeros(2), returns=[0.0, 3.0])
    loss, _, stats = ppo_loss(p, batch, PpoConfig(value_coef=0.5))
    assert stats["value_loss"] == pytest.approx((1 + 4) / 2)
    assert loss == pytest.approx(0.5 * 2.5)


def test_loss_non_finite():
    p = _linear_params()
    batch = _batch_for_ratio(p, np.ones(1), [math.nan])
    with pytest.raises(NumericError):
        ppo_loss(p, batch, PpoConfig())


def test_grad_check_random_configs():
    errs = [grad_check(*random_policy_case(np.random.default_rng(s)), PpoConfig(entropy_coef=0.01)) for s in range(5)]
    assert max(errs) <= 1e-4


def test_grad_check_4_8_2():
    rng = np.random.default_rng(42)
    params = PolicyParams.init(4, 2, (8,), rng)
    params.actor.weights[-1][:] = rng.normal(0, 0.5, (8, 2))
    obs = rng.normal(size=(8, 4))
    mu, ls, _ = forward(params, obs)
    actions = mu + np.exp(ls) * rng.normal(size=mu.shape)
    old = gaussian_log_prob(actions, mu, ls) + rng.normal(0, 0.3, 8)
    batch = Minibatch(obs, actions, old, rng.normal(size=8), rng.normal(size=8))
    assert grad_check(params, batch, tolerance=1e-4) <= 1e-4


def test_grad_check_detects_corruption():
    params, batch = random_policy_case(np.random.default_rng(3))
    cfg = PpoConfig()
    _, grads, _ = ppo_loss(params, batch, cfg)
    bad = grads.to_vector()
    bad[0] += 1.0
    assert grad_check(params, batch, cfg, analytic=bad) > 1e-2
    with pytest.raises(NumericError):
        grad_check(params, batch, cfg, tolerance=1e-4, analytic=bad)


def test_gradient_error_zero_params():
    assert numeric_gradient_error(lambda v: 0.0, np.zeros(0), np.zeros(0)) == 0.0


def test_global_norm_clip():
    g = np.array([3.0, 4.0])
    assert clip_by_global_norm(g, 1.0).tolist() == pytest.approx([0.6, 0.8])
    assert clip_by_global_norm(g, 10.0) is g
    assert clip_by_global_norm(g, 0.0) is g


def test_config_validation():
    assert PpoConfig().iterations == 10
    assert PpoConfig(total_timesteps=256, rollout_horizon=128).iterations == 2
    for bad in (dict(gamma=0.0), dict(gae_lambda=1.5), dict(clip_eps=0), dict(optimizer="rmsprop"),
                dict(hidden_sizes=(0,)), dict(minibatch_size=0)):
        with pytest.raises(ConfigError):
            PpoConfig(**bad)


def test_rollout_buffer_capacity():
    buf = RolloutBuffer(2, 3, 2)
    buf.add(np.ones(3), np.ones(2), -1.0, 0.5, False, 0.1)
    buf.add(np.ones(3), np.ones(2), -1.0, 0.5, True, 0.1)
    with pytest.raises(IndexError):
        buf.add(np.ones(3), np.ones(2), -1.0, 0.5, True, 0.1)
    assert buf.dones.tolist() == [0.0, 1.0]


def _env_factory(series):
    return lambda: TradingEnv(series, EnvConfig(max_steps=50, seed=0))


def test_train_loop_arithmetic(noisy_series, tmp_path):
    calls = []
    cfg = PpoConfig(total_timesteps=128, rollout_horizon=128, hidden_sizes=(8,), seed=0, update_epochs=2)
    model = train(_env_factory(noisy_series), cfg, callback=calls.append)
    assert len(model.log) == 1 and calls == model.log
    assert model.log[0].timesteps == 128
    cfg = PpoConfig(total_timesteps=300, rollout_horizon=128, hidden_sizes=(8,), seed=0, update_epochs=1)
    model = train(_env_factory(noisy_series), cfg)
    assert [e.timesteps for e in model.log] == [128, 256, 384]
    path = tmp_path / "log.csv"
    write_training_log(model.log, path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(TRAINING_LOG_HEADER) and len(lines) == 4


def test_train_determinism(noisy_series):
    cfg = PpoConfig(total_timesteps=256, rollout_horizon=128, hidden_sizes=(16,), seed=7, update_epochs=3)
    a = train(_env_factory(noisy_series), cfg)
    b = train(_env_factory(noisy_series), cfg)
    assert np.array_equal(a.params.to_vector(), b.params.to_vector())
    assert a.log == b.log
    c = train(_env_factory(noisy_series), PpoConfig(**{**cfg.__dict__, "seed": 8}))
    assert not np.array_equal(a.params.to_vector(), c.params.to_vector())


def test_train_keeps_params_finite(noisy_series):
    model = train(_env_factory(noisy_series), PpoConfig(total_timesteps=256, rollout_horizon=64, hidden_sizes=(8,),
                                                        seed=1, learning_rate=0.05, optimizer="adam"))
    assert model.params.all_finite()


def test_trained_model_act_bounds(noisy_series):
    env = _env_factory(noisy_series)()
    model = train(lambda: env, PpoConfig(total_timesteps=64, rollout_horizon=64, hidden_sizes=(4,), seed=0))
    obs = env.reset(seed=1)
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = model.act(obs, env.action_low, env.action_high, rng=rng)
        assert np.all(a >= env.action_low) and np.all(a <= env.action_high)
    mean, _, _ = forward(model.params, obs)
    assert np.array_equal(model.act(obs, env.action_low, env.action_high, deterministic=True),
                          np.clip(mean, env.action_low, env.action_high))


def test_toy_env_learning():
    improved = 0
    for seed in range(3):
        cfg = PpoConfig(total_timesteps=2560, rollout_horizon=256, seed=seed, optimizer="adam")
        log = train(ToyEnv, cfg).log
        assert len(log) == 10
        improved += log[-1].mean_ep_reward > log[0].mean_ep_reward
    assert improved >= 2
