"""Clipped-surrogate PPO for the trading environments, numpy only."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, NumericError
from .nn import (
    LOG_STD_FLOOR,
    PolicyParams,
    clip_action,
    forward,
    gaussian_entropy,
    gaussian_log_prob,
)

log = logging.getLogger(__name__)

TRAINING_LOG_HEADER = ("iteration", "timesteps", "mean_ep_reward", "policy_loss", "value_loss", "entropy")


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.2
    learning_rate: float = 3e-4
    rollout_horizon: int = 2048
    update_epochs: int = 10
    minibatch_size: int = 64
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    grad_clip_norm: float = 0.5
    total_timesteps: int = 20_000
    hidden_sizes: tuple[int, ...] = (64, 64)
    optimizer: str = "sgd"
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        checks = [
            (0.0 < self.gamma <= 1.0, "gamma must be in (0, 1]"),
            (0.0 <= self.gae_lambda <= 1.0, "gae_lambda must be in [0, 1]"),
            (self.clip_eps > 0, "clip_eps must be positive"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.rollout_horizon >= 1, "rollout_horizon must be >= 1"),
            (self.update_epochs >= 1, "update_epochs must be >= 1"),
            (self.minibatch_size >= 1, "minibatch_size must be >= 1"),
            (self.value_coef >= 0, "value_coef must be >= 0"),
            (self.entropy_coef >= 0, "entropy_coef must be >= 0"),
            (self.grad_clip_norm >= 0, "grad_clip_norm must be >= 0 (0 disables clipping)"),
            (self.total_timesteps >= 0, "total_timesteps must be >= 0"),
            (all(h > 0 for h in self.hidden_sizes), "hidden sizes must be positive"),
            (self.optimizer in ("sgd", "adam"), "optimizer must be 'sgd' or 'adam'"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @property
    def iterations(self) -> int:
        return math.ceil(self.total_timesteps / self.rollout_horizon)


class Minibatch(NamedTuple):
    obs: np.ndarray
    actions: np.ndarray
    old_log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray


@dataclass
class RolloutBuffer:
    capacity: int
    obs_dim: int
    action_dim: int

    def __post_init__(self):
        self.obs = np.zeros((self.capacity, self.obs_dim))
        self.actions = np.zeros((self.capacity, self.action_dim))
        self.log_probs = np.zeros(self.capacity)
        self.rewards = np.zeros(self.capacity)
        self.dones = np.zeros(self.capacity)
        self.values = np.zeros(self.capacity)
        self.size = 0

    def add(self, obs, action, log_prob, reward, done, value):
        i = self.size
        if i >= self.capacity:
            raise IndexError("rollout buffer is full")
        self.obs[i] = obs
        self.actions[i] = action
        self.log_probs[i] = log_prob
        self.rewards[i] = reward
        self.dones[i] = float(done)
        self.values[i] = value
        self.size += 1

    def clear(self):
        self.size = 0


@dataclass
class IterationLog:
    iteration: int
    timesteps: int
    mean_ep_reward: float
    policy_loss: float
    value_loss: float
    entropy: float


@dataclass
class TrainedModel:
    params: PolicyParams
    log: list[IterationLog] = field(default_factory=list)

    def act(self, obs, low, high, rng: np.random.Generator | None = None, deterministic: bool = False) -> np.ndarray:
        """Environment-ready action: the policy mean, or a sample, clipped to bounds."""
        mean, log_std, _ = forward(self.params, flatten_observation(obs))
        if deterministic:
            return clip_action(mean, low, high)
        return clip_action(mean + np.exp(log_std) * rng.standard_normal(mean.shape), low, high)


def flatten_observation(obs) -> np.ndarray:
    return obs if isinstance(obs, np.ndarray) else obs.flatten()


def compute_gae(rewards, values, dones, bootstrap_value, gamma, lam):
    """Generalized advantage estimates and the matching value targets.

    ``dones[t]`` means the episode ended after step ``t``, so nothing from
    ``t+1`` onward leaks back into it.
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    dones = np.asarray(dones, dtype=float)
    if not (rewards.shape == values.shape == dones.shape):
        raise ValueError("rewards, values and dones must have equal length")
    adv = np.zeros_like(rewards)
    next_value, next_adv = float(bootstrap_value), 0.0
    for t in range(len(rewards) - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        next_adv = delta + gamma * lam * live * next_adv
        adv[t] = next_adv
        next_value = values[t]
    return adv, adv + values


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    # floor rather than add eps so small-spread batches still come out with unit std
    return (adv - adv.mean()) / max(adv.std(), eps)


def ppo_loss(params: PolicyParams, batch: Minibatch, cfg: PpoConfig):
    """Clipped PPO loss and its gradient with respect to every parameter.

    Advantages are used as given; normalize them beforehand if wanted.
    Returns ``(loss, grads, stats)`` where ``grads`` is shaped like ``params``.
    """
    obs = np.atleast_2d(np.asarray(batch.obs, dtype=float))
    actions = np.atleast_2d(np.asarray(batch.actions, dtype=float))
    adv = np.asarray(batch.advantages, dtype=float)
    returns = np.asarray(batch.returns, dtype=float)
    n = obs.shape[0]

    mean, actor_cache = params.actor.forward(obs)
    value_out, critic_cache = params.critic.forward(obs)
    value = value_out[:, 0]
    log_std = np.maximum(params.log_std, LOG_STD_FLOOR)
    inv_std = np.exp(-log_std)
    z = (actions - mean) * inv_std
    new_logp = gaussian_log_prob(actions, mean, log_std)

    ratio = np.exp(new_logp - np.asarray(batch.old_log_probs, dtype=float))
    clipped = np.clip(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps)
    surr1 = ratio * adv
    surr2 = clipped * adv
    policy_loss = -np.mean(np.minimum(surr1, surr2))
    value_err = value - returns
    value_loss = np.mean(value_err * value_err)
    entropy = gaussian_entropy(log_std)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
    if not np.isfinite(loss):
        raise NumericError(
            f"non-finite PPO loss (policy={policy_loss}, value={value_loss}, entropy={entropy}); "
            f"max |ratio|={np.max(np.abs(ratio))}"
        )

    # d loss / d new_logp; the unclipped branch carries the gradient
    d_logp = np.where(surr1 <= surr2, -ratio * adv / n, 0.0)
    d_mean = d_logp[:, None] * z * inv_std
    d_log_std = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0) - cfg.entropy_coef
    d_log_std = np.where(params.log_std > LOG_STD_FLOOR, d_log_std, 0.0)
    d_value = (2.0 * cfg.value_coef / n) * value_err

    actor_dw, actor_db = params.actor.backward(actor_cache, d_mean)
    critic_dw, critic_db = params.critic.backward(critic_cache, d_value[:, None])
    grads = params.zeros_like()
    grads.actor.weights, grads.actor.biases = actor_dw, actor_db
    grads.critic.weights, grads.critic.biases = critic_dw, critic_db
    grads.log_std = d_log_std

    stats = {
        "policy_loss": float(policy_loss),
        "value_loss": float(value_loss),
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_eps)),
    }
    return float(loss), grads, stats


def numeric_gradient_error(loss_fn: Callable[[np.ndarray], float], theta: np.ndarray, analytic: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between ``analytic`` and central differences of ``loss_fn``."""
    theta = np.asarray(theta, dtype=float)
    if theta.size == 0:
        return 0.0
    worst = 0.0
    probe = theta.copy()
    for i in range(theta.size):
        probe[i] = theta[i] + h
        up = loss_fn(probe)
        probe[i] = theta[i] - h
        down = loss_fn(probe)
        probe[i] = theta[i]
        numeric = (up - down) / (2.0 * h)
        err = abs(analytic[i] - numeric) / max(1e-8, abs(analytic[i]) + abs(numeric))
        worst = max(worst, err)
    return worst


def grad_check(params: PolicyParams, batch: Minibatch, cfg: PpoConfig | None = None, tolerance: float | None = None,
               h: float = 1e-5, analytic: np.ndarray | None = None) -> float:
    """Compare :func:`ppo_loss` gradients with central finite differences.

    ``analytic`` overrides the backprop gradient (flat, in ``to_vector``
    order). Raises :class:`NumericError` when ``tolerance`` is exceeded.
    """
    cfg = cfg or PpoConfig()
    if analytic is None:
        _, grads, _ = ppo_loss(params, batch, cfg)
        analytic = grads.to_vector()
    err = numeric_gradient_error(lambda v: ppo_loss(params.from_vector(v), batch, cfg)[0], params.to_vector(), analytic, h)
    if tolerance is not None and err > tolerance:
        raise NumericError(f"gradient check failed: max relative error {err:.3e} > {tolerance:.1e}")
    return err


class _Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, theta, grad):
        return theta - self.lr * grad


class _Adam:
    def __init__(self, lr, n, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_by_global_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    if max_norm <= 0:
        return grad
    norm = float(np.sqrt(np.dot(grad, grad)))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def _update(params, buf, advantages, returns, cfg, optimizer, rng, iteration):
    n = buf.size
    n_batches = max(1, n // cfg.minibatch_size)
    theta = params.to_vector()
    totals = np.zeros(3)
    count = 0
    for epoch in range(cfg.update_epochs):
        for idx in np.array_split(rng.permutation(n), n_batches):
            batch = Minibatch(
                buf.obs[idx],
                buf.actions[idx],
                buf.log_probs[idx],
                normalize_advantages(advantages[idx]),
                returns[idx],
            )
            try:
                _, grads, stats = ppo_loss(params, batch, cfg)
            except NumericError as exc:
                raise NumericError(f"iteration {iteration}, epoch {epoch}: {exc}") from None
            theta = optimizer.step(theta, clip_by_global_norm(grads.to_vector(), cfg.grad_clip_norm))
            if not np.all(np.isfinite(theta)):
                raise NumericError(f"iteration {iteration}, epoch {epoch}: parameters became non-finite")
            params = params.from_vector(theta)
            totals += (stats["policy_loss"], stats["value_loss"], stats["entropy"])
            count += 1
    return params, totals / max(count, 1)


def train(env_factory: Callable[[], object], cfg: PpoConfig | None = None,
          callback: Callable[[IterationLog], None] | None = None) -> TrainedModel:
    """Run PPO for ``cfg.total_timesteps`` environment steps.

    Rollouts are collected from a single environment, single-threaded, so a
    fixed seed reproduces the final parameters bit for bit.
    """
    cfg = cfg or PpoConfig()
    init_ss, act_ss, shuffle_ss, env_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    act_rng = np.random.default_rng(act_ss)
    shuffle_rng = np.random.default_rng(shuffle_ss)

    env = env_factory()
    low, high = env.action_low, env.action_high
    params = PolicyParams.init(env.obs_dim, env.action_dim, cfg.hidden_sizes, np.random.default_rng(init_ss),
                               action_center=(low + high) / 2.0)
    optimizer = _Adam(cfg.learning_rate, params.n_params) if cfg.optimizer == "adam" else _Sgd(cfg.learning_rate)

    buf = RolloutBuffer(cfg.rollout_horizon, env.obs_dim, env.action_dim)
    obs = flatten_observation(env.reset(seed=int(env_ss.generate_state(1)[0])))
    ep_return = 0.0
    timesteps = 0
    history: list[IterationLog] = []
    for iteration in range(1, cfg.iterations + 1):
        buf.clear()
        finished: list[float] = []
        done = False
        for _ in range(cfg.rollout_horizon):
            mean, log_std, value = forward(params, obs)
            raw = mean + np.exp(log_std) * act_rng.standard_normal(mean.shape)
            logp = float(gaussian_log_prob(raw, mean, log_std))
            result = env.step(clip_action(raw, low, high))
            buf.add(obs, raw, logp, result.reward, result.done, value)
            ep_return += result.reward
            done = result.done
            if done:
                finished.append(ep_return)
                ep_return = 0.0
                obs = flatten_observation(env.reset())
            else:
                obs = flatten_observation(result.observation)
        timesteps += buf.size
        bootstrap = 0.0 if done else forward(params, obs)[2]
        advantages, returns = compute_gae(buf.rewards, buf.values, buf.dones, bootstrap, cfg.gamma, cfg.gae_lambda)
        params, (pl, vl, ent) = _update(params, buf, advantages, returns, cfg, optimizer, shuffle_rng, iteration)
        # no episode finished this rollout: report the running episode's return so far
        mean_ep = float(np.mean(finished)) if finished else ep_return
        entry = IterationLog(iteration, timesteps, mean_ep, float(pl), float(vl), float(ent))
        history.append(entry)
        log.info("iter %d  steps %d  ep_reward %.5f  pi %.5f  v %.5f", iteration, timesteps, mean_ep, pl, vl)
        if callback is not None:
            callback(entry)
    return TrainedModel(params, history)


def write_training_log(entries: Sequence[IterationLog], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRAINING_LOG_HEADER)
        for e in entries:
            writer.writerow([e.iteration, e.timesteps, repr(e.mean_ep_reward), repr(e.policy_loss),
                             repr(e.value_loss), repr(e.entropy)])
