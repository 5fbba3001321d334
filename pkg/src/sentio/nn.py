"""Tiny numpy MLPs with hand-written backprop, plus the Gaussian actor-critic.

Batches are row-major: ``x`` has shape ``(batch, features)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ModelFormatError, ShapeError

LOG_STD_FLOOR = -20.0
INITIAL_LOG_STD = -0.5
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
MODEL_MAGIC = "SENTIO-MODEL"
MODEL_VERSION = "v1"


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, sizes, rng: np.random.Generator, out_scale: float = 1.0) -> "Mlp":
        """Scaled-normal init (std ``sqrt(1/fan_in)``); the last layer is scaled by ``out_scale``."""
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ShapeError(f"bad layer sizes {sizes}")
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes, sizes[1:])):
            w = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
            if i == len(sizes) - 2:
                w *= out_scale
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes) -> "Mlp":
        return cls([np.zeros((a, b)) for a, b in zip(sizes, sizes[1:])], [np.zeros(b) for b in sizes[1:]])

    @property
    def layer_sizes(self) -> list[int]:
        if not self.weights:
            return []
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def forward(self, x: np.ndarray):
        """Returns ``(output, cache)``; the cache holds each layer's input."""
        cache = []
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache.append(h)
            h = h @ w + b
            if i < last:
                h = np.tanh(h)
        return h, cache

    def backward(self, cache, dout: np.ndarray):
        """Gradients ``(dW list, db list)`` of a scalar whose output-gradient is ``dout``."""
        dws = [None] * len(self.weights)
        dbs = [None] * len(self.weights)
        g = dout
        for i in range(len(self.weights) - 1, -1, -1):
            h_in = cache[i]
            dws[i] = h_in.T @ g
            dbs[i] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.weights[i].T) * (1.0 - h_in * h_in)
        return dws, dbs

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class PolicyParams:
    actor: Mlp
    log_std: np.ndarray
    critic: Mlp

    def __post_init__(self):
        self.log_std = np.asarray(self.log_std, dtype=float)
        if self.actor.in_dim != self.critic.in_dim:
            raise ShapeError(f"actor input {self.actor.in_dim} != critic input {self.critic.in_dim}")
        if self.actor.out_dim != self.log_std.shape[0]:
            raise ShapeError(f"actor output {self.actor.out_dim} != log_std length {self.log_std.shape[0]}")
        if self.critic.out_dim != 1:
            raise ShapeError("critic must have a single output")

    @classmethod
    def init(cls, obs_dim, action_dim, hidden, rng, action_center=None) -> "PolicyParams":
        actor = Mlp.init([obs_dim, *hidden, action_dim], rng, out_scale=0.01)
        if action_center is not None:
            actor.biases[-1][:] = action_center
        critic = Mlp.init([obs_dim, *hidden, 1], rng, out_scale=1.0)
        return cls(actor, np.full(action_dim, INITIAL_LOG_STD), critic)

    @property
    def obs_dim(self) -> int:
        return self.actor.in_dim

    @property
    def action_dim(self) -> int:
        return self.actor.out_dim

    def arrays(self) -> list[np.ndarray]:
        return [*self.actor.arrays(), self.log_std, *self.critic.arrays()]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_vector(self, vec: np.ndarray) -> "PolicyParams":
        """Copy of these params with values taken from a flat vector."""
        out = self.zeros_like()
        pos = 0
        for dst in out.arrays():
            dst[...] = vec[pos : pos + dst.size].reshape(dst.shape)
            pos += dst.size
        if pos != len(vec):
            raise ShapeError(f"vector has {len(vec)} values, params need {pos}")
        return out

    def zeros_like(self) -> "PolicyParams":
        return PolicyParams(Mlp.zeros(self.actor.layer_sizes), np.zeros_like(self.log_std), Mlp.zeros(self.critic.layer_sizes))

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.actor.copy(), self.log_std.copy(), self.critic.copy())

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


def _as_batch(params: PolicyParams, obs) -> tuple[np.ndarray, bool]:
    x = np.asarray(obs, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.obs_dim:
        raise ShapeError(f"observation has {np.shape(obs)[-1] if np.ndim(obs) else 0} features, policy expects {params.obs_dim}")
    return x, single


def effective_log_std(params: PolicyParams) -> np.ndarray:
    return np.maximum(params.log_std, LOG_STD_FLOOR)


def forward(params: PolicyParams, obs):
    """Policy mean, log-std and state value for one observation or a batch."""
    x, single = _as_batch(params, obs)
    mean, _ = params.actor.forward(x)
    value, _ = params.critic.forward(x)
    value = value[:, 0]
    if single:
        return mean[0], effective_log_std(params), float(value[0])
    return mean, effective_log_std(params), value


def gaussian_log_prob(actions, mean, log_std) -> np.ndarray:
    z = (actions - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - HALF_LOG_2PI, axis=-1)


def gaussian_entropy(log_std) -> float:
    return float(np.sum(log_std + 0.5 + HALF_LOG_2PI))


def sample_action(params: PolicyParams, obs, rng: np.random.Generator):
    """Draw ``a ~ N(mean, exp(log_std))``; returns ``(raw_action, log_prob)``.

    The log-probability is of the unclipped sample. Use :func:`clip_action`
    to get what the environment should receive.
    """
    mean, log_std, _ = forward(params, obs)
    raw = mean + np.exp(log_std) * rng.standard_normal(mean.shape)
    return raw, float(gaussian_log_prob(raw, mean, log_std))


def clip_action(raw, low, high) -> np.ndarray:
    return np.clip(raw, low, high)


# -- persistence --------------------------------------------------------------

def save_model(params: PolicyParams, path) -> None:
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        "actor " + " ".join(map(str, params.actor.layer_sizes)),
        "critic " + " ".join(map(str, params.critic.layer_sizes)),
        f"log_std {params.log_std.shape[0]}",
        f"params {params.n_params}",
    ]
    lines.extend(repr(float(v)) for v in params.to_vector())
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def _sizes(line: str, key: str, path) -> list[int]:
    parts = line.split()
    if not parts or parts[0] != key:
        raise ModelFormatError(f"{path}: expected '{key} ...' manifest line, got {line!r}")
    try:
        return [int(p) for p in parts[1:]]
    except ValueError:
        raise ModelFormatError(f"{path}: non-integer sizes in {line!r}") from None


def _single(line: str, key: str, path) -> int:
    sizes = _sizes(line, key, path)
    if len(sizes) != 1:
        raise ModelFormatError(f"{path}: expected one integer after '{key}', got {line!r}")
    return sizes[0]


def load_model(path) -> PolicyParams:
    try:
        text = Path(path).read_text(encoding="ascii")
    except (OSError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from None
    lines = text.splitlines()
    if not lines:
        raise ModelFormatError(f"{path}: empty model file")
    header = lines[0].split()
    if len(header) != 2 or header[0] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a {MODEL_MAGIC} file")
    if header[1] != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {header[1]} (expected {MODEL_VERSION})")
    if len(lines) < 5:
        raise ModelFormatError(f"{path}: truncated manifest")
    actor_sizes = _sizes(lines[1], "actor", path)
    critic_sizes = _sizes(lines[2], "critic", path)
    n_log_std = _single(lines[3], "log_std", path)
    declared = _single(lines[4], "params", path)
    try:
        template = PolicyParams(Mlp.zeros(actor_sizes), np.zeros(n_log_std), Mlp.zeros(critic_sizes))
    except (ShapeError, TypeError, IndexError) as exc:
        raise ModelFormatError(f"{path}: inconsistent manifest: {exc}") from None
    if declared != template.n_params:
        raise ModelFormatError(f"{path}: manifest declares {declared} params, layer sizes imply {template.n_params}")
    payload = [ln for ln in lines[5:] if ln.strip()]
    if len(payload) != declared:
        raise ModelFormatError(f"{path}: expected {declared} parameter values, found {len(payload)}")
    try:
        vec = np.array([float(v) for v in payload])
    except ValueError as exc:
        raise ModelFormatError(f"{path}: bad parameter value: {exc}") from None
    return template.from_vector(vec)
