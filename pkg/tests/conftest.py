import numpy as np
import pytest

from sentio.synthetic import geometric_closes, series_from_closes


@pytest.fixture
def flat_series():
    return series_from_closes("FLAT", np.full(40, 100.0), volume=5000)


@pytest.fixture
def rising_series():
    return series_from_closes("UP", geometric_closes(60, 0.01))


@pytest.fixture
def noisy_series():
    rng = np.random.default_rng(5)
    closes = 50 * np.cumprod(1 + 0.02 * rng.standard_normal(80))
    scores = rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0], size=80)
    return series_from_closes("NOISY", closes, scores, spread=0.01)


class ConstantPolicy:
    """Stand-in for a trained model that always emits the same action."""

    def __init__(self, action):
        self.action = np.asarray(action, dtype=float)

    def act(self, obs, low, high, rng=None, deterministic=False):
        return np.clip(self.action, low, high)
