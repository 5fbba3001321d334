from pathlib import Path

import pytest

from sentio.config import load_config, parse_config
from sentio.errors import ConfigError

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def test_parse_and_defaults(tmp_path):
    cfg = parse_config("data_dir = d\nsymbols = A, B\nmode = portfolio\nenv.max_steps = 50\n"
                       "ppo.hidden_sizes = 32, 16\neval.episodes = 3\n", tmp_path)
    assert cfg.data_dir == (tmp_path / "d").resolve()
    assert cfg.symbols == ("A", "B")
    assert cfg.env.max_steps == 50 and cfg.env.initial_balance == 10_000
    assert cfg.ppo.hidden_sizes == (32, 16) and cfg.ppo.total_timesteps == 20_000
    assert (cfg.eval_episodes, cfg.eval_steps) == (3, 2000)
    assert cfg.out_dir == (tmp_path / "runs").resolve()
    assert cfg.label == "portfolio_no_sentiment"
    cfg.validate()


def test_seed_and_flag_flow_into_sub_configs(tmp_path):
    cfg = parse_config("data_dir = d\nsymbols = A\nseed = 5\nsentiment_enabled = yes\n", tmp_path)
    assert cfg.env_config.seed == 5 and cfg.env_config.sentiment_enabled
    assert cfg.ppo_config.seed == 5
    assert cfg.with_overrides(seed=9).ppo_config.seed == 9


@pytest.mark.parametrize("text", [
    "bogus = 1",
    "env.nope = 1",
    "symbols = A\nsymbols = B",
    "no equals sign",
    "env.max_steps = lots",
    "env.window = 1",
    "ppo.optimizer = rmsprop",
    "sentiment_enabled = maybe",
])
def test_parse_errors(text, tmp_path):
    with pytest.raises(ConfigError):
        parse_config(text, tmp_path)


@pytest.mark.parametrize("text", [
    "data_dir = d\nmode = single\nsymbols = A, B",
    "data_dir = d\nmode = sideways\nsymbols = A",
    "symbols = A",
    "data_dir = d\nsymbols = A\neval.episodes = 0",
])
def test_validate_errors(text, tmp_path):
    with pytest.raises(ConfigError):
        parse_config(text, tmp_path).validate()


def test_effective_config_round_trip(tmp_path):
    cfg = load_config(FIXTURES / "portfolio.cfg")
    text = cfg.to_text()
    (tmp_path / "effective_config").write_text(text)
    again = load_config(tmp_path / "effective_config")
    assert again == cfg
    assert again.to_text() == text


def test_missing_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
