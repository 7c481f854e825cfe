import pytest

from m3t import ConfigInvalid, ExperimentConfig, MissingFile, load_config
from m3t._config import parse_key_value_file


def _write(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_defaults():
    config = load_config()
    assert config == ExperimentConfig()
    assert config.parent_shares == 120000
    assert config.agent == "m3t" and config.reward_mode == "dense"
    assert config.fail_penalty == -99.0


def test_parse_file(tmp_path):
    path = _write(
        tmp_path,
        "# experiment\n\nepisodes = 1e4\nlr=1e-3  # adam\nagent=vwap\ndata_dir=none\n",
    )
    assert [e[0] for e in parse_key_value_file(path)] == [3, 4, 5, 6]
    config = load_config(path)
    assert config.episodes == 10000 and isinstance(config.episodes, int)
    assert config.lr == 1e-3
    assert config.agent == "vwap"
    assert config.data_dir is None


def test_overrides(tmp_path):
    path = _write(tmp_path, "seed=3\nagent=ap\n")
    config = load_config(path, seed=7, agent=None)
    assert (config.seed, config.agent) == (7, "ap")
    assert config.override(seed=None, episodes=5).seed == 7
    assert config.override(episodes=5).episodes == 5


@pytest.mark.parametrize(
    "text",
    ["color=red\n", "episodes=ten\n", "episodes=1.5\n", "episodes\n"],
)
def test_bad_file(tmp_path, text):
    with pytest.raises(ConfigInvalid):
        load_config(_write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_config(str(tmp_path / "none.cfg"))


@pytest.mark.parametrize(
    "overrides",
    [
        {"agent": "twap"},
        {"reward_mode": "shaped"},
        {"micro_backbone": "gru"},
        {"episodes": 0},
        {"side": 0},
        {"gamma": 1.5},
        {"train_fraction": 1.0},
        {"tranche_min": 300000},
        {"history_days": -1},
        {"epsilon_min": 0.0},
        {"meta_blame_step_ratio": 1.0},
        {"model_width": 10},
    ],
)
def test_validate(overrides):
    with pytest.raises(ConfigInvalid):
        ExperimentConfig(**overrides)
