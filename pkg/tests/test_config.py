from __future__ import annotations

from pathlib import Path

import pytest

from senticast.config import apply_overrides, load_run_config, read_key_values
from senticast.errors import ConfigError, ParseError

MINIMAL = """
paths.ohlcv_dir = data/ohlcv
paths.tweets = data/tweets.csv
paths.output = out
tickers = aaa, bbb
"""


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


class TestKeyValueFormat:
    def test_comments_and_blanks_ignored(self, tmp_path):
        path = tmp_path / "kv.cfg"
        path.write_text("# heading\n\na = 1\n  b = two \n")
        assert read_key_values(path) == {"a": "1", "b": "two"}

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "kv.cfg"
        path.write_text("just a line\n")
        with pytest.raises(ParseError, match="key = value"):
            read_key_values(path)

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "kv.cfg"
        path.write_text("a = 1\na = 2\n")
        with pytest.raises(ParseError, match="duplicate"):
            read_key_values(path)


class TestLoadRunConfig:
    def test_minimal_config_with_defaults(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        assert config.tickers == ["AAA", "BBB"]
        assert config.feature_set == "HLOVS"
        assert config.train.lookback == 15
        assert config.train.epochs == 200
        assert config.ohlcv_dir == (tmp_path / "data/ohlcv").resolve()

    def test_train_keys_and_seed_flow_through(self, tmp_path):
        text = MINIMAL + "seed = 99\ntrain.hidden_size = 16\ntrain.n_heads = 2\n"
        config = load_run_config(write_config(tmp_path, text))
        assert config.seed == 99
        assert config.train.seed == 99
        assert config.train.hidden_size == 16

    def test_grid_keys_parse_lists(self, tmp_path):
        text = MINIMAL + "grid.lookback = 5, 15\ngrid.model = nlinear,tft_lite\n"
        config = load_run_config(write_config(tmp_path, text))
        assert config.grid == {"lookback": [5, 15], "model": ["nlinear", "tft_lite"]}

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="mystery"):
            load_run_config(write_config(tmp_path, MINIMAL + "mystery = 1\n"))

    def test_unknown_train_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="warmup"):
            load_run_config(write_config(tmp_path, MINIMAL + "train.warmup = 1\n"))

    def test_missing_required_path(self, tmp_path):
        with pytest.raises(ConfigError, match="paths.output"):
            load_run_config(
                write_config(tmp_path, "paths.ohlcv_dir = a\npaths.tweets = b\ntickers = A\n")
            )

    def test_empty_tickers_rejected(self, tmp_path):
        bad = MINIMAL.replace("tickers = aaa, bbb", "tickers = ")
        with pytest.raises(ConfigError, match="tickers"):
            load_run_config(write_config(tmp_path, bad))

    def test_invalid_model_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="model"):
            load_run_config(write_config(tmp_path, MINIMAL + "train.model = lstm\n"))


class TestOverrides:
    def test_train_field_overrides(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        config = apply_overrides(config, {"hidden_size": "16", "n_heads": "2", "dropout": "0.1"})
        assert config.train.hidden_size == 16
        assert config.train.dropout == 0.1

    def test_seed_override_updates_global_and_train(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        config = apply_overrides(config, {"seed": "123"})
        assert config.seed == 123 and config.train.seed == 123

    def test_feature_set_and_output(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        config = apply_overrides(config, {"feature_set": "hlov", "output": str(tmp_path / "o2")})
        assert config.feature_set == "HLOV"
        assert config.output_dir == tmp_path / "o2"

    def test_none_values_are_skipped(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        out = apply_overrides(config, {"hidden_size": None})
        assert out.train.hidden_size == 64

    def test_unknown_override_rejected(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        with pytest.raises(ConfigError):
            apply_overrides(config, {"warp_speed": "9"})

    def test_invalid_combination_caught_by_validate(self, tmp_path):
        config = load_run_config(write_config(tmp_path, MINIMAL))
        with pytest.raises(ConfigError):
            apply_overrides(config, {"hidden_size": "30", "n_heads": "4"})
