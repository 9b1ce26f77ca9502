import logging

import pytest

from swb.config import (EstimatorConfig, PipelineConfig, TokenizerConfig, load_config, parse_key_value,
                        setup_logging)
from swb.errors import ConfigError


def test_parse_key_value_skips_comments_and_blanks():
    text = "# общие настройки\n\ncats = off,-1,0,1  # D0 первой\nseed=42\n"
    assert parse_key_value(text) == {"cats": "off,-1,0,1", "seed": "42"}


@pytest.mark.parametrize("text, message", [
    ("seed 42\n", "line 1"),
    ("seed = 1\nseed = 2\n", "duplicate key"),
])
def test_parse_key_value_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        parse_key_value(text)


def test_load_config_defaults_and_file(tmp_path):
    assert load_config(None) == PipelineConfig()
    path = tmp_path / "run.cfg"
    path.write_text("cats = A, B\nstemmer = italian\nngram_max = 1\nstrict = true\nridge = 1e-6\n", encoding="utf-8")
    config = load_config(path)
    assert config.cats == ["A", "B"]
    assert config.tokenizer() == TokenizerConfig(ngram_min=1, ngram_max=1, min_df=2, stemmer="italian")
    assert config.estimator() == EstimatorConfig(ridge=1e-6, strict=True)


@pytest.mark.parametrize("text", [
    "unknown_key = 1\n",
    "method = median\n",
    "ngram_min = 3\nngram_max = 2\n",
    "bootstrap = -5\n",
    "stamp = start\n",
])
def test_load_config_rejects_invalid_values(tmp_path, text):
    path = tmp_path / "bad.cfg"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.cfg")


def test_merged_overrides_ignore_unset_flags():
    base = PipelineConfig(method="baseline", seed=3)
    merged = base.merged({"seed": 9, "method": None, "stemmer": "none"})
    assert merged.seed == 9
    assert merged.method == "baseline"
    assert merged.stemmer is None
    with pytest.raises(ConfigError, match="invalid option"):
        base.merged({"jobs": 0})


def test_setup_logging_writes_log_file(tmp_path):
    log_file = tmp_path / "logs" / "run.log"
    setup_logging(log_file)
    logging.getLogger("swb.test").warning("проверка журнала")
    setup_logging(None)
    assert "проверка журнала" in log_file.read_text(encoding="utf-8")
