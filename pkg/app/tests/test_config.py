import logging

import pytest
from flask import Flask

from app import create_app
from app.config import RunConfig, TrainConfig, load_run_config, write_run_config
from app.errors import ConfigError
from config import Config, TestingConfig


def write(tmp_path, text):
    path = tmp_path / 'run.cfg'
    path.write_text(text)
    return str(path)


def test_defaults_without_a_file():
    config = load_run_config(None)
    assert config == RunConfig()
    assert config.train.learning_rate == 1e-4
    assert config.train.momentum == 0.9
    assert config.train.weight_noise == 0.075
    assert config.train.init_range == 0.1
    assert config.train.early_stop_metric == 'log_loss'


def test_file_values_and_comments(tmp_path):
    path = write(tmp_path, "# tiny run\nalphabet_size = 3\nfeature_dim = 3\n\n"
                           "learning_rate = 0.001\nearly_stop_metric = error_rate\n")
    config = load_run_config(path)
    assert config.alphabet_size == 3
    assert config.feature_dim == 3
    assert config.train.learning_rate == 0.001
    assert config.train.early_stop_metric == 'error_rate'
    assert config.pred_hidden == RunConfig().pred_hidden


def test_overrides_replace_file_values(tmp_path):
    path = write(tmp_path, "seed = 3\ncount = 20\n")
    config = load_run_config(path, {'seed': 9, 'count': None})
    assert config.train.seed == 9
    assert config.count == 20


def test_unknown_key_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='learnin_rate'):
        load_run_config(write(tmp_path, "learnin_rate = 0.1\n"))


def test_key_without_value_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='momentum'):
        load_run_config(write(tmp_path, "momentum\n"))


def test_missing_file_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        load_run_config(str(tmp_path / 'absent.cfg'))


@pytest.mark.parametrize('line', [
    'learning_rate = 0',
    'momentum = 1.0',
    'weight_noise = -0.1',
    'alphabet_size = 1',
    'early_stop_metric = accuracy',
    'task = reverse',
    'nbest = 5\nbeam_width = 2',
    'min_length = 6\nmax_length = 3',
    'validation_fraction = 1',
    'max_epochs = many',
])
def test_invalid_values_are_rejected(tmp_path, line):
    with pytest.raises(ConfigError):
        load_run_config(write(tmp_path, line + '\n'))


def test_train_config_checks_its_own_ranges():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ConfigError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(weight_noise=-1.0)


def test_written_config_reads_back_equal(tmp_path):
    config = RunConfig.from_dict({'alphabet_size': 4, 'learning_rate': 0.0125, 'weight_noise': 0.0,
                                  'task': 'dedup', 'seed': 77})
    path = str(tmp_path / 'out.cfg')
    write_run_config(config, path)
    assert load_run_config(path) == config


def test_to_dict_uses_file_keys():
    values = RunConfig().to_dict()
    assert 'train' not in values
    assert values['learning_rate'] == 1e-4
    assert RunConfig.from_dict(values) == RunConfig()


def test_app_config_validation_rejects_bad_values():
    class BadConfig(TestingConfig):
        DEFAULT_BEAM_WIDTH = 0

    with pytest.raises(RuntimeError, match='DEFAULT_BEAM_WIDTH'):
        BadConfig.validate(Flask(__name__))


def test_app_config_validation_accepts_defaults():
    Config.validate(Flask(__name__))
    TestingConfig.validate(Flask(__name__))


def test_log_file_gets_a_plain_formatted_handler(tmp_path):
    log_path = tmp_path / 'transducer.log'

    class FileLoggingConfig(Config):
        LOG_FILE = str(log_path)
        LOG_LEVEL = 'INFO'

    app = create_app(FileLoggingConfig)
    handlers = [h for h in app.logger.handlers if isinstance(h, logging.FileHandler)]
    try:
        assert [type(h) for h in handlers] == [logging.FileHandler]
        app.logger.info("epoch summary")
    finally:
        for handler in handlers:
            handler.close()
            app.logger.removeHandler(handler)
    line = log_path.read_text().strip()
    assert line.endswith(f" - {app.logger.name} - INFO - epoch summary")


def test_testing_config_writes_no_log_file():
    app = create_app(TestingConfig)
    assert not [h for h in app.logger.handlers if isinstance(h, logging.FileHandler)]
