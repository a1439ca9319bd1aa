"""
Run configuration: flat ``key = value`` files with ``#`` comments, parsed
with python-dotenv and validated by marshmallow.
"""

import os
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Optional

from dotenv import dotenv_values
from marshmallow import ValidationError

from app.errors import ConfigError
from app.schemas import run_config_schema


@dataclass(frozen=True)
class TrainConfig:
    """Optimiser and early-stopping settings."""
    learning_rate: float = 1e-4
    momentum: float = 0.9
    weight_noise: float = 0.075
    init_range: float = 0.1
    max_epochs: int = 100
    early_stop_metric: str = 'log_loss'
    patience: int = 10
    seed: int = 1

    def __post_init__(self):
        # run files require a positive rate; zero is allowed here for null-update runs
        if self.learning_rate < 0:
            raise ConfigError(f"learning rate must be non-negative, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_noise < 0:
            raise ConfigError(f"weight noise std must be non-negative, got {self.weight_noise}")


@dataclass(frozen=True)
class RunConfig:
    """Model sizes, task selection, decoding settings and the embedded TrainConfig."""
    alphabet_size: int = 5
    feature_dim: int = 5
    pred_hidden: int = 16
    trans_hidden: int = 16
    beam_width: int = 100
    nbest: int = 1
    task: str = 'copy'
    count: int = 250
    min_length: int = 4
    max_length: int = 12
    validation_fraction: float = 0.2
    input_noise: float = 0.1
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def model_dims(self) -> Dict[str, int]:
        return {
            'alphabet_size': self.alphabet_size,
            'feature_dim': self.feature_dim,
            'pred_hidden': self.pred_hidden,
            'trans_hidden': self.trans_hidden,
        }

    def to_dict(self) -> Dict[str, Any]:
        """Flat key/value view, the same keys a config file uses."""
        values = {k: v for k, v in asdict(self).items() if k != 'train'}
        values.update(asdict(self.train))
        return values

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> 'RunConfig':
        """
        Validate flat key/value pairs and build a RunConfig.

        Raises:
            ConfigError: On unknown keys or out-of-range values.
        """
        try:
            data = run_config_schema.load(values)
        except ValidationError as e:
            raise ConfigError(f"invalid run configuration: {_format_messages(e.messages)}") from e
        train_keys = {f.name for f in fields(TrainConfig)}
        train = TrainConfig(**{k: v for k, v in data.items() if k in train_keys})
        return cls(train=train, **{k: v for k, v in data.items() if k not in train_keys})


def _format_messages(messages: Dict[str, Any]) -> str:
    parts = []
    for key, value in sorted(messages.items()):
        text = '; '.join(value) if isinstance(value, list) else str(value)
        parts.append(f"{key}: {text}")
    return ', '.join(parts)


def load_run_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Read a run configuration file; missing keys take their defaults.

    Args:
        path: Config file path, or None for all defaults.
        overrides: Values that replace those in the file (e.g. CLI flags).

    Returns:
        RunConfig: The validated configuration.

    Raises:
        ConfigError: If the file is unreadable, has keys without values,
            unknown keys or invalid values.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError(f"config file not found: {path}")
        parsed = dotenv_values(path, interpolate=False)
        empty = sorted(key for key, value in parsed.items() if value is None or value == '')
        if empty:
            raise ConfigError(f"{path}: keys without values: {', '.join(empty)}")
        values.update(parsed)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig.from_dict(values)


def write_run_config(config: RunConfig, path: str) -> None:
    """Write a configuration in the same ``key = value`` format it is read from."""
    with open(path, 'w', encoding='utf-8') as f:
        f.write("# transducer run configuration\n")
        for key, value in config.to_dict().items():
            f.write(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n")
