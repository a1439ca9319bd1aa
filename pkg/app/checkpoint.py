"""
Checkpoint files.

Layout: one JSON header line (format tag, version, epoch, model dims, config
echo, RNG state, early-stopping state, array manifest) followed by the raw
little-endian float64 data of every array in manifest order: the model
parameters, then their momentum buffers.
"""

import json
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from marshmallow import ValidationError

from app.core_math import make_rng
from app.errors import CheckpointError, get_logger
from app.models import TransducerModel
from app.schemas import CHECKPOINT_FORMAT, checkpoint_header_schema

CHECKPOINT_VERSION = 1
_DTYPE = np.dtype('<f8')


@dataclass
class Checkpoint:
    """Everything needed to resume training bit-identically."""
    model: TransducerModel
    velocity: Dict[str, np.ndarray]
    epoch: int
    rng_state: dict
    config: dict
    best_metric: Optional[float] = None
    best_epoch: int = 0
    stale_epochs: int = 0

    def restore_rng(self) -> np.random.Generator:
        rng = make_rng(0)
        rng.bit_generator.state = self.rng_state
        return rng

    def copy(self) -> 'Checkpoint':
        return Checkpoint(model=self.model.copy(),
                          velocity={k: v.copy() for k, v in self.velocity.items()},
                          epoch=self.epoch, rng_state=json.loads(json.dumps(self.rng_state)),
                          config=dict(self.config), best_metric=self.best_metric,
                          best_epoch=self.best_epoch, stale_epochs=self.stale_epochs)


def _arrays(checkpoint: Checkpoint) -> Dict[str, np.ndarray]:
    arrays = {f"param/{k}": v for k, v in checkpoint.model.named_parameters().items()}
    for name in checkpoint.model.named_parameters():
        arrays[f"velocity/{name}"] = checkpoint.velocity[name]
    return arrays


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    """
    Write a checkpoint file.

    Args:
        checkpoint: State to save.
        path: Destination file.
    """
    arrays = _arrays(checkpoint)
    header = {
        'format': CHECKPOINT_FORMAT,
        'version': CHECKPOINT_VERSION,
        'epoch': checkpoint.epoch,
        'dims': checkpoint.model.dims,
        'config': checkpoint.config,
        'rng_state': checkpoint.rng_state,
        'best_metric': checkpoint.best_metric,
        'best_epoch': checkpoint.best_epoch,
        'stale_epochs': checkpoint.stale_epochs,
        'arrays': [{'name': name, 'shape': list(array.shape)} for name, array in arrays.items()],
    }
    with open(path, 'wb') as f:
        f.write(json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8') + b'\n')
        for array in arrays.values():
            f.write(np.ascontiguousarray(array, dtype=_DTYPE).tobytes())
    get_logger().info(f"Saved checkpoint for epoch {checkpoint.epoch} to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    """
    Read a checkpoint file.

    Raises:
        CheckpointError: If the file is missing, truncated, has an unknown
            format or version, or its arrays do not fit the declared model.
    """
    try:
        with open(path, 'rb') as f:
            header_line = f.readline()
            payload = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e.strerror}") from e

    try:
        raw_header = json.loads(header_line.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: checkpoint header is not valid JSON") from e
    if isinstance(raw_header, dict) and raw_header.get('version') != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unknown checkpoint version {raw_header.get('version')!r}")
    try:
        header = checkpoint_header_schema.load(raw_header)
    except ValidationError as e:
        raise CheckpointError(f"{path}: invalid checkpoint header: {e.messages}") from e

    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for spec in header['arrays']:
        shape = tuple(spec['shape'])
        size = int(np.prod(shape)) * _DTYPE.itemsize
        if offset + size > len(payload):
            raise CheckpointError(f"{path}: truncated data for array {spec['name']}")
        arrays[spec['name']] = np.frombuffer(payload, dtype=_DTYPE, count=size // _DTYPE.itemsize,
                                             offset=offset).reshape(shape).astype(np.float64)
        offset += size
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} unexpected trailing bytes")

    params = {k[len('param/'):]: v for k, v in arrays.items() if k.startswith('param/')}
    velocity = {k[len('velocity/'):]: v for k, v in arrays.items() if k.startswith('velocity/')}
    model = TransducerModel.from_arrays(header['dims'], params)
    model.validate()
    missing = set(model.named_parameters()) - set(velocity)
    if missing:
        raise CheckpointError(f"{path}: momentum buffers missing for {sorted(missing)[0]}")
    return Checkpoint(model=model, velocity=velocity, epoch=header['epoch'], rng_state=header['rng_state'],
                      config=header['config'], best_metric=header['best_metric'],
                      best_epoch=header['best_epoch'], stale_epochs=header['stale_epochs'])
