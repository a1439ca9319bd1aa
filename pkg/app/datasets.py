"""
Dataset files: JSON Lines with a header line declaring the feature width
and alphabet size, then one record per line.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Iterator, List, Tuple

import numpy as np
from marshmallow import ValidationError

from app.errors import DataFormatError
from app.schemas import DATASET_FORMAT, DatasetRecordSchema, dataset_header_schema


@dataclass
class DatasetRecord:
    """One input sequence and its target labels."""
    id: str
    features: np.ndarray
    labels: Tuple[int, ...]

    def to_json(self) -> str:
        return json.dumps({'id': self.id, 'features': self.features.tolist(), 'labels': list(self.labels)},
                          separators=(',', ':'))


@dataclass
class Dataset:
    """Records sharing one feature width and alphabet."""
    feature_dim: int
    alphabet_size: int
    records: List[DatasetRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[DatasetRecord]:
        return iter(self.records)

    @property
    def total_labels(self) -> int:
        return sum(len(record.labels) for record in self.records)

    def header_json(self) -> str:
        return json.dumps({'format': DATASET_FORMAT, 'version': 1, 'feature_dim': self.feature_dim,
                           'alphabet_size': self.alphabet_size}, separators=(',', ':'), sort_keys=True)


def _parse_line(path: str, number: int, line: str) -> dict:
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"not valid JSON ({e.msg})", path=path, line=number) from e


def read_dataset(path: str) -> Dataset:
    """
    Load and validate a dataset file.

    Args:
        path: Path to the JSON Lines file.

    Returns:
        Dataset: The parsed records.

    Raises:
        DataFormatError: If the file is missing or any line is malformed;
            the message names the path and line number.
    """
    if not os.path.isfile(path):
        raise DataFormatError("file not found", path=path)
    with open(path, encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines:
        raise DataFormatError("empty dataset file (missing header line)", path=path, line=1)

    try:
        header = dataset_header_schema.load(_parse_line(path, 1, lines[0]))
    except ValidationError as e:
        raise DataFormatError(f"invalid header: {e.messages}", path=path, line=1) from e

    schema = DatasetRecordSchema(context={'feature_dim': header['feature_dim'],
                                          'alphabet_size': header['alphabet_size']})
    dataset = Dataset(feature_dim=header['feature_dim'], alphabet_size=header['alphabet_size'])
    seen = set()
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            data = schema.load(_parse_line(path, number, line))
        except ValidationError as e:
            raise DataFormatError(f"invalid record: {e.messages}", path=path, line=number) from e
        if data['id'] in seen:
            raise DataFormatError(f"duplicate record id {data['id']!r}", path=path, line=number)
        seen.add(data['id'])
        dataset.records.append(DatasetRecord(id=data['id'], features=np.array(data['features'], dtype=np.float64),
                                             labels=tuple(data['labels'])))
    return dataset


def write_dataset(dataset: Dataset, path: str) -> None:
    """Write a dataset; reading it back and writing again reproduces the bytes."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dataset.header_json() + '\n')
        for record in dataset.records:
            f.write(record.to_json() + '\n')
