"""
Checkpoint file: a magic line, a one line JSON header (format version, model config, step, random stream states and
    the tensor index) then the named tensors as raw little endian arrays
"""

from __future__ import annotations

import json
import os
from typing import TYPE_CHECKING

import numpy as np

from src.transformer.model import ModelConfig
from src.transformer.optimiser import OptimizerState

if TYPE_CHECKING:
    from typing import Any, Dict, List, Optional

    ModelParams = Dict[str, np.ndarray]

MAGIC = b'ICL-CHECKPOINT\n'
FORMAT_VERSION = 1


class Checkpoint:
    """
    Everything needed to resume training bit identically
    """

    def __init__(self, config: ModelConfig, params: ModelParams, optimiser: OptimizerState, step: int,
                 rng_states: Dict[str, Dict[str, Any]], extra: Optional[Dict[str, Any]] = None):
        self.config = config
        self.params = params
        self.optimiser = optimiser
        self.step = step
        self.rng_states = rng_states
        self.extra = extra or {}

    def __str__(self) -> str:
        return f'Checkpoint - step: {self.step}, {self.config}'


def _tensor_entries(prefix: str, tensors: ModelParams) -> List[tuple]:
    return [(f'{prefix}/{name}', np.asarray(value)) for name, value in tensors.items()]


def save_checkpoint(filename: str, checkpoint: Checkpoint):
    """
    Writes a checkpoint, the file is written to a temporary name and then renamed so a crash never leaves a partial
        checkpoint

    :param filename: The checkpoint filename
    :param checkpoint: The checkpoint
    """
    entries = _tensor_entries('params', checkpoint.params) + \
        _tensor_entries('first moments', checkpoint.optimiser.first_moments) + \
        _tensor_entries('second moments', checkpoint.optimiser.second_moments)

    index, offset = [], 0
    for name, value in entries:
        dtype = value.dtype.newbyteorder('<')
        index.append({'name': name, 'dtype': dtype.str, 'shape': list(value.shape), 'offset': offset})
        offset += value.size * dtype.itemsize

    header = {
        'format version': FORMAT_VERSION,
        'model config': checkpoint.config.save(),
        'step': checkpoint.step,
        'optimiser': checkpoint.optimiser.hyperparameters(),
        'rng states': checkpoint.rng_states,
        'extra': checkpoint.extra,
        'tensors': index
    }

    os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)
    temporary = f'{filename}.tmp'
    with open(temporary, 'wb') as file:
        file.write(MAGIC)
        file.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
        for (_, value), entry in zip(entries, index):
            file.write(np.ascontiguousarray(value, dtype=entry['dtype']).tobytes())
    os.replace(temporary, filename)


def _read_header(file, filename: str) -> Dict[str, Any]:
    if file.readline() != MAGIC:
        raise ValueError(f'{filename} is not a checkpoint file')
    return json.loads(file.readline().decode('utf-8'))


def read_checkpoint_extra(filename: str) -> Dict[str, Any]:
    """Reads the extra fields of a checkpoint without its tensors"""
    with open(filename, 'rb') as file:
        return _read_header(file, filename)['extra']


def load_checkpoint(filename: str) -> Checkpoint:
    """
    Reads a checkpoint

    :param filename: The checkpoint filename
    :return: The checkpoint
    """
    with open(filename, 'rb') as file:
        header = _read_header(file, filename)
        data = file.read()

    if header['format version'] != FORMAT_VERSION:
        raise ValueError(f'Unsupported checkpoint format version {header["format version"]} in {filename}')

    groups: Dict[str, ModelParams] = {'params': {}, 'first moments': {}, 'second moments': {}}
    for entry in header['tensors']:
        dtype = np.dtype(entry['dtype'])
        size = int(np.prod(entry['shape'], dtype=np.int64)) * dtype.itemsize
        if entry['offset'] + size > len(data):
            raise ValueError(f'Checkpoint {filename} is truncated at tensor {entry["name"]}')
        value = np.frombuffer(data, dtype=dtype, count=size // dtype.itemsize, offset=entry['offset'])
        group, name = entry['name'].split('/', 1)
        groups[group][name] = value.reshape(entry['shape']).astype(dtype.newbyteorder('='), copy=True)

    optimiser = OptimizerState.load(header['optimiser'], groups['first moments'], groups['second moments'])
    return Checkpoint(ModelConfig.load(header['model config']), groups['params'], optimiser, header['step'],
                      header['rng states'], header['extra'])
