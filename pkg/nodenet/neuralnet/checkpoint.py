"""
Versioned ``.npz`` checkpoints.

A checkpoint holds a JSON metadata record (format version, network config,
seed, epoch, optimizer step and free-form extras) and every tensor under a
``<group>__<name>`` key. Arrays are stored losslessly, so a load returns
bit-identical values.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from core.exceptions import CheckpointError
from core.files import atomic_path
from .structures import NetworkConfig, NetworkParameters

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
META_KEY = '__meta__'
SEPARATOR = '__'


@dataclass
class Checkpoint:
    params: NetworkParameters
    config: NetworkConfig
    seed: int
    epoch: int = 0
    optimizer_step: int = 0
    optimizer_tensors: Dict[str, Dict[str, np.ndarray]] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)


def save_checkpoint(path, checkpoint: Checkpoint) -> Path:
    """Write ``checkpoint`` to ``path`` atomically."""
    meta = {
        'format_version': FORMAT_VERSION,
        'config': checkpoint.config.to_dict(),
        'seed': int(checkpoint.seed),
        'epoch': int(checkpoint.epoch),
        'optimizer_step': int(checkpoint.optimizer_step),
        'optimizer_groups': sorted(checkpoint.optimizer_tensors),
        'extra': checkpoint.extra,
    }
    arrays = {META_KEY: np.array(json.dumps(meta, sort_keys=True))}
    for name, value in checkpoint.params.tensors.items():
        arrays[f'param{SEPARATOR}{name}'] = value
    for group, tensors in checkpoint.optimizer_tensors.items():
        for name, value in tensors.items():
            arrays[f'{group}{SEPARATOR}{name}'] = value

    path = Path(path)
    with atomic_path(path) as tmp:
        with tmp.open('wb') as handle:
            np.savez(handle, **arrays)
    logger.info(f"Saved checkpoint {path} (epoch {checkpoint.epoch})")
    return path


def load_checkpoint(path) -> Checkpoint:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointError: If the file is missing, unreadable or of another format version
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive[META_KEY]))
            contents = {key: archive[key] for key in archive.files if key != META_KEY}
    except (OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc

    if meta.get('format_version') != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {meta.get('format_version')} in {path}")

    tensors: Dict[str, np.ndarray] = {}
    optimizer: Dict[str, Dict[str, np.ndarray]] = {group: {} for group in meta.get('optimizer_groups', [])}
    for key, value in contents.items():
        group, _, name = key.partition(SEPARATOR)
        if group == 'param':
            tensors[name] = value
        elif group in optimizer:
            optimizer[group][name] = value
        else:
            raise CheckpointError(f"unexpected entry '{key}' in {path}")

    return Checkpoint(
        params=NetworkParameters(tensors),
        config=NetworkConfig.from_dict(meta['config']),
        seed=meta['seed'],
        epoch=meta['epoch'],
        optimizer_step=meta['optimizer_step'],
        optimizer_tensors=optimizer,
        extra=meta.get('extra', {}),
    )
