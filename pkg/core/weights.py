"""
Versioned weight files.

A weight file is one JSON document: a header (format version,
architecture, dim expectation, dropout probability, loss, seed) and the
named parameter arrays as base64-encoded little-endian float64.
"""
from __future__ import annotations

import base64
import binascii
import json
import logging
from pathlib import Path

import numpy as np

from core.exceptions import CorruptWeightsError, PoseProxemicsError, WeightVersionError
from core.network import Architecture, NetworkParams

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
DTYPE = '<f8'


def _encode(array):
    return {
        'shape': list(array.shape),
        'data': base64.b64encode(np.ascontiguousarray(array, dtype=DTYPE).tobytes()).decode('ascii'),
    }


def _decode(name, entry):
    try:
        raw = base64.b64decode(entry['data'], validate=True)
        shape = tuple(int(v) for v in entry['shape'])
    except (KeyError, TypeError, ValueError, binascii.Error) as exc:
        raise CorruptWeightsError(f"Array '{name}' does not decode: {exc}") from None
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise CorruptWeightsError(f"Array '{name}' holds {len(raw)} bytes, expected {expected}.")
    return np.frombuffer(raw, dtype=DTYPE).reshape(shape).astype(float)


def dumps_weights(params: NetworkParams) -> str:
    document = {
        'format_version': FORMAT_VERSION,
        'architecture': params.architecture.as_dict(),
        'dim_mean': [float(v) for v in params.dim_mean],
        'p_drop': params.p_drop,
        'loss': params.loss,
        'seed': params.seed,
        'arrays': {name: _encode(value) for name, value in params.arrays.items()},
    }
    return json.dumps(document)


def loads_weights(text: str) -> NetworkParams:
    """
    Raises:
        WeightVersionError: the file was written by another format version
        CorruptWeightsError: the document is truncated or inconsistent
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptWeightsError(f"Weight file is not valid JSON ({exc.msg}); it may be truncated.") from None
    if not isinstance(document, dict) or 'format_version' not in document:
        raise CorruptWeightsError("Weight file has no format version header.")
    if document['format_version'] != FORMAT_VERSION:
        raise WeightVersionError(document['format_version'], FORMAT_VERSION)

    try:
        architecture = Architecture(**document['architecture'])
        entries = document['arrays']
        arrays = {name: _decode(name, entry) for name, entry in entries.items()}
        params = NetworkParams(
            architecture=architecture,
            arrays=arrays,
            p_drop=float(document['p_drop']),
            dim_mean=np.array(document['dim_mean'], dtype=float),
            loss=document.get('loss', 'laplace'),
            seed=document.get('seed'),
        )
    except CorruptWeightsError:
        raise
    except (KeyError, TypeError, AttributeError, PoseProxemicsError) as exc:
        raise CorruptWeightsError(f"Weight file header is incomplete: {exc}") from None
    _check_shapes(params)
    return params


def _check_shapes(params):
    arch = params.architecture
    fan_in = arch.input_size
    expected = {}
    for i in range(arch.num_layers):
        expected[f'hidden.{i}.weight'] = (fan_in, arch.hidden_size)
        for part in ('bias', 'gamma', 'beta', 'running_mean', 'running_var'):
            expected[f'hidden.{i}.{part}'] = (arch.hidden_size,)
        fan_in = arch.hidden_size
    expected['head.weight'] = (fan_in, arch.output_size)
    expected['head.bias'] = (arch.output_size,)
    for name, shape in expected.items():
        if name not in params.arrays:
            raise CorruptWeightsError(f"Weight file is missing array '{name}'.")
        if params.arrays[name].shape != shape:
            raise CorruptWeightsError(
                f"Array '{name}' has shape {params.arrays[name].shape}, expected {shape}."
            )
        if name.endswith('running_var') and np.any(params.arrays[name] <= 0):
            raise CorruptWeightsError(f"Array '{name}' has non-positive variances.")


def save_weights(params: NetworkParams, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_weights(params), encoding='utf-8')
    logger.info("Saved weights to %s", path)


def load_weights(path) -> NetworkParams:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except UnicodeDecodeError:
        raise CorruptWeightsError(f"Weight file {path} is not UTF-8 text.") from None
    return loads_weights(text)
