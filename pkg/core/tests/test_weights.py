"""
Tests for versioned weight files.

Tests cover:
- Lossless save/load
- Truncated and corrupt files
- Version mismatches
- Shape and statistics checks
"""
import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import CorruptWeightsError, WeightVersionError
from core.network import Architecture, init_params
from core.weights import FORMAT_VERSION, dumps_weights, load_weights, loads_weights, save_weights


def _params():
    arch = Architecture(hidden_size=6, num_layers=3, residual_pairs=1)
    params = init_params(arch, np.random.default_rng(0), p_drop=0.25, dim_mean=np.array([0.61, 1.72, 0.49]),
                         loss='gaussian', seed=17)
    params.arrays['hidden.1.running_mean'] = np.random.default_rng(1).normal(size=6)
    return params


class WeightFileTests(SimpleTestCase):
    """Tests for save_weights / load_weights"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'nested' / 'weights.json'

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bitwise(self):
        params = _params()
        save_weights(params, self.path)
        loaded = load_weights(self.path)
        self.assertEqual(list(loaded.arrays), list(params.arrays))
        for name, value in params.arrays.items():
            self.assertEqual(loaded.arrays[name].tobytes(), value.tobytes())
        self.assertEqual(loaded.architecture, params.architecture)
        self.assertEqual(loaded.p_drop, 0.25)
        self.assertEqual(loaded.loss, 'gaussian')
        self.assertEqual(loaded.seed, 17)
        np.testing.assert_array_equal(loaded.dim_mean, params.dim_mean)

    def test_header_fields(self):
        document = json.loads(dumps_weights(_params()))
        self.assertEqual(document['format_version'], FORMAT_VERSION)
        self.assertEqual(document['architecture']['hidden_size'], 6)
        self.assertEqual(document['arrays']['head.bias']['shape'], [9])

    def test_truncated_file(self):
        text = dumps_weights(_params())
        self.path.parent.mkdir(parents=True)
        self.path.write_text(text[:len(text) // 2])
        with self.assertRaises(CorruptWeightsError) as ctx:
            load_weights(self.path)
        self.assertIn('truncated', str(ctx.exception))

    def test_older_version(self):
        document = json.loads(dumps_weights(_params()))
        document['format_version'] = 0
        with self.assertRaises(WeightVersionError) as ctx:
            loads_weights(json.dumps(document))
        self.assertEqual((ctx.exception.found, ctx.exception.expected), (0, FORMAT_VERSION))
        self.assertIn('version 0', str(ctx.exception))
        self.assertIn(f'version {FORMAT_VERSION}', str(ctx.exception))

    def test_missing_header(self):
        with self.assertRaises(CorruptWeightsError):
            loads_weights('{"arrays": {}}')

    def test_short_array(self):
        document = json.loads(dumps_weights(_params()))
        document['arrays']['head.bias']['data'] = document['arrays']['head.bias']['data'][:8]
        with self.assertRaises(CorruptWeightsError):
            loads_weights(json.dumps(document))

    def test_missing_array(self):
        document = json.loads(dumps_weights(_params()))
        del document['arrays']['hidden.2.gamma']
        with self.assertRaises(CorruptWeightsError) as ctx:
            loads_weights(json.dumps(document))
        self.assertIn('hidden.2.gamma', str(ctx.exception))

    def test_non_positive_running_variance(self):
        params = _params()
        params.arrays['hidden.0.running_var'][0] = 0.0
        with self.assertRaises(CorruptWeightsError):
            loads_weights(dumps_weights(params))

    def test_binary_garbage(self):
        self.path.parent.mkdir(parents=True)
        self.path.write_bytes(b'\xff\xfe\x00\x81')
        with self.assertRaises(CorruptWeightsError):
            load_weights(self.path)
