"""
Tests for decoding and Monte Carlo dropout inference.

Tests cover:
- Decoding of the spread, distance floor and orientation heads
- Agreement of deterministic and dropout-free Monte Carlo inference
- Combined variance against the analytic Laplace variance
- Determinism and the dropout-rate trend of sigma
"""
import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import PoseProxemicsError
from core.geometry import cartesian_from_spherical, SphericalLocation
from core.inference import combined_variance, predict, predict_batch, predict_mc, predict_mc_batch
from core.network import HEAD, Architecture, init_params
from core.scenes import SceneConfig, generate_records
from core.training import TrainingConfig, _inverse_softplus, build_training_set, train

TINY = Architecture(hidden_size=8, num_layers=3, residual_pairs=1)


def _head_only(d=5.0, s=0.0, sin=0.6, cos=0.8, beta=0.0, psi=1.5, loss='laplace', p_drop=0.0):
    """A network whose hidden path is zero, so outputs equal the head bias."""
    params = init_params(TINY, np.random.default_rng(0), p_drop=p_drop, loss=loss,
                         dim_mean=np.array([0.6, 1.7, 0.5]))
    for name in params.trainable():
        params.arrays[name] = np.zeros_like(params.arrays[name])
    bias = params.arrays['head.bias']
    bias[HEAD['d']] = _inverse_softplus(d - 0.5)
    bias[HEAD['s']] = s
    bias[HEAD['beta']] = beta
    bias[HEAD['psi']] = psi
    bias[HEAD['sin']] = sin
    bias[HEAD['cos']] = cos
    return params


class PredictTests(SimpleTestCase):
    """Tests for predict and predict_batch"""

    def test_zero_log_spread_is_unit_spread(self):
        estimate = predict(_head_only(s=0.0), np.zeros(51))
        self.assertAlmostEqual(estimate.spread, 1.0)
        self.assertAlmostEqual(estimate.b, estimate.d)

    def test_orientation_from_sin_cos(self):
        estimate = predict(_head_only(sin=0.6, cos=0.8, beta=0.0), np.zeros(51))
        self.assertAlmostEqual(estimate.theta, math.atan2(0.6, 0.8))
        self.assertAlmostEqual(estimate.theta, 0.6435011)

    def test_orientation_subtracts_azimuth(self):
        estimate = predict(_head_only(sin=1.0, cos=0.0, beta=0.3), np.zeros(51))
        self.assertAlmostEqual(estimate.theta, math.pi / 2 - 0.3)

    def test_distance_floor(self):
        params = _head_only()
        params.arrays['head.bias'][HEAD['d']] = -50.0
        self.assertGreaterEqual(predict(params, np.zeros(51)).d, 0.5)

    def test_dims_add_expectation(self):
        params = _head_only()
        params.arrays['head.bias'][HEAD['dims']] = [0.1, -0.2, 0.0]
        np.testing.assert_allclose(predict(params, np.zeros(51)).dims, [0.7, 1.5, 0.5])

    def test_location_recovers_cartesian(self):
        estimate = predict(_head_only(d=10.0, beta=0.2, psi=1.4), np.zeros(51))
        expected = cartesian_from_spherical(SphericalLocation(estimate.d, 0.2, 1.4))
        self.assertEqual(estimate.xyz, [expected.x, expected.y, expected.z])

    def test_l1_network_has_no_spread(self):
        estimate = predict(_head_only(loss='l1'), np.zeros(51))
        self.assertIsNone(estimate.spread)
        self.assertIsNone(estimate.b)

    def test_batch_order(self):
        params = init_params(TINY, np.random.default_rng(3))
        inputs = np.random.default_rng(4).normal(size=(5, 51))
        batch = predict_batch(params, inputs)
        self.assertEqual([e.d for e in batch], [predict(params, x).d for x in inputs])


class PredictMcTests(SimpleTestCase):
    """Tests for predict_mc and predict_mc_batch"""

    def test_no_dropout_matches_deterministic(self):
        params = init_params(TINY, np.random.default_rng(5), p_drop=0.0)
        x = np.random.default_rng(6).normal(size=51)
        plain = predict(params, x)
        for passes in (1, 7):
            mc = predict_mc(params, x, passes=passes, samples=10, rng=0)
            self.assertAlmostEqual(mc.d, plain.d, places=10)
            self.assertAlmostEqual(mc.b, plain.b, places=10)
            self.assertAlmostEqual(mc.theta, plain.theta, places=10)

    def test_laplace_variance(self):
        """Test sigma^2 approaches 2 b^2 for a fixed Laplace prediction."""
        params = _head_only(d=5.0, s=math.log(0.1))
        estimate = predict_mc(params, np.zeros(51), passes=50, samples=1000, rng=1)
        self.assertAlmostEqual(estimate.b, 0.5)
        self.assertAlmostEqual(estimate.sigma ** 2, 0.5, delta=0.025)

    def test_single_draw_has_zero_sigma(self):
        estimate = predict_mc(_head_only(), np.zeros(51), passes=1, samples=1, rng=0)
        self.assertEqual(estimate.sigma, 0.0)

    def test_invalid_counts(self):
        with self.assertRaises(PoseProxemicsError):
            predict_mc(_head_only(), np.zeros(51), passes=0)
        with self.assertRaises(PoseProxemicsError):
            predict_mc(_head_only(), np.zeros(51), samples=0)

    def test_seeded_results_repeat(self):
        params = init_params(TINY, np.random.default_rng(5), p_drop=0.3)
        inputs = np.random.default_rng(6).normal(size=(4, 51))
        first = predict_mc_batch(params, inputs, passes=10, samples=20, rng=42)
        second = predict_mc_batch(params, inputs, passes=10, samples=20, rng=42)
        self.assertEqual(first, second)
        third = predict_mc_batch(params, inputs, passes=10, samples=20, rng=np.random.default_rng(42))
        self.assertEqual(len(third), 4)

    def test_combined_variance(self):
        samples = np.array([[1.0, 0.0], [3.0, 0.0]])
        np.testing.assert_array_equal(combined_variance(samples), [1.0, 0.0])

    def test_sigma_grows_with_dropout(self):
        """Test mean sigma does not decrease as the dropout rate rises."""
        records = generate_records(200, SceneConfig(noise_px=1.0), 8)
        dataset = build_training_set(records)
        config = TrainingConfig(epochs=5, batch_size=50, hidden_size=32, num_layers=3, residual_pairs=1,
                                p_drop=0.2, loss='l1', seed=0)
        params = train(dataset, config).params
        sigmas = []
        for p_drop in (0.05, 0.2, 0.4):
            trial = params.copy()
            trial.p_drop = p_drop
            estimates = predict_mc_batch(trial, dataset.inputs[:40], passes=50, samples=1, rng=3)
            sigmas.append(float(np.mean([e.sigma for e in estimates])))
        self.assertLessEqual(sigmas[0], sigmas[1])
        self.assertLessEqual(sigmas[1], sigmas[2])
