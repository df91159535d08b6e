"""
Decoding network outputs into localization estimates, with optional
Monte Carlo dropout uncertainty.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import PoseProxemicsError
from core.geometry import CartesianLocation, SphericalLocation, cartesian_from_spherical, orientation_from_viewpoint
from core.network import D_MIN, HEAD, forward
from core.training import softplus

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LocalizationEstimate:
    """
    One person's estimate.

    `spread` is the relative spread exp(s); `b` is the same spread in
    meters (spread * d). Both are None when the network was trained
    without a spread term. `sigma` is only set by Monte Carlo inference.
    """
    d: float
    spread: float | None
    b: float | None
    beta: float
    psi: float
    theta: float
    dims: tuple
    sigma: float | None = None

    @property
    def location(self) -> CartesianLocation:
        return cartesian_from_spherical(SphericalLocation(self.d, self.beta, self.psi))

    @property
    def xyz(self):
        loc = self.location
        return [loc.x, loc.y, loc.z]


def decode_outputs(params, outputs) -> dict:
    """
    Map raw (N, 9) outputs to named arrays.

    Returns:
        dict with d, spread, b (meters), beta, psi, theta, dims (N, 3)
    """
    outputs = np.atleast_2d(outputs)
    d = D_MIN + softplus(outputs[:, HEAD['d']])
    beta = outputs[:, HEAD['beta']]
    alpha = np.arctan2(outputs[:, HEAD['sin']], outputs[:, HEAD['cos']])
    spread = np.exp(outputs[:, HEAD['s']]) if params.loss != 'l1' else None
    return {
        'd': d,
        'spread': spread,
        'b': spread * d if spread is not None else None,
        'beta': beta,
        'psi': outputs[:, HEAD['psi']],
        'theta': np.atleast_1d(orientation_from_viewpoint(alpha, beta)),
        'dims': outputs[:, HEAD['dims']] + params.dim_mean,
    }


def _estimates(decoded, sigma=None):
    estimates = []
    for i in range(len(decoded['d'])):
        spread = decoded['spread']
        estimates.append(LocalizationEstimate(
            d=float(decoded['d'][i]),
            spread=float(spread[i]) if spread is not None else None,
            b=float(decoded['b'][i]) if spread is not None else None,
            beta=float(decoded['beta'][i]),
            psi=float(decoded['psi'][i]),
            theta=float(decoded['theta'][i]),
            dims=tuple(float(v) for v in decoded['dims'][i]),
            sigma=float(sigma[i]) if sigma is not None else None,
        ))
    return estimates


def predict_batch(params, inputs):
    """Single deterministic (eval-mode) pass over an (N, 51) batch."""
    outputs, _ = forward(params, np.atleast_2d(inputs), 'eval')
    return _estimates(decode_outputs(params, outputs))


def predict(params, input_vector) -> LocalizationEstimate:
    return predict_batch(params, np.asarray(input_vector, dtype=float)[None, :])[0]


def combined_variance(samples):
    """Variance over all draws of axis 0 (passes times per-pass samples)."""
    return np.var(np.asarray(samples, dtype=float), axis=0)


def _seed_sequence(rng):
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(2 ** 63)))
    return np.random.SeedSequence(rng)


def _sample_distances(params, decoded, samples, stream):
    d = decoded['d']
    shape = (samples, len(d))
    if params.loss == 'laplace':
        return stream.laplace(d, decoded['b'], size=shape)
    if params.loss == 'gaussian':
        return stream.normal(d, decoded['b'], size=shape)
    return np.broadcast_to(d, shape)


def predict_mc_batch(params, inputs, passes: int = 50, samples: int = 100, rng=0):
    """
    Monte Carlo dropout inference.

    Each of `passes` dropout passes draws `samples` distances from the
    predicted distribution; sigma is the standard deviation over all of
    them. Pass t uses its own stream spawned from `rng` (int seed or
    Generator), so results do not depend on evaluation order.

    Returns:
        list of LocalizationEstimate with sigma set
    """
    if passes < 1 or samples < 1:
        raise PoseProxemicsError(f"Monte Carlo inference needs T >= 1 and I >= 1. Got: T={passes}, I={samples}")
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    streams = [np.random.default_rng(child) for child in _seed_sequence(rng).spawn(passes)]

    raw_sum = np.zeros((len(x), 9))
    d_passes, b_passes, draws = [], [], []
    for stream in streams:
        outputs, _ = forward(params, x, 'mc_dropout', stream)
        decoded = decode_outputs(params, outputs)
        raw_sum += outputs
        d_passes.append(decoded['d'])
        if decoded['b'] is not None:
            b_passes.append(decoded['b'])
        draws.append(_sample_distances(params, decoded, samples, stream))

    decoded = decode_outputs(params, raw_sum / passes)
    decoded['d'] = np.mean(d_passes, axis=0)
    if b_passes:
        decoded['b'] = np.mean(b_passes, axis=0)
        decoded['spread'] = decoded['b'] / decoded['d']
    sigma = np.sqrt(combined_variance(np.concatenate(draws, axis=0)))
    logger.debug("MC inference: %d inputs, T=%d, I=%d, mean sigma=%.3f", len(x), passes, samples, float(sigma.mean()))
    return _estimates(decoded, sigma)


def predict_mc(params, input_vector, passes: int = 50, samples: int = 100, rng=0) -> LocalizationEstimate:
    return predict_mc_batch(params, np.asarray(input_vector, dtype=float)[None, :], passes, samples, rng)[0]
