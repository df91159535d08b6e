"""
Fully-connected distance regressor in numpy.

Hidden layer = Linear -> BatchNorm -> ReLU -> Dropout. The first hidden
layers are plain; the remaining ones come in pairs wrapped by a residual
connection. A linear head emits the raw 9-vector

    [d_raw, s, beta, psi, sin_alpha, cos_alpha, dw, dh, dl]

Parameters live in a flat, ordered dict of float64 arrays so training,
serialization and gradient checks can walk them by name.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from core.exceptions import PoseProxemicsError
from core.keypoints import INPUT_SIZE

logger = logging.getLogger(__name__)

OUTPUT_SIZE = 9
HEAD = {'d': 0, 's': 1, 'beta': 2, 'psi': 3, 'sin': 4, 'cos': 5, 'dims': slice(6, 9)}
D_MIN = 0.5

MODES = ('train', 'eval', 'mc_dropout')
BN_MOMENTUM = 0.1
BN_EPS = 1e-5

TRAINABLE = ('weight', 'bias', 'gamma', 'beta')
BUFFERS = ('running_mean', 'running_var')


@dataclass(frozen=True)
class Architecture:
    input_size: int = INPUT_SIZE
    hidden_size: int = 1024
    num_layers: int = 6
    residual_pairs: int = 2
    output_size: int = OUTPUT_SIZE

    def __post_init__(self):
        if min(self.input_size, self.hidden_size, self.output_size) <= 0:
            raise PoseProxemicsError("Layer sizes must be positive.")
        if self.residual_pairs < 0 or self.plain_layers < 1:
            raise PoseProxemicsError(
                f"{self.num_layers} hidden layers cannot hold {self.residual_pairs} residual pairs "
                "after at least one plain layer."
            )

    @property
    def plain_layers(self) -> int:
        return self.num_layers - 2 * self.residual_pairs

    def as_dict(self):
        return asdict(self)


@dataclass
class NetworkParams:
    """
    Weights, normalization statistics and the metadata inference needs.

    `dim_mean` is the training-set mean of (w, h, l); the head predicts
    offsets from it. `loss` records which distance loss trained the
    spread head.
    """
    architecture: Architecture
    arrays: dict = field(default_factory=dict)
    p_drop: float = 0.2
    dim_mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    loss: str = 'laplace'
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_drop < 1.0:
            raise PoseProxemicsError(f"Dropout probability must be in [0, 1). Got: {self.p_drop}")
        self.dim_mean = np.asarray(self.dim_mean, dtype=float)

    def trainable(self):
        """Names of the arrays the optimizer updates, in layer order."""
        return [name for name in self.arrays if name.rsplit('.', 1)[-1] in TRAINABLE]

    def weight_matrices(self):
        return [self.arrays[name] for name in self.arrays if name.endswith('.weight')]

    def copy(self):
        return NetworkParams(
            architecture=self.architecture,
            arrays={name: value.copy() for name, value in self.arrays.items()},
            p_drop=self.p_drop,
            dim_mean=self.dim_mean.copy(),
            loss=self.loss,
            seed=self.seed,
        )


def _hidden(i, part):
    return f'hidden.{i}.{part}'


def init_params(architecture: Architecture, rng: np.random.Generator, p_drop: float = 0.2,
                dim_mean=None, loss: str = 'laplace', seed: int | None = None) -> NetworkParams:
    """He-normal weights, zero biases, unit BN scale and unit running variance."""
    arrays = {}
    fan_in = architecture.input_size
    for i in range(architecture.num_layers):
        arrays[_hidden(i, 'weight')] = rng.normal(0.0, np.sqrt(2.0 / fan_in), (fan_in, architecture.hidden_size))
        arrays[_hidden(i, 'bias')] = np.zeros(architecture.hidden_size)
        arrays[_hidden(i, 'gamma')] = np.ones(architecture.hidden_size)
        arrays[_hidden(i, 'beta')] = np.zeros(architecture.hidden_size)
        arrays[_hidden(i, 'running_mean')] = np.zeros(architecture.hidden_size)
        arrays[_hidden(i, 'running_var')] = np.ones(architecture.hidden_size)
        fan_in = architecture.hidden_size
    arrays['head.weight'] = rng.normal(0.0, np.sqrt(1.0 / fan_in), (fan_in, architecture.output_size))
    arrays['head.bias'] = np.zeros(architecture.output_size)
    return NetworkParams(
        architecture=architecture,
        arrays=arrays,
        p_drop=p_drop,
        dim_mean=np.zeros(3) if dim_mean is None else dim_mean,
        loss=loss,
        seed=seed,
    )


# ============================================================================
# FORWARD
# ============================================================================

@dataclass
class LayerCache:
    inputs: np.ndarray
    normalized: np.ndarray
    inv_std: np.ndarray
    pre_activation: np.ndarray
    mask: np.ndarray | None
    batch_mean: np.ndarray
    batch_var: np.ndarray


@dataclass
class ForwardCache:
    layers: list
    features: np.ndarray
    mode: str


def _layer_forward(params, i, a, mode, rng):
    arrays = params.arrays
    z = a @ arrays[_hidden(i, 'weight')] + arrays[_hidden(i, 'bias')]
    if mode == 'train':
        mean = z.mean(axis=0)
        var = z.var(axis=0)
    else:
        mean = arrays[_hidden(i, 'running_mean')]
        var = arrays[_hidden(i, 'running_var')]
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    normalized = (z - mean) * inv_std
    h = arrays[_hidden(i, 'gamma')] * normalized + arrays[_hidden(i, 'beta')]
    out = np.maximum(h, 0.0)

    mask = None
    if mode in ('train', 'mc_dropout') and params.p_drop > 0:
        keep = 1.0 - params.p_drop
        mask = (rng.random(out.shape) < keep) / keep
        out = out * mask
    return out, LayerCache(a, normalized, inv_std, h, mask, mean, var)


def forward(params: NetworkParams, inputs, mode: str = 'eval', rng: np.random.Generator | None = None):
    """
    Run the network on a batch.

    Args:
        params: Network parameters
        inputs: (N, input_size) array, or a single (input_size,) vector
        mode: 'train' (batch statistics, dropout), 'eval' (running
            statistics, no dropout) or 'mc_dropout' (running statistics,
            dropout)
        rng: Generator for dropout masks; required when dropout is active

    Returns:
        tuple: (raw outputs (N, 9) or (9,), ForwardCache in train mode else None)
    """
    if mode not in MODES:
        raise PoseProxemicsError(f"Unknown mode '{mode}'. Must be one of: {', '.join(MODES)}")
    x = np.asarray(inputs, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    arch = params.architecture
    if x.ndim != 2 or x.shape[1] != arch.input_size:
        raise PoseProxemicsError(f"Expected inputs of width {arch.input_size}. Got shape {np.shape(inputs)}.")
    if rng is None and mode != 'eval' and params.p_drop > 0:
        raise PoseProxemicsError(f"Mode '{mode}' needs a random generator for dropout.")

    caches = []
    a = x
    for i in range(arch.plain_layers):
        a, cache = _layer_forward(params, i, a, mode, rng)
        caches.append(cache)
    for k in range(arch.residual_pairs):
        first = arch.plain_layers + 2 * k
        skip = a
        a, cache = _layer_forward(params, first, a, mode, rng)
        caches.append(cache)
        a, cache = _layer_forward(params, first + 1, a, mode, rng)
        caches.append(cache)
        a = a + skip

    outputs = a @ params.arrays['head.weight'] + params.arrays['head.bias']
    cache = ForwardCache(caches, a, mode) if mode == 'train' else None
    return (outputs[0] if single else outputs), cache


def update_running_stats(params: NetworkParams, cache: ForwardCache, momentum: float = BN_MOMENTUM):
    """Fold the batch statistics of a train-mode pass into the running averages."""
    for i, layer in enumerate(cache.layers):
        n = layer.inputs.shape[0]
        unbiased = layer.batch_var * n / (n - 1) if n > 1 else layer.batch_var
        mean_key, var_key = _hidden(i, 'running_mean'), _hidden(i, 'running_var')
        params.arrays[mean_key] = (1.0 - momentum) * params.arrays[mean_key] + momentum * layer.batch_mean
        params.arrays[var_key] = (1.0 - momentum) * params.arrays[var_key] + momentum * unbiased


# ============================================================================
# BACKWARD
# ============================================================================

def _layer_backward(params, i, layer, grad_out, grads):
    arrays = params.arrays
    if layer.mask is not None:
        grad_out = grad_out * layer.mask
    grad_h = grad_out * (layer.pre_activation > 0)
    grads[_hidden(i, 'gamma')] = np.sum(grad_h * layer.normalized, axis=0)
    grads[_hidden(i, 'beta')] = np.sum(grad_h, axis=0)

    grad_norm = grad_h * arrays[_hidden(i, 'gamma')]
    n = grad_norm.shape[0]
    grad_z = layer.inv_std / n * (
        n * grad_norm
        - grad_norm.sum(axis=0)
        - layer.normalized * np.sum(grad_norm * layer.normalized, axis=0)
    )
    grads[_hidden(i, 'weight')] = layer.inputs.T @ grad_z
    grads[_hidden(i, 'bias')] = grad_z.sum(axis=0)
    return grad_z @ arrays[_hidden(i, 'weight')].T


def backward(params: NetworkParams, cache: ForwardCache, grad_outputs):
    """
    Back-propagate d(objective)/d(raw outputs) through a train-mode pass.

    Args:
        params: The parameters used for the cached forward pass
        cache: ForwardCache from forward(..., mode='train')
        grad_outputs: (N, 9) gradient of the objective w.r.t. the outputs

    Returns:
        dict name -> gradient array, one entry per trainable array
    """
    if cache is None or cache.mode != 'train':
        raise PoseProxemicsError("backward needs the cache of a train-mode forward pass.")
    arch = params.architecture
    grads = {
        'head.weight': cache.features.T @ grad_outputs,
        'head.bias': grad_outputs.sum(axis=0),
    }
    grad = grad_outputs @ params.arrays['head.weight'].T

    for k in reversed(range(arch.residual_pairs)):
        first = arch.plain_layers + 2 * k
        grad_skip = grad
        grad = _layer_backward(params, first + 1, cache.layers[first + 1], grad, grads)
        grad = _layer_backward(params, first, cache.layers[first], grad, grads)
        grad = grad + grad_skip
    for i in reversed(range(arch.plain_layers)):
        grad = _layer_backward(params, i, cache.layers[i], grad, grads)
    return {name: grads[name] for name in params.trainable()}


# ============================================================================
# OPTIMIZER
# ============================================================================

class Adam:
    """Adam over the trainable arrays of a NetworkParams, updated in place."""

    def __init__(self, params: NetworkParams, learning_rate=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(params.arrays[name]) for name in params.trainable()}
        self.v = {name: np.zeros_like(params.arrays[name]) for name in params.trainable()}

    def step(self, grads):
        self.step_count += 1
        correction1 = 1.0 - self.beta1 ** self.step_count
        correction2 = 1.0 - self.beta2 ** self.step_count
        for name, grad in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            self.params.arrays[name] = self.params.arrays[name] - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
