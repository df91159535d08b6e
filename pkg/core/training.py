"""
Training objective and loop for the distance regressor.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np
from django.conf import settings

from core.exceptions import PoseProxemicsError, TrainingDivergedError
from core.geometry import spherical_from_xyz, viewpoint_from_orientation
from core.keypoints import flip_record, normalize_records
from core.losses import DISTANCE_LOSSES, distance_terms, dropout_regularizer
from core.network import (
    D_MIN,
    HEAD,
    Adam,
    Architecture,
    backward,
    forward,
    init_params,
    update_running_stats,
)

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    batch_size: int = 512
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    p_drop: float = 0.2
    seed: int = 0
    loss: str = 'laplace'
    hidden_size: int = 1024
    num_layers: int = 6
    residual_pairs: int = 2
    dropout_regularizer: bool = False
    val_fraction: float = 0.0

    def __post_init__(self):
        if self.epochs <= 0:
            raise PoseProxemicsError(f"Epochs must be positive. Got: {self.epochs}")
        if self.learning_rate <= 0:
            raise PoseProxemicsError(f"Learning rate must be positive. Got: {self.learning_rate}")
        if self.batch_size <= 0:
            raise PoseProxemicsError(f"Batch size must be positive. Got: {self.batch_size}")
        if not 0.0 <= self.p_drop < 1.0:
            raise PoseProxemicsError(f"Dropout probability must be in [0, 1). Got: {self.p_drop}")
        if self.loss not in DISTANCE_LOSSES:
            raise PoseProxemicsError(f"Unknown loss '{self.loss}'. Must be one of: {', '.join(DISTANCE_LOSSES)}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise PoseProxemicsError(f"Validation fraction must be in [0, 1). Got: {self.val_fraction}")

    @classmethod
    def from_settings(cls, **overrides):
        """Defaults from settings.POSE_PROXEMICS['TRAINING'], then overrides that are not None."""
        conf = settings.POSE_PROXEMICS['TRAINING']
        values = {
            'epochs': conf['EPOCHS'],
            'learning_rate': conf['LEARNING_RATE'],
            'batch_size': conf['BATCH_SIZE'],
            'p_drop': conf['P_DROP'],
            'hidden_size': conf['HIDDEN_SIZE'],
            'loss': conf['LOSS'],
            'dropout_regularizer': conf['DROPOUT_REGULARIZER'],
            'val_fraction': conf['VAL_FRACTION'],
        }
        known = {f.name for f in fields(cls)}
        for key, value in overrides.items():
            if key not in known:
                raise PoseProxemicsError(f"Unknown training option '{key}'.")
            if value is not None:
                values[key] = value
        return cls(**values)


@dataclass
class TrainingSet:
    """Network inputs (N, 51) and targets (N, 9) with absolute dims in columns 6..8."""
    inputs: np.ndarray
    targets: np.ndarray

    def __len__(self):
        return len(self.inputs)


@dataclass
class TrainingResult:
    params: object
    history: list = field(default_factory=list)


# ============================================================================
# TARGETS AND OBJECTIVE
# ============================================================================

def build_targets(people) -> np.ndarray:
    """
    Regression targets for ground-truth people.

    Columns: [d, (unused), beta, psi, sin alpha, cos alpha, w, h, l].
    """
    xyz = np.array([p.location.as_array() for p in people], dtype=float).reshape(-1, 3)
    targets = np.zeros((len(xyz), 9))
    if len(xyz) == 0:
        return targets
    spherical = spherical_from_xyz(xyz)
    theta = np.array([p.theta for p in people])
    alpha = viewpoint_from_orientation(theta, spherical[:, 1])
    targets[:, 0] = spherical[:, 0]
    targets[:, 2] = spherical[:, 1]
    targets[:, 3] = spherical[:, 2]
    targets[:, 4] = np.sin(alpha)
    targets[:, 5] = np.cos(alpha)
    targets[:, 6:9] = np.array([p.dims for p in people], dtype=float)
    return targets


def build_training_set(records, flip: bool = False) -> TrainingSet:
    """
    Inputs and targets for every usable labeled record.

    With `flip`, each record with a known image width is also added
    mirrored.
    """
    labeled = [r for r in records if r.gt is not None]
    if flip:
        labeled = labeled + [flip_record(r) for r in labeled if r.K.width is not None]
    inputs, kept = normalize_records(labeled)
    targets = build_targets([labeled[i].gt for i in kept])
    return TrainingSet(inputs, targets)


def softplus(y):
    return np.logaddexp(0.0, y)


def sigmoid(y):
    return 0.5 * (1.0 + np.tanh(0.5 * y))


def objective_terms(outputs, targets, loss: str = 'laplace'):
    """
    Per-sample loss terms and the gradient of their batch mean.

    Targets must carry dims as offsets from the dim expectation.

    Returns:
        tuple: (dict of per-sample term arrays, d(mean total)/d(outputs) (N, 9))
    """
    outputs = np.atleast_2d(outputs)
    targets = np.atleast_2d(targets)
    n = len(outputs)
    raw_d = outputs[:, HEAD['d']]
    d = D_MIN + softplus(raw_d)
    distance, grad_d, grad_s = distance_terms(loss, targets[:, 0], d, outputs[:, HEAD['s']])

    residual = outputs - targets
    terms = {
        'distance': distance,
        'beta': np.abs(residual[:, HEAD['beta']]),
        'psi': np.abs(residual[:, HEAD['psi']]),
        'orientation': np.abs(residual[:, HEAD['sin']]) + np.abs(residual[:, HEAD['cos']]),
        'dims': np.abs(residual[:, HEAD['dims']]).sum(axis=1),
    }

    grad = np.sign(residual)
    grad[:, HEAD['d']] = grad_d * sigmoid(raw_d)
    grad[:, HEAD['s']] = grad_s
    return terms, grad / n


def total_loss(outputs, targets, loss: str = 'laplace') -> float:
    """Unweighted sum of the five terms, averaged over the batch."""
    terms, _ = objective_terms(outputs, targets, loss)
    return float(np.mean(sum(terms.values())))


def objective(params, inputs, targets, rng=None, regularizer_n=None):
    """
    Train-mode objective and its gradients for one batch.

    Args:
        params: NetworkParams
        inputs: (N, 51) batch
        targets: (N, 9) targets with dim offsets
        rng: Generator for dropout masks
        regularizer_n: when set, adds the dropout weight penalty for a
            training set of this size

    Returns:
        tuple: (loss, terms, grads, cache)
    """
    outputs, cache = forward(params, inputs, 'train', rng)
    terms, grad_outputs = objective_terms(outputs, targets, params.loss)
    grads = backward(params, cache, grad_outputs)
    value = float(np.mean(sum(terms.values())))
    if regularizer_n:
        value += dropout_regularizer(params.weight_matrices(), params.p_drop, regularizer_n)
        scale = (1.0 - params.p_drop) / regularizer_n
        for name in grads:
            if name.endswith('.weight'):
                grads[name] = grads[name] + scale * params.arrays[name]
    return value, terms, grads, cache


def _inverse_softplus(value):
    value = max(value, 1e-3)
    return math.log(math.expm1(value)) if value < 30 else value


# ============================================================================
# TRAINING LOOP
# ============================================================================

def _split(dataset, fraction, rng):
    n = len(dataset)
    order = rng.permutation(n)
    n_val = int(round(fraction * n)) if fraction > 0 else 0
    n_val = min(n_val, n - 1)
    val, train = order[:n_val], order[n_val:]
    return (
        TrainingSet(dataset.inputs[train], dataset.targets[train]),
        TrainingSet(dataset.inputs[val], dataset.targets[val]) if n_val else None,
    )


def _batches(n, batch_size, rng):
    order = rng.permutation(n)
    batches = [order[start:start + batch_size] for start in range(0, n, batch_size)]
    # a one-sample batch has no batch statistics to normalize with
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches[-1]])
        batches.pop()
    return batches


def evaluate_loss(params, dataset, dim_mean):
    """Eval-mode mean objective and mean absolute distance error on a dataset."""
    targets = dataset.targets.copy()
    targets[:, 6:9] -= dim_mean
    outputs, _ = forward(params, dataset.inputs, 'eval')
    terms, _ = objective_terms(outputs, targets, params.loss)
    d = D_MIN + softplus(outputs[:, HEAD['d']])
    return float(np.mean(sum(terms.values()))), float(np.mean(np.abs(d - targets[:, 0])))


def train(dataset: TrainingSet, config: TrainingConfig) -> TrainingResult:
    """
    Fit a fresh network with Adam on mini-batches.

    Everything random (split, initialization, shuffling, dropout) draws
    from one generator seeded with config.seed.

    Raises:
        PoseProxemicsError: empty dataset
        TrainingDivergedError: the batch objective became non-finite
    """
    if len(dataset) == 0:
        raise PoseProxemicsError("Cannot train on an empty dataset.")
    rng = np.random.default_rng(config.seed)
    train_set, val_set = _split(dataset, config.val_fraction, rng)

    dim_mean = train_set.targets[:, 6:9].mean(axis=0)
    targets = train_set.targets.copy()
    targets[:, 6:9] -= dim_mean

    architecture = Architecture(
        input_size=dataset.inputs.shape[1],
        hidden_size=config.hidden_size,
        num_layers=config.num_layers,
        residual_pairs=config.residual_pairs,
    )
    params = init_params(architecture, rng, p_drop=config.p_drop, dim_mean=dim_mean,
                         loss=config.loss, seed=config.seed)
    # start the distance head at the mean training distance
    params.arrays['head.bias'][HEAD['d']] = _inverse_softplus(float(targets[:, 0].mean()) - D_MIN)

    optimizer = Adam(params, config.learning_rate, config.betas, config.eps)
    regularizer_n = len(train_set) if config.dropout_regularizer else None
    n = len(train_set)
    log_every = max(1, config.epochs // 10)
    logger.info(
        "Training on %d samples (%d validation), %d epochs, batch %d, loss=%s, p_drop=%.2f",
        n, len(val_set) if val_set else 0, config.epochs, config.batch_size, config.loss, config.p_drop,
    )

    history = []
    last_finite = None
    for epoch in range(1, config.epochs + 1):
        losses, distance_losses, weights = [], [], []
        for batch_index, batch in enumerate(_batches(n, config.batch_size, rng)):
            value, terms, grads, cache = objective(
                params, train_set.inputs[batch], targets[batch], rng, regularizer_n
            )
            if not math.isfinite(value):
                logger.error("Non-finite loss at epoch %d, batch %d", epoch, batch_index)
                raise TrainingDivergedError(epoch, batch_index, last_finite)
            last_finite = value
            optimizer.step(grads)
            update_running_stats(params, cache)
            losses.append(value)
            distance_losses.append(float(np.mean(terms['distance'])))
            weights.append(len(batch))

        entry = {
            'epoch': epoch,
            'loss': float(np.average(losses, weights=weights)),
            'distance_loss': float(np.average(distance_losses, weights=weights)),
            'val_loss': None,
            'val_ale': None,
        }
        if val_set is not None:
            entry['val_loss'], entry['val_ale'] = evaluate_loss(params, val_set, dim_mean)
        history.append(entry)
        if epoch % log_every == 0 or epoch == config.epochs:
            logger.info("Epoch %d/%d: loss=%.4f distance=%.4f val_ale=%s",
                        epoch, config.epochs, entry['loss'], entry['distance_loss'], entry['val_ale'])

    return TrainingResult(params=params, history=history)
