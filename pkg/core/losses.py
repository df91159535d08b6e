"""
Distance losses on relative error and the dropout weight penalty.

Every loss works on the relative error 1 - d/x (x ground truth, d
prediction). Spreads enter through their log, s = log(b), so the spread
stays positive without constraints. The `*_terms` functions are
vectorized and also return gradients with respect to (d, s).
"""
from __future__ import annotations

import math

import numpy as np

DISTANCE_LOSSES = ('laplace', 'l1', 'gaussian')


def laplace_loss(x, d, b):
    """|1 - d/x| / b + log(2b)"""
    return abs(1.0 - d / x) / b + math.log(2.0 * b)


def l1_relative_loss(x, d):
    """|1 - d/x|"""
    return abs(1.0 - d / x)


def gaussian_loss(x, d, sigma):
    """(1 - d/x)^2 / (2 sigma^2) + log(sigma^2) / 2"""
    return (1.0 - d / x) ** 2 / (2.0 * sigma ** 2) + 0.5 * math.log(sigma ** 2)


def distance_terms(kind, x, d, s):
    """
    Per-sample distance loss and its gradients.

    Args:
        kind: One of 'laplace', 'l1', 'gaussian'
        x: Ground-truth distances (N,)
        d: Predicted distances (N,)
        s: Predicted log-spreads (N,); ignored by 'l1'

    Returns:
        tuple: (loss (N,), dloss/dd (N,), dloss/ds (N,))
    """
    rel = 1.0 - d / x
    if kind == 'laplace':
        inv_b = np.exp(-s)
        loss = np.abs(rel) * inv_b + math.log(2.0) + s
        grad_d = -np.sign(rel) / x * inv_b
        grad_s = 1.0 - np.abs(rel) * inv_b
    elif kind == 'l1':
        loss = np.abs(rel)
        grad_d = -np.sign(rel) / x
        grad_s = np.zeros_like(rel)
    elif kind == 'gaussian':
        inv_var = np.exp(-2.0 * s)
        loss = 0.5 * rel ** 2 * inv_var + s
        grad_d = -rel / x * inv_var
        grad_s = 1.0 - rel ** 2 * inv_var
    else:
        raise ValueError(f"Unknown distance loss '{kind}'. Must be one of: {', '.join(DISTANCE_LOSSES)}")
    return loss, grad_d, grad_s


def laplace_floor(x, d):
    """Minimum of the Laplace loss over b, reached at b = |1 - d/x|."""
    return 1.0 + math.log(2.0 * abs(1.0 - d / x))


def dropout_regularizer(weights, p_drop, n):
    """
    (1 - p_drop) / (2N) * ||theta||^2 over the given weight matrices.

    Args:
        weights: Iterable of weight arrays
        p_drop: Dropout probability
        n: Number of training points

    Returns:
        float
    """
    if n <= 0:
        raise ValueError(f"N must be positive. Got: {n}")
    squared = math.fsum(float(np.sum(np.square(w))) for w in weights)
    return (1.0 - p_drop) / (2.0 * n) * squared
