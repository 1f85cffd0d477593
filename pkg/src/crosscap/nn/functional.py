"""Small dense building blocks shared by both model families."""

from __future__ import annotations

import numpy as np

# probability floor inside log; keeps losses finite without moving anything
# above test tolerances
PROB_FLOOR = 1e-12

INIT_SCALE = 0.08


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax (last axis), max-shifted for stability."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(prob_rows: np.ndarray, target_ids) -> float:
    """Sum of -log p(target) over rows, with the probability floor."""
    prob_rows = np.atleast_2d(np.asarray(prob_rows, dtype=np.float64))
    target_ids = np.atleast_1d(np.asarray(target_ids, dtype=np.intp))
    if prob_rows.shape[0] != target_ids.shape[0]:
        raise ValueError(
            f"{prob_rows.shape[0]} probability rows for {target_ids.shape[0]} targets"
        )
    if np.any(target_ids < 0) or np.any(target_ids >= prob_rows.shape[1]):
        raise ValueError("target id outside class range")
    picked = prob_rows[np.arange(prob_rows.shape[0]), target_ids]
    return float(-np.log(np.maximum(picked, PROB_FLOOR)).sum())


def softmax_xent_grad(prob_rows: np.ndarray, target_ids) -> np.ndarray:
    """d(cross_entropy)/d(logits) for a softmax head: p - onehot."""
    grad = np.array(prob_rows, dtype=np.float64, copy=True)
    grad[np.arange(grad.shape[0]), np.asarray(target_ids, dtype=np.intp)] -= 1.0
    return grad


def uniform_init(rng: np.random.Generator, *shape: int) -> np.ndarray:
    return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)


def dropout_mask(rng: np.random.Generator, shape, rate: float) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1]")
    if rate == 0.0:
        return np.ones(shape)
    if rate == 1.0:
        return np.zeros(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)
