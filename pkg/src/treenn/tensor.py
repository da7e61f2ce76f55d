"""Dense float64 vector/matrix kernels, activation functions and softmax.

Vectors are 1-D ``float64`` ndarrays, matrices 2-D row-major ``float64``
ndarrays. Everything here is a pure function; no state, no mutation.
"""

from __future__ import annotations

import numpy as np

Vector = np.ndarray
Matrix = np.ndarray

ACTIVATIONS = ("sigmoid", "tanh", "softsign")


class DimensionMismatch(ValueError):
    """Incompatible shapes fed to a kernel; configuration error, not data."""


def vector(values) -> Vector:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatch(f"expected a non-empty 1-D vector, got shape {v.shape}")
    return v


def matrix(values) -> Matrix:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    return m


def matvec(m: Matrix, v: Vector) -> Vector:
    """m @ v with an explicit shape check naming both operands."""
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise DimensionMismatch(
            f"matvec: matrix {m.shape} incompatible with vector {v.shape}"
        )
    return m @ v


def sigmoid(x: Vector) -> Vector:
    # tanh form is overflow-free for float64, unlike 1/(1+exp(-x))
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def softsign(x: Vector) -> Vector:
    return x / (1.0 + np.abs(x))


def apply_activation(kind: str, v: Vector) -> Vector:
    if kind == "sigmoid":
        return sigmoid(v)
    if kind == "tanh":
        return np.tanh(v)
    if kind == "softsign":
        return softsign(v)
    raise ValueError(f"unknown activation {kind!r}, expected one of {ACTIVATIONS}")


def activation_derivative(kind: str, pre_activation: Vector) -> Vector:
    """Elementwise derivative evaluated at the pre-activation values."""
    if kind == "sigmoid":
        s = sigmoid(pre_activation)
        return s * (1.0 - s)
    if kind == "tanh":
        t = np.tanh(pre_activation)
        return 1.0 - t * t
    if kind == "softsign":
        return 1.0 / (1.0 + np.abs(pre_activation)) ** 2
    raise ValueError(f"unknown activation {kind!r}, expected one of {ACTIVATIONS}")


def softmax(logits: Vector) -> Vector:
    """Probability vector over logits; max-subtracted for stability."""
    shifted = logits - np.max(logits)
    e = np.exp(shifted)
    return e / e.sum()


def log_softmax(logits: Vector) -> Vector:
    shifted = logits - np.max(logits)
    return shifted - np.log(np.exp(shifted).sum())
