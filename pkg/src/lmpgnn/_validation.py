"""Input validation helpers shared by the functional API and the estimators."""
from __future__ import annotations

import numpy as np


class DivergenceError(FloatingPointError):
    """An estimate or parameter became non-finite.

    ``timestep`` and ``layer`` locate the failure when known.
    """

    def __init__(self, message, timestep=None, layer=None):
        super().__init__(message)
        self.timestep = timestep
        self.layer = layer


def check_signal(x, n_nodes=None, name="signal"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if n_nodes is not None and x.shape[0] != n_nodes:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {n_nodes}")
    return x


def check_signals(x, n_nodes=None, name="signals", min_rows=0):
    """Validate a T x N matrix of graph signals."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(0, n_nodes or 0)
    if x.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional (T, N), got shape {x.shape}")
    if n_nodes is not None and x.shape[1] != n_nodes:
        raise ValueError(f"{name} have {x.shape[1]} columns, expected {n_nodes}")
    if x.shape[0] < min_rows:
        raise ValueError(f"{name} need at least {min_rows} rows, got {x.shape[0]}")
    return x


def check_square(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_symmetric(a, name="matrix", atol=1e-12):
    dev = np.max(np.abs(a - a.T)) if a.size else 0.0
    if dev > atol:
        raise ValueError(f"{name} is not symmetric (max deviation {dev:.3g})")
    return a


def check_p(p):
    p = float(p)
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    return p


def check_positive(value, name):
    value = float(value)
    if not (value > 0 and np.isfinite(value)):
        raise ValueError(f"{name} must be a positive finite number, got {value}")
    return value


def ensure_finite(x, message, timestep=None, layer=None):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(message, timestep=timestep, layer=layer)
    return x
