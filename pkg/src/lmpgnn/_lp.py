from __future__ import annotations

import numpy as np

from ._validation import check_p


def _fractional_power(a, e):
    return a ** e


def lp_error_transform(eps, p) -> np.ndarray:
    """Elementwise ``|eps|**(p-1) * sign(eps)``.

    p=1 and p=2 short-circuit to ``sign(eps)`` and ``eps`` so that the
    sign and least-squares variants are bitwise identical to dedicated
    implementations and never evaluate a fractional power.
    """
    p = check_p(p)
    eps = np.asarray(eps, dtype=float)
    if p == 1.0:
        return np.sign(eps)
    if p == 2.0:
        return eps.copy()
    return _fractional_power(np.abs(eps), p - 1.0) * np.sign(eps)


def lp_error_derivative(eps, p, delta) -> np.ndarray:
    """Smoothed derivative ``(p-1) * (|eps| + delta)**(p-2)`` of the transform."""
    p = check_p(p)
    eps = np.asarray(eps, dtype=float)
    if p == 1.0:
        return np.zeros_like(eps)
    if p == 2.0:
        return np.ones_like(eps)
    return (p - 1.0) * (np.abs(eps) + delta) ** (p - 2.0)
