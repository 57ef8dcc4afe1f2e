"""Graph adaptive filters with a fixed bandlimited projector.

Every method performs ``x[t+1] = x[t] + mu * B g(eps[t])`` with
``B = U diag(band) U^T`` and ``eps[t] = D_S (y[t] - x[t])``:

======  ==========================================
glms    ``g(eps) = eps``
glmp    ``g(eps) = |eps|**(p-1) * sign(eps)``
gsign   ``g(eps) = sign(eps)``
gnlms   glms with per-frequency energy normalisation
gnlmp   glmp with per-frequency energy normalisation
======  ==========================================
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._lp import lp_error_transform
from ._validation import (DivergenceError, check_p, check_positive, check_signal,
                          check_signals, ensure_finite)
from .graph import (GftBasis, SamplingMask, SpectralFilter, apply_spectral_filter,
                    gft_basis, greedy_bandlimit, laplacian)

METHODS = ("glms", "gnlms", "glmp", "gnlmp", "gsign")
_P_FIXED = {"glms": 2.0, "gnlms": 2.0, "gsign": 1.0}


@dataclass(frozen=True)
class AdaptiveFilterConfig:
    method: str
    step_size: float
    band_filter: SpectralFilter
    p: float = 2.0
    norm_floor: float = 1e-6
    forgetting: float = 0.9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        check_positive(self.step_size, "step_size")
        check_positive(self.norm_floor, "norm_floor")
        check_p(self.p)
        if not 0 <= self.forgetting < 1:
            raise ValueError("forgetting must lie in [0, 1)")

    @property
    def effective_p(self) -> float:
        return _P_FIXED.get(self.method, self.p)

    @property
    def normalized(self) -> bool:
        return self.method in ("gnlms", "gnlmp")


@dataclass
class FilterState:
    estimate: np.ndarray
    spectral_energy: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.estimate = np.asarray(self.estimate, dtype=float)
        if self.spectral_energy is None:
            # unit start: the first normalised steps behave like the plain filter
            self.spectral_energy = np.ones_like(self.estimate)

    def copy(self):
        return replace(self, estimate=self.estimate.copy(),
                       spectral_energy=self.spectral_energy.copy())


def error_term(state: FilterState, y, mask: SamplingMask) -> np.ndarray:
    y = check_signal(y, mask.n_nodes, name="observation")
    x = check_signal(state.estimate, mask.n_nodes, name="estimate")
    return mask.as_diagonal * (y - x)


def step(config: AdaptiveFilterConfig, state: FilterState, y, mask: SamplingMask,
         basis: GftBasis) -> FilterState:
    """One adaptive update; returns a new state and leaves ``state`` untouched."""
    u = basis.eigenvectors
    band = config.band_filter.response
    if band.shape[0] != u.shape[0]:
        raise ValueError("band filter and basis dimensions differ")
    eps = error_term(state, y, mask)
    coef = u.T @ lp_error_transform(eps, config.effective_p)
    energy = state.spectral_energy
    if config.normalized:
        s = u.T @ eps
        energy = config.forgetting * energy + (1.0 - config.forgetting) * s * s
        coef = coef / np.maximum(energy, config.norm_floor)
    new = state.estimate + config.step_size * (u @ (band * coef))
    ensure_finite(new, f"adaptive filter diverged at timestep {state.t}", timestep=state.t)
    return FilterState(new, energy, state.t + 1)


def initial_estimate(y0, mask: SamplingMask, basis: GftBasis, band_filter: SpectralFilter):
    """Bandlimited projection of the first observation, zero-filled where unobserved."""
    y0 = mask.as_diagonal * check_signal(y0, mask.n_nodes, name="observation")
    return apply_spectral_filter(basis, band_filter, y0)


def run_online(config: AdaptiveFilterConfig, initial_estimate, observations,
               basis: GftBasis) -> np.ndarray:
    """One-step-ahead estimates over a stream of ``(y[t], mask)`` pairs.

    Row ``t`` of the result is the estimate held *before* ``y[t]`` is
    ingested. Returns an array of shape ``(T, N)``.
    """
    state = FilterState(check_signal(initial_estimate, basis.n_nodes, name="initial_estimate"))
    out = []
    with np.errstate(over="ignore", invalid="ignore"):
        for t, (y, mask) in enumerate(observations):
            out.append(state.estimate)
            state = step(config, replace(state, t=t), y, mask, basis)
    return np.array(out).reshape(len(out), basis.n_nodes)


def _as_mask(mask, n_nodes):
    if mask is None:
        return SamplingMask.full(n_nodes)
    if isinstance(mask, SamplingMask):
        return mask
    return SamplingMask.from_indicator(mask)


class GraphAdaptiveFilter(BaseEstimator):
    """Online graph signal estimator with a fixed bandlimited filter.

    Parameters
    ----------
    basis : GftBasis
        Spectral basis of the (static) graph.
    method : {'glms', 'gnlms', 'glmp', 'gnlmp', 'gsign'}
    mu : float
        Step size.
    p : float
        Error exponent for 'glmp' and 'gnlmp'; ignored otherwise.
    band_size : int or None
        Number of frequencies kept by :meth:`fit`. ``None`` keeps all.
    band_filter : SpectralFilter, optional
        Use this filter instead of designing one in :meth:`fit`.
    norm_floor, forgetting : float
        Energy floor and forgetting factor of the normalised variants.

    Examples
    --------
    >>> est = GraphAdaptiveFilter(basis, method="gsign", mu=0.2, band_size=10)
    >>> est.fit(train_signals).predict(observations, mask=mask)  # doctest: +SKIP
    """

    def __init__(self, basis=None, method="glms", mu=0.5, p=1.5, band_size=None,
                 band_filter=None, norm_floor=1e-6, forgetting=0.9):
        self.basis = basis
        self.method = method
        self.mu = mu
        self.p = p
        self.band_size = band_size
        self.band_filter = band_filter
        self.norm_floor = norm_floor
        self.forgetting = forgetting

    def fit(self, X, y=None):
        """Design the bandlimited filter from training signals ``X`` (T0 x N)."""
        if self.basis is None:
            raise ValueError("basis is required")
        n = self.basis.n_nodes
        if self.band_filter is not None:
            filt = self.band_filter
        else:
            X = check_signals(X, n, name="X", min_rows=1)
            filt = greedy_bandlimit(X, self.basis, n if self.band_size is None else self.band_size)
        self.config_ = AdaptiveFilterConfig(self.method, self.mu, filt, p=self.p,
                                            norm_floor=self.norm_floor,
                                            forgetting=self.forgetting)
        self.n_features_in_ = n
        return self

    def predict(self, Y, mask=None, initial=None):
        """One-step-ahead predictions for observations ``Y`` (T x N).

        ``mask`` is a :class:`SamplingMask` or 0/1 indicator fixed over the
        stream; unobserved entries of ``Y`` are ignored.
        """
        check_is_fitted(self, "config_")
        Y = check_signals(Y, self.n_features_in_, name="Y")
        mask = _as_mask(mask, self.n_features_in_)
        if Y.shape[0] == 0:
            return Y.copy()
        if initial is None:
            initial = initial_estimate(Y[0], mask, self.basis, self.config_.band_filter)
        return run_online(self.config_, initial, [(y, mask) for y in Y], self.basis)

    @classmethod
    def from_graph(cls, graph, **params):
        return cls(basis=gft_basis(laplacian(graph)), **params)


__all__ = ["AdaptiveFilterConfig", "DivergenceError", "FilterState", "GraphAdaptiveFilter",
           "METHODS", "error_term", "initial_estimate", "run_online", "step"]
