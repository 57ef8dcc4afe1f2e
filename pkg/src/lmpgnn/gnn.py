"""Least-mean-p-th-power graph neural networks.

A layer computes::

    x_{l+1} = act(x_l + mu * U diag(theta_l) U^T (|eps_l|**(p-1) * sign(eps_l)) + b_l)
    eps_l   = D_S (y - x_l)

with a trainable spectral diagonal ``theta_l`` and bias ``b_l``. ``p=1``
gives the sign network, ``p=2`` the least-mean-squares network. Parameters
are trained online by plain gradient descent on
``J = sum_i |(D_S (y - x_L))_i|**p / |S|`` using hand-derived gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._lp import lp_error_derivative, lp_error_transform
from ._validation import (DivergenceError, check_p, check_positive, check_signal,
                          check_signals, ensure_finite)
from .graph import GftBasis, SamplingMask, SpectralFilter, greedy_bandlimit

ACTIVATIONS = ("identity", "leaky_relu", "tanh")
CHECKPOINT_MAGIC = "lmpgnn-checkpoint"
CHECKPOINT_VERSION = 1


def activate(z, kind, slope=0.01):
    if kind == "identity":
        return z
    if kind == "tanh":
        return np.tanh(z)
    if kind == "leaky_relu":
        return np.where(z >= 0, z, slope * z)
    raise ValueError(f"unknown activation {kind!r}")


def activate_grad(z, kind, slope=0.01):
    if kind == "identity":
        return np.ones_like(z)
    if kind == "tanh":
        return 1.0 - np.tanh(z) ** 2
    if kind == "leaky_relu":
        return np.where(z >= 0, 1.0, slope)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class LmpGnnLayer:
    theta: np.ndarray
    bias: np.ndarray
    step_size: float = 0.5
    p: float = 1.5
    activation: str = "identity"
    slope: float = 0.01

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        bias = np.array(self.bias, dtype=float)
        if theta.ndim != 1 or theta.shape != bias.shape:
            raise ValueError("theta and bias must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(bias))):
            raise DivergenceError("layer parameters are not finite")
        check_positive(self.step_size, "step_size")
        check_p(self.p)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}; expected one of {ACTIVATIONS}")
        theta.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "bias", bias)

    @property
    def n_nodes(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class LmpGnnNetwork:
    layers: tuple
    basis: GftBasis
    learning_rate: float = 1e-3
    smoothing: float = 1e-6
    stop_gradient: bool = False

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        n = self.basis.n_nodes
        if any(layer.n_nodes != n for layer in layers):
            raise ValueError("every layer must match the basis dimension")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        check_positive(self.smoothing, "smoothing")
        object.__setattr__(self, "layers", layers)

    @classmethod
    def create(cls, basis, n_layers=1, p=1.5, step_size=0.5, activation="identity",
               slope=0.01, init_filter=None, **kwargs):
        """Network whose filters start at ``init_filter`` (all-pass if omitted) with zero biases."""
        n = basis.n_nodes
        theta = np.ones(n) if init_filter is None else np.asarray(
            getattr(init_filter, "response", init_filter), dtype=float)
        layers = [LmpGnnLayer(theta, np.zeros(n), step_size, p, activation, slope)
                  for _ in range(n_layers)]
        return cls(tuple(layers), basis, **kwargs)

    @property
    def p(self) -> float:
        return self.layers[0].p

    def with_params(self, thetas, biases):
        layers = tuple(replace(layer, theta=th, bias=b)
                       for layer, th, b in zip(self.layers, thetas, biases))
        return replace(self, layers=layers)


class LayerCache(NamedTuple):
    x_in: np.ndarray
    eps: np.ndarray
    spectrum: np.ndarray  # U^T g(eps)
    z: np.ndarray         # pre-activation


def _layer(layer, x_l, g, u):
    s = u.T @ g
    z = x_l + layer.step_size * (u @ (layer.theta * s)) + layer.bias
    return activate(z, layer.activation, layer.slope), s, z


def layer_forward(layer: LmpGnnLayer, x_l, eps, basis: GftBasis) -> np.ndarray:
    n = basis.n_nodes
    x_l = check_signal(x_l, n)
    eps = check_signal(eps, n, name="eps")
    if layer.n_nodes != n:
        raise ValueError("layer and basis dimensions differ")
    out, _, _ = _layer(layer, x_l, lp_error_transform(eps, layer.p), basis.eigenvectors)
    return out


def sign_layer_forward(layer: LmpGnnLayer, x_l, eps, basis: GftBasis) -> np.ndarray:
    """Sign-network layer: the error enters only through ``sign(eps)``; ``layer.p`` is ignored."""
    out, _, _ = _layer(layer, check_signal(x_l, basis.n_nodes),
                       np.sign(check_signal(eps, basis.n_nodes)), basis.eigenvectors)
    return out


def lms_layer_forward(layer: LmpGnnLayer, x_l, eps, basis: GftBasis) -> np.ndarray:
    """Least-mean-squares layer: the raw error is filtered; ``layer.p`` is ignored."""
    out, _, _ = _layer(layer, check_signal(x_l, basis.n_nodes),
                       np.array(check_signal(eps, basis.n_nodes)), basis.eigenvectors)
    return out


def network_forward(net: LmpGnnNetwork, x_hat, y, mask: SamplingMask):
    """Run all layers; returns ``(x_L, caches)`` with one cache per layer."""
    n = net.basis.n_nodes
    u = net.basis.eigenvectors
    d = mask.as_diagonal
    y = check_signal(y, n, name="observation")
    x = check_signal(x_hat, n, name="x_hat")
    caches = []
    for l, layer in enumerate(net.layers):
        eps = d * (y - x)
        x_next, s, z = _layer(layer, x, lp_error_transform(eps, layer.p), u)
        caches.append(LayerCache(x, eps, s, z))
        x = ensure_finite(x_next, f"non-finite output at layer {l}", layer=l)
    return x, caches


def lp_loss(residual, p, n_observed) -> float:
    if n_observed == 0:
        return 0.0
    return float(np.sum(np.abs(residual) ** p) / n_observed)


def backward(net: LmpGnnNetwork, caches, prediction, target, mask: SamplingMask):
    """Loss of ``prediction`` against ``target`` on observed nodes and its gradients.

    ``caches`` must come from the forward pass that produced ``prediction``.
    Returns ``(loss, grad_theta, grad_bias)``.
    """
    u = net.basis.eigenvectors
    d = mask.as_diagonal
    n_obs = len(mask)
    p = net.layers[-1].p
    resid = d * (np.asarray(target, dtype=float) - prediction)
    loss = lp_loss(resid, p, n_obs)
    if n_obs == 0:
        zeros = [np.zeros(net.basis.n_nodes) for _ in net.layers]
        return loss, zeros, [z.copy() for z in zeros]
    # dJ/dx_L; the outer loss is differentiable for p >= 1 away from zero residuals
    gx = -d * p * np.abs(resid) ** (p - 1.0) * np.sign(resid) / n_obs
    g_theta, g_bias = [], []
    for layer, cache in zip(reversed(net.layers), reversed(caches)):
        gz = gx * activate_grad(cache.z, layer.activation, layer.slope)
        proj = u.T @ gz
        g_bias.append(gz)
        g_theta.append(layer.step_size * proj * cache.spectrum)
        gx = gz
        if not net.stop_gradient:
            g_err = layer.step_size * (u @ (layer.theta * proj))
            g_eps = g_err * lp_error_derivative(cache.eps, layer.p, net.smoothing)
            gx = gx - d * g_eps
    return loss, g_theta[::-1], g_bias[::-1]


def loss_and_gradients(net: LmpGnnNetwork, x_hat, y, mask: SamplingMask):
    """Forward pass plus analytic gradients of the lp loss against ``y`` itself.

    Returns ``(prediction, loss, grad_theta, grad_bias)`` where the
    gradient lists are ordered like ``net.layers``.
    """
    pred, caches = network_forward(net, x_hat, y, mask)
    loss, g_theta, g_bias = backward(net, caches, pred, y, mask)
    return pred, loss, g_theta, g_bias


def _descend(net, g_theta, g_bias):
    eta = net.learning_rate
    thetas = [layer.theta - eta * g for layer, g in zip(net.layers, g_theta)]
    biases = [layer.bias - eta * g for layer, g in zip(net.layers, g_bias)]
    for l, (th, b) in enumerate(zip(thetas, biases)):
        ensure_finite(th, f"non-finite filter at layer {l}", layer=l)
        ensure_finite(b, f"non-finite bias at layer {l}", layer=l)
    return net.with_params(thetas, biases)


def online_update(net: LmpGnnNetwork, x_hat, y, mask: SamplingMask):
    """Ingest one observation: forward, backpropagate, take one descent step.

    Returns ``(new_net, prediction)``; ``net`` itself is not modified.
    """
    pred, _, g_theta, g_bias = loss_and_gradients(net, x_hat, y, mask)
    if net.learning_rate == 0:
        return net, pred
    return _descend(net, g_theta, g_bias), pred


def _online_pass(net, observations, x, record_from):
    preds = []
    for t, (y, mask) in enumerate(observations):
        if record_from is not None and t >= record_from:
            preds.append(x)
        try:
            net, x = online_update(net, x, y, mask)
        except DivergenceError as exc:
            exc.timestep = t
            raise
    return net, preds


def run_online_gnn(net: LmpGnnNetwork, observations: Sequence, train_steps=0, epochs=0,
                   initial=None):
    """Pretrain on a prefix, then predict the remaining stream online.

    ``observations`` is a sequence of ``(y[t], mask)``. The first
    ``train_steps`` entries are replayed ``epochs`` times, each epoch
    starting from ``initial``. A final online pass then walks the whole
    stream, recording the prediction held before each ``y[t]`` for
    ``t >= train_steps``.

    Returns ``(predictions, net)`` with predictions of shape
    ``(T - train_steps, N)``.
    """
    observations = list(observations)
    n = net.basis.n_nodes
    if not 0 <= train_steps <= len(observations):
        raise ValueError("train_steps must lie within the observation stream")
    if initial is None:
        initial = np.zeros(n)
    initial = check_signal(initial, n, name="initial")
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            net, _ = _online_pass(net, observations[:train_steps], initial, record_from=None)
        net, preds = _online_pass(net, observations, initial, record_from=train_steps)
    return np.array(preds).reshape(len(preds), n), net


# --- checkpoints --------------------------------------------------------------

def save_checkpoint(net: LmpGnnNetwork, path):
    """Write trained parameters as versioned decimal text (17 significant digits)."""
    fmt = lambda a: " ".join(f"{v:.17g}" for v in a)
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
             f"n_nodes {net.basis.n_nodes}",
             f"layers {len(net.layers)}",
             f"p {net.p:.17g}",
             f"learning_rate {net.learning_rate:.17g}",
             f"smoothing {net.smoothing:.17g}"]
    for l, layer in enumerate(net.layers):
        lines += [f"layer {l} {layer.step_size:.17g} {layer.p:.17g} {layer.activation} {layer.slope:.17g}",
                  f"theta {fmt(layer.theta)}",
                  f"bias {fmt(layer.bias)}"]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path, basis: GftBasis) -> LmpGnnNetwork:
    lines = Path(path).read_text().splitlines()
    head = lines[0].split()
    if head[:1] != [CHECKPOINT_MAGIC] or int(head[1]) != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    meta = dict(line.split(maxsplit=1) for line in lines[1:6])
    n, n_layers = int(meta["n_nodes"]), int(meta["layers"])
    if n != basis.n_nodes:
        raise ValueError(f"{path}: checkpoint has {n} nodes, basis has {basis.n_nodes}")
    layers = []
    body = lines[6:]
    for l in range(n_layers):
        _, idx, mu, p, act, slope = body[3 * l].split()
        theta = np.array(body[3 * l + 1].split()[1:], dtype=float)
        bias = np.array(body[3 * l + 2].split()[1:], dtype=float)
        layers.append(LmpGnnLayer(theta, bias, float(mu), float(p), act, float(slope)))
    return LmpGnnNetwork(tuple(layers), basis, float(meta["learning_rate"]),
                         float(meta["smoothing"]))


# --- estimator ----------------------------------------------------------------

class LMPGNN(BaseEstimator):
    """Online LMP-GNN estimator.

    ``fit`` designs the initial filter, pretrains on a stream of training
    observations and stores ``network_``. ``predict`` continues online
    training on a copy, so repeated calls start from the same fitted state.

    Parameters
    ----------
    basis : GftBasis
    p : float
        Error exponent in [1, 2]; 1 gives the sign network, 2 the LMS network.
    mu : float
        Adaptive step size inside every layer.
    layers : int
    eta : float
        Learning rate of the online gradient descent.
    activation : {'identity', 'leaky_relu', 'tanh'}
    slope : float
        Negative slope of ``leaky_relu``.
    pretrain_epochs : int
    delta_grad : float
        Smoothing of the error-transform derivative.
    band_size : int or None
        Frequencies kept in the initial filter; ``None`` keeps all.
    band_filter : SpectralFilter, optional
        Initial filter, overriding ``band_size``.
    stop_gradient : bool
        Treat each layer's error as a constant during backpropagation.
    """

    def __init__(self, basis=None, p=1.5, mu=0.5, layers=1, eta=1e-3,
                 activation="identity", slope=0.01, pretrain_epochs=50, delta_grad=1e-6,
                 band_size=None, band_filter=None, stop_gradient=False):
        self.basis = basis
        self.p = p
        self.mu = mu
        self.layers = layers
        self.eta = eta
        self.activation = activation
        self.slope = slope
        self.pretrain_epochs = pretrain_epochs
        self.delta_grad = delta_grad
        self.band_size = band_size
        self.band_filter = band_filter
        self.stop_gradient = stop_gradient

    def _initial_network(self, X):
        n = self.basis.n_nodes
        if self.band_filter is not None:
            init = self.band_filter
        elif self.band_size is not None:
            init = greedy_bandlimit(X, self.basis, self.band_size)
        else:
            init = SpectralFilter(np.ones(n))
        return LmpGnnNetwork.create(
            self.basis, n_layers=self.layers, p=self.p, step_size=self.mu,
            activation=self.activation, slope=self.slope, init_filter=init,
            learning_rate=self.eta, smoothing=self.delta_grad,
            stop_gradient=self.stop_gradient)

    def fit(self, X, y=None, mask=None):
        """Pretrain on training observations ``X`` (T0 x N) seen through ``mask``."""
        if self.basis is None:
            raise ValueError("basis is required")
        n = self.basis.n_nodes
        X = check_signals(X, n, name="X", min_rows=1)
        mask = _as_mask(mask, n)
        net = self._initial_network(X)
        obs = [(x, mask) for x in X]
        if self.pretrain_epochs:
            _, net = run_online_gnn(net, obs, train_steps=len(obs),
                                    epochs=self.pretrain_epochs - 1,
                                    initial=self._initial(X[0], mask, net))
        self.network_ = net
        self.n_features_in_ = n
        return self

    def _initial(self, y0, mask, net):
        u = self.basis.eigenvectors
        return u @ (net.layers[0].theta * (u.T @ (mask.as_diagonal * y0)))

    def predict(self, Y, mask=None, initial=None):
        """One-step-ahead predictions for ``Y`` (T x N) with online adaptation."""
        check_is_fitted(self, "network_")
        Y = check_signals(Y, self.n_features_in_, name="Y")
        mask = _as_mask(mask, self.n_features_in_)
        if Y.shape[0] == 0:
            return Y.copy()
        if initial is None:
            initial = self._initial(Y[0], mask, self.network_)
        preds, _ = run_online_gnn(self.network_, [(y, mask) for y in Y], initial=initial)
        return preds


def _as_mask(mask, n):
    if mask is None:
        return SamplingMask.full(n)
    if isinstance(mask, SamplingMask):
        return mask
    return SamplingMask.from_indicator(mask)


__all__ = ["LMPGNN", "LayerCache", "LmpGnnLayer", "LmpGnnNetwork", "activate",
           "layer_forward", "lms_layer_forward", "load_checkpoint", "loss_and_gradients",
           "lp_error_transform", "lp_loss", "network_forward", "online_update",
           "run_online_gnn", "save_checkpoint", "sign_layer_forward"]
