"""Monte Carlo experiment harness.

A repetition draws one noise realisation for the whole stream and feeds
the identical observations to every method. Noise for repetition ``r`` at
timestep ``t`` comes from ``derive_seed(derive_seed(base_seed, 1, r), t)``, so any
repetition can be replayed alone and results do not depend on the order
or parallelism of execution.
"""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import DivergenceError, check_signal, ensure_finite
from .adaptive import METHODS as FILTER_METHODS
from .adaptive import AdaptiveFilterConfig, initial_estimate, run_online
from .datasets import Dataset
from .gnn import LmpGnnNetwork, run_online_gnn
from .graph import GftBasis, SamplingMask, SpectralFilter, gft_basis, greedy_bandlimit, laplacian
from .noise import NoiseSpec, derive_seed, make_rng, sample

log = logging.getLogger(__name__)

GNN_METHODS = ("lmp_gnn", "sign_gnn", "lms_gnn")
ALL_METHODS = GNN_METHODS + FILTER_METHODS
_GNN_P = {"sign_gnn": 1.0, "lms_gnn": 2.0}


@dataclass(frozen=True)
class MethodSpec:
    """One estimator configuration; fields irrelevant to ``method`` are ignored."""

    method: str
    name: str = None
    mu: float = 0.5
    p: float = 1.5
    band_size: int = None
    norm_floor: float = 1e-6
    forgetting: float = 0.9
    eta: float = 1e-3
    layers: int = 1
    activation: str = "identity"
    slope: float = 0.01
    pretrain_epochs: int = 50
    delta_grad: float = 1e-6
    stop_gradient: bool = False

    def __post_init__(self):
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {ALL_METHODS}")
        if self.name is None:
            object.__setattr__(self, "name", self.method)

    @property
    def is_gnn(self) -> bool:
        return self.method in GNN_METHODS

    @property
    def effective_p(self) -> float:
        return _GNN_P.get(self.method, self.p)


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: Dataset
    noise: NoiseSpec
    observed_count: int
    train_prefix: int
    methods: tuple
    repetitions: int = 100
    base_seed: int = 0
    band_size: int = None
    name: str = "experiment"
    trace_node: int = 0

    def __post_init__(self):
        n, t = self.dataset.n_nodes, self.dataset.n_timesteps
        if not 0 <= self.observed_count <= n:
            raise ValueError(f"observed_count must lie in [0, {n}]")
        # the first observation seeds the initial estimate, so it is never scored
        if not 1 <= self.train_prefix < t:
            raise ValueError(f"train_prefix must lie in [1, {t})")
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.methods:
            raise ValueError("at least one method is required")
        names = [m.name for m in self.methods]
        if len(set(names)) != len(names):
            raise ValueError(f"method names must be unique, got {names}")
        if not 0 <= self.trace_node < n:
            raise ValueError("trace_node out of range")
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass
class ResultTable:
    """Per-method MSE series of shape ``(R, T_test)``; diverged repetitions hold NaN."""

    mse: dict
    diverged: dict
    test_start: int = 0
    traces: dict = field(default_factory=dict)
    truth_trace: np.ndarray = None
    trace_node: int = 0

    @property
    def methods(self):
        return list(self.mse)

    def mean_mse(self, method) -> float:
        """Mean over all stored (repetition, timestep) values of non-diverged runs."""
        vals = self.mse[method][~self.diverged[method]]
        return float(vals.mean()) if vals.size else float("nan")

    def summary(self):
        rows = []
        for m in self.methods:
            ok = self.mse[m][~self.diverged[m]]
            per_rep = ok.mean(axis=1) if ok.size else np.array([np.nan])
            rows.append({"method": m, "mean_mse": self.mean_mse(m),
                         "std_mse": float(np.std(per_rep)),
                         "diverged": int(self.diverged[m].sum())})
        return rows


def choose_sampling_set(n_nodes, observed_count, seed) -> SamplingMask:
    """Uniformly random observed subset, deterministic per seed."""
    if not 0 <= observed_count <= n_nodes:
        raise ValueError(f"observed_count must lie in [0, {n_nodes}], got {observed_count}")
    idx = make_rng(seed).choice(n_nodes, size=observed_count, replace=False)
    return SamplingMask(n_nodes, tuple(idx))


def observe(x, w, mask: SamplingMask) -> np.ndarray:
    """``D_S (x + w)``: noisy signal with unobserved entries set to exactly 0."""
    return mask.as_diagonal * (check_signal(x, mask.n_nodes) + check_signal(w, mask.n_nodes))


def make_observations(dataset, noise: NoiseSpec, mask: SamplingMask, seed):
    """``[(y[t], mask)]`` with ``y[t] = D_S (x[t] + w[t])`` for every row of ``dataset``.

    ``dataset`` may be a :class:`Dataset` or a T x N array. The noise at
    timestep ``t`` is drawn from ``derive_seed(seed, t)``.
    """
    x = dataset.signals if isinstance(dataset, Dataset) else np.atleast_2d(dataset)
    n = x.shape[1]
    return [(observe(row, sample(noise, n, derive_seed(seed, t)), mask), mask)
            for t, row in enumerate(x)]


def experiment_mask(spec: ExperimentSpec) -> SamplingMask:
    """The sampling set shared by all repetitions of ``spec``."""
    return choose_sampling_set(spec.dataset.n_nodes, spec.observed_count,
                               derive_seed(spec.base_seed, 0))


def repetition_observations(spec: ExperimentSpec, mask: SamplingMask, r):
    """Observation stream of repetition ``r``; replayable in isolation."""
    return make_observations(spec.dataset, spec.noise, mask, derive_seed(spec.base_seed, 1, r))


def mse_at(x_true, x_pred) -> float:
    x_true = check_signal(x_true)
    x_pred = check_signal(x_pred, x_true.shape[0], name="prediction")
    return float(np.mean((x_true - x_pred) ** 2))


def mse_series(truth, preds) -> np.ndarray:
    return np.mean((np.asarray(truth) - np.asarray(preds)) ** 2, axis=1)


def design_band(spec: ExperimentSpec, basis: GftBasis, band_size=None) -> SpectralFilter:
    """Band filter from the clean training prefix (all frequencies if no size is set)."""
    size = band_size if band_size is not None else spec.band_size
    if size is None:
        return SpectralFilter(np.ones(basis.n_nodes))
    prefix = spec.dataset.signals[:max(spec.train_prefix, 1)]
    return greedy_bandlimit(prefix, basis, size)


def run_method(method: MethodSpec, observations, basis: GftBasis, band: SpectralFilter,
               train_prefix: int) -> np.ndarray:
    """Predictions for timesteps ``train_prefix..T-1``.

    Filters run online over the whole stream. Networks pretrain on the
    prefix and then run online over the whole stream too. Both start from
    the band projection of the first observation.
    """
    y0, mask0 = observations[0]
    x0 = initial_estimate(y0, mask0, basis, band)
    if method.is_gnn:
        net = LmpGnnNetwork.create(
            basis, n_layers=method.layers, p=method.effective_p, step_size=method.mu,
            activation=method.activation, slope=method.slope, init_filter=band,
            learning_rate=method.eta, smoothing=method.delta_grad,
            stop_gradient=method.stop_gradient)
        preds, _ = run_online_gnn(net, observations, train_steps=train_prefix,
                                  epochs=method.pretrain_epochs, initial=x0)
        return preds
    config = AdaptiveFilterConfig(method.method, method.mu, band, p=method.p,
                                  norm_floor=method.norm_floor, forgetting=method.forgetting)
    return run_online(config, x0, observations, basis)[train_prefix:]


def _repetition(args):
    spec, basis, bands, mask, r = args
    obs = repetition_observations(spec, mask, r)
    truth = spec.dataset.signals[spec.train_prefix:]
    out = {}
    for m in spec.methods:
        try:
            preds = run_method(m, obs, basis, bands[m.name], spec.train_prefix)
            with np.errstate(over="ignore", invalid="ignore"):
                mse = mse_series(truth, preds)
            # finite estimates can still be large enough for the squared error to overflow
            ensure_finite(mse, f"{m.name}: MSE overflowed")
            out[m.name] = (mse, False, preds[:, spec.trace_node])
        except DivergenceError as exc:
            log.warning("repetition %d: %s diverged (%s)", r, m.name, exc)
            nan = np.full(truth.shape[0], np.nan)
            out[m.name] = (nan, True, nan)
    return r, out


def run_experiment(spec: ExperimentSpec, jobs=1) -> ResultTable:
    """Run every method for every repetition and collect MSE series."""
    basis = gft_basis(laplacian(spec.dataset.graph))
    mask = experiment_mask(spec)
    bands = {m.name: design_band(spec, basis, m.band_size) for m in spec.methods}
    tasks = [(spec, basis, bands, mask, r) for r in range(spec.repetitions)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = dict(pool.map(_repetition, tasks))
    else:
        results = dict(map(_repetition, tasks))
    t_test = spec.dataset.n_timesteps - spec.train_prefix
    mse, div, traces = {}, {}, {}
    for m in spec.methods:
        rows = [results[r][m.name] for r in range(spec.repetitions)]
        mse[m.name] = np.array([row[0] for row in rows]).reshape(-1, t_test)
        div[m.name] = np.array([row[1] for row in rows], dtype=bool)
        traces[m.name] = rows[0][2]
    return ResultTable(mse, div, spec.train_prefix, traces,
                       spec.dataset.signals[spec.train_prefix:, spec.trace_node].copy(),
                       spec.trace_node)


# --- persistence --------------------------------------------------------------

def write_results(table: ResultTable, out_dir):
    """Write ``<method>/mse_t.csv``, ``summary.csv`` and trace files under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for m in table.methods:
        d = out / m
        d.mkdir(exist_ok=True)
        np.savetxt(d / "mse_t.csv", table.mse[m], delimiter=",", fmt="%.17g")
        if m in table.traces:
            np.savetxt(d / "trace.csv", np.atleast_1d(table.traces[m]), fmt="%.17g")
    if table.truth_trace is not None:
        np.savetxt(out / "ground_truth_trace.csv", table.truth_trace, fmt="%.17g")
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, ["method", "mean_mse", "std_mse", "diverged"])
        w.writeheader()
        for row in table.summary():
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in row.items()})
    meta = {"methods": table.methods, "test_start": table.test_start,
            "trace_node": table.trace_node}
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def read_results(out_dir) -> ResultTable:
    """Rebuild a :class:`ResultTable` from a results directory."""
    out = Path(out_dir)
    meta_path = out / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        methods = meta["methods"]
    else:
        meta = {}
        methods = sorted(p.parent.name for p in out.glob("*/mse_t.csv"))
    if not methods:
        raise FileNotFoundError(f"no results found in {out}")
    mse, div, traces = {}, {}, {}
    for m in methods:
        a = np.atleast_2d(np.loadtxt(out / m / "mse_t.csv", delimiter=","))
        mse[m] = a
        div[m] = np.all(np.isnan(a), axis=1)
        tr = out / m / "trace.csv"
        if tr.exists():
            traces[m] = np.atleast_1d(np.loadtxt(tr))
    truth = out / "ground_truth_trace.csv"
    return ResultTable(mse, div, meta.get("test_start", 0), traces,
                       np.atleast_1d(np.loadtxt(truth)) if truth.exists() else None,
                       meta.get("trace_node", 0))
