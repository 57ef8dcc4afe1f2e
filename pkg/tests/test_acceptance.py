"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the pytest terminal
summary. Run only this file with ``pytest tests/test_acceptance.py -v``.
"""
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from lmpgnn.adaptive import AdaptiveFilterConfig, FilterState, run_online, step
from lmpgnn.datasets import load_dataset, make_drifting_bandlimited
from lmpgnn.experiment import (ExperimentSpec, MethodSpec, experiment_mask,
                               repetition_observations, run_experiment)
from lmpgnn.gnn import (LmpGnnLayer, layer_forward, lms_layer_forward, loss_and_gradients,
                        network_forward, sign_layer_forward)
from lmpgnn.graph import (SamplingMask, SpectralFilter, apply_spectral_filter, gft_basis,
                          laplacian)
from lmpgnn.noise import NoiseSpec, cdf, sample

from .conftest import random_connected_graph
from .test_gnn import finite_difference, random_net

pytestmark = pytest.mark.acceptance

DATA_ENV = "LMPGNN_TEMPERATURE_DIR"


def ks_critical(n, m, alpha=0.01):
    return math.sqrt(-0.5 * math.log(alpha / 2)) * math.sqrt((n + m) / (n * m))


# --- 1 ----------------------------------------------------------------------

def test_criterion_1_special_case_identities(acceptance_report):
    start = time.perf_counter()
    worst = 0.0
    for k in range(200):
        rng = np.random.default_rng(k)
        basis = gft_basis(laplacian(random_connected_graph(10, seed=10_000 + k)))
        band = SpectralFilter.from_band(10, sorted(rng.choice(10, rng.integers(1, 11),
                                                              replace=False)))
        mask = SamplingMask(10, tuple(rng.choice(10, rng.integers(0, 11), replace=False)))
        x, y = rng.normal(size=10), rng.normal(size=10) + rng.standard_cauchy(10)
        state = FilterState(x)

        def run(method, p=2.0):
            return step(AdaptiveFilterConfig(method, 0.5, band, p=p), state, y, mask,
                        basis).estimate

        worst = max(worst, np.max(np.abs(run("glmp", 1.0) - run("gsign"))),
                    np.max(np.abs(run("glmp", 2.0) - run("glms"))))
        eps = mask.as_diagonal * (y - x)
        theta, bias = rng.normal(size=10), rng.normal(size=10)
        for p, dedicated in ((1.0, sign_layer_forward), (2.0, lms_layer_forward)):
            layer = LmpGnnLayer(theta, bias, 0.5, p)
            worst = max(worst, np.max(np.abs(layer_forward(layer, x, eps, basis)
                                             - dedicated(layer, x, eps, basis))))
    elapsed = time.perf_counter() - start
    passed = worst <= 1e-12 and elapsed < 5
    acceptance_report(1, passed, f"max deviation {worst:.3g} (<= 1e-12), {elapsed:.2f}s (< 5s)")
    assert passed


# --- 2 ----------------------------------------------------------------------

POINTS_PER_P = 10


def _gradient_errors(p, smoothing):
    """Max relative error over random points; points with small observed errors are skipped."""
    worst, used = 0.0, 0
    for k in range(POINTS_PER_P):
        rng = np.random.default_rng(1000 * int(round(p * 10)) + k)
        basis = gft_basis(laplacian(random_connected_graph(5, seed=k)))
        net = random_net(basis, rng, n_layers=2, p=p, smoothing=1e-6)
        net = type(net)(net.layers, basis, net.learning_rate, smoothing)
        mask = SamplingMask(5, tuple(sorted(rng.choice(5, 4, replace=False))))
        x, y = rng.normal(size=5), rng.normal(size=5) * 2
        _, caches = network_forward(net, x, y, mask)
        obs = list(mask.observed)
        if any(np.any(np.abs(c.eps[obs]) <= 10 * 1e-6) for c in caches):
            continue
        used += 1
        _, _, g_theta, g_bias = loss_and_gradients(net, x, y, mask)
        fd_theta, fd_bias = finite_difference(net, x, y, mask, h=1e-5)
        for a, f in zip(g_theta + g_bias, fd_theta + fd_bias):
            scale = np.maximum(np.abs(a), np.abs(f))
            # entries where both are zero (no path to an observed node) have no relative error
            rel = np.where(scale > 1e-12, np.abs(a - f) / np.where(scale > 0, scale, 1), 0.0)
            worst = max(worst, float(rel.max()))
    return worst, used


def test_criterion_2_gradient_correctness(acceptance_report):
    start = time.perf_counter()
    results = {p: _gradient_errors(p, 1e-6) for p in (1.2, 1.5, 2.0)}
    elapsed = time.perf_counter() - start
    worst = max(w for w, _ in results.values())
    passed = worst <= 1e-4 and elapsed < 10
    detail = ", ".join(f"p={p}: {w:.2g} over {n} pts" for p, (w, n) in results.items())
    # diagnostic only: the same points with a vanishing smoothing constant
    diag = max(_gradient_errors(p, 1e-12)[0] for p in (1.2, 1.5))
    acceptance_report(2, passed, f"max rel error {detail} (<= 1e-4), {elapsed:.2f}s (< 10s); "
                                 f"with delta_grad=1e-12: {diag:.2g}")
    assert passed


# --- 3 ----------------------------------------------------------------------

def test_criterion_3_noise_fidelity(acceptance_report):
    start = time.perf_counter()
    n = 100_000
    checks = {}
    var = np.var(sample(NoiseSpec("sas", scale=0.1, alpha=2.0), 1_000_000, 301))
    checks["sas(2) variance"] = abs(var / 0.2 - 1) <= 0.02
    crit = ks_critical(n, n)
    cauchy = sample(NoiseSpec("cauchy", scale=1.0), n, 302)
    d1 = stats.ks_2samp(sample(NoiseSpec("sas", scale=1.0, alpha=1.0), n, 303), cauchy).statistic
    d2 = stats.ks_2samp(sample(NoiseSpec("student_t", scale=1.0, nu=1.0), n, 304),
                        cauchy).statistic
    checks["sas(1) vs cauchy"] = d1 < crit
    checks["t(1) vs cauchy"] = d2 < crit
    pvals = {}
    for i, spec in enumerate((NoiseSpec("laplace", scale=3.0), NoiseSpec("gaussian", scale=1.0),
                              NoiseSpec("cauchy", scale=0.1))):
        res = stats.kstest(sample(spec, n, 310 + i), lambda t, s=spec: cdf(s, t))
        pvals[spec.family] = res.pvalue
        checks[f"{spec.family} cdf"] = res.pvalue > 0.01
    elapsed = time.perf_counter() - start
    passed = all(checks.values()) and elapsed < 30
    acceptance_report(3, passed,
                      f"var {var:.4f} (0.2 +- 2%), KS {d1:.4f}/{d2:.4f} (< {crit:.4f}), "
                      "cdf p-values " + ", ".join(f"{k} {v:.3f}" for k, v in pvals.items())
                      + f" (> 0.01), {elapsed:.2f}s (< 30s)")
    assert passed


# --- 4 ----------------------------------------------------------------------

def test_criterion_4_bandlimited_invariance(acceptance_report):
    basis = gft_basis(laplacian(random_connected_graph(30, seed=44, density=0.2)))
    rng = np.random.default_rng(44)
    band = SpectralFilter.from_band(30, sorted(rng.choice(30, 10, replace=False)))
    mask = SamplingMask(30, tuple(rng.choice(30, 18, replace=False)))
    x0 = apply_spectral_filter(basis, band, rng.normal(size=30) * 3)
    obs = [(rng.normal(size=30) + 0.1 * rng.standard_cauchy(30), mask) for _ in range(100)]
    worst = {}
    for method in ("glms", "glmp", "gsign"):
        est = run_online(AdaptiveFilterConfig(method, 0.2, band, p=1.5), x0, obs, basis)
        worst[method] = max(float(np.max(np.abs(apply_spectral_filter(basis, band, row) - row)))
                            for row in est)
    passed = max(worst.values()) <= 1e-8
    acceptance_report(4, passed, "max |B x - x| " + ", ".join(
        f"{m} {w:.2g}" for m, w in worst.items()) + " (<= 1e-8)")
    assert passed


# --- 5 and 6 ------------------------------------------------------------------

SYNTH_T, SYNTH_PREFIX, SYNTH_REPS = 100, 25, 20
GNN_ETA = 1e-4


def synthetic_spec(noise, methods):
    ds = make_drifting_bandlimited(n_nodes=50, n_timesteps=SYNTH_T, band=8, seed=0)
    return ExperimentSpec(ds, noise, observed_count=30, train_prefix=SYNTH_PREFIX,
                          methods=tuple(methods), repetitions=SYNTH_REPS, base_seed=1,
                          band_size=8)


def steady_state(table):
    """Per-repetition mean MSE over the second half of the test segment; diverged runs are +inf."""
    out = {}
    for m in table.methods:
        mse = table.mse[m]
        vals = mse[:, mse.shape[1] // 2:].mean(axis=1)
        out[m] = np.where(table.diverged[m], np.inf, vals)
    return out


def raw_observation_mse(spec):
    """Per-repetition steady-state MSE of y against ground truth on observed nodes."""
    mask = experiment_mask(spec)
    obs_idx = list(mask.observed)
    t_test = spec.dataset.n_timesteps - spec.train_prefix
    start = spec.train_prefix + t_test // 2
    out = []
    for r in range(spec.repetitions):
        obs = repetition_observations(spec, mask, r)
        y = np.array([o[0] for o in obs[start:]])
        out.append(np.mean((y[:, obs_idx] - spec.dataset.signals[start:, obs_idx]) ** 2))
    return np.array(out)


def test_criterion_5_synthetic_tracking(acceptance_report):
    start = time.perf_counter()
    spec = synthetic_spec(NoiseSpec("sas", scale=0.1, alpha=1.5),
                          [MethodSpec("lmp_gnn", p=1.2, mu=0.5, eta=GNN_ETA),
                           MethodSpec("glms", mu=0.5)])
    ss = steady_state(run_experiment(spec, jobs=1))
    raw = raw_observation_mse(spec)
    elapsed = time.perf_counter() - start
    lmp, glms, raw_med = (float(np.median(v)) for v in (ss["lmp_gnn"], ss["glms"], raw))
    passed = lmp < raw_med and lmp < glms and elapsed < 60
    acceptance_report(5, passed, f"median steady-state MSE lmp_gnn {lmp:.4f} < raw {raw_med:.4g}"
                                 f" and < glms {glms:.4f}, {elapsed:.1f}s (< 60s)")
    assert passed


def test_criterion_6_cauchy_ordering(acceptance_report):
    spec = synthetic_spec(NoiseSpec("cauchy", scale=0.1),
                          [MethodSpec("lmp_gnn", p=1.2, mu=0.5, eta=GNN_ETA),
                           MethodSpec("sign_gnn", mu=0.1, eta=GNN_ETA),
                           MethodSpec("lms_gnn", mu=0.5, eta=GNN_ETA)])
    ss = steady_state(run_experiment(spec, jobs=1))
    med = {m: float(np.median(v)) for m, v in ss.items()}
    frac_sign = float(np.mean(ss["sign_gnn"] < ss["lms_gnn"]))
    frac_lmp = float(np.mean(ss["lmp_gnn"] < ss["lms_gnn"]))
    passed = (med["sign_gnn"] < med["lms_gnn"] and med["lmp_gnn"] < med["lms_gnn"]
              and frac_sign >= 0.8 and frac_lmp >= 0.8)
    acceptance_report(6, passed, "median " + ", ".join(f"{m} {v:.4f}" for m, v in med.items())
                      + f"; sign<lms in {frac_sign:.0%}, lmp<lms in {frac_lmp:.0%} (>= 80%)")
    assert passed


# --- 7 ----------------------------------------------------------------------

@pytest.mark.skipif(not os.environ.get(DATA_ENV),
                    reason=f"set {DATA_ENV} to a directory with temperature.csv and stations.csv")
def test_criterion_7_temperature_ranking(acceptance_report):
    root = Path(os.environ[DATA_ENV])
    ds = load_dataset(root / "temperature.csv", {"coords": root / "stations.csv", "k": 7},
                      name="temperature")
    methods = [MethodSpec("lmp_gnn", p=1.2, mu=0.1, eta=GNN_ETA),
               MethodSpec("sign_gnn", mu=0.1, eta=GNN_ETA),
               MethodSpec("lms_gnn", mu=0.1, eta=GNN_ETA),
               MethodSpec("glms", mu=0.1), MethodSpec("gnlms", mu=0.1),
               MethodSpec("glmp", p=1.2, mu=0.1), MethodSpec("gnlmp", p=1.2, mu=0.1),
               MethodSpec("gsign", mu=0.1)]
    start = time.perf_counter()
    ranks = {}
    for alpha in (1.2, 1.8):
        spec = ExperimentSpec(ds, NoiseSpec("sas", scale=0.1, alpha=alpha), observed_count=130,
                              train_prefix=24, methods=tuple(methods), repetitions=100,
                              base_seed=7, band_size=120)
        table = run_experiment(spec, jobs=os.cpu_count() or 1)
        order = sorted(table.methods, key=lambda m: (np.isnan(table.mean_mse(m)),
                                                     table.mean_mse(m)))
        ranks[alpha] = (order.index("lmp_gnn") + 1, table.mean_mse("lmp_gnn"))
    elapsed = time.perf_counter() - start
    passed = all(r <= 2 for r, _ in ranks.values()) and elapsed < 600
    acceptance_report(7, passed, ", ".join(f"alpha {a}: lmp_gnn rank {r} (MSE {v:.3f})"
                                           for a, (r, v) in ranks.items())
                      + f", {elapsed:.0f}s (< 600s)")
    assert passed
