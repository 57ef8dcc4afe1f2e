"""Datasets of time-varying graph signals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import (Graph, GraphError, build_knn_graph, gaussian_kernel, gft_basis,
                    laplacian, read_coordinates, read_edge_list)
from .noise import make_rng


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    signals: np.ndarray
    graph: Graph
    name: str = "dataset"

    def __post_init__(self):
        x = np.array(self.signals, dtype=float)
        if x.ndim != 2:
            raise DatasetError("signals must be a T x N matrix")
        if x.shape[0] < 2:
            raise DatasetError(f"need at least 2 timesteps, got {x.shape[0]}")
        if not np.all(np.isfinite(x)):
            raise DatasetError("signals contain non-finite values")
        if x.shape[1] != self.graph.n_nodes:
            raise DatasetError(
                f"signals have N={x.shape[1]} columns but the graph has {self.graph.n_nodes} nodes")
        x.setflags(write=False)
        object.__setattr__(self, "signals", x)

    @property
    def n_timesteps(self) -> int:
        return self.signals.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.signals.shape[1]


def read_signals(path, header=False) -> np.ndarray:
    """Read a T x N CSV of decimals; ragged or non-numeric rows name their line."""
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            try:
                row = [float(v) for v in line.split(",")]
            except ValueError as exc:
                raise DatasetError(f"{path}: row {lineno}: {exc}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(
                    f"{path}: row {lineno} has {len(row)} values, expected {width}")
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return np.array(rows)


def load_dataset(signals_path, graph_source, header=False, name=None) -> Dataset:
    """Load signals and attach a graph.

    ``graph_source`` is either a path to an ``i,j,weight`` edge list or a
    dict ``{"coords": path, "k": int, "bandwidth": float | None}``.
    """
    signals = read_signals(signals_path, header=header)
    n = signals.shape[1]
    if isinstance(graph_source, dict):
        coords = read_coordinates(graph_source["coords"])
        if coords.shape[0] != n:
            raise DatasetError(
                f"{graph_source['coords']} has {coords.shape[0]} stations, signals have {n} columns")
        graph = build_knn_graph(coords, graph_source.get("k", 7), graph_source.get("bandwidth"))
    else:
        graph = read_edge_list(graph_source, n_nodes=n)
    return Dataset(signals, graph, name or str(signals_path))


def random_geometric_graph(n_nodes, seed, radius=None, kernel_width=None) -> tuple[Graph, np.ndarray]:
    """Connected random geometric graph on the unit square.

    The radius grows from ``radius`` (default ``sqrt(2 log N / N)``) until
    the graph is connected. Edge weights use a Gaussian kernel.
    """
    rng = make_rng(seed)
    pts = rng.uniform(0.0, 1.0, (n_nodes, 2))
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    r = radius or np.sqrt(2.0 * np.log(n_nodes) / n_nodes)
    for _ in range(100):
        adj = np.where((d <= r) & (d > 0), gaussian_kernel(d, kernel_width or r / 2), 0.0)
        g = Graph(adj)
        lam = np.linalg.eigvalsh(laplacian(g))
        if lam[1] > 1e-9:
            return g, pts
        r *= 1.1
    raise GraphError("could not build a connected random geometric graph")


def make_drifting_bandlimited(n_nodes=50, n_timesteps=120, band=8, seed=0, amplitude=3.0,
                              drift=0.05, offset=0.0) -> Dataset:
    """Synthetic dataset of slowly varying bandlimited signals.

    Spectral coefficients on the ``band`` lowest frequencies follow
    ``c_k + a_k sin(2 pi t / P_k + phi_k)`` with long periods ``P_k`` plus
    a small random walk of step ``drift``. The constant component is
    shifted by ``offset`` so the signal need not be zero-mean.
    """
    graph, _ = random_geometric_graph(n_nodes, seed)
    basis = gft_basis(laplacian(graph))
    rng = make_rng(seed + 1)
    c = rng.normal(0.0, amplitude, band)
    c[0] += offset * np.sqrt(n_nodes)
    a = rng.uniform(0.2, 0.6, band) * np.abs(c)
    periods = rng.uniform(40.0, 120.0, band)
    phase = rng.uniform(0.0, 2 * np.pi, band)
    t = np.arange(n_timesteps)[:, None]
    walk = np.cumsum(rng.normal(0.0, drift, (n_timesteps, band)), axis=0)
    coef = c + a * np.sin(2 * np.pi * t / periods + phase) + walk
    signals = coef @ basis.eigenvectors[:, :band].T
    return Dataset(signals, graph, "synthetic")
