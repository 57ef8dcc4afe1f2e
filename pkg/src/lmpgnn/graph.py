"""Graph construction, Laplacian spectrum and spectral filtering.

All containers are frozen dataclasses holding read-only numpy arrays, so a
basis computed once per graph can be shared freely between estimators,
repetitions and worker processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_signal, check_square, check_symmetric

EARTH_RADIUS_KM = 6371.0088


class GraphError(ValueError):
    """Invalid graph parameters or degenerate geometry."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph stored as a dense adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        a = check_square(self.adjacency, "adjacency")
        check_symmetric(a, "adjacency", atol=1e-12)
        if np.any(a < 0):
            raise GraphError("adjacency weights must be nonnegative")
        if np.any(np.diag(a) != 0):
            raise GraphError("adjacency diagonal must be exactly zero")
        # average the two triangles so downstream symmetry is exact
        object.__setattr__(self, "adjacency", _frozen(0.5 * (a + a.T)))

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    def edges(self):
        """Yield ``(i, j, weight)`` with ``i < j`` in row-major order."""
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        for i, j in zip(iu, ju):
            yield int(i), int(j), float(self.adjacency[i, j])


@dataclass(frozen=True)
class GftBasis:
    """Laplacian eigenpairs; ``eigenvectors[:, k]`` pairs with ``eigenvalues[k]``."""

    eigenvectors: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        u = check_square(self.eigenvectors, "eigenvectors")
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.shape != (u.shape[0],):
            raise ValueError("eigenvalues must have one entry per eigenvector")
        object.__setattr__(self, "eigenvectors", _frozen(u))
        object.__setattr__(self, "eigenvalues", _frozen(lam))

    @property
    def n_nodes(self) -> int:
        return self.eigenvectors.shape[0]


@dataclass(frozen=True)
class SamplingMask:
    """Set of observed node indices (0-based) out of ``n_nodes``."""

    n_nodes: int
    observed: tuple = field(default=())

    def __post_init__(self):
        idx = sorted({int(i) for i in self.observed})
        if idx and (idx[0] < 0 or idx[-1] >= self.n_nodes):
            raise ValueError(
                f"observed indices must lie in [0, {self.n_nodes}), got {idx}")
        object.__setattr__(self, "observed", tuple(idx))

    @classmethod
    def full(cls, n_nodes):
        return cls(n_nodes, tuple(range(n_nodes)))

    @classmethod
    def from_indicator(cls, indicator):
        indicator = np.asarray(indicator)
        return cls(indicator.shape[0], tuple(np.flatnonzero(indicator)))

    @property
    def as_diagonal(self) -> np.ndarray:
        d = np.zeros(self.n_nodes)
        d[list(self.observed)] = 1.0
        return d

    def __len__(self):
        return len(self.observed)


@dataclass(frozen=True)
class SpectralFilter:
    """Diagonal spectral response applied between ``U^T`` and ``U``."""

    response: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.response, dtype=float)
        if r.ndim != 1:
            raise ValueError("response must be one-dimensional")
        object.__setattr__(self, "response", _frozen(r))

    @classmethod
    def from_band(cls, n_nodes, band):
        r = np.zeros(n_nodes)
        r[list(band)] = 1.0
        return cls(r)

    @property
    def is_bandlimited(self) -> bool:
        return bool(np.all((self.response == 0) | (self.response == 1)))

    @property
    def band(self) -> tuple:
        return tuple(int(k) for k in np.flatnonzero(self.response))

    def operator(self, basis: GftBasis) -> np.ndarray:
        """Dense ``U diag(response) U^T``."""
        u = basis.eigenvectors
        if self.response.shape[0] != u.shape[0]:
            raise ValueError(
                f"filter has {self.response.shape[0]} taps but basis has "
                f"{u.shape[0]} nodes")
        return (u * self.response) @ u.T


def haversine_km(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def pairwise_haversine(coords):
    coords = np.asarray(coords, dtype=float)
    lat, lon = coords[:, 0], coords[:, 1]
    return haversine_km(lat[:, None], lon[:, None], lat[None, :], lon[None, :])


def build_knn_graph(coords, k=7, kernel_bandwidth=None) -> Graph:
    """k-nearest-neighbour graph with Gaussian kernel weights.

    Parameters
    ----------
    coords : array of shape (N, 2)
        Latitude and longitude in degrees.
    k : int
        Number of neighbours per node before symmetrisation.
    kernel_bandwidth : float, optional
        Kernel width in kilometres. Defaults to the mean distance from each
        node to its k nearest neighbours.

    Notes
    -----
    Weights are ``exp(-d**2 / (2 * bandwidth**2))`` with ``d`` the
    great-circle distance. Directed k-NN edges are merged by taking the
    union and keeping the larger weight.
    """
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise GraphError("coords must have shape (N, 2)")
    n = coords.shape[0]
    if n < 2:
        raise GraphError("need at least two nodes")
    if not 1 <= k < n:
        raise GraphError(f"k must satisfy 1 <= k < N={n}, got {k}")
    dist = pairwise_haversine(coords)
    np.fill_diagonal(dist, np.inf)
    if np.any(dist == 0):
        i, j = np.argwhere(dist == 0)[0]
        raise GraphError(f"duplicate coordinates at nodes {i} and {j}")
    # stable sort: ties resolved by lower node index
    nbrs = np.argsort(dist, axis=1, kind="stable")[:, :k]
    rows = np.repeat(np.arange(n), k)
    cols = nbrs.ravel()
    d = dist[rows, cols]
    if kernel_bandwidth is None:
        kernel_bandwidth = float(d.mean())
    if not kernel_bandwidth > 0:
        raise GraphError("kernel_bandwidth must be positive")
    a = np.zeros((n, n))
    a[rows, cols] = gaussian_kernel(d, kernel_bandwidth)
    return Graph(np.maximum(a, a.T))


def gaussian_kernel(d, bandwidth):
    return np.exp(-np.asarray(d, dtype=float) ** 2 / (2.0 * bandwidth ** 2))


def laplacian(g: Graph) -> np.ndarray:
    a = g.adjacency
    return np.diag(a.sum(axis=1)) - a


def gft_basis(lap) -> GftBasis:
    """Eigendecomposition of a symmetric Laplacian with a fixed sign convention.

    Each eigenvector is flipped so that its largest-magnitude entry is
    positive; among equal magnitudes the lowest index decides.
    """
    lap = check_square(lap, "laplacian")
    check_symmetric(lap, "laplacian", atol=1e-10)
    lam, u = np.linalg.eigh(0.5 * (lap + lap.T))
    # argmax returns the first maximiser, which gives the lowest-index tie rule
    pivot = np.argmax(np.round(np.abs(u), 12), axis=0)
    signs = np.sign(u[pivot, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return GftBasis(u * signs, lam)


def forward_gft(basis: GftBasis, x) -> np.ndarray:
    x = check_signal(x, basis.n_nodes)
    return basis.eigenvectors.T @ x


def inverse_gft(basis: GftBasis, s) -> np.ndarray:
    s = check_signal(s, basis.n_nodes, name="spectrum")
    return basis.eigenvectors @ s


def apply_spectral_filter(basis: GftBasis, filt: SpectralFilter, x) -> np.ndarray:
    x = check_signal(x, basis.n_nodes)
    if filt.response.shape[0] != basis.n_nodes:
        raise ValueError("filter and basis dimensions differ")
    u = basis.eigenvectors
    return u @ (filt.response * (u.T @ x))


def spectral_energy(training_signals, basis: GftBasis) -> np.ndarray:
    """Mean squared GFT coefficient per frequency over the rows of a T x N matrix."""
    x = np.atleast_2d(np.asarray(training_signals, dtype=float))
    if x.shape[1] != basis.n_nodes:
        raise ValueError(
            f"training signals have {x.shape[1]} columns, expected {basis.n_nodes}")
    return np.mean((x @ basis.eigenvectors) ** 2, axis=0)


def select_band(energy, band_size) -> SpectralFilter:
    """Binary filter keeping the ``band_size`` largest energies (ties: lower index)."""
    energy = np.asarray(energy, dtype=float)
    n = energy.shape[0]
    if not 0 <= band_size <= n:
        raise GraphError(f"band_size must be in [0, {n}], got {band_size}")
    order = np.argsort(-energy, kind="stable")
    return SpectralFilter.from_band(n, order[:band_size])


def greedy_bandlimit(training_signals, basis: GftBasis, band_size) -> SpectralFilter:
    """Keep the frequencies carrying the most training-set energy."""
    x = np.atleast_2d(np.asarray(training_signals, dtype=float))
    if x.shape[0] < 1:
        raise GraphError("need at least one training signal")
    return select_band(spectral_energy(x, basis), band_size)


def apply_mask(mask: SamplingMask, x) -> np.ndarray:
    x = check_signal(x, mask.n_nodes)
    return x * mask.as_diagonal


# --- file formats -----------------------------------------------------------

def write_edge_list(g: Graph, path):
    """Write ``i,j,weight`` lines, each undirected edge once with ``i < j``."""
    lines = [f"{i},{j},{w:.17g}\n" for i, j, w in g.edges()]
    Path(path).write_text("".join(lines))


def read_edge_list(path, n_nodes=None) -> Graph:
    """Read an ``i,j,weight`` edge list (0-based, one undirected edge per line).

    Blank lines and lines starting with ``#`` are skipped. ``n_nodes``
    defaults to one past the largest index seen.
    """
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) not in (2, 3):
                raise GraphError(f"{path}:{lineno}: expected 'i,j,weight'")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise GraphError(f"{path}:{lineno}: {exc}") from None
            if i == j or i < 0 or j < 0 or w < 0:
                raise GraphError(f"{path}:{lineno}: invalid edge {line!r}")
            edges.append((i, j, w))
    top = max((max(i, j) for i, j, _ in edges), default=-1) + 1
    n = top if n_nodes is None else int(n_nodes)
    if top > n:
        raise GraphError(f"{path}: node index {top - 1} exceeds n_nodes={n}")
    a = np.zeros((n, n))
    for i, j, w in edges:
        a[i, j] = a[j, i] = w
    return Graph(a)


def read_coordinates(path) -> np.ndarray:
    """Read ``node_id,lat,lon`` rows; returns coordinates ordered by node id.

    A first line whose fields are not numeric is treated as a header.
    """
    rows = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise GraphError(f"{path}:{lineno}: expected 'node_id,lat,lon'")
            try:
                node, lat, lon = int(parts[0]), float(parts[1]), float(parts[2])
            except ValueError:
                if lineno == 1:
                    continue
                raise GraphError(f"{path}:{lineno}: non-numeric field") from None
            if node in rows:
                raise GraphError(f"{path}:{lineno}: duplicate node id {node}")
            rows[node] = (lat, lon)
    if sorted(rows) != list(range(len(rows))):
        raise GraphError(f"{path}: node ids must be 0..N-1")
    return np.array([rows[i] for i in range(len(rows))], dtype=float).reshape(-1, 2)
