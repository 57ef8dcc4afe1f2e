"""Robust online estimation of time-varying graph signals.

The package combines graph adaptive filters (GLMS, GNLMS, GLMP, GNLMP,
G-Sign) with least-mean-p-th-power graph neural networks whose spectral
filters are learned online.
"""
from ._lp import lp_error_transform
from ._validation import DivergenceError
from .adaptive import AdaptiveFilterConfig, FilterState, GraphAdaptiveFilter
from .datasets import Dataset, load_dataset, make_drifting_bandlimited
from .experiment import ExperimentSpec, MethodSpec, ResultTable, run_experiment
from .gnn import LMPGNN, LmpGnnLayer, LmpGnnNetwork
from .graph import (GftBasis, Graph, SamplingMask, SpectralFilter, build_knn_graph,
                    gft_basis, laplacian)
from .noise import NoiseSpec

__version__ = "0.1.0"

__all__ = ["AdaptiveFilterConfig", "Dataset", "DivergenceError", "ExperimentSpec",
           "FilterState", "GftBasis", "Graph", "GraphAdaptiveFilter", "LMPGNN", "LmpGnnLayer",
           "LmpGnnNetwork", "MethodSpec", "NoiseSpec", "ResultTable", "SamplingMask",
           "SpectralFilter", "build_knn_graph", "gft_basis", "laplacian", "load_dataset",
           "lp_error_transform", "make_drifting_bandlimited", "run_experiment"]
