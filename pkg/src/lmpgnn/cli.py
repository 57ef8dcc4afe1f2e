"""Command-line interface: ``lmpgnn {build-graph,design-filter,run,report,plot}``.

Exit codes: 0 success, 2 input error, 3 config error, 4 numerical error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from ._validation import DivergenceError
from .datasets import DatasetError, read_signals
from .experiment import read_results, run_experiment, write_results
from .graph import (GraphError, build_knn_graph, gft_basis, laplacian, read_coordinates,
                    read_edge_list, spectral_energy, select_band, write_edge_list)

OUTPUT_ENV = "LMPGNN_OUTPUT_DIR"
EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 2, 3, 4

log = logging.getLogger("lmpgnn")


class InputError(Exception):
    pass


def _require_file(path):
    if not Path(path).is_file():
        raise InputError(f"file not found: {path}")
    return path


def cmd_build_graph(args):
    coords = read_coordinates(_require_file(args.coords))
    g = build_knn_graph(coords, args.k, args.bandwidth)
    write_edge_list(g, args.out)
    print(f"nodes: {g.n_nodes}")
    print(f"edges: {g.n_edges}")
    return 0


def _graph_from_args(args, n_nodes):
    if args.edges:
        return read_edge_list(_require_file(args.edges), n_nodes=n_nodes)
    if args.coords:
        return build_knn_graph(read_coordinates(_require_file(args.coords)), args.k,
                               args.bandwidth)
    raise InputError("either --edges or --coords is required")


def cmd_design_filter(args):
    signals = read_signals(_require_file(args.signals), header=args.header)
    graph = _graph_from_args(args, signals.shape[1])
    if graph.n_nodes != signals.shape[1]:
        raise InputError(f"graph has {graph.n_nodes} nodes, signals have {signals.shape[1]}")
    basis = gft_basis(laplacian(graph))
    prefix = signals[:args.train_prefix] if args.train_prefix else signals
    energy = spectral_energy(prefix, basis)
    filt = select_band(energy, args.band_size)
    with open(args.out, "w") as fh:
        fh.write("frequency,eigenvalue,energy,keep\n")
        for k, (lam, e, keep) in enumerate(zip(basis.eigenvalues, energy, filt.response)):
            fh.write(f"{k},{lam:.17g},{e:.17g},{int(keep)}\n")
    print(f"kept {len(filt.band)} of {basis.n_nodes} frequencies")
    return 0


def format_summary(rows):
    lines = [f"{'method':<16} {'mean_mse':>12} {'std_mse':>12} {'diverged':>9}"]
    for r in rows:
        lines.append(f"{r['method']:<16} {r['mean_mse']:>12.6g} {r['std_mse']:>12.6g} "
                     f"{r['diverged']:>9d}")
    return "\n".join(lines)


def cmd_run(args):
    raw = cfg.load_config(_require_file(args.config), args.override)
    spec = cfg.build_spec(raw)
    out = Path(args.output_dir or os.environ.get(OUTPUT_ENV, "results")) / spec.name
    jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
    table = run_experiment(spec, jobs=jobs)
    write_results(table, out)
    print(f"results: {out}")
    print(format_summary(table.summary()))
    return 0


def cmd_report(args):
    if not Path(args.results_dir).is_dir():
        raise InputError(f"results directory not found: {args.results_dir}")
    table = read_results(args.results_dir)
    print(format_summary(table.summary()))
    return 0


def cmd_plot(args):
    if not Path(args.results_dir).is_dir():
        raise InputError(f"results directory not found: {args.results_dir}")
    try:
        table = read_results(args.results_dir)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from None
    from .plotting import plot_mse, plot_trace
    plot_mse(table, args.out, log_scale=args.log_scale)
    print(f"wrote {args.out}")
    if args.node_trace:
        plot_trace(table, args.node_trace)
        print(f"wrote {args.node_trace}")
    return 0


def _add_graph_args(p, required=False):
    p.add_argument("--coords", help="station CSV 'node_id,lat,lon'")
    p.add_argument("--k", type=int, default=7, help="neighbours per node (default 7)")
    p.add_argument("--bandwidth", type=float, default=None,
                   help="Gaussian kernel width in km (default: mean k-NN distance)")


def build_parser():
    parser = argparse.ArgumentParser(prog="lmpgnn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-graph", help="k-NN Gaussian-kernel graph from coordinates")
    _add_graph_args(p)
    p.add_argument("--out", required=True, help="edge list to write ('i,j,weight')")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("design-filter", help="greedy bandlimited filter from training signals")
    p.add_argument("--signals", required=True, help="T x N CSV of graph signals")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.add_argument("--edges", help="edge list 'i,j,weight' (alternative to --coords)")
    _add_graph_args(p)
    p.add_argument("--train-prefix", type=int, default=0,
                   help="use only the first rows (default: all rows)")
    p.add_argument("--band-size", type=int, required=True, help="frequencies to keep")
    p.add_argument("--out", required=True, help="CSV 'frequency,eigenvalue,energy,keep'")
    p.set_defaults(func=cmd_design_filter)

    p = sub.add_parser("run", help="run an experiment from a config file",
                       description="Run an experiment.\n" + (cfg.__doc__ or ""),
                       epilog=_config_keys_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("config", help="YAML experiment config")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key, e.g. noise.alpha=1.4 or methods.0.mu=0.2")
    p.add_argument("--output-dir", help=f"results root (default ${OUTPUT_ENV} or ./results)")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes (default: available cores)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="print the summary of a results directory")
    p.add_argument("results_dir")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("plot", help="plot MSE[t] per method as SVG")
    p.add_argument("results_dir")
    p.add_argument("--out", required=True, help="output SVG for the MSE curves")
    p.add_argument("--log-scale", action="store_true", help="logarithmic MSE axis")
    p.add_argument("--node-trace", help="also write prediction vs truth at the traced node")
    p.set_defaults(func=cmd_plot)
    return parser


def _config_keys_help():
    def fmt(title, schema):
        return f"{title}: " + ", ".join(f"{k} ({cfg._typename(t)})" for k, t in schema.items())
    return "\n".join(["config keys:",
                      fmt("  top level", cfg.TOP_KEYS),
                      fmt("  dataset", cfg.DATASET_KEYS),
                      fmt("  dataset.synthetic", cfg.SYNTHETIC_KEYS),
                      fmt("  noise", cfg.NOISE_KEYS),
                      fmt("  methods[i]", cfg.METHOD_KEYS)])


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, FileNotFoundError, DatasetError, GraphError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DivergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
