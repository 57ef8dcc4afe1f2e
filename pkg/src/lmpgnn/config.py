"""Experiment configuration files.

A config is a YAML mapping::

    name: temperature_sas
    dataset:
      signals: data/temperature.csv     # T rows x N columns
      header: false
      coords: data/stations.csv         # or ``edges: graph.csv``
      k: 7
      bandwidth: null                   # km; null = mean k-NN distance
    noise: {family: sas, location: 0.0, scale: 0.1, alpha: 1.2}
    observed_count: 130
    train_prefix: 24
    band_size: 120
    repetitions: 100
    base_seed: 0
    methods:
      - {method: lmp_gnn, p: 1.5, mu: 0.5, eta: 0.001}
      - {method: gsign, mu: 0.1}

``dataset`` may instead hold ``synthetic: {n_nodes, n_timesteps, band,
seed, amplitude, drift, offset}``. Relative paths resolve against the
config file's directory.
"""
from __future__ import annotations

import copy
from pathlib import Path

import yaml

from .datasets import Dataset, load_dataset, make_drifting_bandlimited
from .experiment import ALL_METHODS, ExperimentSpec, MethodSpec
from .noise import NoiseSpec


class ConfigError(ValueError):
    pass


_NUM = (int, float)
TOP_KEYS = {"name": str, "dataset": dict, "noise": dict, "observed_count": int,
            "train_prefix": int, "band_size": (int, type(None)), "repetitions": int,
            "base_seed": int, "trace_node": int, "methods": list}
REQUIRED = ("dataset", "noise", "observed_count", "train_prefix", "methods")
DATASET_KEYS = {"signals": str, "header": bool, "edges": str, "coords": str, "k": int,
                "bandwidth": (int, float, type(None)), "synthetic": dict, "name": str}
SYNTHETIC_KEYS = {"n_nodes": int, "n_timesteps": int, "band": int, "seed": int,
                  "amplitude": _NUM, "drift": _NUM, "offset": _NUM}
NOISE_KEYS = {"family": str, "location": _NUM, "scale": _NUM, "alpha": _NUM, "nu": _NUM}
METHOD_KEYS = {"method": str, "name": str, "mu": _NUM, "p": _NUM,
               "band_size": (int, type(None)), "norm_floor": _NUM, "forgetting": _NUM,
               "eta": _NUM, "layers": int, "activation": str, "slope": _NUM,
               "pretrain_epochs": int, "delta_grad": _NUM, "stop_gradient": bool}


def _typename(t):
    if isinstance(t, tuple):
        return " or ".join(_typename(x) for x in t)
    return {type(None): "null", int: "integer", float: "number", str: "string",
            bool: "boolean", dict: "mapping", list: "list"}[t]


def _check(section, schema, where):
    if not isinstance(section, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping")
    for key, value in section.items():
        path = f"{where}.{key}" if where else key
        if key not in schema:
            raise ConfigError(f"unknown config key {path!r}")
        expected = schema[key]
        types = expected if isinstance(expected, tuple) else (expected,)
        # bool is an int subclass; do not let true/false pass as numbers
        ok = isinstance(value, types) and not (isinstance(value, bool) and bool not in types)
        if not ok:
            raise ConfigError(
                f"config key {path!r} must be {_typename(expected)}, got {value!r}")


def validate(raw: dict) -> dict:
    _check(raw, TOP_KEYS, "")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required config key {key!r}")
    _check(raw["dataset"], DATASET_KEYS, "dataset")
    if "synthetic" in raw["dataset"]:
        _check(raw["dataset"]["synthetic"], SYNTHETIC_KEYS, "dataset.synthetic")
    elif "signals" not in raw["dataset"]:
        raise ConfigError("dataset needs 'signals' (plus 'edges' or 'coords') or 'synthetic'")
    elif not ({"edges", "coords"} & set(raw["dataset"])):
        raise ConfigError("dataset needs either 'edges' or 'coords'")
    _check(raw["noise"], NOISE_KEYS, "noise")
    if not raw["methods"]:
        raise ConfigError("config key 'methods' must list at least one method")
    for i, m in enumerate(raw["methods"]):
        _check(m, METHOD_KEYS, f"methods.{i}")
        if m.get("method") not in ALL_METHODS:
            raise ConfigError(f"config key 'methods.{i}.method' must be one of {ALL_METHODS}")
    return raw


def apply_override(raw: dict, item: str) -> dict:
    """Apply ``dotted.key=value``; list entries are addressed by index (``methods.0.mu``)."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value")
    key, text = item.split("=", 1)
    value = yaml.safe_load(text)
    if isinstance(value, str):
        # YAML 1.1 reads "1e-4" as a string
        try:
            value = float(value)
        except ValueError:
            pass
    parts = key.strip().split(".")
    node = raw
    for i, part in enumerate(parts[:-1]):
        here = ".".join(parts[:i + 1])
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError(f"override key {here!r} is not a valid list index") from None
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
        else:
            raise ConfigError(f"override key {here!r} does not name a section")
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError):
            raise ConfigError(f"override key {key!r} is not a valid list index") from None
    else:
        node[last] = value
    return raw


def load_config(path, overrides=()) -> dict:
    path = Path(path)
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    raw = copy.deepcopy(raw)
    for item in overrides:
        apply_override(raw, item)
    raw = validate(raw)
    raw["_base_dir"] = str(path.parent.resolve())
    return raw


def _resolve(base, p):
    p = Path(p)
    return p if p.is_absolute() else Path(base) / p


def build_dataset(ds: dict, base_dir=".") -> Dataset:
    if "synthetic" in ds:
        return make_drifting_bandlimited(**ds["synthetic"])
    signals = _resolve(base_dir, ds["signals"])
    if "edges" in ds:
        source = _resolve(base_dir, ds["edges"])
    else:
        source = {"coords": _resolve(base_dir, ds["coords"]), "k": ds.get("k", 7),
                  "bandwidth": ds.get("bandwidth")}
    return load_dataset(signals, source, header=ds.get("header", False),
                        name=ds.get("name", Path(signals).stem))


def build_spec(raw: dict) -> ExperimentSpec:
    """Turn a validated config into an :class:`ExperimentSpec`."""
    try:
        noise = NoiseSpec(**raw["noise"])
        methods = tuple(MethodSpec(**m) for m in raw["methods"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    dataset = build_dataset(raw["dataset"], raw.get("_base_dir", "."))
    try:
        return ExperimentSpec(
            dataset=dataset, noise=noise, observed_count=raw["observed_count"],
            train_prefix=raw["train_prefix"], methods=methods,
            repetitions=raw.get("repetitions", 100), base_seed=raw.get("base_seed", 0),
            band_size=raw.get("band_size"), name=raw.get("name", "experiment"),
            trace_node=raw.get("trace_node", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
