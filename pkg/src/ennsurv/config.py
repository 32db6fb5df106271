"""Run configuration: one nested JSON document, every leaf overridable from the command line."""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .training import LossConfig, TrainConfig

DEFAULTS = {
    "seed": 0,
    "output": "out",
    "data": {
        "source": "simulate",  # or "csv"
        "path": None,
        "validation_path": None,
        "feature_columns": None,
        "duration_column": "duration",
        "event_column": "event",
        "nonpositive": "error",
        "val_fraction": 0.2,
    },
    "simulate": {
        "n_train": 4000,
        "n_val": 1000,
        "censor_prob": 0.1,
        "censor_interval": [-1.0, 0.0],
    },
    "model": {"K": 40},
    "loss": {"lam": 0.1, "epsilon": 1e-6, "xi": 0.1, "rho": 0.1},
    "train": {"learning_rate": 1e-3, "batch_size": 256, "max_epochs": 1000, "patience": 20},
    "eval": {"grid_points": 100, "bpi_levels": [0.5, 0.9, 0.99], "curve_mode": "midpoint"},
    "cv": {"k": 5, "repeats": 5, "workers": 1},
    "plot": {"points": 500, "x_min": -2.0, "x_max": 2.0},
}


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in tree.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, path + "."))
        else:
            out[path] = value
    return out


def set_path(tree: dict, path: str, value) -> None:
    *parents, leaf = path.split(".")
    node = tree
    for p in parents:
        node = node.setdefault(p, {})
    node[leaf] = value


def merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if key not in out:
            raise ValueError(f"unknown config key {key!r}")
        if isinstance(out[key], dict):
            if not isinstance(value, dict):
                raise ValueError(f"config key {key!r} must be a section")
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def load(path) -> dict:
    """Read a config file; a manifest written by a previous run is accepted too."""
    doc = json.loads(Path(path).read_text())
    if "config" in doc and "command" in doc:
        doc = doc["config"]
    return merge(DEFAULTS, doc)


def parse_value(text: str, default):
    if isinstance(default, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, list) or default is None:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            if default is None:
                return text
            raise ValueError(f"expected a JSON list, got {text!r}") from None
    return text


def loss_config(cfg: dict) -> LossConfig:
    return LossConfig(**cfg["loss"])


def train_config(cfg: dict, explicit: set = frozenset()) -> TrainConfig:
    t = dict(cfg["train"])
    # a short run should not trip over the default patience
    if "train.patience" not in explicit and t["patience"] > t["max_epochs"]:
        t["patience"] = t["max_epochs"]
    return TrainConfig(seed=cfg["seed"], **t)


def validate(cfg: dict) -> None:
    levels = cfg["eval"]["bpi_levels"]
    if not levels or any(not 0.0 <= a < 1.0 for a in levels):
        raise ValueError("BPI levels must lie in [0, 1)")
    if cfg["model"]["K"] < 1:
        raise ValueError("model.K must be positive")
    if cfg["data"]["source"] not in ("simulate", "csv"):
        raise ValueError("data.source must be 'simulate' or 'csv'")
    if not 0.0 < cfg["data"]["val_fraction"] < 1.0:
        raise ValueError("data.val_fraction must lie in (0, 1)")
    if cfg["cv"]["workers"] < 1:
        raise ValueError("cv.workers must be positive")
    if cfg["eval"]["grid_points"] < 2:
        raise ValueError("eval.grid_points must be at least 2")
    loss_config(cfg)


def dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
