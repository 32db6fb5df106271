"""Command-line front end: simulate, train, cv, plotdata and eval.

Every command reads the nested JSON config (``--config``), applies dotted
overrides such as ``--train.max_epochs 50``, and writes a manifest beside its
outputs that can be fed back through ``--config`` to repeat the run.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat
from pathlib import Path

import numpy as np

from . import __version__
from . import config as config_mod
from .data import (
    FoldPlan,
    Standardizer,
    SurvivalData,
    load_csv,
    make_folds,
    regression_function,
    simulate,
    write_csv,
)
from .errors import DataError, DimensionMismatch, NumericError, SchemaMismatch, UnreachableLevel
from .grfn import bpi_radius
from .metrics import (
    MetricsReport,
    bpi_coverage,
    c_index_td,
    default_grid,
    ibll,
    ibs,
    survival_curves,
)
from .model import forward_batch, load_checkpoint, save_checkpoint
from .seeding import derive_rng
from .training import fit, write_history

log = logging.getLogger("ennsurv")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers

def _fmt(v) -> str:
    return repr(float(v))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, cfg: dict, files: list, extra: dict | None = None) -> None:
    doc = {
        "command": command,
        "version": __version__,
        "config": cfg,
        "files": {f: _sha256(out / f) for f in files},
    }
    if extra:
        doc.update(extra)
    (out / "manifest.json").write_text(config_mod.dumps(doc))


def _load_dataset(cfg: dict, path) -> SurvivalData:
    d = cfg["data"]
    if path is None:
        raise FileNotFoundError("data.path is not set")
    return load_csv(path, d["feature_columns"], d["duration_column"], d["event_column"], d["nonpositive"])


def _simulated(cfg: dict, stream: int, n: int) -> SurvivalData:
    s = cfg["simulate"]
    return simulate(n, s["censor_prob"], tuple(s["censor_interval"]), seed=cfg["seed"], stream=stream)


def _split(data: SurvivalData, fraction: float, seed: int, *extra):
    n = len(data)
    n_val = max(1, int(round(fraction * n)))
    if n - n_val < 1:
        raise DataError(f"{n} records are too few to hold out a validation split")
    perm = derive_rng(seed, "split", *extra).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train_val_data(cfg: dict):
    d = cfg["data"]
    if d["source"] == "simulate":
        return _simulated(cfg, 0, cfg["simulate"]["n_train"]), _simulated(cfg, 1, cfg["simulate"]["n_val"])
    data = _load_dataset(cfg, d["path"])
    if d["validation_path"]:
        val = _load_dataset(cfg, d["validation_path"])
        if val.x.shape[1] != data.x.shape[1]:
            raise SchemaMismatch("training and validation files have different feature counts")
        return data, val
    tr, va = _split(data, d["val_fraction"], cfg["seed"])
    return data.subset(tr), data.subset(va)


def _fit(cfg: dict, explicit: set, train: SurvivalData, val: SurvivalData):
    std = Standardizer.fit(train)
    K = cfg["model"]["K"]
    params, history = fit(
        (std.apply(train.x), train.y, train.d),
        (std.apply(val.x), val.y, val.d),
        K=K,
        loss_cfg=config_mod.loss_config(cfg),
        train_cfg=config_mod.train_config(cfg, explicit),
    )
    return params, std, history


def _bpi_bounds(out, levels):
    """Per level, (lo, hi) on the log scale; NaN where no finite interval reaches the level."""
    bounds = {}
    ok = out.h > 0
    for a in levels:
        r = np.full(out.mu.shape, np.nan)
        if ok.any():
            r[ok] = bpi_radius(out.mu[ok], out.sigma2[ok], out.h[ok], a)
        if a == 0:
            r[:] = 0.0
        bounds[a] = (out.mu - r, out.mu + r)
    return bounds


def _level_name(a: float) -> str:
    return f"{a:g}"


def write_predictions(path: Path, data: SurvivalData, out, levels) -> None:
    bounds = _bpi_bounds(out, levels)
    header = ["row", "duration", "event", "mu", "sigma2", "h"]
    for a in levels:
        n = _level_name(a)
        header += [f"bpi{n}_lo", f"bpi{n}_hi", f"bpi{n}_tlo", f"bpi{n}_thi"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        with np.errstate(over="ignore"):
            for i in range(len(data)):
                row = [i + 1, _fmt(data.t[i]), int(data.d[i]), _fmt(out.mu[i]), _fmt(out.sigma2[i]), _fmt(out.h[i])]
                for a in levels:
                    lo, hi = bounds[a][0][i], bounds[a][1][i]
                    row += [_fmt(lo), _fmt(hi), _fmt(np.exp(lo)), _fmt(np.exp(hi))]
                w.writerow(row)


def read_predictions(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path} has no predictions")
    for col in ("mu", "sigma2", "h"):
        if col not in rows[0]:
            raise SchemaMismatch(f"{path} lacks column {col!r}")
    return tuple(np.array([float(r[c]) for r in rows]) for c in ("mu", "sigma2", "h"))


def score(cfg: dict, mu, sigma2, h, data: SurvivalData) -> dict:
    """C_idx, IBS, IBLL and BPI coverage of the observed events."""
    ev = cfg["eval"]
    t, d = data.t, data.d
    cidx_grid = np.unique(t)
    scores = {"c_index": c_index_td(survival_curves(mu, sigma2, h, cidx_grid, ev["curve_mode"]), cidx_grid, t, d)}
    grid = default_grid(t, ev["grid_points"])
    curves = survival_curves(mu, sigma2, h, grid, ev["curve_mode"])
    scores["ibs"] = ibs(curves, grid, t, d)
    scores["ibll"] = ibll(curves, grid, t, d)
    events = d == 1
    if events.any():
        for a in ev["bpi_levels"]:
            try:
                scores[f"coverage_{_level_name(a)}"] = bpi_coverage(
                    mu[events], sigma2[events], h[events], data.y[events], a)
            except UnreachableLevel:
                scores[f"coverage_{_level_name(a)}"] = math.nan
    return scores


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg, explicit, args, out: Path):
    if cfg["data"]["source"] != "simulate":
        raise UsageError("simulate requires data.source = simulate")
    train, val = train_val_data(cfg)
    write_csv(out / "train.csv", train)
    write_csv(out / "val.csv", val)
    _write_manifest(out, "simulate", cfg, ["train.csv", "val.csv"],
                    {"rows": {"train.csv": len(train), "val.csv": len(val)},
                     "censoring_rate": {"train.csv": train.censoring_rate, "val.csv": val.censoring_rate}})
    log.info("wrote %d + %d simulated records to %s", len(train), len(val), out)


def cmd_train(cfg, explicit, args, out: Path):
    train, val = train_val_data(cfg)
    params, std, history = _fit(cfg, explicit, train, val)
    save_checkpoint(out / "checkpoint.json", params, std, cfg)
    write_history(out / "history.csv", history)
    pred = forward_batch(std.apply(val.x), params)
    write_predictions(out / "predictions.csv", val, pred, cfg["eval"]["bpi_levels"])
    _write_manifest(out, "train", cfg, ["checkpoint.json", "history.csv", "predictions.csv"],
                    {"epochs": len(history), "best_val_cost": min(r.val_cost for r in history)})
    log.info("trained %d epochs, best validation cost %.6f", len(history), min(r.val_cost for r in history))


def _cv_fold(cfg, explicit, data: SurvivalData, fold):
    inner_tr, inner_va = _split(data.subset(fold.train), cfg["data"]["val_fraction"], cfg["seed"],
                                fold.repeat, fold.fold)
    train_all = data.subset(fold.train)
    params, std, _ = _fit(cfg, explicit, train_all.subset(inner_tr), train_all.subset(inner_va))
    test = data.subset(fold.test)
    out = forward_batch(std.apply(test.x), params)
    return score(cfg, out.mu, out.sigma2, out.h, test)


def cmd_cv(cfg, explicit, args, out: Path):
    d = cfg["data"]
    if d["source"] == "simulate":
        data = _simulated(cfg, 0, cfg["simulate"]["n_train"])
    else:
        data = _load_dataset(cfg, d["path"])
    plan = FoldPlan(cfg["cv"]["k"], cfg["cv"]["repeats"], cfg["seed"])
    report = MetricsReport(meta={"rows": len(data), "censoring_rate": data.censoring_rate,
                                 "k": plan.k, "repeats": plan.repeats})
    folds = make_folds(len(data), plan)
    workers = cfg["cv"]["workers"]
    if workers > 1:
        # folds are independent; results are collected in fold order
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cv_fold, repeat(cfg), repeat(explicit), repeat(data), folds))
    else:
        results = [_cv_fold(cfg, explicit, data, fold) for fold in folds]
    for fold, scores in zip(folds, results):
        log.info("repeat %d fold %d: C_idx %.4f IBS %.4f IBLL %.4f", fold.repeat, fold.fold,
                 scores["c_index"], scores["ibs"], scores["ibll"])
        report.add(fold.repeat, fold.fold, **scores)
    report.write_json(out / "report.json")
    (out / "report.txt").write_text(report.to_text())
    _write_manifest(out, "cv", cfg, ["report.json", "report.txt"])
    sys.stdout.write(report.to_text())


def cmd_plotdata(cfg, explicit, args, out: Path):
    if not args.checkpoint:
        raise UsageError("plotdata needs --checkpoint")
    params, std, _ = load_checkpoint(args.checkpoint)
    if cfg["data"]["source"] == "csv" and cfg["data"]["path"]:
        data = _load_dataset(cfg, cfg["data"]["path"])
        if data.x.shape[1] != 1:
            raise DimensionMismatch(f"plot data needs a single-feature dataset, got {data.x.shape[1]} features")
    if params.p != 1:
        raise DimensionMismatch(f"plot data needs a single-feature model, got {params.p} features")
    pc = cfg["plot"]
    xs = np.linspace(pc["x_min"], pc["x_max"], pc["points"])
    xin = std.apply(xs[:, None]) if std is not None else xs[:, None]
    pred = forward_batch(xin, params)
    levels = cfg["eval"]["bpi_levels"]
    bounds = _bpi_bounds(pred, levels)
    header = ["x", "regression_function", "mu", "sigma2", "h"]
    for a in levels:
        header += [f"bpi{_level_name(a)}_lo", f"bpi{_level_name(a)}_hi"]
    header.append("note")
    failed = 0
    with (out / "plotdata.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, x in enumerate(xs):
            row = [_fmt(x), _fmt(regression_function(x)), _fmt(pred.mu[i]), _fmt(pred.sigma2[i]), _fmt(pred.h[i])]
            for a in levels:
                row += [_fmt(bounds[a][0][i]), _fmt(bounds[a][1][i])]
            note = "" if pred.h[i] > 0 else "UnreachableLevel"
            failed += bool(note)
            row.append(note)
            w.writerow(row)
    if failed:
        log.warning("%d of %d grid points are vacuous: UnreachableLevel", failed, len(xs))
    _write_manifest(out, "plotdata", cfg, ["plotdata.csv"],
                    {"checkpoint": str(args.checkpoint), "unreachable_rows": failed})


def cmd_eval(cfg, explicit, args, out: Path):
    if not args.predictions:
        raise UsageError("eval needs --predictions")
    mu, sigma2, h = read_predictions(args.predictions)
    if cfg["data"]["source"] == "simulate":
        data = _simulated(cfg, 1, cfg["simulate"]["n_val"])
    else:
        data = _load_dataset(cfg, cfg["data"]["validation_path"] or cfg["data"]["path"])
    if len(data) != mu.size:
        raise SchemaMismatch(f"{mu.size} predictions for {len(data)} records")
    report = MetricsReport(meta={"predictions": str(args.predictions), "rows": len(data)})
    report.add(0, 0, **score(cfg, mu, sigma2, h, data))
    report.write_json(out / "eval.json")
    _write_manifest(out, "eval", cfg, ["eval.json"])
    sys.stdout.write(report.to_text())


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "cv": cmd_cv,
    "plotdata": cmd_plotdata,
    "eval": cmd_eval,
}


# ---------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file or a manifest from an earlier run")
    common.add_argument("-v", "--verbose", action="count", default=0)
    for path, default in config_mod.flatten(config_mod.DEFAULTS).items():
        common.add_argument(f"--{path}", dest=path, default=argparse.SUPPRESS, metavar="VALUE",
                            help=f"default: {default!r}")
    parser = _Parser(prog="ennsurv", description="Evidential survival regression with GRFN outputs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("simulate", parents=[common], help="write simulated train/validation CSVs")
    sub.add_parser("train", parents=[common], help="fit a model and write checkpoint, history, predictions")
    sub.add_parser("cv", parents=[common], help="repeated k-fold cross-validation report")
    p = sub.add_parser("plotdata", parents=[common], help="dense x-grid of predictions and BPIs")
    p.add_argument("--checkpoint")
    e = sub.add_parser("eval", parents=[common], help="score a predictions file against a dataset")
    e.add_argument("--predictions")
    return parser


def resolve_config(args) -> tuple[dict, set]:
    cfg = config_mod.load(args.config) if args.config else config_mod.merge(config_mod.DEFAULTS, {})
    defaults = config_mod.flatten(config_mod.DEFAULTS)
    explicit = set()
    for path, default in defaults.items():
        if path in vars(args):
            try:
                value = config_mod.parse_value(getattr(args, path), default)
            except ValueError as exc:
                raise UsageError(f"--{path}: {exc}") from None
            config_mod.set_path(cfg, path, value)
            explicit.add(path)
    config_mod.validate(cfg)
    return cfg, explicit


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg, explicit = resolve_config(args)
        out = Path(cfg["output"])
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, explicit, args, out)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, (DataError, NumericError)):
            return _fail(exc)
        print(f"ennsurv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, NumericError, OSError) as exc:
        return _fail(exc)
    return EXIT_OK


def _fail(exc) -> int:
    code = EXIT_NUMERIC if isinstance(exc, NumericError) else EXIT_DATA
    print(f"ennsurv: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
