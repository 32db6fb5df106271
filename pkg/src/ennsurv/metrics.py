"""Censoring-aware evaluation of predicted survival curves.

Curves are arrays of shape ``(n_subjects, n_times)`` evaluated on a shared,
increasing time grid and read as right-continuous step functions.  IBS and IBLL
reweight each subject by the Kaplan-Meier estimate of the censoring
distribution fitted on the evaluation set itself.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DegenerateGrid, EmptyDataset, NegativeTime, NoComparablePairs, NonPositiveDuration
from .grfn import LognormalRFN, bel_pl_arrays, bpi_radius

LOG_CLAMP = 1e-7
GRID_POINTS = 100


class SurvivalCurveMode(str, Enum):
    BELIEF = "belief"
    PLAUSIBILITY = "plausibility"
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous step function equal to 1 before the first jump time."""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        return np.concatenate([[1.0], self.values])[idx]

    def left_limit(self, t):
        """Value just before ``t``."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left")
        return np.concatenate([[1.0], self.values])[idx]


def _check_outcomes(durations, events):
    t = np.asarray(durations, dtype=float)
    d = np.asarray(events, dtype=int)
    if t.size == 0:
        raise EmptyDataset("no subjects")
    if t.shape != d.shape:
        raise ValueError("durations and events differ in length")
    if np.any(~(t > 0)):
        bad = int(np.flatnonzero(~(t > 0))[0])
        raise NonPositiveDuration(bad + 1, float(t[bad]))
    return t, d


def km_estimator(durations, events) -> StepSurvival:
    """Product-limit estimate with jumps at the distinct event times."""
    t, d = _check_outcomes(durations, events)
    times, inv = np.unique(t, return_inverse=True)
    deaths = np.bincount(inv, weights=d, minlength=times.size)
    leaving = np.bincount(inv, minlength=times.size)
    at_risk = t.size - np.concatenate([[0], np.cumsum(leaving)[:-1]])
    keep = deaths > 0
    values = np.cumprod((at_risk[keep] - deaths[keep]) / at_risk[keep])
    return StepSurvival(times[keep], values)


def survival_curves(mu, sigma2, h, times, mode=SurvivalCurveMode.MIDPOINT) -> np.ndarray:
    """S(t | x) for each prediction (rows) at each time (columns)."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise NegativeTime("survival times must be nonnegative")
    mode = SurvivalCurveMode(mode)
    col = lambda a: np.asarray(a, dtype=float).reshape(-1, 1)
    with np.errstate(divide="ignore"):
        lo = np.log(times)[None, :]
    bel, pl = bel_pl_arrays(col(mu), col(sigma2), col(h), lo, np.inf)
    if mode is SurvivalCurveMode.BELIEF:
        out = bel
    elif mode is SurvivalCurveMode.PLAUSIBILITY:
        out = pl
    else:
        out = 0.5 * (bel + pl)
    # rounding can leave tiny upward steps between adjacent times
    return np.minimum.accumulate(out, axis=1)


def survival_curve(pred: LognormalRFN, times, mode=SurvivalCurveMode.MIDPOINT) -> np.ndarray:
    f = pred.inner
    return survival_curves([f.mu], [f.sigma2], [f.h], times, mode)[0]


def _lookup(curves, grid, t):
    """curves[:, k] with k the last grid point <= t (1 before the grid starts)."""
    idx = np.searchsorted(grid, t, side="right") - 1
    padded = np.concatenate([np.ones((curves.shape[0], 1)), curves], axis=1)
    return padded[:, idx + 1]


def c_index_td(curves, grid, durations, events) -> float:
    """Time-dependent concordance.

    Pair (i, j) is comparable when subject i has an event and either
    ``T_i < T_j``, or ``T_i == T_j`` with j censored.  It is concordant when
    ``S(T_i | x_i) < S(T_i | x_j)``; equal survival counts one half.
    """
    t, d = _check_outcomes(durations, events)
    curves = np.asarray(curves, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if curves.shape != (t.size, grid.size):
        raise ValueError("curves must have one row per subject and one column per grid time")
    if np.any(t[d == 1] < grid[0]):
        raise ValueError("grid must start at or before the first event time")
    # S(T_i | x_j) for every j (rows) and event subject i (columns)
    ev = np.flatnonzero(d == 1)
    at_ti = _lookup(curves, grid, t[ev])
    own = at_ti[ev, np.arange(ev.size)]
    ti = t[ev][None, :]
    tj = t[:, None]
    comparable = (ti < tj) | ((ti == tj) & (d[:, None] == 0))
    total = comparable.sum()
    if total == 0:
        raise NoComparablePairs("no comparable pairs")
    conc = (own[None, :] < at_ti) + 0.5 * (own[None, :] == at_ti)
    return float(np.sum(conc * comparable) / total)


def default_grid(durations, points: int = GRID_POINTS) -> np.ndarray:
    t = np.asarray(durations, dtype=float)
    return np.linspace(t.min(), t.max(), points)


def _ipcw_terms(curves, grid, durations, events):
    t, d = _check_outcomes(durations, events)
    curves = np.asarray(curves, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if curves.shape != (t.size, grid.size):
        raise ValueError("curves must have one row per subject and one column per grid time")
    span = grid[-1] - grid[0] if grid.size else 0.0
    if not span > 0:
        raise DegenerateGrid("evaluation grid has zero span")
    cens = km_estimator(t, 1 - d)
    g_t = cens(grid)[None, :]
    g_ti = cens.left_limit(t)[:, None]
    died = (t[:, None] <= grid[None, :]) & (d[:, None] == 1)
    alive = t[:, None] > grid[None, :]
    # zero-weight subjects drop out of their term
    w_died = np.divide(1.0, g_ti, out=np.zeros_like(g_ti), where=g_ti > 0)
    w_alive = np.divide(1.0, g_t, out=np.zeros_like(g_t), where=g_t > 0)
    return curves, grid, span, died * w_died, alive * w_alive


def _integrate(per_time, grid, span):
    # trapezoid rule normalized by the grid span
    return float(np.trapezoid(per_time, grid) / span)


def brier_scores(curves, grid, durations, events) -> np.ndarray:
    S, grid, span, wd, wa = _ipcw_terms(curves, grid, durations, events)
    return np.mean(S ** 2 * wd + (1.0 - S) ** 2 * wa, axis=0)


def ibs(curves, grid, durations, events) -> float:
    per_time = brier_scores(curves, grid, durations, events)
    grid = np.asarray(grid, dtype=float)
    return _integrate(per_time, grid, grid[-1] - grid[0])


def binomial_log_likelihoods(curves, grid, durations, events) -> np.ndarray:
    S, grid, span, wd, wa = _ipcw_terms(curves, grid, durations, events)
    S = np.clip(S, LOG_CLAMP, 1.0 - LOG_CLAMP)
    return -np.mean(np.log1p(-S) * wd + np.log(S) * wa, axis=0)


def ibll(curves, grid, durations, events) -> float:
    """Integrated negated binomial log-likelihood; lower is better."""
    per_time = binomial_log_likelihoods(curves, grid, durations, events)
    grid = np.asarray(grid, dtype=float)
    return _integrate(per_time, grid, grid[-1] - grid[0])


def bpi_coverage(mu, sigma2, h, targets, alpha: float) -> float:
    """Share of targets inside the level-``alpha`` belief prediction interval.

    At ``alpha = 0`` the interval is a single point and covers nothing.
    """
    y = np.asarray(targets, dtype=float)
    if y.size == 0:
        raise EmptyDataset("no targets")
    if alpha == 0:
        return 0.0
    r = bpi_radius(mu, sigma2, h, alpha)
    return float(np.mean(np.abs(y - np.asarray(mu, dtype=float)) <= r))


# ---------------------------------------------------------------------------
# reports

METRICS = ("c_index", "ibs", "ibll")


@dataclass
class MetricsReport:
    """Per-fold scores plus mean and standard error across folds."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, repeat: int, fold: int, **scores) -> None:
        self.rows.append({"repeat": repeat, "fold": fold, **{k: float(v) for k, v in scores.items()}})

    def columns(self) -> list:
        cols = []
        for row in self.rows:
            cols += [k for k in row if k not in ("repeat", "fold") and k not in cols]
        return cols

    def summary(self) -> dict:
        out = {}
        for col in self.columns():
            values = np.array([r[col] for r in self.rows if col in r], dtype=float)
            se = float(np.std(values, ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
            out[col] = {"mean": float(values.mean()), "se": se}
        return out

    def to_dict(self) -> dict:
        return {"meta": self.meta, "folds": self.rows, "summary": self.summary()}

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, allow_nan=True) + "\n")

    def to_text(self) -> str:
        cols = self.columns()
        lines = ["repeat fold " + " ".join(f"{c:>12}" for c in cols)]
        for r in self.rows:
            lines.append(f"{r['repeat']:>6} {r['fold']:>4} " + " ".join(f"{r.get(c, math.nan):>12.6f}" for c in cols))
        summ = self.summary()
        lines.append("mean +- se  " + " ".join(f"{summ[c]['mean']:.4f}+-{summ[c]['se']:.1e}".rjust(12) for c in cols))
        return "\n".join(lines) + "\n"
