"""Datasets: the synthetic benchmark, CSV ingestion, z-scoring and CV folds."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import EmptyDataset, NonPositiveDuration, SchemaMismatch, TooFewSamples
from .seeding import derive_rng

log = logging.getLogger(__name__)


class SurvivalRecord(NamedTuple):
    x: np.ndarray
    t: float
    d: int


@dataclass
class SurvivalData:
    """Column-oriented set of records: features ``x`` (n, p), durations ``t``, events ``d``."""

    x: np.ndarray
    t: np.ndarray
    d: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.t = np.asarray(self.t, dtype=float)
        self.d = np.asarray(self.d, dtype=int)
        n = len(self.t)
        if self.x.shape[0] != n or self.d.shape != (n,):
            raise SchemaMismatch("x, t and d must have the same number of rows")
        if np.any(self.t <= 0) or not np.all(np.isfinite(self.t)):
            bad = int(np.flatnonzero(~(self.t > 0) | ~np.isfinite(self.t))[0])
            raise NonPositiveDuration(bad + 1, float(self.t[bad]))
        if not np.all((self.d == 0) | (self.d == 1)):
            raise SchemaMismatch("event flags must be 0 or 1")
        if not np.all(np.isfinite(self.x)):
            raise SchemaMismatch("features must be finite")
        if not self.feature_names:
            p = self.x.shape[1]
            self.feature_names = ("x",) if p == 1 else tuple(f"x{i}" for i in range(p))

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[SurvivalRecord]:
        for i in range(len(self)):
            yield SurvivalRecord(self.x[i], float(self.t[i]), int(self.d[i]))

    @property
    def y(self) -> np.ndarray:
        return np.log(self.t)

    @property
    def censoring_rate(self) -> float:
        return float(1.0 - self.d.mean()) if len(self) else math.nan

    def subset(self, idx) -> "SurvivalData":
        return SurvivalData(self.x[idx], self.t[idx], self.d[idx], self.feature_names)


# ---------------------------------------------------------------------------
# synthetic benchmark

def regression_function(x):
    """Noise-free log-time of the synthetic benchmark."""
    x = np.asarray(x, dtype=float)
    return 1.5 * x + 2.0 * np.cos(3.0 * x) ** 3


def true_log_time(x, v):
    x = np.asarray(x, dtype=float)
    return regression_function(x) + (x + 5.0) / (3.0 * math.sqrt(5.0)) * np.asarray(v, dtype=float)


def simulate_with_truth(n: int, censor_prob: float, censor_interval=(-1.0, 0.0), seed: int = 0, stream: int = 0):
    """Like :func:`simulate` but also returns the uncensored log-times.

    ``stream`` selects an independent draw for the same seed (train vs validation).
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= censor_prob <= 1.0:
        raise ValueError("censor_prob must lie in [0, 1]")
    c_lo, c_hi = censor_interval
    if not c_lo < c_hi <= 0.0:
        raise ValueError("censoring interval must be [c_lo, c_hi] with c_lo < c_hi <= 0")
    rng = derive_rng(seed, "simulate", stream)
    x = rng.uniform(-2.0, 2.0, n)
    v = rng.standard_normal(n)
    censored = rng.random(n) < censor_prob
    # offsets are drawn for every record so the stream does not depend on censor_prob
    offset = rng.uniform(c_lo, c_hi, n)
    y_true = true_log_time(x, v)
    y_obs = np.where(censored, y_true + offset, y_true)
    data = SurvivalData(x[:, None], np.exp(y_obs), (~censored).astype(int), ("x",))
    return data, y_true


def simulate(n: int, censor_prob: float, censor_interval=(-1.0, 0.0), seed: int = 0, stream: int = 0) -> SurvivalData:
    """Draw ``n`` records of the one-feature benchmark.

    Censored records (``d = 0``) have a uniform negative offset added on the log-time
    scale, so the observed duration is shorter than the event time.
    """
    return simulate_with_truth(n, censor_prob, censor_interval, seed, stream)[0]


# ---------------------------------------------------------------------------
# CSV

def load_csv(path, feature_columns: Sequence[str] | None = None, duration_column: str = "duration",
             event_column: str = "event", nonpositive: str = "error") -> SurvivalData:
    """Read a header-first, comma-separated file of numeric columns.

    Row numbers in errors count data rows from 1.  ``nonpositive="drop"`` skips
    rows whose duration is zero or negative instead of raising.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such dataset: {path}")
    if nonpositive not in ("error", "drop"):
        raise ValueError("nonpositive must be 'error' or 'drop'")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        for col in (duration_column, event_column):
            if col not in header:
                raise SchemaMismatch(f"column {col!r} not found in {path}")
        if feature_columns is None:
            feature_columns = [h for h in header if h not in (duration_column, event_column)]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise SchemaMismatch(f"feature columns {missing} not found in {path}")
        fi = [header.index(c) for c in feature_columns]
        ti, ei = header.index(duration_column), header.index(event_column)

        xs, ts, ds = [], [], []
        dropped = 0
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaMismatch(f"row {row_no}: expected {len(header)} cells, got {len(row)}")
            t = _number(row[ti], row_no, duration_column)
            if t is None or not t > 0:
                if nonpositive == "drop" and t is not None:
                    dropped += 1
                    continue
                raise NonPositiveDuration(row_no, t)
            e = _number(row[ei], row_no, event_column)
            if e not in (0.0, 1.0):
                raise SchemaMismatch(f"row {row_no}: event flag must be 0 or 1, got {row[ei]!r}")
            feats = []
            for j, c in zip(fi, feature_columns):
                value = _number(row[j], row_no, c)
                if value is None:
                    raise SchemaMismatch(f"row {row_no}: missing value in column {c!r}")
                feats.append(value)
            xs.append(feats)
            ts.append(t)
            ds.append(int(e))
    if not ts:
        raise EmptyDataset(f"{path} has no data rows")
    data = SurvivalData(np.array(xs, dtype=float).reshape(len(ts), len(fi)), ts, ds, tuple(feature_columns))
    if dropped:
        log.warning("%s: dropped %d rows with non-positive duration", path, dropped)
    log.info("%s: %d rows, censoring rate %.3f", path, len(data), data.censoring_rate)
    return data


def _number(cell: str, row_no: int, column: str):
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise SchemaMismatch(f"row {row_no}: non-numeric value {cell!r} in column {column!r}") from None
    if not math.isfinite(value):
        return None
    return value


def write_csv(path, data: SurvivalData) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*data.feature_names, "duration", "event"])
        for xi, ti, di in zip(data.x, data.t, data.d):
            w.writerow([*(repr(float(v)) for v in xi), repr(float(ti)), int(di)])


# ---------------------------------------------------------------------------
# standardization

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data) -> "Standardizer":
        x = data.x if isinstance(data, SurvivalData) else np.asarray(data, dtype=float)
        if len(x) == 0:
            raise EmptyDataset("cannot standardize an empty dataset")
        if x.ndim == 1:
            x = x[:, None]
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        # constant features keep divisor 1 and map to zero
        return cls(mean, np.where(sd > 0, sd, 1.0))

    def apply(self, data):
        if isinstance(data, SurvivalData):
            return SurvivalData(self.apply(data.x), data.t.copy(), data.d.copy(), data.feature_names)
        x = np.asarray(data, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return (x - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


def standardize_fit(data) -> Standardizer:
    return Standardizer.fit(data)


def standardize_apply(standardizer: Standardizer, data):
    return standardizer.apply(data)


# ---------------------------------------------------------------------------
# cross-validation

@dataclass(frozen=True)
class FoldPlan:
    k: int = 5
    repeats: int = 5
    seed: int = 0


class Fold(NamedTuple):
    repeat: int
    fold: int
    train: np.ndarray
    test: np.ndarray


def make_folds(n: int, plan: FoldPlan) -> list[Fold]:
    """Repeated k-fold split; the first ``n % k`` folds of a repeat get one extra index."""
    if n < plan.k:
        raise TooFewSamples(f"{n} samples for {plan.k} folds")
    folds = []
    for r in range(plan.repeats):
        perm = derive_rng(plan.seed, "folds", r).permutation(n)
        parts = np.array_split(perm, plan.k)
        for f, test in enumerate(parts):
            mask = np.ones(n, dtype=bool)
            mask[test] = False
            folds.append(Fold(r, f, np.flatnonzero(mask), np.sort(test)))
    return folds
