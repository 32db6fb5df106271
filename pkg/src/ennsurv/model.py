"""Prototype-based evidential regression network.

Each prototype ``k`` contributes the GRFN ``N~(mu_k(x), sigma_k^2, s_k(x) h_k)``
with ``s_k(x) = exp(-gamma_k^2 ||x - p_k||^2)`` and a linear local mean
``mu_k(x) = beta_k . x + beta_k0``.  The contributions are fused with the
product-intersection rule, so precisions add and the output mean is the
precision-weighted average of the local means.

Precision and variance are stored through their square roots (``eta``,
``sigma``) so unconstrained gradient steps keep them nonnegative.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.cluster.vq import kmeans2
from scipy.spatial.distance import pdist

from .errors import DimensionMismatch, SchemaMismatch, TooFewSamples
from .grfn import GRFN, VACUOUS
from .seeding import derive_rng

FIELDS = ("prototypes", "gamma", "eta", "sigma", "beta", "beta0")


@dataclass
class ModelParams:
    prototypes: np.ndarray  # (K, p)
    gamma: np.ndarray  # (K,)  similarity uses gamma**2
    eta: np.ndarray  # (K,)  h_k = eta**2
    sigma: np.ndarray  # (K,)  sigma_k^2 = sigma**2
    beta: np.ndarray  # (K, p)
    beta0: np.ndarray  # (K,)

    def __post_init__(self):
        for name in FIELDS:
            setattr(self, name, np.array(getattr(self, name), dtype=float))
        K, p = self.prototypes.shape
        if K < 1:
            raise ValueError("need at least one prototype")
        for name in ("gamma", "eta", "sigma", "beta0"):
            if getattr(self, name).shape != (K,):
                raise DimensionMismatch(f"{name} must have shape ({K},)")
        if self.beta.shape != (K, p):
            raise DimensionMismatch(f"beta must have shape ({K}, {p})")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in FIELDS):
            raise ValueError("parameters must be finite")

    @property
    def K(self) -> int:
        return self.prototypes.shape[0]

    @property
    def p(self) -> int:
        return self.prototypes.shape[1]

    @property
    def h(self) -> np.ndarray:
        return self.eta ** 2

    @property
    def sigma2(self) -> np.ndarray:
        return self.sigma ** 2

    def to_vector(self) -> np.ndarray:
        return np.concatenate([getattr(self, n).ravel() for n in FIELDS])

    @classmethod
    def from_vector(cls, vec, K: int, p: int) -> "ModelParams":
        sizes = [K * p, K, K, K, K * p, K]
        parts = np.split(np.asarray(vec, dtype=float), np.cumsum(sizes)[:-1])
        return cls(parts[0].reshape(K, p), parts[1], parts[2], parts[3], parts[4].reshape(K, p), parts[5])

    def copy(self) -> "ModelParams":
        return ModelParams(*(getattr(self, n).copy() for n in FIELDS))

    def to_dict(self) -> dict:
        return {n: getattr(self, n).tolist() for n in FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(*(np.asarray(d[n], dtype=float) for n in FIELDS))

    @classmethod
    def from_natural(cls, prototypes, gamma, h, sigma2, beta, beta0) -> "ModelParams":
        """Build from precisions and variances instead of their square roots."""
        h = np.asarray(h, dtype=float)
        sigma2 = np.asarray(sigma2, dtype=float)
        if np.any(h < 0) or np.any(sigma2 < 0):
            raise ValueError("h and sigma2 must be nonnegative")
        return cls(prototypes, gamma, np.sqrt(h), np.sqrt(sigma2), beta, beta0)


class Prediction(NamedTuple):
    out: GRFN
    s: np.ndarray


class BatchOutput(NamedTuple):
    mu: np.ndarray
    sigma2: np.ndarray
    h: np.ndarray
    cache: dict


def _check_dim(X, params):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.p:
        raise DimensionMismatch(f"expected {params.p} features, got {X.shape[1]}")
    return X


def _sq_dist(X, P):
    diff = X[:, None, :] - P[None, :, :]
    return np.einsum("nkp,nkp->nk", diff, diff)


def similarities(x, params: ModelParams) -> np.ndarray:
    X = _check_dim(x, params)
    if X.shape[0] != 1:
        raise DimensionMismatch("similarities takes a single feature vector")
    return np.exp(-params.gamma ** 2 * _sq_dist(X, params.prototypes))[0]


def forward_batch(X, params: ModelParams) -> BatchOutput:
    """Output GRFN parameters for every row of ``X``; rows without evidence are vacuous."""
    X = _check_dim(X, params)
    d2 = _sq_dist(X, params.prototypes)
    s = np.exp(-params.gamma ** 2 * d2)
    hk = params.h
    w = s * hk
    H = w.sum(axis=1)
    mu_k = X @ params.beta.T + params.beta0
    ok = H > 0
    Hs = np.where(ok, H, 1.0)
    mu = np.where(ok, (w * mu_k).sum(axis=1) / Hs, 0.0)
    s2 = np.where(ok, (w * w * params.sigma2).sum(axis=1) / Hs ** 2, 0.0)
    cache = {"X": X, "d2": d2, "s": s, "w": w, "H": Hs, "ok": ok, "mu_k": mu_k, "mu": mu, "s2": s2}
    return BatchOutput(mu, s2, np.where(ok, H, 0.0), cache)


def forward(x, params: ModelParams) -> Prediction:
    out = forward_batch(x, params)
    if out.cache["X"].shape[0] != 1:
        raise DimensionMismatch("forward takes a single feature vector")
    s = out.cache["s"][0]
    if out.h[0] == 0:
        return Prediction(VACUOUS, s)
    return Prediction(GRFN(float(out.mu[0]), float(out.sigma2[0]), float(out.h[0])), s)


def backward_batch(params: ModelParams, cache: dict, g_mu, g_s2, g_h) -> ModelParams:
    """Pull per-sample output gradients back onto the parameters (summed over rows)."""
    X, d2, s, w, H = cache["X"], cache["d2"], cache["s"], cache["w"], cache["H"]
    ok = cache["ok"]
    g_mu = np.where(ok, g_mu, 0.0)[:, None]
    g_s2 = np.where(ok, g_s2, 0.0)[:, None]
    g_h = np.where(ok, g_h, 0.0)[:, None]
    Hc = H[:, None]
    sig2 = params.sigma2

    g_w = (g_mu * (cache["mu_k"] - cache["mu"][:, None]) / Hc
           + g_s2 * (2.0 * w * sig2 / Hc ** 2 - 2.0 * cache["s2"][:, None] / Hc)
           + g_h)
    g_muk = g_mu * w / Hc
    g_sig2 = (g_s2 * w * w / Hc ** 2).sum(axis=0)

    g_s = g_w * params.h
    g_hk = (g_w * s).sum(axis=0)
    gs_s = g_s * s
    g_gamma = -2.0 * params.gamma * (gs_s * d2).sum(axis=0)
    coef = 2.0 * params.gamma ** 2 * gs_s  # (n, K)
    g_proto = coef.T @ X - coef.sum(axis=0)[:, None] * params.prototypes

    return ModelParams(
        prototypes=g_proto,
        gamma=g_gamma,
        eta=2.0 * params.eta * g_hk,
        sigma=2.0 * params.sigma * g_sig2,
        beta=g_muk.T @ X,
        beta0=g_muk.sum(axis=0),
    )


def init_params(train_x, train_y, K: int, seed: int) -> ModelParams:
    """k-means++ prototypes, unit precisions, flat local means at the target mean."""
    X = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) < K:
        raise TooFewSamples(f"{len(X)} samples for {K} prototypes")
    rng = derive_rng(seed, "init")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        centers, _ = kmeans2(X, K, iter=50, minit="++", seed=rng)
    spacing = np.median(pdist(centers)) if K > 1 else 0.0
    gamma = 1.0 / spacing if spacing > 0 else 1.0
    constant = len(y) < 2 or np.ptp(y) == 0
    # np.var of a constant array is not exactly zero once the mean rounds
    var_y = 0.0 if constant else float(np.var(y, ddof=1))
    mean_y = float(y[0]) if constant else float(np.mean(y))
    p = X.shape[1]
    return ModelParams(
        prototypes=centers,
        gamma=np.full(K, gamma),
        eta=np.ones(K),
        sigma=np.full(K, np.sqrt(var_y)),
        beta=np.zeros((K, p)),
        beta0=np.full(K, mean_y),
    )


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_FORMAT = "ennsurv-checkpoint/1"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_checkpoint(path, params: ModelParams, standardizer=None, config: dict | None = None) -> None:
    config = config or {}
    doc = {
        "format": CHECKPOINT_FORMAT,
        "K": params.K,
        "p": params.p,
        "params": params.to_dict(),
        "standardizer": None if standardizer is None else standardizer.to_dict(),
        "config_hash": config_hash(config),
        "config": config,
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path):
    """Returns ``(params, standardizer_or_None, config)``."""
    from .data import Standardizer

    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaMismatch(f"{path} is not a checkpoint file")
    params = ModelParams.from_dict(doc["params"])
    if (params.K, params.p) != (doc["K"], doc["p"]):
        raise SchemaMismatch("checkpoint shape header does not match its arrays")
    std = doc.get("standardizer")
    return params, (Standardizer.from_dict(std) if std else None), doc.get("config", {})
