"""Censoring-aware generalized likelihood, regularized cost and the fitting loop.

An observed event at log-time ``y`` is scored on the short interval
``[y - eps, y + eps]``; a censored record only says the event happens after
``y``, so it is scored on ``[y, inf)``.  The loss mixes ``-ln Bel`` and
``-ln Pl`` of that interval with weight ``lam`` on the belief term.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyDataset
from .grfn import GRFN, PROB_FLOOR, bel_pl_arrays
from .model import ModelParams, backward_batch, forward_batch, init_params
from .seeding import derive_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.1
    epsilon: float = 1e-6
    xi: float = 0.1
    rho: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.xi < 0 or self.rho < 0:
            raise ValueError("xi and rho must be nonnegative")
        if not all(math.isfinite(v) for v in asdict(self).values()):
            raise ValueError("loss settings must be finite")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 256
    max_epochs: int = 1000
    patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


class ObservedTarget(NamedTuple):
    y: float
    d: int


class HistoryRow(NamedTuple):
    epoch: int
    train_cost: float
    val_cost: float


def loss_arrays(mu, sigma2, h, y, d, cfg: LossConfig, grad: bool = False):
    """Per-sample loss, and optionally its derivatives in ``(mu, sigma2, h)``."""
    y = np.asarray(y, dtype=float)
    event = np.asarray(d) == 1
    lo = np.where(event, y - cfg.epsilon, y)
    hi = np.where(event, y + cfg.epsilon, np.inf)
    res = bel_pl_arrays(mu, sigma2, h, lo, hi, grad=grad)
    bel, pl = res[0], res[1]
    bel_c = np.maximum(bel, PROB_FLOOR)
    pl_c = np.maximum(pl, PROB_FLOOR)
    loss = -cfg.lam * np.log(bel_c) - (1.0 - cfg.lam) * np.log(pl_c)
    if not grad:
        return loss
    dbel, dpl = res[2], res[3]
    # clamped terms are flat
    g = (-cfg.lam * np.where(bel > PROB_FLOOR, dbel / bel_c, 0.0)
         - (1.0 - cfg.lam) * np.where(pl > PROB_FLOOR, dpl / pl_c, 0.0))
    return loss, g


def loss_sample(out: GRFN, tgt: ObservedTarget, cfg: LossConfig = LossConfig()) -> float:
    return float(loss_arrays(out.mu, out.sigma2, out.h, tgt.y, tgt.d, cfg))


def _check_batch(X, y, d):
    if len(y) == 0:
        raise EmptyDataset("empty batch")
    return np.asarray(X, dtype=float), np.asarray(y, dtype=float), np.asarray(d, dtype=int)


def _penalty(params: ModelParams, cfg: LossConfig) -> float:
    K = params.K
    return cfg.xi / K * float(np.sum(params.h)) + cfg.rho / K * float(np.sum(params.gamma ** 2))


def total_cost(params: ModelParams, X, y, d, cfg: LossConfig = LossConfig()) -> float:
    """Mean loss plus ``xi/K * sum(h_k) + rho/K * sum(gamma_k^2)``."""
    X, y, d = _check_batch(X, y, d)
    out = forward_batch(X, params)
    loss = loss_arrays(out.mu, out.sigma2, out.h, y, d, cfg)
    return float(np.mean(loss)) + _penalty(params, cfg)


def gradient(params: ModelParams, X, y, d, cfg: LossConfig = LossConfig()):
    """``(cost, grad)`` where ``grad`` is a :class:`ModelParams` of partial derivatives
    with respect to the stored (square-root) parameters."""
    X, y, d = _check_batch(X, y, d)
    n = len(y)
    out = forward_batch(X, params)
    loss, g = loss_arrays(out.mu, out.sigma2, out.h, y, d, cfg, grad=True)
    grad = backward_batch(params, out.cache, g[0] / n, g[1] / n, g[2] / n)
    K = params.K
    grad.eta = grad.eta + 2.0 * cfg.xi / K * params.eta
    grad.gamma = grad.gamma + 2.0 * cfg.rho / K * params.gamma
    return float(np.mean(loss)) + _penalty(params, cfg), grad


class Adam:
    def __init__(self, size: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, g: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def fit(train, val, K: int = 40, loss_cfg: LossConfig = LossConfig(), train_cfg: TrainConfig = TrainConfig(),
        init: ModelParams | None = None):
    """Fit by minibatch Adam with early stopping on the validation cost.

    ``train`` and ``val`` are ``(X, y, d)`` triples with ``y`` on the log-time
    scale.  Returns the parameters of the best validation epoch and the history
    as a list of ``(epoch, train_cost, val_cost)`` rows, epochs counted from 1.
    """
    Xt, yt, dt = _check_batch(*train)
    Xv, yv, dv = _check_batch(*val)
    params = init if init is not None else init_params(Xt, yt, K, train_cfg.seed)
    K, p = params.K, params.p
    theta = params.to_vector()
    opt = Adam(theta.size, train_cfg.learning_rate)
    rng = derive_rng(train_cfg.seed, "batches")
    n = len(yt)
    bs = min(train_cfg.batch_size, n)

    best = params.copy()
    best_val = total_cost(params, Xv, yv, dv, loss_cfg)
    history = []
    stale = 0
    for epoch in range(1, train_cfg.max_epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, bs):
            idx = perm[start:start + bs]
            _, g = gradient(params, Xt[idx], yt[idx], dt[idx], loss_cfg)
            theta = opt.step(theta, g.to_vector())
            params = ModelParams.from_vector(theta, K, p)
        tr = total_cost(params, Xt, yt, dt, loss_cfg)
        va = total_cost(params, Xv, yv, dv, loss_cfg)
        history.append(HistoryRow(epoch, tr, va))
        if va < best_val:
            best_val, best, stale = va, params.copy(), 0
        else:
            stale += 1
        if epoch % 50 == 0:
            log.debug("epoch %d train %.5f val %.5f", epoch, tr, va)
        if stale >= train_cfg.patience:
            break
    return best, history


def write_history(path, history) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,train_cost,val_cost\n")
        for row in history:
            fh.write(f"{row.epoch},{row.train_cost!r},{row.val_cost!r}\n")
