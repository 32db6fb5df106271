"""Gaussian random fuzzy numbers.

A GRFN ``N~(mu, sigma2, h)`` is a Gaussian fuzzy number with membership
``x -> exp(-h (x - m)^2 / 2)`` whose mode ``m`` is itself drawn from
``N(mu, sigma2)``.  Degrees of belief and plausibility of an interval are
expectations over the random mode of the necessity and possibility of the
interval under the fuzzy number with that mode.

The closed forms below split the mode axis at the interval endpoints (and at
its midpoint for belief).  Every piece is an integral of a Gaussian kernel
against the mode density, i.e. a contour value times a normal probability.
Very narrow intervals are integrated by Gauss-Legendre quadrature instead,
because there the belief is a tiny difference of much larger pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import erfc, roots_laguerre

from .errors import NegativeTime, UnreachableLevel

PROB_FLOOR = 1e-300

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
# quadrature is used when the half-width is small against both 1/sqrt(h) and sigma
_NARROW = 0.5
_LAG_NODES, _LAG_WEIGHTS = roots_laguerre(48)
_SERIES_TERMS = 12


@dataclass(frozen=True)
class GRFN:
    mu: float
    sigma2: float
    h: float

    def __post_init__(self):
        for name in ("mu", "sigma2", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.sigma2 < 0 or self.h < 0:
            raise ValueError("sigma2 and h must be nonnegative")

    @property
    def is_vacuous(self) -> bool:
        return self.h == 0


VACUOUS = GRFN(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class RealInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("interval endpoints must not be NaN")
        if self.lo == math.inf or self.hi == -math.inf:
            raise ValueError("interval must contain a real number")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @classmethod
    def whole_line(cls) -> "RealInterval":
        return cls(-math.inf, math.inf)

    def __contains__(self, x: float) -> bool:
        return self.lo <= x <= self.hi


class BeliefPlausibility(NamedTuple):
    bel: float
    pl: float


class MCEstimate(NamedTuple):
    bel: float
    pl: float
    stderr_bel: float
    stderr_pl: float


@dataclass(frozen=True)
class LognormalRFN:
    """Image of a GRFN under ``exp``: uncertainty on a positive time ``T = exp(Y)``."""

    inner: GRFN


def norm_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * z * z)


def _cdf_diff(zl, zu):
    """Phi(zu) - Phi(zl) for zl <= zu, taking upper tails when both are positive."""
    upper = zl > 0
    return np.where(upper, norm_cdf(-zl) - norm_cdf(-zu), norm_cdf(zu) - norm_cdf(zl))


def _pdf_and_zpdf(z):
    finite = np.isfinite(z)
    zs = np.where(finite, z, 0.0)
    p = np.where(finite, norm_pdf(zs), 0.0)
    return p, zs * p


def contour(f: GRFN, x: float) -> float:
    """Plausibility of the single value ``x`` (expected membership)."""
    v = 1.0 + f.h * f.sigma2
    return float(math.exp(-f.h * (x - f.mu) ** 2 / (2.0 * v)) / math.sqrt(v))


def _kernel_piece(mu, s2, h, v, sv, e, lo, hi, grad):
    """E[exp(-h (M - e)^2 / 2) 1{lo < M < hi}] for M ~ N(mu, s2), s2 > 0.

    The kernel times the mode density is contour(e) times a normal density with
    mean ``(mu + h s2 e) / v`` and variance ``s2 / v``.
    """
    finite = np.isfinite(e)
    de = np.where(finite, e, mu) - mu
    C = np.where(finite, np.exp(-h * de * de / (2.0 * v)) / np.sqrt(v), 0.0)
    m = mu + h * s2 * de / v
    zl = (lo - m) / sv
    zu = (hi - m) / sv
    D = _cdf_diff(zl, zu)
    val = C * D
    if not grad:
        return val, None
    v2 = v * v
    dlnC = np.stack([h * de / v, -h / (2.0 * v) + h * h * de * de / (2.0 * v2),
                     -s2 / (2.0 * v) - de * de / (2.0 * v2)])
    dm = np.stack([1.0 / v, h * de / v2, s2 * de / v2])
    dsv = np.stack([np.zeros_like(v), 1.0 / v2, -s2 * s2 / v2]) / (2.0 * sv)
    pl_, zpl = _pdf_and_zpdf(zl)
    pu, zpu = _pdf_and_zpdf(zu)
    dD = (-(pu - pl_) * dm - (zpu - zpl) * dsv) / sv
    return val, C * (dlnC * D + dD)


def _narrow_belief(mu, s2, h, a, b, grad):
    """Belief of a short finite interval by quadrature over distance-to-edge."""
    w = 0.5 * (b - a)
    t = (0.5 * w)[:, None] * (_GL_NODES + 1.0)
    wt = (0.5 * w)[:, None] * _GL_WEIGHTS
    hh = h[:, None]
    ss = s2[:, None]
    e = np.exp(-0.5 * hh * t * t)
    g = -np.expm1(-0.5 * hh * t * t)
    xa = a[:, None] + t - mu[:, None]
    xb = b[:, None] - t - mu[:, None]
    norm = 1.0 / np.sqrt(2.0 * np.pi * ss)
    pa = norm * np.exp(-xa * xa / (2.0 * ss))
    pb = norm * np.exp(-xb * xb / (2.0 * ss))
    bel = np.sum(wt * g * (pa + pb), axis=1)
    if not grad:
        return bel, None
    d_mu = np.sum(wt * g * (pa * xa + pb * xb), axis=1) / s2
    d_s2 = np.sum(wt * g * (pa * (xa * xa / ss - 1.0) + pb * (xb * xb / ss - 1.0)), axis=1) / (2.0 * s2)
    d_h = np.sum(wt * 0.5 * t * t * e * (pa + pb), axis=1)
    return bel, np.stack([d_mu, d_s2, d_h])


def _ray_belief_series(z, delta):
    # 1 - exp(-x) expanded in delta; J[n] = E[(Z - z)^n; Z > z] by recurrence
    J = [norm_cdf(-z), norm_pdf(z) - z * norm_cdf(-z)]
    for n in range(2, 2 * _SERIES_TERMS + 1):
        J.append((n - 1) * J[n - 2] - z * J[n - 1])
    G = np.zeros_like(z)
    Gz = np.zeros_like(z)
    Gd = np.zeros_like(z)
    for j in range(1, _SERIES_TERMS + 1):
        c = (-1) ** (j + 1) * (0.5 * delta) ** j / math.factorial(j)
        G += c * J[2 * j]
        Gz -= c * 2 * j * J[2 * j - 1]
        Gd += (-1) ** (j + 1) * (0.5 * delta) ** (j - 1) / (2 * math.factorial(j - 1)) * J[2 * j]
    return G, Gz, Gd


def _ray_belief_laguerre(z, delta):
    # far tail: substitute s = z u so the mode density becomes exp(-s) times a smooth factor
    zz = z[:, None]
    dd = delta[:, None]
    u = _LAG_NODES / zz
    base = np.exp(-0.5 * u * u)
    decay = np.exp(-0.5 * dd * u * u)
    g = -np.expm1(-0.5 * dd * u * u)
    pre = norm_pdf(z) / z
    G = pre * np.sum(_LAG_WEIGHTS * g * base, axis=1)
    Gz = -pre * np.sum(_LAG_WEIGHTS * g * (zz + u) * base, axis=1)
    Gd = pre * np.sum(_LAG_WEIGHTS * 0.5 * u * u * decay * base, axis=1)
    return G, Gz, Gd


def _ray_belief_direct(z, delta):
    v = 1.0 + delta
    w = z / np.sqrt(v)
    E = np.exp(-z * z * delta / (2.0 * v))
    Qw = norm_cdf(-w)
    pw = norm_pdf(w)
    G = norm_cdf(-z) - E / np.sqrt(v) * Qw
    Gz = -delta * E / v * (pw - w * Qw)
    Gd = 0.5 * E * v ** -1.5 * ((1.0 + w * w) * Qw - w * pw)
    return G, Gz, Gd


def _ray_belief_shifted(z, delta):
    # edge far below the mode: P(Z < z) is negligible, integrate over the whole line
    v = 1.0 + delta
    dz2 = (np.sqrt(delta) * z) ** 2
    f = dz2 / (2.0 * v) + 0.5 * np.log1p(delta)
    e = np.exp(-f)
    G = -np.expm1(-f)
    Gz = e * np.sqrt(delta) * (np.sqrt(delta) * z) / v
    Gd = e * (z * z / (2.0 * v * v) + 1.0 / (2.0 * v))
    return G, Gz, Gd


def ray_belief(z, delta):
    """Bel([a, inf)) as a function of ``z = (a - mu) / sigma`` and ``delta = h sigma2``.

    Returns the value and its partial derivatives in ``z`` and ``delta``.  The
    textbook form is a difference of two normal tail probabilities that cancels
    when ``delta`` is small or ``z`` is far in the tail, so those regimes use a
    series in ``delta`` and Gauss-Laguerre quadrature respectively.
    """
    z, delta = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(delta, dtype=float))
    G = np.empty(z.shape)
    Gz = np.empty(z.shape)
    Gd = np.empty(z.shape)
    lag = (z >= 2.0) & (delta <= 0.25 * z * z)
    shifted = z < -8.0
    ser = ~lag & ~shifted & (delta * (1.0 + z * z) < 0.05)
    direct = ~lag & ~shifted & ~ser
    for mask, fn in ((lag, _ray_belief_laguerre), (shifted, _ray_belief_shifted),
                     (ser, _ray_belief_series), (direct, _ray_belief_direct)):
        if mask.any():
            G[mask], Gz[mask], Gd[mask] = fn(z[mask], delta[mask])
    return G, Gz, Gd


def _degenerate(mu, h, a, b, grad):
    """sigma2 == 0: the mode is the constant mu."""
    below = mu < a
    above = mu > b
    inside = ~below & ~above
    gap = np.where(below, a - mu, np.where(above, mu - b, 0.0))
    gap = np.where(np.isfinite(gap), gap, 0.0)
    f = np.exp(-0.5 * h * gap * gap)
    pl = np.where(inside, 1.0, f)

    strict = (a < mu) & (mu < b)
    da = mu - a
    db = b - mu
    near_a = da <= db
    dmin = np.where(near_a, da, db)
    dmin = np.where(strict & np.isfinite(dmin), dmin, 0.0)
    g_exp = np.exp(-0.5 * h * dmin * dmin)
    bel = np.where(strict, -np.expm1(-0.5 * h * dmin * dmin), 0.0)
    if not grad:
        return bel, pl, None, None
    # d/dsigma2 at sigma2 = 0 is half the second derivative in the mode
    sgn = np.where(below, 1.0, -1.0)
    dpl = np.stack([
        f * h * gap * sgn,
        0.5 * (h * h * gap * gap - h) * f,
        -0.5 * gap * gap * f,
    ]) * ~inside
    sgn_b = np.where(near_a, 1.0, -1.0)
    dbel = np.stack([
        g_exp * h * dmin * sgn_b,
        -0.5 * (h * h * dmin * dmin - h) * g_exp,
        0.5 * dmin * dmin * g_exp,
    ]) * strict
    return bel, pl, dbel, dpl


def bel_pl_arrays(mu, sigma2, h, lo, hi, grad=False):
    """Vectorized belief and plausibility of ``[lo, hi]``.

    Returns ``(bel, pl)``, or ``(bel, pl, dbel, dpl)`` with ``grad=True``, where
    the derivative arrays have a leading axis of length 3 ordered
    ``(mu, sigma2, h)``.
    """
    with np.errstate(invalid="ignore", divide="ignore", over="ignore", under="ignore"):
        return _bel_pl_arrays(mu, sigma2, h, lo, hi, grad)


def _bel_pl_arrays(mu, sigma2, h, lo, hi, grad):
    mu, sigma2, h, lo, hi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (mu, sigma2, h, lo, hi)))
    shape = mu.shape
    mu, sigma2, h, lo, hi = (x.ravel() for x in (mu, sigma2, h, lo, hi))
    n = mu.size
    bel = np.zeros(n)
    pl = np.zeros(n)
    dbel = np.zeros((3, n)) if grad else None
    dpl = np.zeros((3, n)) if grad else None

    # below the smallest normal double the mode spread is invisible at double
    # precision, and h * sigma2 would round to a subnormal
    deg = sigma2 < np.finfo(float).tiny
    if deg.any():
        out = _degenerate(mu[deg], h[deg], lo[deg], hi[deg], grad)
        bel[deg], pl[deg] = out[0], out[1]
        if grad:
            dbel[:, deg], dpl[:, deg] = out[2], out[3]

    gen = ~deg
    if gen.any():
        m, s2, hh, a, b = mu[gen], sigma2[gen], h[gen], lo[gen], hi[gen]
        sd = np.sqrt(s2)
        v = 1.0 + hh * s2
        sv = np.sqrt(s2 / v)
        za = (a - m) / sd
        zb = (b - m) / sd
        mass = _cdf_diff(za, zb)
        both = np.isfinite(a) & np.isfinite(b)
        c = np.where(both, 0.5 * (a + b), np.where(np.isfinite(a), np.inf, -np.inf))
        ninf = np.full_like(m, -np.inf)
        pinf = np.full_like(m, np.inf)
        ka_pl, dka_pl = _kernel_piece(m, s2, hh, v, sv, a, ninf, a, grad)
        kb_pl, dkb_pl = _kernel_piece(m, s2, hh, v, sv, b, b, pinf, grad)
        ka_bel, dka_bel = _kernel_piece(m, s2, hh, v, sv, a, a, c, grad)
        kb_bel, dkb_bel = _kernel_piece(m, s2, hh, v, sv, b, c, b, grad)
        g_pl = mass + ka_pl + kb_pl
        g_bel = mass - ka_bel - kb_bel
        if grad:
            pa, zpa = _pdf_and_zpdf(za)
            pb, zpb = _pdf_and_zpdf(zb)
            dmass = np.stack([-(pb - pa) / sd, -(zpb - zpa) / (2.0 * s2), np.zeros_like(m)])
            g_dpl = dmass + dka_pl + dkb_pl
            g_dbel = dmass - dka_bel - dkb_bel

        half = 0.5 * (b - a)
        narrow = both & (half > 0) & (half * np.sqrt(hh) < _NARROW) & (half < _NARROW * sd)
        if narrow.any():
            nb, ndb = _narrow_belief(m[narrow], s2[narrow], hh[narrow], a[narrow], b[narrow], grad)
            g_bel[narrow] = nb
            if grad:
                g_dbel[:, narrow] = ndb
        right = np.isfinite(a) & np.isposinf(b)
        left = np.isneginf(a) & np.isfinite(b)
        ray = right | left
        if ray.any():
            # mirror left rays onto right rays of -M
            sign = np.where(right, 1.0, -1.0)[ray]
            edge = np.where(right, a, b)[ray]
            z = sign * (edge - m[ray]) / sd[ray]
            G, Gz, Gd = ray_belief(z, hh[ray] * s2[ray])
            g_bel[ray] = G
            if grad:
                g_dbel[:, ray] = np.stack([
                    -sign * Gz / sd[ray],
                    -Gz * z / (2.0 * s2[ray]) + Gd * hh[ray],
                    Gd * s2[ray],
                ])
        bel[gen] = g_bel
        pl[gen] = g_pl
        if grad:
            dbel[:, gen] = g_dbel
            dpl[:, gen] = g_dpl

    # exact values where the closed forms would only be right up to rounding
    whole = np.isneginf(lo) & np.isposinf(hi)
    point = lo == hi
    vac = h == 0
    bel = np.where(point | (vac & ~whole), 0.0, bel)
    pl = np.where(vac, 1.0, pl)
    bel = np.where(whole, 1.0, bel)
    pl = np.where(whole, 1.0, pl)
    bel = np.clip(bel, 0.0, 1.0)
    pl = np.clip(pl, bel, 1.0)
    if grad:
        dbel[:, whole | point] = 0.0
        dpl[:, whole] = 0.0
        return bel.reshape(shape), pl.reshape(shape), dbel.reshape((3,) + shape), dpl.reshape((3,) + shape)
    return bel.reshape(shape), pl.reshape(shape)


def bel_pl(f: GRFN, interval: RealInterval) -> BeliefPlausibility:
    bel, pl = bel_pl_arrays(f.mu, f.sigma2, f.h, interval.lo, interval.hi)
    return BeliefPlausibility(float(bel), float(pl))


def mc_oracle(f: GRFN, interval: RealInterval, n_samples: int, seed: int) -> MCEstimate:
    """Monte-Carlo estimate of Bel/Pl by sampling the mode.

    For each sampled mode the possibility and necessity of the interval are
    exact: the membership peaks at the mode and decays with distance.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rng = np.random.default_rng(seed)
    modes = f.mu + math.sqrt(f.sigma2) * rng.standard_normal(n_samples)
    a, b = interval.lo, interval.hi

    dist_in = np.maximum(np.maximum(a - modes, modes - b), 0.0)
    poss = np.exp(-0.5 * f.h * dist_in ** 2)

    if a == -math.inf and b == math.inf:
        nec = np.ones(n_samples)
    else:
        interior = (modes > a) & (modes < b)
        dist_out = np.where(interior, np.minimum(modes - a, b - modes), 0.0)
        with np.errstate(invalid="ignore"):
            sup_out = np.where(dist_out > 0, np.exp(-0.5 * f.h * dist_out ** 2), 1.0)
        nec = 1.0 - sup_out

    def mean_se(x):
        se = float(np.std(x, ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
        return float(np.mean(x)), se

    bel, se_bel = mean_se(nec)
    pl, se_pl = mean_se(poss)
    return MCEstimate(bel, pl, se_bel, se_pl)


def combine(f1: GRFN, f2: GRFN) -> GRFN:
    """Product-intersection combination; precisions add."""
    hs = f1.h + f2.h
    if hs == 0:
        return VACUOUS
    w1, w2 = f1.h / hs, f2.h / hs
    mu = w1 * f1.mu + w2 * f2.mu
    sigma2 = w1 * w1 * f1.sigma2 + w2 * w2 * f2.sigma2
    return GRFN(mu, sigma2, hs)


def _symmetric_belief(mu, s2, h, r):
    return bel_pl_arrays(mu, s2, h, mu - r, mu + r)[0]


def bpi_radius(mu, sigma2, h, alpha, tol=1e-9, max_doublings=200):
    """Half-widths ``r`` with ``Bel([mu - r, mu + r]) == alpha``, vectorized.

    Raises UnreachableLevel if any element cannot reach ``alpha``.
    """
    mu, sigma2, h = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (mu, sigma2, h)))
    shape = mu.shape
    mu, sigma2, h = mu.ravel(), sigma2.ravel(), h.ravel()
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if alpha == 0.0:
        return np.zeros(shape)
    if np.any(h == 0):
        raise UnreachableLevel(f"vacuous prediction: no finite interval has belief {alpha}")

    scale = np.sqrt(sigma2 + 1.0 / h)
    lo = np.zeros_like(mu)
    hi = scale.copy()
    bel_hi = _symmetric_belief(mu, sigma2, h, hi)
    for _ in range(max_doublings):
        short = bel_hi < alpha
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
        bel_hi = np.where(short, _symmetric_belief(mu, sigma2, h, hi), bel_hi)
    else:
        if np.any(bel_hi < alpha):
            raise UnreachableLevel(f"belief level {alpha} not reached after {max_doublings} doublings")

    r = hi.copy()
    resid = bel_hi - alpha
    done = np.abs(resid) <= tol
    for _ in range(200):
        if done.all():
            break
        mid = 0.5 * (lo + hi)
        bel_mid = _symmetric_belief(mu, sigma2, h, mid)
        low = bel_mid < alpha
        lo = np.where(done | ~low, lo, mid)
        hi = np.where(done | low, hi, mid)
        r = np.where(done, r, mid)
        newly = ~done & (np.abs(bel_mid - alpha) <= tol)
        done = done | newly | (hi - lo <= 4 * np.finfo(float).eps * hi)
    return r.reshape(shape)


def bpi(f: GRFN, alpha: float) -> RealInterval:
    """Belief prediction interval centred on the mean of the mode."""
    r = float(bpi_radius(f.mu, f.sigma2, f.h, alpha))
    return RealInterval(f.mu - r, f.mu + r)


def _log_time(t: float) -> float:
    return -math.inf if t == 0 else math.log(t)


def time_bel_pl(f: LognormalRFN, t_interval: RealInterval) -> BeliefPlausibility:
    if t_interval.lo < 0:
        raise NegativeTime(f"time interval starts at {t_interval.lo}")
    return bel_pl(f.inner, RealInterval(_log_time(t_interval.lo), _log_time(t_interval.hi)))
