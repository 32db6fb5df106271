import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ennsurv.errors import NegativeTime, UnreachableLevel
from ennsurv.grfn import (
    ray_belief,
    GRFN,
    VACUOUS,
    LognormalRFN,
    RealInterval,
    bel_pl,
    bel_pl_arrays,
    bpi,
    combine,
    contour,
    mc_oracle,
    norm_cdf,
    time_bel_pl,
)

INF = math.inf

# Frozen from an independent 10^7-draw Monte-Carlo run (seed 20261019) of the
# per-mode necessity/possibility, M ~ N(0, 1), h = 1.
MC_CONTOUR_0 = (0.7071411472337696, 8.795256687011007e-05)
MC_RAY_BEL = (0.14644351583226192, 7.754786848993704e-05)
MC_RAY_PL = (0.853584663066032, 7.75261082099682e-05)


def test_contour_at_mode():
    assert contour(GRFN(3, 0, 2), 3) == 1.0


def test_contour_vacuous():
    assert contour(GRFN(0, 1, 0), 17) == 1.0


def test_contour_matches_monte_carlo():
    est, se = MC_CONTOUR_0
    value = contour(GRFN(0, 1, 1), 0)
    assert abs(value - est) < 3 * se
    assert value == pytest.approx(2 ** -0.5, abs=1e-15)


def test_contour_possibilistic_case():
    assert contour(GRFN(1.0, 0.0, 2.0), 2.5) == pytest.approx(math.exp(-0.5 * 2.0 * 1.5 ** 2), rel=1e-15)


def test_bel_pl_vacuous():
    assert bel_pl(GRFN(0, 1, 0), RealInterval(0, 1)) == (0.0, 1.0)


def test_bel_pl_ray_against_monte_carlo():
    bel, pl = bel_pl(GRFN(0, 1, 1), RealInterval(0, INF))
    assert abs(bel - MC_RAY_BEL[0]) < 3 * MC_RAY_BEL[1]
    assert abs(pl - MC_RAY_PL[0]) < 3 * MC_RAY_PL[1]
    assert bel == pytest.approx(0.14645, abs=1e-5)
    assert pl == pytest.approx(0.85355, abs=1e-5)


def test_gaussian_limit_example():
    bel, pl = bel_pl(GRFN(0, 1, 1e8), RealInterval(-1.96, 1.96))
    target = float(norm_cdf(1.96) - norm_cdf(-1.96))
    assert bel == pytest.approx(target, abs=1e-3)
    assert pl == pytest.approx(target, abs=1e-3)
    assert target == pytest.approx(0.950, abs=5e-4)


@pytest.mark.parametrize("mu", [-1.0, 0.0, 2.5])
@pytest.mark.parametrize("s2", [0.3, 2.0])
@pytest.mark.parametrize("interval", [(-1.0, 0.5), (0.0, INF), (-INF, 1.0), (2.0, 2.5)])
def test_gaussian_limit(mu, s2, interval):
    lo, hi = interval
    bel, pl = bel_pl(GRFN(mu, s2, 1e8), RealInterval(lo, hi))
    sd = math.sqrt(s2)
    prob = float(norm_cdf((hi - mu) / sd) - norm_cdf((lo - mu) / sd))
    assert bel == pytest.approx(prob, abs=1e-3)
    assert pl == pytest.approx(prob, abs=1e-3)


@pytest.mark.parametrize("mu,h,lo,hi", [
    (0.0, 1.0, -2.0, 2.0),
    (0.5, 3.0, -1.0, 4.0),
    (5.0, 0.7, -1.0, 1.0),
    (-3.0, 2.0, -1.0, INF),
    (0.2, 2.0, -INF, 1.0),
    (1.0, 4.0, 1.0, 1.0),
])
def test_possibilistic_limit(mu, h, lo, hi):
    # sigma2 = 0: Bel/Pl are the necessity/possibility of the fuzzy number itself
    def member(x):
        return math.exp(-0.5 * h * (x - mu) ** 2)

    sup_in = 1.0 if lo <= mu <= hi else member(lo if mu < lo else hi)
    if lo < mu < hi:
        sup_out = max(member(lo), member(hi))
    else:
        sup_out = 1.0
    bel, pl = bel_pl(GRFN(mu, 0.0, h), RealInterval(lo, hi))
    assert pl == pytest.approx(sup_in, abs=1e-12)
    assert bel == pytest.approx(1.0 - sup_out, abs=1e-12)


def test_point_interval():
    f = GRFN(0.3, 0.8, 2.0)
    bel, pl = bel_pl(f, RealInterval(1.1, 1.1))
    assert bel == 0.0
    assert pl == pytest.approx(contour(f, 1.1), rel=1e-13)


def test_whole_line_is_certain():
    for f in (GRFN(0, 1, 1), VACUOUS, GRFN(-4, 0, 3)):
        assert bel_pl(f, RealInterval.whole_line()) == (1.0, 1.0)


def test_vacuous_ignores_mu_and_sigma2():
    intervals = [RealInterval(-1, 2), RealInterval(0, INF), RealInterval(3, 3), RealInterval(-INF, -5)]
    for itv in intervals:
        ref = bel_pl(VACUOUS, itv)
        for f in (GRFN(7, 3, 0), GRFN(-2, 0, 0), GRFN(0, 1e-3, 0)):
            assert bel_pl(f, itv) == ref


def test_mc_oracle_whole_line():
    est = mc_oracle(GRFN(1, 2, 3), RealInterval.whole_line(), 1000, 5)
    assert est.bel == 1.0 and est.pl == 1.0


def test_mc_oracle_degenerate_mode():
    # the mode sits on the left endpoint, so the complement reaches membership 1
    for seed in range(3):
        est = mc_oracle(GRFN(0, 0, 1), RealInterval(0, 2), 100, seed)
        assert est.bel == 0.0 and est.pl == 1.0
    est = mc_oracle(GRFN(0, 0, 1), RealInterval(-2, 2), 100, 0)
    assert est.bel == pytest.approx(1 - math.exp(-2), abs=1e-15)
    assert bel_pl(GRFN(0, 0, 1), RealInterval(-2, 2)).bel == pytest.approx(1 - math.exp(-2), abs=1e-15)


def test_mc_oracle_deterministic():
    f, itv = GRFN(0.5, 1.5, 2.0), RealInterval(-1, 1)
    assert mc_oracle(f, itv, 5000, 42) == mc_oracle(f, itv, 5000, 42)


def test_mc_oracle_agrees_with_closed_form():
    f, itv = GRFN(0, 1, 1), RealInterval(0, INF)
    est = mc_oracle(f, itv, 10 ** 6, 11)
    bel, pl = bel_pl(f, itv)
    assert abs(est.bel - bel) < 3 * est.stderr_bel
    assert abs(est.pl - pl) < 3 * est.stderr_pl


def test_combine_vacuous_neutral():
    assert combine(GRFN(5, 2, 3), VACUOUS) == GRFN(5, 2, 3)
    assert combine(VACUOUS, VACUOUS) == VACUOUS


def test_combine_fusion_example():
    out = combine(GRFN(0, 1, 1), GRFN(2, 1, 1))
    assert (out.mu, out.sigma2, out.h) == (1.0, 0.5, 2.0)


grfns = st.builds(
    GRFN,
    st.floats(-10, 10),
    st.floats(0, 5),
    st.floats(0, 20),
)


@given(grfns, grfns, grfns)
def test_combine_algebra(a, b, c):
    ab = combine(a, b)
    assert ab == combine(b, a)
    assert ab.h == a.h + b.h
    left = combine(ab, c)
    right = combine(a, combine(b, c))
    # float addition is not associative, so h agrees to rounding only here
    assert left.h == pytest.approx(right.h, rel=1e-15)
    assert left.mu == pytest.approx(right.mu, rel=1e-12, abs=1e-12)
    assert left.sigma2 == pytest.approx(right.sigma2, rel=1e-12, abs=1e-12)


def test_bpi_alpha_zero():
    f = GRFN(1.5, 0.4, 2.0)
    assert bpi(f, 0.0) == RealInterval(1.5, 1.5)


def test_bpi_vacuous_unreachable():
    with pytest.raises(UnreachableLevel):
        bpi(GRFN(0, 1, 0), 0.5)


def test_bpi_gaussian_limit():
    itv = bpi(GRFN(0, 1, 1e8), 0.9)
    assert itv.lo == pytest.approx(-1.645, abs=2e-3)
    assert itv.hi == pytest.approx(1.645, abs=2e-3)
    # independent check of the level reached, by sampling the mode
    est = mc_oracle(GRFN(0, 1, 1e8), itv, 10 ** 6, 3)
    assert abs(est.bel - 0.9) < 3 * est.stderr_bel + 1e-4


@pytest.mark.parametrize("f", [GRFN(0, 1, 1), GRFN(2, 0, 3), GRFN(-1, 0.01, 100), GRFN(0, 4, 0.05)])
@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9, 0.99])
def test_bpi_residual(f, alpha):
    itv = bpi(f, alpha)
    assert itv.lo + itv.hi == pytest.approx(2 * f.mu)
    assert abs(bel_pl(f, itv).bel - alpha) <= 1e-9


def test_time_bel_pl_log_transform():
    f = LognormalRFN(GRFN(0, 1, 1))
    assert time_bel_pl(f, RealInterval(1, INF)) == bel_pl(f.inner, RealInterval(0, INF))
    assert time_bel_pl(f, RealInterval(0, INF)) == (1.0, 1.0)
    with pytest.raises(NegativeTime):
        time_bel_pl(f, RealInterval(-1, 2))


def test_time_bel_pl_from_zero_is_left_ray():
    f = LognormalRFN(GRFN(0.2, 0.5, 2))
    assert time_bel_pl(f, RealInterval(0, 3)) == bel_pl(f.inner, RealInterval(-INF, math.log(3)))


# ---------------------------------------------------------------------------
# properties

params = st.tuples(st.floats(-5, 5), st.floats(0, 4), st.floats(0, 30))
endpoints = st.floats(-8, 8)


@settings(max_examples=300, deadline=None)
@given(params, endpoints, endpoints)
def test_bounds(p, a, b):
    lo, hi = min(a, b), max(a, b)
    bel, pl = bel_pl(GRFN(*p), RealInterval(lo, hi))
    assert 0.0 <= bel <= pl <= 1.0


@settings(max_examples=300, deadline=None)
@given(params, endpoints)
def test_ray_duality(p, a):
    f = GRFN(*p)
    right = bel_pl(f, RealInterval(a, INF))
    left = bel_pl(f, RealInterval(-INF, a))
    assert right.bel == pytest.approx(1.0 - left.pl, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(params, endpoints, endpoints, st.floats(0, 3), st.floats(0, 3))
def test_monotone_in_interval(p, a, b, grow_lo, grow_hi):
    f = GRFN(*p)
    lo, hi = min(a, b), max(a, b)
    inner = bel_pl(f, RealInterval(lo, hi))
    outer = bel_pl(f, RealInterval(lo - grow_lo, hi + grow_hi))
    assert inner.bel <= outer.bel + 1e-12
    assert inner.pl <= outer.pl + 1e-12


def test_tail_accuracy():
    # both endpoints far in the upper tail: probability survives via erfc
    bel, pl = bel_pl(GRFN(0, 1, 1e8), RealInterval(9.0, 10.0))
    exact = 0.5 * (math.erfc(9 / math.sqrt(2)) - math.erfc(10 / math.sqrt(2)))
    assert bel == pytest.approx(exact, rel=1e-3)
    assert pl == pytest.approx(exact, rel=1e-3)


@pytest.mark.parametrize("lo,hi", [(-0.7, 1.5), (0.4, INF), (-INF, -0.2), (0.1 - 1e-6, 0.1 + 1e-6), (-0.05, 0.05)])
@pytest.mark.parametrize("mu,s2,h", [(0.2, 0.7, 1.3), (-0.5, 2.0, 0.2), (0.0, 0.05, 20.0), (0.3, 0.0, 2.0)])
def test_bel_pl_derivatives(lo, hi, mu, s2, h):
    bel, pl, dbel, dpl = bel_pl_arrays(mu, s2, h, lo, hi, grad=True)
    theta = np.array([mu, s2, h], dtype=float)
    for j in range(3):
        if s2 == 0 and j == 1:
            step = 1e-7
            up = bel_pl_arrays(*(theta + step * np.eye(3)[j]), lo, hi)
            fd = [(u - v) / step for u, v in zip(up, (bel, pl))]
            tol = 1e-4
        else:
            step = 1e-6 * max(1.0, abs(theta[j]))
            up = bel_pl_arrays(*(theta + step * np.eye(3)[j]), lo, hi)
            dn = bel_pl_arrays(*(theta - step * np.eye(3)[j]), lo, hi)
            fd = [(u - v) / (2 * step) for u, v in zip(up, dn)]
            tol = 1e-6
        scale_b = max(abs(bel), 1e-300)
        # compare the log-derivative for tiny beliefs, which is what the loss uses
        assert dbel[j] / scale_b == pytest.approx(fd[0] / scale_b, rel=tol, abs=tol)
        assert dpl[j] == pytest.approx(fd[1], rel=tol, abs=tol)


# 40-digit adaptive quadrature of E[(1 - exp(-delta (Z - z)^2 / 2)) 1{Z > z}], frozen
RAY_REFERENCE = [
    (3.0, 0.5, 4.673970824211311e-05),
    (6.0, 1e-06, 2.4222882089912363e-17),
    (0.3, 0.0001, 1.5102043693108148e-05),
    (-2.0, 0.001, 0.0024917518157649026),
    (0.0, 1.0, 0.14644660940672624),
    (1.0, 50.0, 0.12054689237054958),
    (-20.0, 1e-05, 0.002002971345494731),
    (-9.0, 2.0, 0.9999999999989149),
]


@pytest.mark.parametrize("z, delta, expected", RAY_REFERENCE)
def test_ray_belief_reference(z, delta, expected):
    G = ray_belief(z, delta)[0]
    assert float(G) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("z, delta, _", RAY_REFERENCE)
def test_ray_belief_partials(z, delta, _):
    G, Gz, Gd = ray_belief(z, delta)
    hz, hd = 1e-6, delta * 1e-6
    fz = (ray_belief(z + hz, delta)[0] - ray_belief(z - hz, delta)[0]) / (2 * hz)
    fd = (ray_belief(z, delta + hd)[0] - ray_belief(z, delta - hd)[0]) / (2 * hd)
    assert float(Gz) == pytest.approx(float(fz), rel=1e-5, abs=1e-9)  # FD noise floor ~ eps / step
    assert float(Gd) == pytest.approx(float(fd), rel=1e-5, abs=1e-9)  # FD noise floor ~ eps / step


def test_censored_ray_no_cancellation():
    # tiny precision: textbook difference of tails would round to zero or below
    bel, _ = bel_pl_arrays(0.0, 1.0, 1e-12, 0.5, np.inf)
    z, delta = 0.5, 1e-12
    assert float(bel) == pytest.approx(float(ray_belief(z, delta)[0]), rel=1e-12)
    assert float(bel) > 0


def test_subnormal_sigma2_matches_degenerate():
    for itv in (RealInterval(-1.0, INF), RealInterval(-INF, -1.0), RealInterval(-0.5, 0.7)):
        assert bel_pl(GRFN(0.0, 5e-324, 1.5), itv) == bel_pl(GRFN(0.0, 0.0, 1.5), itv)
