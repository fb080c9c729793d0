import math

import numpy as np
import pytest
from scipy.special import gammaln

from tvrecover.core import SeedSpec
from tvrecover.errors import EstimatorUnstable, InvalidArgument, OutOfRegime, UnsupportedLength
from tvrecover.operators import restrict
from tvrecover.solvers import SolverConfig
from tvrecover.widths import (_WidthSolver, lower_bound_construction, lower_bound_expectation,
                              lower_bound_mc, measurement_lower_bound, required_measurements,
                              width_lower_bound_1d, width_mc, width_upper_bound_1d,
                              width_upper_bound_nd)


def chi_mean(n):
    return math.sqrt(2) * math.exp(gammaln((n + 1) / 2) - gammaln(n / 2))


# ---------------------------------------------------------------------------
# closed forms


def test_upper_bound_1d_example():
    assert float(width_upper_bound_1d(256, 4)) == pytest.approx(189.9, abs=0.05)
    assert width_upper_bound_1d(256, 16) / width_upper_bound_1d(256, 4) == pytest.approx(
        math.sqrt(2))
    with pytest.raises(OutOfRegime):
        width_upper_bound_1d(256, 1)
    with pytest.raises(OutOfRegime):
        width_upper_bound_1d(1, 4)


def test_upper_bound_monotone():
    grid = [(n, k) for n in (16, 64, 256, 1024) for k in (2, 4, 8)]
    for n, k in grid:
        assert width_upper_bound_1d(2 * n, k) > width_upper_bound_1d(n, k)
        assert width_upper_bound_1d(n, k + 1) > width_upper_bound_1d(n, k)


def test_lower_bound_1d():
    b = width_lower_bound_1d(256, 4)
    assert float(b) == pytest.approx(2.507, abs=5e-4)
    assert b.asymptotic
    assert width_lower_bound_1d(256 * 16, 4) == pytest.approx(2 * b)
    for n in (64, 256, 1024, 4096):
        for k in (2, 4, 16):
            assert width_lower_bound_1d(n, k) <= width_upper_bound_1d(n, k)


def test_measurement_lower_bound():
    assert math.pi / 16 * math.sqrt(1024 * 16) == pytest.approx(25.13, abs=5e-3)
    b = measurement_lower_bound(1024, 16, 0.05)
    assert b.vacuous and float(b) == 0.0
    assert b.raw == pytest.approx(25.13 - 4 * math.sqrt(math.log(80)) * 32, abs=1e-2)
    assert measurement_lower_bound(1024, 16, 0.5).raw > b.raw
    with pytest.raises(InvalidArgument):
        measurement_lower_bound(1024, 16, 1.0)


def test_upper_bound_nd():
    assert float(width_upper_bound_nd(64, 4, 2)) == pytest.approx(1712.1, abs=0.05)
    ratio = (width_upper_bound_nd(64, 16, 2) - math.sqrt(3)) / (
        width_upper_bound_nd(64, 4, 2) - math.sqrt(3))
    assert ratio == pytest.approx(2.0)
    with pytest.raises(UnsupportedLength):
        width_upper_bound_nd(48, 4, 2)


def test_required_measurements():
    r = required_measurements(256, 4)
    assert float(r) == pytest.approx(189.9 ** 2, rel=1e-3)
    assert r.vacuous
    ratio = required_measurements(1024, 4) / required_measurements(256, 4)
    assert ratio == pytest.approx(2 * (0.5 + math.log(1024)) / (0.5 + math.log(256)))
    # for d = 3 the only n-dependence is through ln(n)
    r3 = [required_measurements(n, 4, 3) for n in (8, 64)]
    base = [(math.sqrt(r) - math.sqrt(3)) ** 2 / (1 + 6 * math.log(n)) for r, n in
            zip(r3, (8, 64))]
    assert base[0] == pytest.approx(base[1])


@pytest.mark.parametrize("n,k", [(64, 2), (256, 4), (1000, 7)])
def test_closed_forms_high_precision(n, k):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    up = (4 * mp.sqrt(2) + 4) * mp.mpf(n * k) ** mp.mpf(0.25) * mp.sqrt(2 * mp.log(mp.e ** 0.5 * n))
    lo = mp.sqrt(mp.pi) / 4 * mp.mpf(n * k) ** mp.mpf(0.25)
    meas = mp.pi / 16 * mp.sqrt(n * k) - 4 * mp.sqrt(mp.log(4 / mp.mpf("0.3"))) * mp.sqrt(n)
    assert float(width_upper_bound_1d(n, k)) == pytest.approx(float(up), rel=1e-13)
    assert float(width_lower_bound_1d(n, k)) == pytest.approx(float(lo), rel=1e-13)
    assert measurement_lower_bound(n, k, 0.3).raw == pytest.approx(float(meas), rel=1e-12)


@pytest.mark.parametrize("n,k,d", [(16, 2, 2), (64, 4, 2), (8, 3, 3)])
def test_nd_bound_high_precision(n, k, d):
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40
    base = 8 * mp.sqrt(d) * (2 ** d - 1) * mp.sqrt(k) * mp.sqrt(2 * mp.log(mp.e ** 0.5 * mp.mpf(n) ** d))
    if d == 2:
        val = base * mp.log(n, 2) + mp.sqrt(3)
    else:
        r = mp.mpf(2) ** (1 - mp.mpf(d) / 2)
        val = base * r / (1 - r) + mp.sqrt(3)
    assert float(width_upper_bound_nd(n, k, d)) == pytest.approx(float(val), rel=1e-13)


# ---------------------------------------------------------------------------
# construction


def test_construction_numbers():
    g = np.random.default_rng(0).standard_normal(64)
    c = lower_bound_construction(g, 64, 4)
    assert c.mu == pytest.approx(0.35355, abs=1e-5)
    assert c.nu == pytest.approx(0.08839, abs=1e-5)
    assert c.l_block == pytest.approx(32 / 7)
    assert c.l_int == 5
    assert c.l2_constraint() == pytest.approx(1.0, abs=1e-15)
    # mu, nu and the real block length make the l1 inequality an identity
    assert c.l1_constraint() == pytest.approx(0.0, abs=1e-12)
    assert c.in_s
    assert c.value == pytest.approx(c.witness @ g)
    assert np.linalg.norm(c.witness) <= 1 + 1e-12


def test_construction_membership_over_grid():
    rng = np.random.default_rng(1)
    for n, k in ((64, 2), (64, 20), (256, 4), (1024, 16), (4096, 64)):
        for _ in range(20):
            c = lower_bound_construction(rng.standard_normal(n), n, k)
            assert len(c.support) == k
            on, off = restrict(np.diff(c.witness), c.support)
            assert c.in_s and on >= off
            assert c.l2_constraint() <= 1 + 1e-12
            assert c.l1_constraint() >= -1e-12


def test_construction_errors():
    with pytest.raises(OutOfRegime):
        lower_bound_construction(np.zeros(30), 30, 10)
    with pytest.raises(InvalidArgument):
        lower_bound_construction(np.zeros(31), 30, 2)


def test_construction_mean_matches_expectation():
    est = lower_bound_mc(1024, 8, 400, SeedSpec(3))
    assert abs(est.mean - lower_bound_expectation(1024, 8)) <= 3 * est.std_error


# ---------------------------------------------------------------------------
# Monte Carlo width


def test_inactive_tv_gives_norm():
    solver = _WidthSolver((2,), math.inf, SolverConfig(), 1e-6)
    val, ok = solver.solve(np.array([3.0, 4.0]))
    assert ok
    assert val == pytest.approx(5.0, abs=1e-6)


def test_chi_oracle():
    est = width_mc(64, 1, 1, 200, SeedSpec(4), tv_radius=math.inf)
    assert abs(est.mean - chi_mean(64)) <= 3 * est.std_error
    assert chi_mean(64) == pytest.approx(8 - 1 / 32, abs=2e-3)
    # a radius above 2 sqrt(n - 1) can never bind
    big = width_mc(64, 1, 1, 20, SeedSpec(4), tv_radius=2 * math.sqrt(63) + 1)
    assert np.allclose(big.values, est.values[:20], atol=1e-5)


@pytest.mark.parametrize("seed", range(3))
def test_width_sample_against_cvxpy(seed):
    cp = pytest.importorskip("cvxpy")
    n, k = 64, 2
    g = np.random.default_rng(seed).standard_normal(n)
    tau = 4 * math.sqrt(k)
    val, ok = _WidthSolver((n,), tau, SolverConfig(), 1e-6).solve(g)
    x = cp.Variable(n)
    prob = cp.Problem(cp.Maximize(g @ x), [cp.norm2(x) <= 1, cp.norm1(cp.diff(x)) <= tau])
    prob.solve(solver=cp.CLARABEL)
    assert ok
    assert val == pytest.approx(prob.value, rel=1e-5)


def test_width_determinism_and_std_error():
    a = width_mc(64, 2, 1, 10, SeedSpec(5))
    b = width_mc(64, 2, 1, 10, SeedSpec(5))
    assert np.array_equal(a.values, b.values)
    assert a.std_error == pytest.approx(a.values.std(ddof=1) / math.sqrt(10))


@pytest.mark.parametrize("n,k,samples", [(64, 2, 40), (64, 4, 40), (64, 16, 40),
                                         (256, 2, 30), (256, 4, 30), (256, 16, 30),
                                         (1024, 2, 12), (1024, 4, 12), (1024, 16, 12)])
def test_sandwich_grid(n, k, samples):
    w = width_mc(n, k, 1, samples, SeedSpec(12))
    lb = lower_bound_mc(n, k, samples, SeedSpec(12))
    slack = 2 * math.hypot(w.std_error, lb.std_error)
    assert lb.mean <= w.mean + slack
    assert w.mean <= width_upper_bound_1d(n, k)
    # common random numbers: the witness is feasible, so the sup dominates per sample
    assert np.all(lb.values <= w.values + 1e-6)


def test_width_2d_below_bound():
    w = width_mc(16, 2, 2, 100, SeedSpec(6))
    assert w.mean <= width_upper_bound_nd(16, 2, 2)


def test_unstable_estimator():
    with pytest.raises(EstimatorUnstable):
        width_mc(64, 2, 1, 10, SeedSpec(0), cfg=SolverConfig(max_iters=1))


def test_width_argument_errors():
    with pytest.raises(InvalidArgument):
        width_mc(64, 2, 1, 1, SeedSpec(0))
    with pytest.raises(InvalidArgument):
        width_mc(1, 2, 1, 5, SeedSpec(0))
