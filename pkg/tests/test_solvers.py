import numpy as np
import pytest

from tvrecover.core import SeedSpec, gaussian_matrix, null_space_basis, sparse_gradient_image
from tvrecover.errors import InfeasibleProblem, InvalidArgument, OracleScaleError
from tvrecover.operators import tv_norm
from tvrecover.solvers import (SolverConfig, StabilityInputs, lp_oracle_tv_min, stability_bound,
                               tv_min_eq, tv_min_noise)

STEP = np.array([1, 1, 1, 1, 5, 5, 5, 5], dtype=float)


def _instance(n, m, seed, k=2):
    rng = np.random.default_rng(seed)
    x0 = np.repeat(rng.standard_normal(k + 1), np.diff(np.r_[0, np.sort(
        rng.choice(np.arange(1, n), k, replace=False)), n]))
    A = gaussian_matrix(m, n, SeedSpec(seed, 1))
    return x0, A, A.matrix @ x0


def test_square_system_returns_inverse():
    A = gaussian_matrix(6, 6, 3)
    y = np.arange(6.0)
    rep = tv_min_eq(A, y)
    assert np.allclose(rep.solution, np.linalg.solve(A.matrix, y))
    assert np.allclose(lp_oracle_tv_min(A, y), np.linalg.solve(A.matrix, y), atol=1e-8)


def test_constant_from_one_measurement():
    A = gaussian_matrix(1, 12, 4)
    x0 = np.full(12, -2.5)
    rep = tv_min_eq(A, A.matrix @ x0)
    assert rep.converged
    assert np.allclose(rep.solution, x0, atol=1e-9)


def test_step_signal_matches_oracle():
    A = gaussian_matrix(4, 8, 0)
    y = A.matrix @ STEP
    rep = tv_min_eq(A, y)
    assert rep.converged and rep.certified
    assert np.linalg.norm(rep.solution - STEP) <= 1e-6 * np.linalg.norm(STEP)
    assert np.allclose(lp_oracle_tv_min(A, y), STEP, atol=1e-8)
    assert rep.objective == pytest.approx(4.0)


def test_oracle_zero_measurements():
    A = gaussian_matrix(3, 8, 1)
    assert np.allclose(lp_oracle_tv_min(A, np.zeros(3)), 0.0)


@pytest.mark.parametrize("seed", range(50))
def test_oracle_equivalence(seed):
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(4, 17))
    m = int(rng.integers(1, n))
    A = gaussian_matrix(m, n, SeedSpec(seed, 7))
    y = rng.standard_normal(m)
    rep = tv_min_eq(A, y)
    lp = tv_norm(lp_oracle_tv_min(A, y))
    assert rep.converged
    assert abs(rep.objective - lp) <= 1e-6 * (1 + lp)
    assert np.linalg.norm(A.matrix @ rep.solution - y) <= max(1e-8 * np.linalg.norm(y), 1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_minimality_under_null_perturbations(seed):
    x0, A, y = _instance(40, 18, seed, k=4)
    rep = tv_min_eq(A, y + 0.1 * np.random.default_rng(seed).standard_normal(18))
    H = null_space_basis(A).basis
    rng = np.random.default_rng(seed + 50)
    base = tv_norm(rep.solution)
    for scale in (1e-4, 1e-2, 1.0):
        for _ in range(34):
            h = H @ rng.standard_normal(H.shape[1])
            assert base <= tv_norm(rep.solution + scale * h) + 1e-6


def test_noise_monotone_in_eps_and_feasible():
    x0, A, y = _instance(48, 24, 3, k=3)
    y = y + 0.05 * np.random.default_rng(0).standard_normal(24)
    cfg = SolverConfig()
    prev = np.inf
    for eps in (0.01, 0.05, 0.1, 0.2, 0.4):
        rep = tv_min_noise(A, y, eps)
        assert rep.converged
        assert np.linalg.norm(A.matrix @ rep.solution - y) <= eps * (1 + cfg.primal_tol)
        assert rep.objective <= prev * (1 + 1e-6) + 1e-9
        prev = rep.objective


def test_noise_zero_eps_agrees_with_equality():
    x0, A, y = _instance(32, 16, 5)
    a, b = tv_min_noise(A, y, 0.0), tv_min_eq(A, y)
    assert abs(a.objective - b.objective) <= 1e-6 * (1 + b.objective)
    assert np.allclose(a.solution, b.solution, atol=1e-6)


def test_noise_large_eps_gives_constant():
    x0, A, y = _instance(32, 16, 6)
    rep = tv_min_noise(A, y, float(np.linalg.norm(y)))
    assert rep.objective == 0.0
    assert np.ptp(rep.solution) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_noise_against_cvxpy(seed):
    cp = pytest.importorskip("cvxpy")
    x0, A, y = _instance(40, 20, 10 + seed, k=3)
    y = y + 0.1 * np.random.default_rng(seed).standard_normal(20)
    eps = 0.15
    rep = tv_min_noise(A, y, eps)
    x = cp.Variable(40)
    prob = cp.Problem(cp.Minimize(cp.norm1(cp.diff(x))), [cp.norm2(A.matrix @ x - y) <= eps])
    prob.solve(solver=cp.CLARABEL)
    assert rep.converged
    assert np.linalg.norm(A.matrix @ rep.solution - y) <= eps * (1 + 1e-8)
    assert rep.objective <= prob.value * (1 + 1e-6) + 1e-6


def test_stability_bound_closed_form():
    x = np.zeros(64)
    x[10:] = 3.0  # one jump of height 3, no best-support removal since delta N = 0
    inp = StabilityInputs(0.5, 1.0, 0.0, 1.0)
    smin = np.sqrt(64) - np.sqrt(40)
    assert stability_bound(x, inp, 40, smin) == pytest.approx(2.25 + 14 / smin, rel=1e-12)
    # 10.608 follows from sigma_min rounded to 1.675; the unrounded value gives 10.606
    assert stability_bound(x, inp, 40, 1.675) == pytest.approx(10.608, abs=5e-4)
    assert stability_bound(x, inp, 40, smin) == pytest.approx(10.606, abs=5e-4)
    assert stability_bound(x, inp, 40, 0.0, form="asymptotic") == pytest.approx(
        stability_bound(x, inp, 40, smin))


def test_stability_bound_zero_and_linearity():
    x = np.zeros(64)
    x[20:] = 1.0
    x[40:] = -2.0
    assert stability_bound(x, StabilityInputs(0.3, 0.5, 2 / 64, 0.0), 40, 1.7) == 0.0
    b1 = stability_bound(x, StabilityInputs(0.3, 0.5, 0.0, 0.1), 40, 1.7)
    b2 = stability_bound(x, StabilityInputs(0.3, 0.5, 0.0, 0.2), 40, 1.7)
    tail = stability_bound(x, StabilityInputs(0.3, 0.5, 0.0, 0.0), 40, 1.7)
    assert tail == pytest.approx(2 * 1.3 / (0.5 * 0.7) * 4 / 8)
    assert b2 - tail == pytest.approx(2 * (b1 - tail), rel=1e-12)


@pytest.mark.parametrize("kwargs", [dict(c_balance=1.0), dict(c_balance=0.0), dict(beta=0.0),
                                    dict(delta=1.0), dict(epsilon=-1.0)])
def test_stability_inputs_validation(kwargs):
    base = dict(c_balance=0.5, beta=1.0, delta=0.1, epsilon=0.1)
    base.update(kwargs)
    with pytest.raises(InvalidArgument):
        StabilityInputs(**base)


@pytest.mark.parametrize("kwargs", [dict(max_iters=0), dict(primal_tol=0.0), dict(dual_tol=-1.0),
                                    dict(penalty=0.0), dict(over_relax=2.0), dict(check_every=0)])
def test_solver_config_validation(kwargs):
    with pytest.raises(InvalidArgument):
        SolverConfig(**kwargs)


def test_iteration_cap_reports_nonconvergence():
    x0, A, y = _instance(64, 24, 8, k=5)
    rep = tv_min_eq(A, y, SolverConfig(max_iters=1))
    assert not rep.converged
    assert rep.iterations <= 1
    rep = tv_min_noise(A, y + 0.3, 0.1, SolverConfig(max_iters=1))
    assert not rep.converged


def test_bad_dimensions():
    A = gaussian_matrix(4, 8, 0)
    with pytest.raises(InvalidArgument):
        tv_min_eq(A, np.zeros(5))
    with pytest.raises(InvalidArgument):
        tv_min_eq(A, np.zeros(4), shape=(3, 3))
    with pytest.raises(InvalidArgument):
        tv_min_noise(A, np.zeros(4), -0.1)


def test_determinism():
    x0, A, y = _instance(48, 20, 9, k=3)
    a, b = tv_min_eq(A, y + 0.01), tv_min_eq(A, y + 0.01)
    assert np.array_equal(a.solution, b.solution)


def test_two_dimensional_recovery():
    X0 = sparse_gradient_image(8, 2, 4, SeedSpec(2))
    A = gaussian_matrix(48, 64, SeedSpec(2, 1))
    rep = tv_min_eq(A, A.matrix @ X0.ravel(), shape=(8, 8))
    assert rep.solution.shape == (8, 8)
    assert rep.converged
    assert np.linalg.norm(rep.solution - X0) <= 1e-4 * np.linalg.norm(X0)
    lp = lp_oracle_tv_min(A, A.matrix @ X0.ravel(), shape=(8, 8))
    assert abs(rep.objective - tv_norm(lp)) <= 1e-6 * (1 + rep.objective)


def test_oracle_guard_and_infeasible():
    with pytest.raises(OracleScaleError):
        lp_oracle_tv_min(gaussian_matrix(10, 65, 0), np.zeros(10))
    A = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    with pytest.raises(InfeasibleProblem):
        lp_oracle_tv_min(A, [1.0, 2.0])
