"""TV-minimization programs.

* :func:`tv_min_eq` -- ``min ||Dx||_1  s.t.  Ax = y``
* :func:`tv_min_noise` -- ``min ||Dx||_1  s.t.  ||Ax - y||_2 <= eps``
* :func:`lp_oracle_tv_min` -- exact LP reference for small instances
* :func:`stability_bound` -- error bound for the noisy program

Both programs are solved by an ADMM splitting on ``u = Dx``.  The equality
program works in the affine solution set ``x = x_p + H w`` (``H`` an
orthonormal null-space basis) so every iterate is feasible; once the
support of ``u`` settles, a polished vertex is checked against the KKT
conditions and returned as soon as a dual certificate is found.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .core import as_ensemble, null_space_basis
from .errors import InvalidArgument, OracleScaleError, InfeasibleProblem, UnboundedProblem
from .operators import diff_matrix, ksum_largest, diff_nd
from .simplex import linprog_bland

ORACLE_MAX_N = 64


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 20000
    primal_tol: float = 1e-8
    dual_tol: float = 1e-8
    penalty: float = 1.0
    over_relax: float = 1.6
    check_every: int = 10

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidArgument("max_iters must be >= 1")
        if self.primal_tol <= 0 or self.dual_tol <= 0:
            raise InvalidArgument("tolerances must be positive")
        if self.penalty <= 0:
            raise InvalidArgument("penalty must be positive")
        if not 1.0 <= self.over_relax <= 1.9:
            raise InvalidArgument("over_relax must lie in [1, 1.9]")
        if self.check_every < 1:
            raise InvalidArgument("check_every must be >= 1")


@dataclass(frozen=True, eq=False)
class SolveReport:
    solution: np.ndarray
    objective: float
    primal_residual: float
    iterations: int
    converged: bool
    wall_time: float
    certified: bool = False
    penalty_changes: int = 0


@dataclass(frozen=True)
class StabilityInputs:
    c_balance: float
    beta: float
    delta: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.c_balance < 1.0:
            raise InvalidArgument("c_balance must lie in (0, 1)")
        if self.beta <= 0:
            raise InvalidArgument("beta must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise InvalidArgument("delta must lie in [0, 1)")
        if self.epsilon < 0:
            raise InvalidArgument("epsilon must be non-negative")


def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def _prepare(A, y, shape):
    ens = as_ensemble(A)
    a = ens.matrix
    m, n = a.shape
    if m < 1:
        raise InvalidArgument("need at least one measurement")
    shape = (n,) if shape is None else tuple(int(s) for s in shape)
    if int(np.prod(shape)) != n:
        raise InvalidArgument(f"shape {shape} does not match {n} columns")
    y = np.asarray(y, dtype=float).ravel()
    if y.size != m:
        raise InvalidArgument(f"y has length {y.size}, expected {m}")
    return ens, a, y, shape


def _direct_solve(a, y, shape, t0):
    x, *_ = np.linalg.lstsq(a, y, rcond=None)
    res = float(np.linalg.norm(a @ x - y))
    ok = res <= max(1e-10, 1e-10 * np.linalg.norm(y)) * 10
    return SolveReport(x.reshape(shape), float(np.abs(diff_nd(x.reshape(shape))).sum()),
                       res, 0, ok, time.perf_counter() - t0, certified=ok)


@dataclass
class _SupportCache:
    pinv_z: np.ndarray
    w_pol: np.ndarray
    g_pol: np.ndarray
    feasible: bool
    tries: int = 0
    next_try: int = 0


def tv_min_eq(A, y, cfg: SolverConfig | None = None, shape=None) -> SolveReport:
    """Solve ``min ||Dx||_1`` subject to ``Ax = y``.

    ``shape`` gives the signal layout for the multidimensional program
    (``A`` acts on the row-major ravel); it defaults to a 1-D signal.
    A run that exhausts ``max_iters`` returns ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    ens, a, y, shape = _prepare(A, y, shape)
    m, n = a.shape
    if m >= n:
        return _direct_solve(a, y, shape, t0)

    H = null_space_basis(ens).basis
    x_p = a.T @ scipy.linalg.solve(a @ a.T, y, assume_a="pos")
    D = diff_matrix(shape)
    B = np.asarray(D @ H)
    c = D @ x_p
    Bp = np.linalg.pinv(B)
    bnorm = np.linalg.norm(B, 2)

    rho = cfg.penalty
    alpha = cfg.over_relax
    w = np.zeros(H.shape[1])
    g = c.copy()
    u = _soft(g, 1.0 / rho)
    lam = np.zeros_like(g)
    changes = 0
    converged = certified = False
    cache: dict[bytes, _SupportCache] = {}
    prev_key = None
    stable = 0
    it = 0

    def certify(key, supp):
        entry = cache.get(key)
        if entry is None:
            Z = ~supp
            BZ = B[Z]
            pz = np.linalg.pinv(BZ) if BZ.shape[0] else np.zeros((B.shape[1], 0))
            w_pol = w + pz @ (-c[Z] - BZ @ w) if BZ.shape[0] else w.copy()
            g_pol = c + B @ w_pol
            scale = max(1.0, np.abs(g_pol).max())
            feas = bool(np.all(np.abs(g_pol[Z]) <= 1e-9 * scale))
            entry = _SupportCache(pz, w_pol, g_pol, feas)
            cache[key] = entry
        entry.tries += 1
        if not entry.feasible:
            return None
        Z = ~supp
        sigma = np.clip(rho * lam, -1.0, 1.0)
        sigma[supp] = np.sign(entry.g_pol[supp])
        resid = B.T @ sigma
        if Z.any():
            sigma[Z] += entry.pinv_z.T @ (-resid)
        if np.linalg.norm(B.T @ sigma) > 1e-9 * max(1.0, bnorm) * np.sqrt(sigma.size):
            return None
        if Z.any() and np.abs(sigma[Z]).max() > 1.0 + cfg.dual_tol:
            return None
        return entry

    polished = None
    while it < cfg.max_iters:
        it += 1
        w = Bp @ (u - lam - c)
        g = c + B @ w
        gh = alpha * g + (1.0 - alpha) * u
        u_old = u
        u = _soft(gh + lam, 1.0 / rho)
        lam = lam + gh - u

        if it % cfg.check_every:
            continue
        r_norm = np.linalg.norm(g - u)
        s_norm = rho * np.linalg.norm(u - u_old)
        eps_pri = cfg.primal_tol * max(np.linalg.norm(g), np.linalg.norm(u), 1e-12)
        eps_dual = cfg.dual_tol * max(rho * np.linalg.norm(lam), 1e-12)

        supp = u != 0.0
        key = np.packbits(supp).tobytes()
        stable = stable + 1 if key == prev_key else 0
        prev_key = key
        if stable >= 2:
            entry = cache.get(key)
            if entry is None or it >= entry.next_try:
                hit = certify(key, supp)
                if hit is not None:
                    polished = hit
                    certified = converged = True
                    break
                entry = cache[key]
                entry.next_try = it + cfg.check_every * min(2 ** entry.tries, 64)

        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            hit = certify(key, supp)
            if hit is not None:
                polished = hit
                certified = True
            break
        if changes < 100:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                lam /= 2.0
                changes += 1
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                lam *= 2.0
                changes += 1

    w_final = polished.w_pol if polished is not None else w
    x = (x_p + H @ w_final).reshape(shape)
    return SolveReport(
        solution=x,
        objective=float(np.abs(diff_nd(x)).sum()),
        primal_residual=float(np.linalg.norm(a @ x.ravel() - y)),
        iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        certified=certified,
        penalty_changes=changes,
    )


def _proj_ball(v, radius):
    nv = np.linalg.norm(v)
    return v if nv <= radius else v * (radius / nv)


def _noise_polish(a, y, epsilon, D, supp, signs, dual_tol):
    """Exact minimizer for a guessed jump set, or ``None`` if KKT fails.

    With ``(Dx)_Z = 0`` forced, ``x = P c`` is constant on connected pieces
    and the program becomes a linear objective over an ellipsoid, solved in
    closed form.  The point is accepted only if multipliers
    ``D^T sigma + mu A^T (Ax - y) = 0`` exist with ``sigma_S = signs``,
    ``|sigma_Z| <= 1`` and ``mu >= 0``.
    """
    m, n = a.shape
    Z = ~supp
    Dz = D[Z]
    absz = abs(Dz)
    p, labels = connected_components(absz.T @ absz, directed=False)
    if p < 2 or p > m:
        return None
    P = sp.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, p))
    F = np.asarray((P.T @ a.T).T)
    sigma = np.zeros(D.shape[0])
    sigma[supp] = signs
    f = P.T @ (D.T @ sigma)
    Q, R = np.linalg.qr(F)
    if np.abs(np.diag(R)).min() <= 1e-10 * np.abs(np.diag(R)).max():
        return None
    qy = Q.T @ y
    c_ls = scipy.linalg.solve_triangular(R, qy)
    rad2 = epsilon ** 2 - max(float(y @ y - qy @ qy), 0.0)
    if rad2 <= 0:
        return None
    h = scipy.linalg.solve_triangular(R, scipy.linalg.solve_triangular(R, f, trans="T"))
    q = float(f @ h)
    if q <= 0:
        return None
    x = P @ (c_ls - np.sqrt(rad2 / q) * h)
    g = D @ x
    if np.any(np.sign(g[supp]) != signs):
        return None
    r = a @ x - y
    Mz = np.column_stack((Dz.T.toarray(), a.T @ r))
    rhs = -(D[supp].T @ signs)
    sol, *_ = np.linalg.lstsq(Mz, rhs, rcond=None)
    if np.linalg.norm(Mz @ sol - rhs) > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        return None
    if sol[-1] < -1e-12 or (sol.size > 1 and np.abs(sol[:-1]).max() > 1.0 + dual_tol):
        return None
    return x


def tv_min_noise(A, y, epsilon: float, cfg: SolverConfig | None = None,
                 shape=None) -> SolveReport:
    """Solve ``min ||Dx||_1`` subject to ``||Ax - y||_2 <= epsilon``.

    ``epsilon == 0`` is the equality program.  The returned point is made
    exactly feasible by a final least-norm correction of the ADMM iterate.
    """
    if epsilon < 0:
        raise InvalidArgument("epsilon must be non-negative")
    cfg = cfg or SolverConfig()
    if epsilon == 0:
        return tv_min_eq(A, y, cfg, shape)
    t0 = time.perf_counter()
    ens, a, y, shape = _prepare(A, y, shape)
    m, n = a.shape

    # a constant signal inside the residual ball has zero TV
    ones = np.ones(n)
    a1 = a @ ones
    level = float(a1 @ y / (a1 @ a1)) if a1 @ a1 > 0 else 0.0
    if np.linalg.norm(level * a1 - y) <= epsilon:
        x = np.full(shape, level)
        return SolveReport(x, 0.0, float(np.linalg.norm(level * a1 - y)), 0, True,
                           time.perf_counter() - t0, certified=True)

    D = diff_matrix(shape)
    s = np.linalg.norm(a, 2)
    at = a / s
    yt = y / s
    et = epsilon / s
    K = np.asarray((D.T @ D).todense()) + at.T @ at
    chol = scipy.linalg.cho_factor(K)

    rho = cfg.penalty
    alpha = cfg.over_relax
    x = np.zeros(n)
    u = np.zeros(D.shape[0])
    r = _proj_ball(-yt, et)
    lam1 = np.zeros_like(u)
    lam2 = np.zeros(m)
    changes = 0
    converged = certified = False
    tried = set()
    prev_key = None
    stable = 0
    it = 0
    while it < cfg.max_iters:
        it += 1
        rhs = D.T @ (u - lam1) + at.T @ (r + yt - lam2)
        x = scipy.linalg.cho_solve(chol, rhs)
        Dx = D @ x
        Ax = at @ x
        gh = alpha * Dx + (1 - alpha) * u
        ah = alpha * Ax + (1 - alpha) * (r + yt)
        u_old, r_old = u, r
        u = _soft(gh + lam1, 1.0 / rho)
        r = _proj_ball(ah - yt + lam2, et)
        lam1 = lam1 + gh - u
        lam2 = lam2 + ah - r - yt

        if it % cfg.check_every:
            continue
        r_norm = np.hypot(np.linalg.norm(Dx - u), np.linalg.norm(Ax - r - yt))
        s_norm = rho * np.linalg.norm(D.T @ (u - u_old) + at.T @ (r - r_old))
        eps_pri = cfg.primal_tol * max(np.hypot(np.linalg.norm(Dx), np.linalg.norm(Ax)),
                                       np.hypot(np.linalg.norm(u), np.linalg.norm(r + yt)),
                                       1e-12)
        eps_dual = cfg.dual_tol * max(rho * np.linalg.norm(D.T @ lam1 + at.T @ lam2), 1e-12)

        supp = u != 0.0
        signs = np.sign(u[supp])
        key = np.packbits(supp).tobytes() + np.packbits(signs > 0).tobytes()
        stable = stable + 1 if key == prev_key else 0
        prev_key = key
        if stable >= 2 and key not in tried and supp.any():
            tried.add(key)
            xp = _noise_polish(a, y, epsilon, D, supp, signs, cfg.dual_tol)
            if xp is not None:
                x = xp
                converged = certified = True
                break
        if r_norm <= eps_pri and s_norm <= eps_dual:
            converged = True
            break
        if changes < 100:
            if r_norm > 10.0 * s_norm:
                rho *= 2.0
                lam1 /= 2.0
                lam2 /= 2.0
                changes += 1
            elif s_norm > 10.0 * r_norm:
                rho /= 2.0
                lam1 *= 2.0
                lam2 *= 2.0
                changes += 1

    # least-norm move onto the residual ball
    resid = a @ x - y
    target = _proj_ball(resid, epsilon)
    x = x - a.T @ scipy.linalg.solve(a @ a.T, resid - target, assume_a="pos")
    x = x.reshape(shape)
    return SolveReport(
        solution=x,
        objective=float(np.abs(diff_nd(x)).sum()),
        primal_residual=float(np.linalg.norm(a @ x.ravel() - y)),
        iterations=it,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        certified=certified,
        penalty_changes=changes,
    )


def lp_oracle_tv_min(A, y, shape=None) -> np.ndarray:
    """Exact TV minimizer of a small instance through its LP reformulation.

    ``min sum(u+ + u-)  s.t.  Dx = u+ - u-,  Ax = y,  u+/- >= 0`` with the
    free ``x`` split into two non-negative parts; solved by the Bland-rule
    simplex.  Raises :class:`OracleScaleError` for more than 64 unknowns and
    :class:`InfeasibleProblem` when ``y`` is inconsistent.
    """
    ens, a, y, shape = _prepare(A, y, shape)
    m, n = a.shape
    if n > ORACLE_MAX_N:
        raise OracleScaleError(f"LP oracle is limited to {ORACLE_MAX_N} unknowns, got {n}")
    D = np.asarray(diff_matrix(shape).todense())
    p = D.shape[0]
    Aeq = np.block([
        [D, -D, -np.eye(p), np.eye(p)],
        [a, -a, np.zeros((m, p)), np.zeros((m, p))],
    ])
    beq = np.concatenate((np.zeros(p), y))
    cost = np.concatenate((np.zeros(2 * n), np.ones(2 * p)))
    res = linprog_bland(cost, A_eq=Aeq, b_eq=beq)
    if res.status == "infeasible":
        raise InfeasibleProblem("measurements are inconsistent with A")
    if res.status == "unbounded":  # cannot happen: objective is bounded below by 0
        raise UnboundedProblem("TV LP reported unbounded")
    x = res.x[:n] - res.x[n:2 * n]
    return x.reshape(shape)


def stability_bound(x, inputs: StabilityInputs, M: int, sigma_min: float,
                    form: str = "sigma_min") -> float:
    """Error bound for the noisy program at signal ``x``.

    ``(2(1+C)/(beta(1-C))) * tail / sqrt(N) + (2 + 4(1+C)/(beta(1-C))) * eps / s``
    where ``tail`` is the TV of ``x`` outside its best ``floor(delta N)``
    differences and ``s`` is ``sigma_min`` (``form="sigma_min"``) or
    ``sqrt(N) - sqrt(M)`` (``form="asymptotic"``).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    g = diff_nd(x)
    k = int(np.floor(inputs.delta * n))
    k = min(k, g.size)
    tail = max(float(np.abs(g).sum()) - ksum_largest(g, k), 0.0)
    if form == "sigma_min":
        denom = sigma_min
    elif form == "asymptotic":
        denom = np.sqrt(n) - np.sqrt(M)
    else:
        raise InvalidArgument(f"unknown form {form!r}")
    if denom <= 0:
        raise InvalidArgument("singular-value denominator must be positive")
    C, beta = inputs.c_balance, inputs.beta
    lead = 2.0 * (1.0 + C) / (beta * (1.0 - C))
    return lead * tail / np.sqrt(n) + (2.0 + 2.0 * lead) * inputs.epsilon / denom
