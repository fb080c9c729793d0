"""Gaussian widths of TV-constrained sets.

``width_mc`` estimates ``E sup <g, x>`` over the convex set
``{||x||_2 <= 1, ||Dx||_1 <= 4 sqrt(d k)}``.  The lower-bound construction
produces, for each ``g``, an explicit point of the nonconvex set ``S`` (unit
ball points whose TV is dominated by ``k`` differences), so together they
bracket the width of ``S``.  Closed-form bounds return :class:`Bound`, a
float that also carries ``vacuous`` / ``asymptotic`` markers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import as_seed
from .errors import EstimatorUnstable, InvalidArgument, OutOfRegime, UnsupportedLength
from .operators import diff_matrix, restrict
from .solvers import SolverConfig


class Bound(float):
    """A float with provenance flags.

    ``vacuous`` marks a bound clamped to a trivial value; ``asymptotic`` marks
    one that only holds for large enough arguments.  ``raw`` keeps the
    unclamped value.
    """

    vacuous: bool
    asymptotic: bool
    raw: float

    def __new__(cls, value, *, vacuous: bool = False, asymptotic: bool = False, raw=None):
        obj = super().__new__(cls, value)
        obj.vacuous = vacuous
        obj.asymptotic = asymptotic
        obj.raw = float(value) if raw is None else float(raw)
        return obj

    def __repr__(self):
        flags = [f for f in ("vacuous", "asymptotic") if getattr(self, f)]
        return f"Bound({float(self)!r}{', ' + ', '.join(flags) if flags else ''})"


@dataclass(frozen=True, eq=False)
class WidthEstimate:
    mean: float
    std_error: float
    samples: int
    per_sample_solver_tol: float
    rejects: int = 0
    values: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


@dataclass(frozen=True, eq=False)
class LowerBoundConstruction:
    mu: float
    nu: float
    l_block: float
    l_int: int
    h_blocks: int
    witness: np.ndarray
    support: tuple[int, ...]
    value: float
    in_s: bool

    def l2_constraint(self) -> float:
        """``nu^2 N + mu^2 K`` (must be <= 1)."""
        return self.nu ** 2 * self.witness.size + self.mu ** 2 * len(self.support)

    def l1_constraint(self) -> float:
        """``(2K - 1) mu - 2 nu N / L`` (must be >= 0)."""
        k = len(self.support)
        return (2 * k - 1) * self.mu - 2 * self.nu * self.witness.size / self.l_block


def _summary(values, tol, rejects) -> WidthEstimate:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise InvalidArgument("need at least 2 samples")
    mean = math.fsum(v) / v.size
    var = math.fsum((v - mean) ** 2) / (v.size - 1)
    return WidthEstimate(mean, math.sqrt(var / v.size), int(v.size), tol, rejects, v)


# ---------------------------------------------------------------------------
# Monte Carlo over the relaxed set


def _proj_l1_ball(v, radius):
    """Euclidean projection onto ``{||u||_1 <= radius}`` (sort-based)."""
    a = np.abs(v)
    if a.sum() <= radius:
        return v
    mu = np.sort(a)[::-1]
    cs = np.cumsum(mu)
    j = np.arange(1, a.size + 1)
    rho = np.flatnonzero(mu * j > cs - radius)[-1]
    theta = (cs[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


class _WidthSolver:
    """ADMM for ``max g^T x  s.t.  ||x||_2 <= 1, ||Dx||_1 <= tau``.

    Split ``v = x`` (ball) and ``u = Dx`` (l1 ball).  The primal value is
    read off a feasible rescaling of ``v``; the dual value
    ``||g - D^T w||_2 + tau ||w||_inf`` bounds the optimum from above, so the
    gap certifies each sample.
    """

    def __init__(self, shape, tau, cfg: SolverConfig, gap_tol: float):
        self.D = diff_matrix(shape)
        self.n = int(np.prod(shape))
        self.tau = tau
        self.cfg = cfg
        self.gap_tol = gap_tol
        K = (sp.identity(self.n) + self.D.T @ self.D).tocsc()
        self.lu = spla.splu(K)

    def bounds(self, g, v, w):
        D, tau = self.D, self.tau
        tv = np.abs(D @ v).sum()
        x = v * min(1.0, tau / tv) if tv > 0 else v
        lower = float(g @ x)
        upper = float(np.linalg.norm(g - D.T @ w) + tau * np.abs(w).max())
        return lower, upper

    def solve(self, g):
        D, tau, cfg = self.D, self.tau, self.cfg
        gn = np.linalg.norm(g)
        if gn == 0.0:
            return 0.0, True
        if np.abs(D @ g).sum() <= tau * gn:
            return float(gn), True
        rho = cfg.penalty
        alpha = cfg.over_relax
        x = g / gn
        v = x.copy()
        u = D @ x
        lam_v = np.zeros(self.n)
        lam_u = np.zeros_like(u)
        changes = 0
        for it in range(1, cfg.max_iters + 1):
            rhs = g / rho + (v - lam_v) + D.T @ (u - lam_u)
            x = self.lu.solve(rhs)
            Dx = D @ x
            xh = alpha * x + (1 - alpha) * v
            dh = alpha * Dx + (1 - alpha) * u
            v_old, u_old = v, u
            v = xh + lam_v
            nv = np.linalg.norm(v)
            if nv > 1.0:
                v = v / nv
            u = _proj_l1_ball(dh + lam_u, tau)
            lam_v += xh - v
            lam_u += dh - u
            if it % cfg.check_every:
                continue
            lower, upper = self.bounds(g, v, rho * lam_u)
            if upper - lower <= self.gap_tol * max(1.0, abs(upper)):
                return lower, True
            r = np.hypot(np.linalg.norm(x - v), np.linalg.norm(Dx - u))
            s = rho * np.linalg.norm((v - v_old) + D.T @ (u - u_old))
            if changes < 100:
                if r > 10 * s:
                    rho *= 2.0
                    lam_v /= 2.0
                    lam_u /= 2.0
                    changes += 1
                elif s > 10 * r:
                    rho /= 2.0
                    lam_v *= 2.0
                    lam_u *= 2.0
                    changes += 1
        lower, _ = self.bounds(g, v, rho * lam_u)
        return lower, False


def _grid_shape(n: int, d: int):
    if d < 1:
        raise InvalidArgument("d must be >= 1")
    if n < 2:
        raise InvalidArgument("n must be >= 2")
    return (n,) * d


def width_mc(n: int, k: int, d: int, samples: int, seed, cfg: SolverConfig | None = None,
             gap_tol: float = 1e-6, tv_radius: float | None = None) -> WidthEstimate:
    """Monte Carlo Gaussian width of ``{||x||_2 <= 1, ||Dx||_1 <= 4 sqrt(d) sqrt(k)}``.

    ``n`` is the side length (the signal has ``n**d`` entries).  Sample ``i``
    uses Gaussian stream ``seed.spawn(i)``, the same stream
    :func:`lower_bound_mc` uses.  A sample whose duality gap does not close
    within the iteration budget is replaced by a fresh stream past
    ``samples``; more than 10% replacements raise :class:`EstimatorUnstable`.
    ``tv_radius`` overrides the radius (``inf`` drops the TV constraint).
    """
    shape = _grid_shape(n, d)
    if samples < 2:
        raise InvalidArgument("samples must be >= 2")
    if k < 0:
        raise InvalidArgument("k must be non-negative")
    cfg = cfg or SolverConfig(max_iters=20000, check_every=10)
    tau = 4.0 * math.sqrt(d) * math.sqrt(k) if tv_radius is None else float(tv_radius)
    solver = _WidthSolver(shape, tau, cfg, gap_tol)
    spec = as_seed(seed)
    size = int(np.prod(shape))
    values = []
    rejects = 0
    budget = max(1, samples // 10)
    extra = samples
    for i in range(samples):
        stream = i
        while True:
            g = spec.spawn(stream).rng().standard_normal(size)
            val, ok = solver.solve(g)
            if ok:
                break
            rejects += 1
            if rejects > budget:
                raise EstimatorUnstable(f"{rejects} of {samples} width samples failed to certify")
            stream = extra
            extra += 1
        values.append(val)
    return _summary(values, gap_tol, rejects)


# ---------------------------------------------------------------------------
# adversarial construction


def _check_regime(n: int, k: int):
    if k < 1:
        raise OutOfRegime("construction needs k >= 1")
    if k > n / 3 - 1:
        raise OutOfRegime(f"construction needs k <= n/3 - 1, got n={n}, k={k}")


def lower_bound_construction(g, n: int, k: int) -> LowerBoundConstruction:
    """Explicit point of ``S`` aligned with ``g``.

    ``g`` is cut into ``h_blocks`` blocks of length ``l_int`` and a tail; the
    witness is ``nu * sign(<g_i, 1>)`` on each block and
    ``mu * sign(<g_tail, a>) * a`` on the tail, where ``a`` ends with ``k``
    alternating ones.  ``in_s`` reports whether the ``k`` tail jumps carry at
    least half of the witness TV.
    """
    g = np.asarray(g, dtype=float).ravel()
    if g.size != n:
        raise InvalidArgument(f"g has length {g.size}, expected {n}")
    _check_regime(n, k)
    mu = 1.0 / math.sqrt(2 * k)
    nu = 1.0 / math.sqrt(2 * n)
    L = 2.0 * math.sqrt(n * k) / (2 * k - 1)
    l_int = max(1, int(round(L)))
    H = (n - max(k + 1, l_int)) // l_int
    tail = n - H * l_int
    a = np.zeros(tail)
    a[tail - k:] = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    gt = np.empty(H + 1)
    gt[:H] = g[:H * l_int].reshape(H, l_int).sum(axis=1)
    gt[H] = g[H * l_int:] @ a
    s = np.where(gt >= 0, 1.0, -1.0)
    x = np.empty(n)
    x[:H * l_int] = np.repeat(nu * s[:H], l_int)
    x[H * l_int:] = mu * s[H] * a
    support = tuple(range(n - k - 1, n - 1))
    on, off = restrict(np.diff(x), support)
    value = nu * np.abs(gt[:H]).sum() + mu * abs(gt[H])
    in_s = bool(np.linalg.norm(x) <= 1.0 + 1e-12 and on >= off)
    return LowerBoundConstruction(mu, nu, L, l_int, int(H), x, support, float(value), in_s)


def lower_bound_mc(n: int, k: int, samples: int, seed) -> WidthEstimate:
    """Mean of ``<x(g), g>`` over Gaussian ``g`` (streams shared with :func:`width_mc`)."""
    _check_regime(n, k)
    spec = as_seed(seed)
    vals = [lower_bound_construction(spec.spawn(i).rng().standard_normal(n), n, k).value
            for i in range(samples)]
    return _summary(vals, 0.0, 0)


def lower_bound_expectation(n: int, k: int) -> float:
    """Exact mean of the construction value: ``nu H sqrt(2l/pi) + mu sqrt(2k/pi)``."""
    _check_regime(n, k)
    mu = 1.0 / math.sqrt(2 * k)
    nu = 1.0 / math.sqrt(2 * n)
    L = 2.0 * math.sqrt(n * k) / (2 * k - 1)
    l_int = max(1, int(round(L)))
    H = (n - max(k + 1, l_int)) // l_int
    return nu * H * math.sqrt(2 * l_int / math.pi) + mu * math.sqrt(2 * k / math.pi)


# ---------------------------------------------------------------------------
# closed forms


def width_upper_bound_1d(n: int, k: int) -> Bound:
    if n <= 1 or k <= 1:
        raise OutOfRegime("upper bound derivation needs n > 1 and k > 1")
    val = (4 * math.sqrt(2) + 4) * (n * k) ** 0.25 * math.sqrt(2 * (0.5 + math.log(n)))
    return Bound(val)


def width_upper_bound_nd(n: int, k: int, d: int) -> Bound:
    if d < 2:
        raise InvalidArgument("d must be >= 2")
    if n < 2 or n & (n - 1):
        raise UnsupportedLength(f"side {n} is not a power of two")
    if k < 1:
        raise OutOfRegime("k must be >= 1")
    base = 8 * math.sqrt(d) * (2 ** d - 1) * math.sqrt(k) * math.sqrt(2 * (0.5 + d * math.log(n)))
    if d == 2:
        factor = math.log2(n)
    else:
        r = 2.0 ** (1 - d / 2)
        factor = r / (1 - r)
    return Bound(base * factor + math.sqrt(3))


def width_lower_bound_1d(n: int, k: int) -> Bound:
    return Bound(math.sqrt(math.pi) / 4 * (n * k) ** 0.25, asymptotic=True)


def measurement_lower_bound(n: int, k: int, eta: float) -> Bound:
    """``pi/16 sqrt(nk) - 4 sqrt(ln(4/eta)) sqrt(n)``, clamped at 0 (flagged vacuous)."""
    if not 0.0 < eta < 1.0:
        raise InvalidArgument("eta must lie in (0, 1)")
    raw = math.pi / 16 * math.sqrt(n * k) - 4 * math.sqrt(math.log(4 / eta)) * math.sqrt(n)
    return Bound(max(raw, 0.0), vacuous=raw <= 0, asymptotic=True, raw=raw)


def required_measurements(n: int, k: int, d: int = 1) -> Bound:
    """Sufficient measurement count: the squared width upper bound."""
    w = width_upper_bound_1d(n, k) if d == 1 else width_upper_bound_nd(n, k, d)
    total = n ** d
    return Bound(float(w) ** 2, vacuous=float(w) ** 2 >= total)
