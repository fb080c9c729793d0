"""Verification of null-space-type conditions for TV recovery.

Exact (exponential-cost) certificates for tiny instances and randomized
estimators for the almost-Euclidean constant, the partial-TV supremum and the
small-TV probability of a Gaussian vector.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import NullBasis, as_ensemble, as_seed, null_space_basis
from .errors import CertificateScaleError, InvalidArgument
from .operators import diff_matrix, ksum_largest
from .simplex import linprog_bland

CERT_MAX_N = 14
CERT_MAX_K = 3


@dataclass(frozen=True)
class CertReport:
    holds: bool
    worst_support: tuple[int, ...]
    worst_ratio: float
    work: int
    threshold: float = 1.0


@dataclass(frozen=True)
class DeviationEstimate:
    gamma: float
    n: int
    empirical_log_prob_per_n: float
    bound_exponent: float
    samples: int
    hits: int = 0
    best_t: int | None = None
    loosest_exponent: float = float("nan")

    @property
    def probability(self) -> float:
        return self.hits / self.samples


# ---------------------------------------------------------------------------
# exact certificates


def _null_basis_of(A) -> np.ndarray:
    ens = as_ensemble(A)
    m, n = ens.matrix.shape
    if m == 0:
        return np.eye(n)
    if m >= n:
        return np.zeros((n, 0))
    return null_space_basis(ens).basis


def _support_lp(BK, BKc, s):
    """``max s^T BK w  s.t.  ||BKc w||_1 <= 1``; returns the optimum (inf if unbounded)."""
    r = BK.shape[1]
    q = BKc.shape[0]
    # variables: w+ (r), w- (r), t (q)
    Bp = np.hstack((BKc, -BKc))
    A_ub = np.vstack((
        np.hstack((Bp, -np.eye(q))),
        np.hstack((-Bp, -np.eye(q))),
        np.concatenate((np.zeros(2 * r), np.ones(q)))[None, :],
    ))
    b_ub = np.concatenate((np.zeros(2 * q), [1.0]))
    obj = s @ BK
    cost = np.concatenate((-obj, obj, np.zeros(q)))
    res = linprog_bland(cost, A_ub=A_ub, b_ub=b_ub)
    if res.status == "unbounded":
        return np.inf
    if res.status != "optimal":  # the origin is always feasible
        raise RuntimeError(f"support LP failed with status {res.status}")
    return max(-res.fun, 0.0)


def _enumerate(A, k: int, threshold: float) -> CertReport:
    ens = as_ensemble(A)
    n = ens.matrix.shape[1]
    if n > CERT_MAX_N or k > CERT_MAX_K:
        raise CertificateScaleError(
            f"exact certificate limited to N <= {CERT_MAX_N}, k <= {CERT_MAX_K}; got N={n}, k={k}")
    if k < 0:
        raise InvalidArgument("k must be non-negative")
    H = _null_basis_of(ens)
    if H.shape[1] == 0:
        return CertReport(True, (), 0.0, 0, threshold)
    B = np.asarray(diff_matrix(n) @ H)
    if np.linalg.matrix_rank(B) < H.shape[1]:
        # a nonzero null-space element with zero TV (a constant); recovery is never unique
        return CertReport(False, (), np.inf, 0, threshold)
    size = min(k, n - 1)
    if size == 0:
        return CertReport(0.0 < threshold, (), 0.0, 0, threshold)

    worst, worst_K, work = -1.0, (), 0
    rows = np.arange(n - 1)
    for K in itertools.combinations(range(n - 1), size):
        Kc = np.setdiff1d(rows, K)
        BK, BKc = B[list(K)], B[Kc]
        # s and -s give the same optimum, so fix the first sign
        for tail in itertools.product((1.0, -1.0), repeat=size - 1):
            s = np.array((1.0,) + tail)
            val = _support_lp(BK, BKc, s)
            work += 1
            if val > worst:
                worst, worst_K = val, K
        if np.isinf(worst):
            break
    return CertReport(bool(worst < threshold), tuple(int(i) for i in worst_K), float(worst),
                      work, threshold)


def null_space_condition(A, k: int) -> CertReport:
    """Exact check that ``||(Dz)_K||_1 < ||(Dz)_{K^c}||_1`` on ``null(A)`` for all ``|K| <= k``.

    Supports of the largest admissible size suffice since the ratio is
    monotone under enlarging ``K``.  Each (support, sign pattern) pair is one
    LP; ``work`` counts them.
    """
    return _enumerate(A, k, 1.0)


def balanced_condition(A, k: int, c: float) -> CertReport:
    if not 0.0 < c < 1.0:
        raise InvalidArgument("c must lie in (0, 1)")
    return _enumerate(A, k, float(c))


# ---------------------------------------------------------------------------
# randomized estimators


def _as_basis(H) -> np.ndarray:
    if isinstance(H, NullBasis):
        return H.basis
    return np.asarray(H, dtype=float)


def almost_euclidean_beta(H, restarts: int, seed, iters: int = 500) -> float:
    """Upper estimate of ``min ||Dx||_1 / (sqrt(N) ||x||_2)`` over ``x`` in ``span(H)``.

    Projected subgradient descent on the unit sphere of the subspace.  All
    steps go through the projector ``H H^T``, so the estimate depends only on
    the subspace.  Restart ``i`` always uses the same random start, hence the
    result is non-increasing in ``restarts``.
    """
    if restarts < 1:
        raise InvalidArgument("restarts must be >= 1")
    basis = _as_basis(H)
    n, r = basis.shape
    if r == 0:
        return float("inf")
    P = basis @ basis.T
    D = diff_matrix(n)
    root_n = np.sqrt(n)
    spec = as_seed(seed)
    best = np.inf
    for i in range(restarts):
        g = spec.spawn(i).rng().standard_normal(n)
        x = P @ g
        x /= np.linalg.norm(x)
        for t in range(1, iters + 1):
            dx = D @ x
            val = np.abs(dx).sum() / root_n
            if val < best:
                best = val
            if val == 0.0:
                break
            sub = P @ (D.T @ np.sign(dx)) / root_n
            sub -= (sub @ x) * x  # tangent component
            x = x - sub / np.sqrt(t)
            x = P @ x
            nx = np.linalg.norm(x)
            if nx == 0.0:
                break
            x /= nx
        if best == 0.0:
            break
    return float(best)


def partial_tv_sup(H, k: int, trials: int, seed, max_steps: int = 100) -> float:
    """Lower estimate of ``sup ksum_largest(Dz, k)`` over unit ``z`` in ``span(H)``.

    The inner maximum over supports is exact; the outer one uses monotone
    ascent ``z <- normalize(P D^T sigma)`` with ``sigma`` the top-``k`` sign
    pattern of ``Dz``.
    """
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    basis = _as_basis(H)
    n, r = basis.shape
    if k < 0 or k > n - 1:
        raise InvalidArgument(f"k must lie in [0, {n - 1}]")
    if k == 0 or r == 0:
        return 0.0
    P = basis @ basis.T
    D = diff_matrix(n)
    spec = as_seed(seed)
    best = 0.0
    for i in range(trials):
        x = P @ spec.spawn(i).rng().standard_normal(n)
        x /= np.linalg.norm(x)
        dx = D @ x
        val = ksum_largest(dx, k)
        for _ in range(max_steps):
            sigma = np.zeros_like(dx)
            top = np.argpartition(-np.abs(dx), k - 1)[:k]
            sigma[top] = np.sign(dx[top])
            x_new = P @ (D.T @ sigma)
            nx = np.linalg.norm(x_new)
            if nx == 0.0:
                break
            x_new /= nx
            dx_new = D @ x_new
            val_new = ksum_largest(dx_new, k)
            if val_new <= val * (1 + 1e-13):
                break
            x, dx, val = x_new, dx_new, val_new
        best = max(best, val)
    return float(best)


def _entropy(p: float) -> float:
    return -p * np.log(p) - (1 - p) * np.log(1 - p)


def deviation_exponent(T: int, gamma: float) -> float:
    """``-[H(1/T) + (1 - 1/T) ln(T gamma / sqrt(2 pi))]`` for one value of ``T``."""
    if T < 2:
        raise InvalidArgument("T must be >= 2")
    if gamma <= 0:
        return np.inf
    p = 1.0 / T
    return -(_entropy(p) + (1 - p) * np.log(T * gamma / np.sqrt(2 * np.pi)))


def _admissible(T: int, gamma: float) -> bool:
    return T * gamma / np.sqrt(2 * np.pi) < 1 - 1.0 / T


def tv_small_prob(n: int, gamma: float, samples: int, seed, t_max: int = 64,
                  chunk: int = 100_000) -> DeviationEstimate:
    """Monte Carlo estimate of ``P(||Dx||_1 <= gamma n)`` for standard Gaussian ``x``.

    ``bound_exponent`` is the largest exponent over admissible integer
    ``T <= t_max`` (those with ``T gamma / sqrt(2 pi) < 1 - 1/T``), i.e. the
    tightest of the per-``T`` bounds; ``loosest_exponent`` is the smallest.
    Both are ``nan`` when no ``T`` is admissible.
    """
    if samples < 1000:
        raise InvalidArgument("samples must be >= 1000")
    if n < 2:
        raise InvalidArgument("n must be >= 2")
    if gamma < 0:
        raise InvalidArgument("gamma must be non-negative")
    rng = as_seed(seed).rng()
    hits = 0
    done = 0
    while done < samples:
        b = min(chunk, samples - done)
        x = rng.standard_normal((b, n))
        tv = np.abs(np.diff(x, axis=1)).sum(axis=1)
        hits += int(np.count_nonzero(tv <= gamma * n))
        done += b
    p_hat = hits / samples if hits else 3.0 / samples
    exps = {T: deviation_exponent(T, gamma) for T in range(2, t_max + 1)
            if gamma > 0 and _admissible(T, gamma)}
    if exps:
        best_t = max(exps, key=exps.get)
        tight, loose = exps[best_t], min(exps.values())
    elif gamma == 0:
        best_t, tight, loose = None, np.inf, np.inf
    else:
        best_t, tight, loose = None, np.nan, np.nan
    return DeviationEstimate(float(gamma), int(n), float(np.log(p_hat) / n), float(tight),
                             int(samples), hits, best_t, float(loose))
