"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Solves ``min c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0``.  Meant
for desk-scale reference problems (a few hundred columns); pivoting is done
on a full numpy tableau and the final vertex is recomputed from the original
data by solving with the optimal basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleProblem, UnboundedProblem


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    fun: float
    status: str  # "optimal" | "infeasible" | "unbounded"
    pivots: int
    basis: tuple[int, ...]


class _Tableau:
    def __init__(self, A, b, basis, tol):
        m, n = A.shape
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = list(basis)
        self.tol = tol
        self.pivots = 0

    @property
    def m(self):
        return self.T.shape[0] - 1

    def set_objective(self, c):
        n = self.T.shape[1] - 1
        self.T[-1, :] = 0.0
        self.T[-1, :len(c)] = c
        for i, j in enumerate(self.basis):
            if self.T[-1, j] != 0.0:
                self.T[-1] -= self.T[-1, j] * self.T[i]
        self.T[-1, n] = self.T[-1, n]

    def pivot(self, i, j):
        T = self.T
        T[i] /= T[i, j]
        col = T[:, j].copy()
        col[i] = 0.0
        T -= np.outer(col, T[i])
        T[:, j] = 0.0
        T[i, j] = 1.0
        self.basis[i] = j
        self.pivots += 1

    def run(self, allowed, max_pivots):
        """Bland iterations over columns flagged in ``allowed``."""
        T = self.T
        n = T.shape[1] - 1
        while True:
            if self.pivots >= max_pivots:
                raise RuntimeError("simplex pivot limit reached")
            red = T[-1, :n]
            cand = np.flatnonzero((red < -self.tol) & allowed)
            if cand.size == 0:
                return "optimal"
            j = int(cand[0])
            colj = T[:-1, j]
            rows = np.flatnonzero(colj > self.tol)
            if rows.size == 0:
                return "unbounded"
            ratios = T[rows, n] / colj[rows]
            best = ratios.min()
            ties = rows[ratios <= best + self.tol * max(1.0, abs(best))]
            i = int(min(ties, key=lambda r: self.basis[r]))
            self.pivot(i, j)


def linprog_bland(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *, tol: float = 1e-9,
                  max_pivots: int = 100_000) -> LPResult:
    """Minimize ``c @ x`` over ``x >= 0`` subject to the given constraints.

    Returns an :class:`LPResult`; ``status`` is ``"infeasible"`` or
    ``"unbounded"`` instead of raising so callers can branch on it.
    """
    c = np.asarray(c, dtype=float).ravel()
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # standard form with slacks for the inequality rows
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate((b_ub, b_eq))
    ns = n + m_ub

    # row equilibration and sign normalisation (b >= 0)
    scale = np.abs(np.column_stack((A, b))).max(axis=1)
    scale[scale == 0] = 1.0
    A = A / scale[:, None]
    b = b / scale
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # initial basis: slack where usable, otherwise an artificial
    basis = []
    art_rows = []
    for i in range(m):
        if i < m_ub and not neg[i]:
            basis.append(n + i)
        else:
            art_rows.append(i)
            basis.append(ns + len(art_rows) - 1)
    n_art = len(art_rows)
    A_full = np.zeros((m, ns + n_art))
    A_full[:, :ns] = A
    for k, i in enumerate(art_rows):
        A_full[i, ns + k] = 1.0

    tab = _Tableau(A_full, b, basis, tol)
    allowed = np.ones(ns + n_art, dtype=bool)
    if n_art:
        c1 = np.zeros(ns + n_art)
        c1[ns:] = 1.0
        tab.set_objective(c1)
        tab.run(allowed, max_pivots)
        infeas = -tab.T[-1, -1]
        if infeas > 1e-7 * max(1.0, np.abs(b).max()):
            return LPResult(np.full(n, np.nan), np.nan, "infeasible", tab.pivots, ())
        # drive zero-level artificials out of the basis, drop redundant rows
        keep = []
        for i in range(tab.m):
            j = tab.basis[i]
            if j >= ns:
                row = tab.T[i, :ns]
                cand = np.flatnonzero(np.abs(row) > 1e3 * tol)
                if cand.size:
                    tab.pivot(i, int(cand[0]))
                    keep.append(i)
            else:
                keep.append(i)
        if len(keep) < tab.m:
            T = tab.T
            tab.T = np.vstack((T[keep], T[-1:]))
            tab.basis = [tab.basis[i] for i in keep]
        allowed[ns:] = False
        tab.T[:, ns:-1] = 0.0

    c2 = np.concatenate((c, np.zeros(ns + n_art - n)))
    tab.set_objective(c2)
    status = tab.run(allowed, max_pivots)
    if status == "unbounded":
        return LPResult(np.full(n, np.nan), -np.inf, "unbounded", tab.pivots,
                        tuple(tab.basis))

    # recompute the vertex from the original (scaled) rows for accuracy
    bcols = np.asarray(tab.basis)
    rows = keep if n_art and len(keep) < m else list(range(m))
    B = A_full[np.ix_(rows, bcols)]
    xb = np.linalg.lstsq(B, b[rows], rcond=None)[0]
    xfull = np.zeros(ns + n_art)
    xfull[bcols] = xb
    xfull = np.maximum(xfull, 0.0)
    x = xfull[:n]
    return LPResult(x, float(c @ x), "optimal", tab.pivots, tuple(int(j) for j in bcols))


def solve_or_raise(*args, **kwargs) -> LPResult:
    res = linprog_bland(*args, **kwargs)
    if res.status == "infeasible":
        raise InfeasibleProblem("linear program is infeasible")
    if res.status == "unbounded":
        raise UnboundedProblem("linear program is unbounded")
    return res
