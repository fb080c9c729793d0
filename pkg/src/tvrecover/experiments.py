"""Phase-transition experiments, the m50 threshold search and result files."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import SeedSpec, derive_seed, gaussian_matrix, sparse_gradient_image, sparse_gradient_signal
from .errors import InvalidArgument, SaturationError
from .solvers import SolverConfig, tv_min_eq, tv_min_noise

CSV_COLUMNS = ("m", "k", "trials", "successes", "success_rate", "mean_rel_error",
               "mean_solve_time_s")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m_grid: tuple[int, ...]
    k_grid: tuple[int, ...]
    d: int = 1
    trials_per_cell: int = 50
    success_rel_tol: float = 1e-4
    master_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    noise_epsilon: float = 0.0
    output_path: str = ""
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "m_grid", tuple(int(m) for m in self.m_grid))
        object.__setattr__(self, "k_grid", tuple(int(k) for k in self.k_grid))
        if isinstance(self.solver, dict):
            object.__setattr__(self, "solver", SolverConfig(**self.solver))
        if self.d < 1:
            raise InvalidArgument("d must be >= 1")
        if self.n < 2:
            raise InvalidArgument("n must be >= 2")
        if not self.m_grid or not self.k_grid:
            raise InvalidArgument("m_grid and k_grid must be non-empty")
        total = self.n ** self.d
        if any(m < 1 or m > total for m in self.m_grid):
            raise InvalidArgument(f"m values must lie in [1, {total}]")
        kmax = total - 1 if self.d == 1 else self.d * (self.n - 1) * self.n ** (self.d - 1)
        if any(k < 0 or k > kmax for k in self.k_grid):
            raise InvalidArgument(f"k values must lie in [0, {kmax}]")
        if self.trials_per_cell < 1:
            raise InvalidArgument("trials_per_cell must be >= 1")
        if self.success_rel_tol <= 0:
            raise InvalidArgument("success_rel_tol must be positive")
        if self.noise_epsilon < 0:
            raise InvalidArgument("noise_epsilon must be non-negative")
        if self.workers < 1:
            raise InvalidArgument("workers must be >= 1")

    @property
    def unknowns(self) -> int:
        return self.n ** self.d

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["m_grid"] = list(self.m_grid)
        out["k_grid"] = list(self.k_grid)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InvalidArgument(f"bad config: {exc}") from None


@dataclass(frozen=True)
class TrialRecord:
    m: int
    k: int
    trial_index: int
    child_seed: int
    rel_error: float
    converged: bool
    solve_time: float
    success: bool


@dataclass(frozen=True)
class Cell:
    successes: int
    trials: int
    mean_rel_error: float
    mean_solve_time: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True, eq=False)
class PhaseDiagram:
    cells: dict
    config_echo: ExperimentConfig | None = None
    records: tuple = field(default=(), repr=False)

    def __eq__(self, other):
        if not isinstance(other, PhaseDiagram):
            return NotImplemented
        return self.cells == other.cells and self.config_echo == other.config_echo

    def rate(self, m: int, k: int) -> float:
        return self.cells[(m, k)].success_rate


# ---------------------------------------------------------------------------
# trials


def trial_seed(master_seed: int, m: int, k: int, trial: int) -> int:
    return derive_seed(master_seed, m, k, trial)


def trial_instance(n: int, d: int, m: int, k: int, trial: int, master_seed: int,
                   noise_epsilon: float = 0.0):
    """Signal, ensemble and measurements of one trial: ``(x0, A, y)``.

    Streams below the trial seed: 0 signal, 1 matrix, 2 noise.
    """
    base = SeedSpec(trial_seed(master_seed, m, k, trial), 0)
    if d == 1:
        x0 = sparse_gradient_signal(n, k, base.spawn(0))
    else:
        x0 = sparse_gradient_image(n, d, k, base.spawn(0))
    A = gaussian_matrix(m, x0.size, base.spawn(1))
    y = A.matrix @ x0.ravel()
    if noise_epsilon > 0:
        e = base.spawn(2).rng().standard_normal(m)
        y = y + e * (noise_epsilon / np.linalg.norm(e))
    return x0, A, y


def run_trial(n: int, d: int, m: int, k: int, trial: int, master_seed: int,
              solver: SolverConfig, success_rel_tol: float = 1e-4,
              noise_epsilon: float = 0.0) -> TrialRecord:
    """One recovery attempt; depends only on its arguments."""
    x0, A, y = trial_instance(n, d, m, k, trial, master_seed, noise_epsilon)
    t0 = time.perf_counter()
    if noise_epsilon > 0:
        rep = tv_min_noise(A, y, noise_epsilon, solver, shape=x0.shape)
    else:
        rep = tv_min_eq(A, y, solver, shape=x0.shape)
    elapsed = time.perf_counter() - t0
    nx = np.linalg.norm(x0)
    err = np.linalg.norm(rep.solution - x0)
    rel = float(err / nx) if nx > 0 else float(err)
    return TrialRecord(m, k, trial, trial_seed(master_seed, m, k, trial), rel,
                       bool(rep.converged), elapsed,
                       bool(rep.converged and rel <= success_rel_tol))


def _run_cell(args):
    cfg, m, k = args
    return [run_trial(cfg.n, cfg.d, m, k, t, cfg.master_seed, cfg.solver,
                      cfg.success_rel_tol, cfg.noise_epsilon)
            for t in range(cfg.trials_per_cell)]


def _reduce(records) -> Cell:
    recs = sorted(records, key=lambda r: r.trial_index)
    t = len(recs)
    return Cell(sum(r.success for r in recs), t,
                math.fsum(r.rel_error for r in recs) / t,
                math.fsum(r.solve_time for r in recs) / t)


def run_phase_transition(cfg: ExperimentConfig) -> PhaseDiagram:
    """Fill every ``(m, k)`` cell of the grid with ``trials_per_cell`` recoveries.

    Cells are independent work units; with ``workers > 1`` they run in a
    process pool.  Results are reduced per cell in trial order, so the
    diagram does not depend on scheduling (timings aside).
    """
    tasks = [(cfg, m, k) for m in cfg.m_grid for k in cfg.k_grid]
    if cfg.workers == 1:
        results = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_cell, tasks))
    cells = {}
    records = []
    for (_, m, k), recs in zip(tasks, results):
        cells[(m, k)] = _reduce(recs)
        records.extend(recs)
    records.sort(key=lambda r: (r.m, r.k, r.trial_index))
    return PhaseDiagram(cells, cfg, tuple(records))


def monotonicity_violations(diagram: PhaseDiagram, z: float = 2.0) -> list:
    """Adjacent grid pairs whose success rates go the wrong way by more than
    ``z`` combined binomial standard errors."""
    ms = sorted({m for m, _ in diagram.cells})
    ks = sorted({k for _, k in diagram.cells})

    def var(c):
        p = c.success_rate
        return p * (1 - p) / c.trials

    bad = []
    for k in ks:
        for m1, m2 in zip(ms, ms[1:]):
            a, b = diagram.cells[(m1, k)], diagram.cells[(m2, k)]
            if a.success_rate - b.success_rate > z * math.sqrt(var(a) + var(b)):
                bad.append(("m", k, m1, m2))
    for m in ms:
        for k1, k2 in zip(ks, ks[1:]):
            a, b = diagram.cells[(m, k1)], diagram.cells[(m, k2)]
            if b.success_rate - a.success_rate > z * math.sqrt(var(a) + var(b)):
                bad.append(("k", m, k1, k2))
    return bad


# ---------------------------------------------------------------------------
# threshold search


@dataclass(frozen=True)
class M50Result:
    m50: int
    success_rate: float
    trials: int
    ci_low: float
    ci_high: float
    probes: tuple = field(default=(), repr=False)
    linear_scan: bool = False

    def __float__(self):
        return float(self.m50)


def _wilson(successes: int, trials: int, z: float = 1.96):
    p = successes / trials
    den = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / den
    return max(0.0, centre - half), min(1.0, centre + half)


def find_m50(n: int, k: int, d: int, cfg: ExperimentConfig) -> M50Result:
    """Smallest ``m`` whose empirical success rate reaches 0.5.

    Bisection over ``m`` (success is assumed to grow with ``m``), using
    ``cfg.trials_per_cell`` trials per probe and the same per-trial seeds as
    :func:`run_phase_transition`.  Two probes above the answer are checked;
    if either falls below 0.5 by more than two binomial standard errors the
    search restarts as a linear scan from ``m = 1``.  ``ci_low``/``ci_high``
    are the 95% Wilson interval of the rate at ``m50``.
    """
    total = n ** d
    cache: dict[int, Cell] = {}

    def probe(m):
        if m not in cache:
            cache[m] = _reduce(_run_cell((dataclasses.replace(cfg, n=n, d=d, m_grid=(m,),
                                                               k_grid=(k,)), m, k)))
        return cache[m]

    if probe(total).success_rate < 0.5:
        raise SaturationError(f"success stays below 0.5 up to m = {total}")
    lo, hi = 0, total
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid).success_rate >= 0.5:
            hi = mid
        else:
            lo = mid

    scan = False
    for m in (hi + 1, hi + 2):
        if m > total:
            break
        c = probe(m)
        p = c.success_rate
        if 0.5 - p > 2 * math.sqrt(0.25 / c.trials):
            scan = True
    if scan:
        hi = next(m for m in range(1, total + 1) if probe(m).success_rate >= 0.5)

    c = probe(hi)
    lo_ci, hi_ci = _wilson(c.successes, c.trials)
    probes = tuple(sorted((m, cell.success_rate) for m, cell in cache.items()))
    return M50Result(hi, c.success_rate, c.trials, lo_ci, hi_ci, probes, scan)


# ---------------------------------------------------------------------------
# persistence


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def export(diagram: PhaseDiagram, fmt: str, path) -> None:
    """Write ``diagram`` as ``csv`` (one row per cell) or ``json`` (cells plus config)."""
    path = os.fspath(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for (m, k) in sorted(diagram.cells):
                    c = diagram.cells[(m, k)]
                    w.writerow([m, k, c.trials, c.successes, _fmt(c.success_rate),
                                _fmt(c.mean_rel_error), _fmt(c.mean_solve_time)])
        elif fmt == "json":
            doc = {
                "config": diagram.config_echo.to_dict() if diagram.config_echo else None,
                "cells": [
                    {"m": m, "k": k, "trials": c.trials, "successes": c.successes,
                     "mean_rel_error": c.mean_rel_error, "mean_solve_time_s": c.mean_solve_time}
                    for (m, k), c in sorted(diagram.cells.items())
                ],
            }
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        else:
            raise InvalidArgument(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def load_json(path) -> PhaseDiagram:
    path = os.fspath(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    cfg = ExperimentConfig.from_dict(doc["config"]) if doc.get("config") else None
    cells = {(int(c["m"]), int(c["k"])): Cell(int(c["successes"]), int(c["trials"]),
                                              float(c["mean_rel_error"]),
                                              float(c["mean_solve_time_s"]))
             for c in doc["cells"]}
    return PhaseDiagram(cells, cfg)
