"""Command-line front end.

Exit codes: 0 success, 2 invalid arguments or config, 3 size guard exceeded.
Every subcommand prints a JSON object on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import certificates, core, experiments, haar, solvers, widths
from .errors import InvalidArgument, ScaleGuardError


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=float))


def cmd_recover(a):
    ens = core.gaussian_matrix(a.m, a.n, core.SeedSpec(a.matrix_seed, 1))
    x0 = core.sparse_gradient_signal(a.n, a.k, core.SeedSpec(a.signal_seed, 0))
    y = ens.matrix @ x0
    if a.epsilon > 0:
        e = core.SeedSpec(a.signal_seed, 2).rng().standard_normal(a.m)
        y = y + e * (a.epsilon / np.linalg.norm(e))
        rep = solvers.tv_min_noise(ens, y, a.epsilon)
    else:
        rep = solvers.tv_min_eq(ens, y)
    _emit({
        "n": a.n, "m": a.m, "k": a.k, "epsilon": a.epsilon,
        "rel_error": float(np.linalg.norm(rep.solution - x0) / max(np.linalg.norm(x0), 1e-300)),
        "objective": rep.objective, "true_tv": float(np.abs(np.diff(x0)).sum()),
        "primal_residual": rep.primal_residual, "iterations": rep.iterations,
        "converged": rep.converged, "certified": rep.certified, "wall_time_s": rep.wall_time,
    })


def _load_config(path) -> experiments.ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from None
    return experiments.ExperimentConfig.from_dict(data)


def cmd_phase(a):
    cfg = _load_config(a.config)
    diagram = experiments.run_phase_transition(cfg)
    if cfg.output_path:
        fmt = "json" if cfg.output_path.endswith(".json") else "csv"
        experiments.export(diagram, fmt, cfg.output_path)
    _emit({
        "output_path": cfg.output_path or None,
        "cells": [{"m": m, "k": k, "success_rate": c.success_rate, "trials": c.trials}
                  for (m, k), c in sorted(diagram.cells.items())],
    })


def cmd_m50(a):
    cfg = experiments.ExperimentConfig(n=a.n, d=a.d, m_grid=(1,), k_grid=(a.k,),
                                       trials_per_cell=a.trials, master_seed=a.seed)
    r = experiments.find_m50(a.n, a.k, a.d, cfg)
    _emit({"n": a.n, "k": a.k, "d": a.d, "m50": r.m50, "success_rate": r.success_rate,
           "trials": r.trials, "ci95": [r.ci_low, r.ci_high], "linear_scan": r.linear_scan})


def cmd_width(a):
    est = widths.width_mc(a.n, a.k, a.d, a.samples, a.seed)
    out = {"n": a.n, "k": a.k, "d": a.d, "mean": est.mean, "std_error": est.std_error,
           "samples": est.samples, "rejects": est.rejects}
    try:
        ub = widths.width_upper_bound_1d(a.n, a.k) if a.d == 1 else \
            widths.width_upper_bound_nd(a.n, a.k, a.d)
        out["upper_bound"] = float(ub)
    except InvalidArgument:
        out["upper_bound"] = None
    _emit(out)


def cmd_certify(a):
    ens = core.gaussian_matrix(a.m, a.n, a.seed)
    if a.balance is None:
        rep = certificates.null_space_condition(ens, a.k)
    else:
        rep = certificates.balanced_condition(ens, a.k, a.balance)
    _emit({"n": a.n, "m": a.m, "k": a.k, "threshold": rep.threshold, "holds": rep.holds,
           "worst_ratio": rep.worst_ratio if np.isfinite(rep.worst_ratio) else "inf",
           "worst_support": list(rep.worst_support), "lps": rep.work})


def cmd_lowerbound(a):
    est = widths.lower_bound_mc(a.n, a.k, a.samples, a.seed)
    _emit({"n": a.n, "k": a.k, "mean": est.mean, "std_error": est.std_error,
           "samples": est.samples, "expected": widths.lower_bound_expectation(a.n, a.k),
           "width_lower_bound": float(widths.width_lower_bound_1d(a.n, a.k))})


def cmd_haar(a):
    try:
        data = np.loadtxt(a.input, delimiter=None if not a.input.endswith(".csv") else ",",
                          ndmin=1)
    except (OSError, ValueError) as exc:
        raise InvalidArgument(f"cannot read {a.input}: {exc}") from None
    if data.ndim == 1:
        p = haar.haar_decompose_1d(data)
        _emit({"levels": [z.tolist() for z in p.levels], "coarse": p.coarse,
               "energy": p.energy()})
    else:
        p = haar.haar_decompose_nd(data)
        _emit({"levels": [{"".join(map(str, i)): Z.tolist() for i, Z in lev.items()}
                          for lev in p.levels],
               "coarse": p.coarse, "energy": p.energy()})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvrecover", description="TV recovery toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("recover", help="recover one random gradient-sparse signal")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--matrix-seed", type=int, default=0)
    s.add_argument("--signal-seed", type=int, default=0)
    s.add_argument("--epsilon", type=float, default=0.0)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("phase", help="run a phase-transition grid from a JSON config")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_phase)

    s = sub.add_parser("m50", help="locate the 50%% recovery threshold in m")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_m50)

    s = sub.add_parser("width", help="Monte Carlo Gaussian width of the relaxed set")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_width)

    s = sub.add_parser("certify", help="exact null-space (or balanced) condition check")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--balance", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_certify)

    s = sub.add_parser("lowerbound", help="Monte Carlo mean of the adversarial construction")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--samples", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_lowerbound)

    s = sub.add_parser("haar", help="Haar pyramid of a whitespace/CSV numeric file")
    s.add_argument("--input", required=True)
    s.set_defaults(func=cmd_haar)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ScaleGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
