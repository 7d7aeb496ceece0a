"""Command-line front end.

Exit codes: 0 on success, 1 when a solver fails to converge (partial
outputs are still written), 2 on bad input. ``OCCUMAX_SEED`` in the
environment overrides ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dual import SolverConfig, dual_gradient, minimize_dual
from .environments import grid_spec, make_gridworld, make_ring, make_toy, toy_closed_form
from .exceptions import NonConvergence, OccumaxError
from .fileio import (file_sha256, load_mdp, mdp_to_dict, solution_to_dict, stats_to_dict,
                     write_heatmap_csv, write_json)
from .fixed_point import solve_fixed_point
from .limits import solve_alpha_zero, solve_beta_zero, solve_unregularized
from .mdp import apply_kl_shift, validate_mdp
from .oracle import brute_force_primal, finite_difference_gradient
from .primal import average_total_reward, flow_residual
from .simulator import corridor_fraction, interval_fraction, occupancy_heatmap, sample_trajectory

EXIT_OK, EXIT_NONCONVERGED, EXIT_INPUT = 0, 1, 2
METHODS = ("dual", "fixed-point", "beta-zero", "alpha-zero", "bellman")


class InputError(Exception):
    """Bad flags or files; reported with exit code 2."""


class _Run:
    """Collects the manifest of one invocation."""

    def __init__(self, argv, args):
        self.argv = list(argv)
        self.args = args
        self.inputs = {}
        self.t0 = time.perf_counter()
        self.timings = {}

    def add_input(self, path):
        self.inputs[str(path)] = file_sha256(path)

    def manifest(self, config=None, seed=None) -> dict:
        self.timings["total_s"] = time.perf_counter() - self.t0
        return {
            "command": ["occumax"] + self.argv,
            "inputs": self.inputs,
            "config": asdict(config) if config is not None else None,
            "seed": seed,
            "version": __version__,
            "timings": dict(self.timings),
        }


def _seed(args) -> int:
    env = os.environ.get("OCCUMAX_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise InputError(f"OCCUMAX_SEED must be an integer, got {env!r}")
    return int(args.seed)


def _config(args) -> SolverConfig:
    kw = {}
    for name in ("grad_tol", "value_tol", "max_iters", "v_clamp", "gauge"):
        val = getattr(args, name, None)
        if val is not None:
            kw[name] = val
    try:
        return SolverConfig(**kw)
    except ValueError as exc:
        raise InputError(str(exc))


def _emit(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _load(run: _Run, path, shift=None):
    if not Path(path).is_file():
        raise InputError(f"MDP file {path} does not exist")
    run.add_input(path)
    mdp, defaults, meta = load_mdp(path)
    report = validate_mdp(mdp)
    if report:
        raise InputError(f"{path}: invalid MDP: " + "; ".join(str(v) for v in report))
    if defaults is not None and shift is not None:
        mdp = apply_kl_shift(mdp, defaults, *shift)
    return mdp, meta


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n, None) is None]
    if missing:
        raise InputError(f"{args.command} needs {' and '.join(missing)}")


def _solve(mdp, method, alpha, beta, config):
    if method == "dual":
        return minimize_dual(mdp, alpha, beta, config)
    if method == "fixed-point":
        return solve_fixed_point(mdp, alpha, beta, config)
    if method == "beta-zero":
        return solve_beta_zero(mdp, alpha, config)
    if method == "alpha-zero":
        return solve_alpha_zero(mdp, beta, config)
    return solve_unregularized(mdp, config)


# -- subcommands --------------------------------------------------------------


def cmd_solve(args, run: _Run) -> int:
    need = {"dual": ("alpha", "beta"), "fixed-point": ("alpha", "beta"),
            "beta-zero": ("alpha",), "alpha-zero": ("beta",), "bellman": ()}[args.method]
    _need(args, *need)
    alpha = args.alpha if args.alpha is not None else 0.0
    beta = args.beta if args.beta is not None else 0.0
    mdp, _ = _load(run, args.mdp, None if args.no_defaults else (alpha, beta))
    config = _config(args)
    code = EXIT_OK
    try:
        sol = _solve(mdp, args.method, alpha, beta, config)
    except NonConvergence as exc:
        if exc.result is None or not hasattr(exc.result, "p_star"):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        sol, code = exc.result, EXIT_NONCONVERGED
        print(f"warning: {exc}", file=sys.stderr)
    if getattr(sol, "converged", True) is False:
        code = EXIT_NONCONVERGED
    out = solution_to_dict(sol, mdp, config)
    out["method"] = args.method
    out["manifest"] = run.manifest(config)
    _emit(out, args.out)
    return code


def cmd_toy(args, run: _Run) -> int:
    regime = args.regime
    if regime == "beta-zero":
        alpha, beta = (args.alpha if args.alpha is not None else 1.0), 0.0
    elif regime == "alpha-zero":
        alpha, beta = 0.0, (args.beta if args.beta is not None else 1.0)
    else:
        alpha = args.alpha if args.alpha is not None else 1.0
        beta = args.beta if args.beta is not None else 1.0
    res = toy_closed_form(args.n, alpha, beta)
    out = {"n": args.n, "alpha": alpha, "beta": beta, **asdict(res)}
    if args.emit_mdp:
        write_json(args.emit_mdp, mdp_to_dict(make_toy(args.n), meta={"kind": "toy", "n": args.n}))
    out["manifest"] = run.manifest()
    _emit(out, args.out)
    return EXIT_OK


def cmd_gridworld(args, run: _Run) -> int:
    mdp, spec = make_gridworld(args.corridor)
    meta = {"kind": "gridworld", "corridor_len": spec.corridor_len, "shape": list(spec.shape),
            "cells": [list(c) for c in spec.cells],
            "corridor_states": list(spec.corridor_states), "junction_state": spec.junction_state}
    _emit(mdp_to_dict(mdp, meta=meta), args.out)
    return EXIT_OK


def cmd_ring(args, run: _Run) -> int:
    _emit(mdp_to_dict(make_ring(args.n), meta={"kind": "ring", "n": args.n}), args.out)
    return EXIT_OK


def _policy_for(args, run, mdp):
    if args.solution:
        run.add_input(args.solution)
        data = json.loads(Path(args.solution).read_text(encoding="utf-8"))
        try:
            return mdp.flatten(data["pi_star"]), None
        except (KeyError, OccumaxError) as exc:
            raise InputError(f"{args.solution}: no usable pi_star ({exc})")
    _need(args, "alpha", "beta")
    sol = minimize_dual(mdp, args.alpha, args.beta, _config(args))
    return sol.pi_star, sol


def cmd_simulate(args, run: _Run) -> int:
    seed = _seed(args)
    mdp, meta = _load(run, args.mdp)
    pi, sol = _policy_for(args, run, mdp)
    stats = sample_trajectory(mdp, pi, args.steps, seed, args.init_state, args.burn_in)
    out = stats_to_dict(stats, mdp)
    est = None
    if meta.get("kind") == "gridworld":
        spec = grid_spec(int(meta["corridor_len"]))
        est = corridor_fraction(stats, spec, args.intervals)
        out["metric"] = "corridor_fraction"
        if args.heatmap:
            write_heatmap_csv(args.heatmap, occupancy_heatmap(stats, spec))
    elif args.members:
        est = interval_fraction(stats, args.members, args.intervals)
        out["metric"] = f"fraction_in_states_{args.members}"
    if est is not None:
        out.update(interval_values=est.per_interval.tolist(), mean=est.mean,
                   std_error=est.std_error, num_intervals=args.intervals,
                   error_model="sample std / sqrt(intervals), autocorrelation ignored")
    out["manifest"] = run.manifest(seed=seed)
    _emit(out, args.out)
    return EXIT_OK if sol is None or sol.converged else EXIT_NONCONVERGED


def parse_values(text: str) -> list[float]:
    """``"1..10"`` (integer steps), ``"1..10:0.5"`` (given step) or ``"1,2,5"``."""
    text = text.strip()
    try:
        if ".." in text:
            lo, rest = text.split("..", 1)
            hi, _, step = rest.partition(":")
            lo, hi, step = float(lo), float(hi), float(step or 1.0)
            if step <= 0 or hi < lo:
                raise ValueError
            count = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return [lo + i * step for i in range(count)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"cannot parse value list {text!r}; use 'a..b', 'a..b:step' or 'a,b,c'")


def _sweep_point(task):
    corridor, alpha, beta, steps, intervals, seed, config = task
    mdp, spec = make_gridworld(corridor)
    sol = minimize_dual(mdp, alpha, beta, config)
    stats = sample_trajectory(mdp, sol.pi_star, steps, seed)
    est = corridor_fraction(stats, spec, intervals)
    return {
        "alpha": alpha, "beta": beta,
        "corridor_fraction_mean": est.mean, "corridor_fraction_se": est.std_error,
        "r_max": sol.r_max, "iterations": sol.iterations, "converged": sol.converged,
        "corridor_mass_exact": float(sol.state_dist[list(spec.corridor_states)].sum()),
    }


SWEEP_COLUMNS = ("alpha", "beta", "corridor_fraction_mean", "corridor_fraction_se", "r_max",
                 "iterations", "converged")


def cmd_sweep(args, run: _Run) -> int:
    seed = _seed(args)
    alphas = parse_values(args.alphas)
    if (args.ab_product is None) == (args.betas is None):
        raise InputError("sweep needs exactly one of --ab-product and --betas")
    if args.ab_product is not None:
        if args.ab_product <= 0:
            raise InputError("--ab-product must be positive")
        betas = [args.ab_product / a for a in alphas]
    else:
        betas = parse_values(args.betas)
        if len(betas) != len(alphas):
            raise InputError(f"{len(alphas)} alphas but {len(betas)} betas")
    if any(a <= 0 for a in alphas) or any(b <= 0 for b in betas):
        raise InputError("sweep weights must be positive")
    if args.steps % args.intervals:
        raise InputError("--steps must be divisible by --intervals")
    config = _config(args)
    # seed splitting: point i uses seed + i
    tasks = [(args.corridor, a, b, args.steps, args.intervals, seed + i, config)
             for i, (a, b) in enumerate(zip(alphas, betas))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    manifest = run.manifest(config, seed)
    manifest["seed_splitting"] = "point i uses seed + i"
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(SWEEP_COLUMNS)
            for r in rows:
                w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in SWEEP_COLUMNS])
        write_json(str(args.out) + ".manifest.json", manifest)
    else:
        print(",".join(SWEEP_COLUMNS))
        for r in rows:
            print(",".join(str(r[c]) for c in SWEEP_COLUMNS))
    return EXIT_OK if all(r["converged"] for r in rows) else EXIT_NONCONVERGED


def cmd_check_grad(args, run: _Run) -> int:
    seed = _seed(args)
    mdp, _ = _load(run, args.mdp)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(args.trials):
        v = rng.normal(size=mdp.num_states)
        g = dual_gradient(v, mdp, args.alpha, args.beta)
        fd = finite_difference_gradient(v, mdp, args.alpha, args.beta, args.eps)
        worst = max(worst, float(np.max(np.abs(g - fd)) / max(float(np.max(np.abs(fd))), 1e-12)))
    ok = worst < args.tol
    _emit({"trials": args.trials, "eps": args.eps, "max_relative_error": worst,
           "tolerance": args.tol, "ok": ok, "manifest": run.manifest(seed=seed)}, args.out)
    return EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_oracle(args, run: _Run) -> int:
    mdp, _ = _load(run, args.mdp)
    res = brute_force_primal(mdp, args.alpha, args.beta, args.resolution)
    out = {"best_value": res.best_value, "best_policy": mdp.split(res.best_policy),
           "best_occupancy": mdp.split(res.best_occupancy),
           "grid_resolution": res.grid_resolution, "evaluations": res.evaluations}
    if args.alpha > 0 and args.beta > 0:
        sol = minimize_dual(mdp, args.alpha, args.beta, _config(args))
        out.update(dual_r_max=sol.r_max, value_difference=sol.r_max - res.best_value,
                   occupancy_tv=0.5 * float(np.abs(sol.p_star - res.best_occupancy).sum()))
    out = {k: ([r.tolist() for r in v] if isinstance(v, list) else v) for k, v in out.items()}
    out["manifest"] = run.manifest()
    _emit(out, args.out)
    return EXIT_OK


def cmd_validate(args, run: _Run) -> int:
    if not Path(args.mdp).is_file():
        raise InputError(f"MDP file {args.mdp} does not exist")
    mdp, _, _ = load_mdp(args.mdp)
    problems = [str(v) for v in validate_mdp(mdp)]
    if not problems and args.solution:
        problems = _check_solution(mdp, json.loads(Path(args.solution).read_text(encoding="utf-8")),
                                   args.tol)
    for p in problems:
        print(p)
    if problems:
        return EXIT_INPUT
    print("ok")
    return EXIT_OK


def _check_solution(mdp, data, tol) -> list[str]:
    """Solution invariants: normalization, flow balance, policy rows, duality."""
    out = []
    try:
        p = mdp.flatten(data["p_star"])
        pi = mdp.flatten(data["pi_star"])
    except (KeyError, OccumaxError) as exc:
        return [f"solution file does not match the MDP: {exc}"]
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
        out.append(f"p_star is not a distribution (sum {p.sum()!r})")
    fr = flow_residual(p, mdp)
    if fr > tol:
        out.append(f"flow residual {fr:.3e} exceeds {tol:.1e}")
    rows = mdp.state_sums(pi)
    if np.max(np.abs(rows - 1)) > 1e-10:
        out.append("pi_star rows do not sum to 1")
    if "r_max" in data:
        gap = abs(data["r_max"] - float(average_total_reward(p, mdp, data["alpha"], data["beta"])))
        if gap > tol:
            out.append(f"duality gap {gap:.3e} exceeds {tol:.1e}")
    return out


# -- parser --------------------------------------------------------------------


def _solver_flags(p):
    p.add_argument("--grad-tol", type=float)
    p.add_argument("--value-tol", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--v-clamp", type=float)
    p.add_argument("--gauge", choices=("mean", "reference"))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="occumax", description="Entropy-regularized average-reward MDP solvers.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve an MDP file")
    p.add_argument("--mdp", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--method", choices=METHODS, default="dual")
    p.add_argument("--no-defaults", action="store_true", help="ignore default distributions in the file")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("toy", help="closed-form toy solution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--regime", choices=("general", "beta-zero", "alpha-zero"), default="general")
    p.add_argument("--emit-mdp", help="also write the toy MDP JSON here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("gridworld", help="write the room-and-corridor MDP")
    p.add_argument("--corridor", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gridworld)

    p = sub.add_parser("ring", help="write the ring MDP")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ring)

    p = sub.add_parser("simulate", help="sample a trajectory")
    p.add_argument("--mdp", required=True)
    p.add_argument("--solution", help="solution JSON supplying pi_star")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--steps", type=int, default=25000)
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--init-state", type=int)
    p.add_argument("--members", type=lambda s: [int(x) for x in s.split(",")],
                   help="comma-separated states whose visit fraction is measured")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--heatmap", help="CSV path for the grid-world visit heatmap")
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="corridor fraction over a range of weights")
    p.add_argument("--env", choices=("gridworld",), default="gridworld")
    p.add_argument("--corridor", type=int, default=5)
    p.add_argument("--alphas", required=True)
    p.add_argument("--betas")
    p.add_argument("--ab-product", type=float)
    p.add_argument("--steps", type=int, default=25000)
    p.add_argument("--intervals", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check-grad", help="compare the gradient with finite differences")
    p.add_argument("--mdp", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--eps", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_grad)

    p = sub.add_parser("oracle", help="brute-force primal maximum of a tiny MDP")
    p.add_argument("--mdp", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--resolution", type=float, default=0.02)
    p.add_argument("--out")
    _solver_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("validate", help="check an MDP file and optionally a solution")
    p.add_argument("--mdp", required=True)
    p.add_argument("--solution")
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    run = _Run(argv, args)
    try:
        return args.func(args, run)
    except (InputError, OccumaxError, ValueError, OSError, json.JSONDecodeError) as exc:
        if isinstance(exc, NonConvergence):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
