"""JSON and CSV formats for MDPs, solutions, trajectory stats and heatmaps."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np

from .exceptions import InvalidMdp
from .mdp import DefaultDistributions, Mdp


def _nested(mdp: Mdp, flat) -> list[list[float]]:
    return [row.tolist() for row in mdp.split(np.asarray(flat, dtype=float))]


def mdp_to_dict(mdp: Mdp, defaults: DefaultDistributions | None = None, meta: dict | None = None) -> dict:
    trans, rewards = mdp.to_lists()
    out = {
        "num_states": mdp.num_states,
        "actions": mdp.action_counts.tolist(),
        "transitions": [[[[s2, p] for s2, p in succ] for succ in row] for row in trans],
        "rewards": rewards,
    }
    if mdp.state_names is not None:
        out["state_names"] = list(mdp.state_names)
    if defaults is not None and (defaults.policy is not None or defaults.state_dist is not None):
        d = {}
        if defaults.policy is not None:
            d["policy"] = _nested(mdp, defaults.policy)
        if defaults.state_dist is not None:
            d["state_dist"] = np.asarray(defaults.state_dist, dtype=float).tolist()
        out["defaults"] = d
    if meta:
        out["meta"] = meta
    return out


def mdp_from_dict(data: dict) -> tuple[Mdp, DefaultDistributions | None, dict]:
    """Parse the MDP JSON layout; returns (mdp, defaults or None, meta)."""
    try:
        n = int(data["num_states"])
        actions = [int(k) for k in data["actions"]]
        transitions = data["transitions"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidMdp(f"MDP file is missing or has a malformed field: {exc}") from exc
    if len(actions) != n or len(transitions) != n:
        raise InvalidMdp(f"num_states={n} but {len(actions)} action counts and "
                         f"{len(transitions)} transition rows")
    for s, (k, row) in enumerate(zip(actions, transitions)):
        if len(row) != k:
            raise InvalidMdp(f"state {s}: actions says {k} but {len(row)} transition lists given")
    try:
        trans = [[[(int(s2), float(p)) for s2, p in succ] for succ in row] for row in transitions]
    except (TypeError, ValueError) as exc:
        raise InvalidMdp(f"transition entries must be [s_next, prob] pairs: {exc}") from exc
    mdp = Mdp.from_lists(trans, data.get("rewards"), data.get("state_names"))
    defaults = None
    if "defaults" in data and data["defaults"]:
        d = data["defaults"]
        pol = mdp.flatten(d["policy"]) if d.get("policy") is not None else None
        sd = np.asarray(d["state_dist"], dtype=float) if d.get("state_dist") is not None else None
        defaults = DefaultDistributions(pol, sd)
    return mdp, defaults, dict(data.get("meta") or {})


def load_mdp(path) -> tuple[Mdp, DefaultDistributions | None, dict]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidMdp(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise InvalidMdp(f"{path}: top level must be a JSON object")
    return mdp_from_dict(data)


def _plain(x):
    """Convert numpy scalars and arrays inside ``x`` to JSON-ready values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def solution_to_dict(sol, mdp: Mdp, config=None) -> dict:
    """Serialize a dual or limit solution; per-(s, a) tables become nested lists."""
    out = {
        "v_star": np.asarray(sol.v_star).tolist(),
        "p_star": _nested(mdp, sol.p_star),
        "pi_star": _nested(mdp, sol.pi_star),
        "state_dist": np.asarray(sol.state_dist).tolist(),
    }
    if hasattr(sol, "r_max"):
        out.update(
            r_max=sol.r_max, **{"lambda": sol.lam}, grad_norm=sol.grad_norm,
            duality_gap=sol.duality_gap, flow_residual=sol.flow_residual,
            iterations=sol.iterations, converged=sol.converged, alpha=sol.alpha,
            beta=sol.beta, gauge=sol.gauge, clamped_states=sol.clamped_states,
            communicating=sol.communicating,
        )
    else:
        out.update(
            regime=sol.regime, eta=sol.eta, unique_policy=sol.unique_policy,
            tie_sets=sol.tie_sets, smoothing_eps=sol.smoothing_eps,
            iterations=sol.iterations, converged=sol.converged, periodic=sol.periodic,
        )
    for key, val in sol.extras.items():
        out.setdefault(key, val)
    if config is not None:
        out["config"] = dataclasses.asdict(config)
    return _plain(out)


def stats_to_dict(stats, mdp: Mdp) -> dict:
    return _plain({
        "visit_counts": _nested(mdp, stats.visit_counts),
        "state_counts": stats.state_counts,
        "steps": stats.steps,
        "seed": stats.seed,
        "init_state": stats.init_state,
        "burn_in": stats.burn_in,
        "rng": stats.rng,
    })


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_plain(obj), indent=2) + "\n", encoding="utf-8")


def write_heatmap_csv(path, heat) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for row in np.asarray(heat):
            w.writerow([repr(float(x)) for x in row])


def read_heatmap_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        return np.asarray([[float(x) for x in row] for row in csv.reader(fh)])


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
