"""One query path shared by the CLI and the HTTP service.

A policy query is a plain dictionary (policy, algorithm, n, h, seed, ...).
Both front ends normalize it to a canonical form, derive a stable request id
from its hash, and run it through ``run_policy_query``, so a session exported
from the UI replays to identical numbers on the command line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .benchmarks import build_mdp
from .database import TransitionDatabase
from .errors import ConfigurationError, TrajstitchError
from .estimators import (
    DEFAULT_QUANTILE_LEVELS,
    random_baseline,
    value_estimate,
)
from .mdp import FactoredMdp, TrajectorySet, rollout_ground_truth
from .metrics import DistanceMetric
from .config import metric_from_config
from .policies import POLICY_CLASSES, build_policy
from .stitch import ALGORITHMS, generate_trajectory_set

QUERY_ALGORITHMS = ("ground_truth", "random_baseline") + ALGORITHMS


class QueryValidationError(TrajstitchError):
    """Invalid request; ``code`` is machine-readable for HTTP clients."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def _canonical_metric(cfg) -> dict:
    """Metric config with defaults applied, so ``{}``, a partial config, and
    one spelling out the defaults all hash to the same request id."""
    cfg = cfg or {}
    if not isinstance(cfg, dict):
        raise QueryValidationError("bad_params", "metric must be a JSON object")
    weights = cfg.get("weights")
    return {
        "weights": None if weights is None
        else {str(k): float(v) for k, v in weights.items()},
        "time_mode": cfg.get("time_mode", "hard"),
        "time_weight": float(cfg.get("time_weight", 0.0)),
        "action_penalty": float(cfg.get("action_penalty", 1e6)),
        "standardize": bool(cfg.get("standardize", True)),
    }


def canonical_query(request: dict) -> dict:
    """Normalized copy of a request with defaults applied and types fixed."""
    if not isinstance(request, dict):
        raise QueryValidationError("bad_params", "request must be a JSON object")
    out = {
        "policy_class": request.get("policy_class"),
        "params": [float(p) for p in request.get("params", [])],
        "feature": request.get("feature"),
        "algorithm": request.get("algorithm", "mfmci"),
        "n": int(request.get("n", 30)),
        "h": int(request.get("h", 0)),
        "db_id": request.get("db_id"),
        "seed": int(request.get("seed", 0)),
        "variables": list(request.get("variables", [])),
        "quantile_levels": [float(v) for v in
                            request.get("quantile_levels", DEFAULT_QUANTILE_LEVELS)],
        "metric": _canonical_metric(request.get("metric")),
        "engine": request.get("engine", "vectorized"),
    }
    return out


def request_id(request: dict) -> str:
    """Stable id for caching: hash of the canonical request JSON."""
    blob = json.dumps(canonical_query(request), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _mdp_for(db: Optional[TransitionDatabase], mdp: Optional[FactoredMdp]) -> FactoredMdp:
    if mdp is not None:
        return mdp
    if db is None or not db.mdp_config:
        raise QueryValidationError(
            "bad_params",
            "no MDP available: the database carries no model config",
        )
    return build_mdp(db.mdp_config["name"], db.mdp_config.get("params", {}))


def validate_query(q: dict, db: Optional[TransitionDatabase],
                   mdp: Optional[FactoredMdp] = None) -> FactoredMdp:
    if q["algorithm"] not in QUERY_ALGORITHMS:
        raise QueryValidationError(
            "bad_params",
            f"unknown algorithm {q['algorithm']!r}; choose from {QUERY_ALGORITHMS}",
        )
    if q["n"] < 1:
        raise QueryValidationError("bad_params", "n must be at least 1")
    needs_db = q["algorithm"] != "ground_truth"
    if needs_db and db is None:
        raise QueryValidationError("unknown_db", f"database {q['db_id']!r} is not loaded")
    model = _mdp_for(db, mdp)
    if q["policy_class"] not in POLICY_CLASSES:
        raise QueryValidationError(
            "bad_policy",
            f"unknown policy class {q['policy_class']!r}; choose from {POLICY_CLASSES}",
        )
    try:
        build_policy(model, q["policy_class"], tuple(q["params"]), feature=q["feature"])
    except ConfigurationError as exc:
        raise QueryValidationError("bad_policy", str(exc)) from None
    if q["h"] < 1:
        raise QueryValidationError("bad_params", "h must be at least 1")
    if db is not None and q["algorithm"] in ALGORITHMS and q["h"] > db.horizon:
        raise QueryValidationError(
            "bad_params",
            f"h={q['h']} exceeds the database horizon {db.horizon}",
        )
    for v in q["variables"]:
        known = list(model.markov_features) + list(model.exo_features) + \
            ["reward", "cumulative_reward"]
        if v not in known:
            raise QueryValidationError("bad_params", f"unknown variable {v!r}")
    return model


@dataclass
class QueryResult:
    request_id: str
    trajectories: TrajectorySet
    value: float
    algorithm: str
    n: int
    h: int


def run_policy_query(request: dict, db: Optional[TransitionDatabase] = None,
                     mdp: Optional[FactoredMdp] = None) -> QueryResult:
    """Validate and execute one policy query; deterministic in the seed."""
    q = canonical_query(request)
    model = validate_query(q, db, mdp)
    policy = build_policy(model, q["policy_class"], tuple(q["params"]),
                          feature=q["feature"])
    rng = np.random.default_rng(np.random.SeedSequence([q["seed"]]))
    algorithm = q["algorithm"]
    if algorithm == "ground_truth":
        ts = rollout_ground_truth(model, policy, q["n"], q["h"], rng)
    elif algorithm == "random_baseline":
        ts = random_baseline(db, q["n"], rng)
        if q["h"] > ts.horizon:
            raise QueryValidationError(
                "bad_params",
                f"h={q['h']} exceeds the stored trajectory length {ts.horizon}",
            )
        ts = ts.truncated(q["h"])
    else:
        kind = "full" if algorithm == "mfmc" else "markov"
        metric = metric_from_config(db, q["metric"], kind)
        ts = generate_trajectory_set(
            db, policy, q["n"], q["h"], model.initial_state_sampler, metric,
            algorithm, rng=rng, exo_sampler=model.exo_sampler, engine=q["engine"],
        )
    return QueryResult(
        request_id=request_id(q),
        trajectories=ts,
        value=value_estimate(ts),
        algorithm=algorithm,
        n=ts.n,
        h=ts.horizon,
    )


TRAJECTORY_CSV_PREFIX = ("trajectory_id", "time_step", "action", "reward")


def trajectory_csv(ts: TrajectorySet) -> str:
    """Serialize a trajectory set: one row per (trajectory, step)."""
    header = list(TRAJECTORY_CSV_PREFIX) + \
        [f"x_{n}" for n in ts.markov_features] + \
        [f"w_{n}" for n in ts.exo_features]
    lines = [",".join(header)]
    for i in range(ts.n):
        for t in range(ts.horizon):
            cells = [str(i), str(t), str(int(ts.actions[i, t])),
                     "%.17g" % ts.rewards[i, t]]
            cells += ["%.17g" % v for v in ts.x[i, t]]
            cells += ["%.17g" % v for v in ts.w[i, t]]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_trajectory_csv(ts: TrajectorySet, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(trajectory_csv(ts))
