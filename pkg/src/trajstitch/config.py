"""JSON experiment configuration shared by the CLI and the HTTP service.

One schema describes the MDP, the database build, the distance metric, and
learning-curve sweeps, so a database built from a config file can be queried
later with the same metric settings.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .benchmarks import build_mdp
from .database import TransitionDatabase
from .errors import ConfigurationError
from .experiments import LearningCurveConfig, QuerySpec
from .mdp import FactoredMdp
from .metrics import DistanceMetric, full_metric, markov_metric
from .policies import Policy, build_policy


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}") from None


def mdp_from_config(cfg: dict) -> FactoredMdp:
    mdp_cfg = cfg.get("mdp")
    if not isinstance(mdp_cfg, dict) or "name" not in mdp_cfg:
        raise ConfigurationError('config requires an "mdp" object with a "name"')
    return build_mdp(mdp_cfg["name"], mdp_cfg.get("params", {}))


def policy_from_config(mdp: FactoredMdp, cfg: dict) -> Policy:
    if not isinstance(cfg, dict) or "policy_class" not in cfg:
        raise ConfigurationError('policy config requires a "policy_class"')
    params = tuple(float(p) for p in cfg.get("params", ()))
    return build_policy(mdp, cfg["policy_class"], params, feature=cfg.get("feature"))


def _weights_vector(weights, feature_names) -> Optional[np.ndarray]:
    if weights is None:
        return None
    if isinstance(weights, dict):
        unknown = set(weights) - set(feature_names)
        if unknown:
            raise ConfigurationError(f"weights name unknown features: {sorted(unknown)}")
        return np.array([float(weights.get(name, 1.0)) for name in feature_names])
    vec = np.asarray([float(v) for v in weights], dtype=float)
    if vec.shape != (len(feature_names),):
        raise ConfigurationError(
            f"expected {len(feature_names)} weights, got {vec.shape[0]}"
        )
    return vec


def metric_from_config(db: TransitionDatabase, cfg: Optional[dict],
                       kind: str) -> DistanceMetric:
    """Build the stitching metric for ``db``; ``kind`` is markov or full."""
    cfg = cfg or {}
    time_mode = cfg.get("time_mode", "hard")
    time_weight = float(cfg.get("time_weight", 0.0))
    standardize = bool(cfg.get("standardize", True))
    if kind == "markov":
        weights = _weights_vector(cfg.get("weights"), db.markov_features)
        return markov_metric(db, weights=weights, time_mode=time_mode,
                             time_weight=time_weight, standardize=standardize)
    if kind == "full":
        names = tuple(db.markov_features) + tuple(db.exo_features)
        weights = _weights_vector(cfg.get("weights"), names)
        return full_metric(db, weights=weights, time_mode=time_mode,
                           time_weight=time_weight,
                           action_penalty=float(cfg.get("action_penalty", 1e6)),
                           standardize=standardize)
    raise ConfigurationError(f"metric kind must be markov or full, got {kind!r}")


def learning_curve_config(cfg: dict) -> LearningCurveConfig:
    lc = cfg.get("learning_curve", {})
    mdp_cfg = cfg.get("mdp", {"name": "ember"})
    queries = tuple(
        QuerySpec(q["policy_class"], tuple(float(p) for p in q.get("params", ())),
                  q.get("feature"))
        for q in lc.get("queries", [])
    )
    kwargs = {}
    for key in ("db_sizes", "horizon", "n", "seeds", "algorithms", "variables",
                "quantile_levels", "truth_n", "bootstrap_reps",
                "seed_policy_class", "mfmc_action_penalty",
                "cap_n_to_database", "engine"):
        if key in lc:
            value = lc[key]
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
    config = LearningCurveConfig(
        mdp_name=mdp_cfg.get("name", "ember"),
        mdp_params=mdp_cfg.get("params", {}),
        **kwargs,
    )
    if queries:
        config.queries = queries
    return config
