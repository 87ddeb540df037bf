"""Feature standardization and the stitching distance metrics.

Two metrics are used for stitching: a Markov-only metric (matching on ``x``)
and a full-state metric (matching on ``(x, w)`` plus an action-mismatch
penalty).  Both are weighted Euclidean distances over mean/std standardized
features.  Time steps either partition the candidates outright (hard match)
or enter the distance as an extra weighted squared term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ContractViolationError
from .mdp import MarkovState

INFEASIBLE = math.inf

TIME_MODES = ("hard", "weighted")


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature mean and population standard deviation.

    Features with zero spread are flagged constant; they are excluded from
    distances (weight forced to zero) instead of dividing by zero.
    """

    names: tuple[str, ...]
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray

    @classmethod
    def from_matrix(cls, names, matrix: np.ndarray) -> "FeatureStats":
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[1] != len(names):
            raise ContractViolationError(
                f"stats matrix shape {matrix.shape} does not match {len(names)} features"
            )
        if matrix.shape[0] == 0:
            raise ConfigurationError("cannot compute feature stats over an empty database")
        mean = matrix.mean(axis=0)
        constant = np.ptp(matrix, axis=0) == 0.0
        std = matrix.std(axis=0)  # population convention (divide by N)
        std = np.where(constant, 0.0, std)
        return cls(tuple(names), mean, std, constant)

    @classmethod
    def identity(cls, names) -> "FeatureStats":
        d = len(names)
        return cls(tuple(names), np.zeros(d), np.ones(d), np.zeros(d, dtype=bool))

    @property
    def safe_std(self) -> np.ndarray:
        return np.where(self.constant, 1.0, self.std)

    def standardize(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != len(self.names):
            raise ContractViolationError(
                f"feature arity mismatch: got {values.shape[-1]}, expected {len(self.names)}"
            )
        return (values - self.mean) / self.safe_std

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "constant": [bool(v) for v in self.constant],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureStats":
        return cls(
            tuple(d["names"]),
            np.asarray(d["mean"], dtype=float),
            np.asarray(d["std"], dtype=float),
            np.asarray(d["constant"], dtype=bool),
        )


@dataclass(frozen=True)
class DistanceMetric:
    """Weighted Euclidean distance over standardized features.

    ``feature_names`` lists every matched feature; for a full-state metric it
    is the Markov features followed by the exogenous ones and
    ``include_exogenous`` is set.  ``action_penalty`` is added to the distance
    (outside the square root) when candidate actions differ.
    """

    feature_names: tuple[str, ...]
    stats: FeatureStats
    weights: np.ndarray
    time_mode: str = "hard"
    time_weight: float = 0.0
    include_exogenous: bool = False
    markov_dim: int = 0
    action_penalty: float = 1e6
    _effective: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.time_mode not in TIME_MODES:
            raise ConfigurationError(f"time_mode must be one of {TIME_MODES}")
        weights = np.asarray(self.weights, dtype=float)
        if weights.shape != (len(self.feature_names),):
            raise ConfigurationError(
                f"expected {len(self.feature_names)} weights, got shape {weights.shape}"
            )
        if np.any(weights < 0) or self.time_weight < 0 or self.action_penalty < 0:
            raise ConfigurationError("metric weights and penalties must be nonnegative")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(
            self, "_effective", np.where(self.stats.constant, 0.0, weights)
        )

    @property
    def effective_weights(self) -> np.ndarray:
        """Weights actually applied; constant features are zeroed out."""
        return self._effective

    @property
    def feature_dims(self) -> int:
        return len(self.feature_names)

    def describe(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "weights": [float(v) for v in self.weights],
            "time_mode": self.time_mode,
            "time_weight": float(self.time_weight),
            "include_exogenous": self.include_exogenous,
            "action_penalty": float(self.action_penalty),
        }


def _make_metric(names, stats_matrix, weights, time_mode, time_weight, standardize,
                 include_exogenous, markov_dim, action_penalty=1e6) -> DistanceMetric:
    names = tuple(names)
    stats = FeatureStats.from_matrix(names, stats_matrix) if standardize else FeatureStats.identity(names)
    if weights is None:
        weights = np.ones(len(names))
    return DistanceMetric(
        feature_names=names,
        stats=stats,
        weights=np.asarray(weights, dtype=float),
        time_mode=time_mode,
        time_weight=float(time_weight),
        include_exogenous=include_exogenous,
        markov_dim=markov_dim,
        action_penalty=float(action_penalty),
    )


def markov_metric(db, weights=None, time_mode="hard", time_weight=0.0,
                  standardize=True) -> DistanceMetric:
    """Metric over Markov features only, with stats taken from ``db``."""
    return _make_metric(
        db.markov_features, db.x, weights, time_mode, time_weight, standardize,
        include_exogenous=False, markov_dim=len(db.markov_features),
    )


def full_metric(db, weights=None, time_mode="hard", time_weight=0.0,
                action_penalty=1e6, standardize=True) -> DistanceMetric:
    """Metric over concatenated (Markov, exogenous) features plus action penalty."""
    names = tuple(db.markov_features) + tuple(db.exo_features)
    matrix = np.hstack([db.x, db.w]) if len(db.exo_features) else db.x
    return _make_metric(
        names, matrix, weights, time_mode, time_weight, standardize,
        include_exogenous=True, markov_dim=len(db.markov_features),
        action_penalty=action_penalty,
    )


def _feature_distance_sq(q: np.ndarray, c: np.ndarray, metric: DistanceMetric) -> float:
    qs = metric.stats.standardize(q)
    cs = metric.stats.standardize(c)
    diff = qs - cs
    return float(np.sum(diff * diff * metric.effective_weights))


def _with_time(d2: float, t_q: int, t_c: int, metric: DistanceMetric) -> float:
    if metric.time_mode == "hard":
        if t_q != t_c:
            return INFEASIBLE
        return math.sqrt(d2)
    dt = float(t_q - t_c)
    return math.sqrt(d2 + metric.time_weight * dt * dt)


def distance_markov(x: MarkovState, x_db: MarkovState, metric: DistanceMetric) -> float:
    """Distance between two Markov states; inf when time steps cannot match."""
    if metric.include_exogenous:
        raise ContractViolationError("distance_markov requires a Markov-only metric")
    d2 = _feature_distance_sq(x.features, x_db.features, metric)
    return _with_time(d2, x.time_step, x_db.time_step, metric)


def distance_full(s, a: int, s_db, a_db: int, metric: DistanceMetric) -> float:
    """Distance between two (state, action) pairs under the full-state metric.

    ``s`` and ``s_db`` are ``(MarkovState, w)`` pairs.  A mismatched action
    adds ``metric.action_penalty`` to the distance.
    """
    if not metric.include_exogenous:
        raise ContractViolationError("distance_full requires a full-state metric")
    x, w = s
    x_db, w_db = s_db
    q = np.concatenate([np.asarray(x.features, dtype=float), np.asarray(w, dtype=float)])
    c = np.concatenate([np.asarray(x_db.features, dtype=float), np.asarray(w_db, dtype=float)])
    d2 = _feature_distance_sq(q, c, metric)
    d = _with_time(d2, x.time_step, x_db.time_step, metric)
    if a != a_db:
        d += metric.action_penalty
    return d
