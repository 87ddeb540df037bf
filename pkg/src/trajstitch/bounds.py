"""Smoothness-based error bounds for stitched value estimates.

The bias of a stitched estimate is bounded by a constant (built from the
Lipschitz constants of the transition, reward, and policy functions) times
the database's k-dispersion: the worst distance from any probe state to its
k-th nearest stored candidate.  Everything here is written against the same
distance metrics the stitcher uses, so the dispersion measured is exactly the
one the stitching queries experience.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .database import TransitionDatabase
from .errors import ConfigurationError
from .mdp import MarkovState
from .metrics import DistanceMetric


def _check_nonnegative(**values: float) -> None:
    for name, v in values.items():
        if v < 0:
            raise ConfigurationError(f"{name} must be nonnegative, got {v}")


def mfmc_constant_C(L_R: float, L_f: float, L_pi: float, h: int) -> float:
    """Full-state bound constant: L_R * sum_i sum_j [L_f (1 + L_pi)]^j."""
    _check_nonnegative(L_R=L_R, L_f=L_f, L_pi=L_pi)
    if h < 1:
        raise ConfigurationError("h must be at least 1")
    base = L_f * (1.0 + L_pi)
    total = 0.0
    for i in range(h):
        for j in range(h - i):
            total += base ** j
    return L_R * total


def mfmci_constant_Ci(L_Ri: float, L_fi: float, h: int) -> float:
    """Factored bound constant: L_Ri * sum_b sum_j [L_fi]^j."""
    _check_nonnegative(L_Ri=L_Ri, L_fi=L_fi)
    if h < 1:
        raise ConfigurationError("h must be at least 1")
    total = 0.0
    for b in range(h):
        for j in range(h - b):
            total += L_fi ** j
    return L_Ri * total


def bias_bound(constant: float, alpha: float) -> float:
    _check_nonnegative(constant=constant, alpha=alpha)
    return constant * alpha


def variance_bound(sigma_h: float, n: int, constant: float, alpha: float) -> float:
    _check_nonnegative(sigma_h=sigma_h, constant=constant, alpha=alpha)
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    return (sigma_h / math.sqrt(n) + 2.0 * constant * alpha) ** 2


# ------------------------------------------------------------- k-dispersion

Probe = Union[MarkovState, tuple]


def _standardized_rows(metric: DistanceMetric, matrix: np.ndarray,
                       times: np.ndarray) -> np.ndarray:
    std = metric.stats.standardize(matrix)
    if metric.time_mode == "weighted":
        std = np.hstack([std, np.asarray(times, dtype=float)[:, None]])
    return std


def _dispersion_weights(metric: DistanceMetric) -> np.ndarray:
    w = metric.effective_weights
    if metric.time_mode == "weighted":
        w = np.append(w, metric.time_weight)
    return w


def _probe_array(probes: Sequence[Probe], metric: DistanceMetric):
    """Split probes into feature rows, time steps, and optional actions."""
    feats, times, actions = [], [], []
    for p in probes:
        if isinstance(p, MarkovState):
            feats.append(np.asarray(p.features, dtype=float))
            times.append(p.time_step)
            actions.append(None)
        else:
            x, w = p[0], p[1]
            a = p[2] if len(p) > 2 else None
            feats.append(np.concatenate([
                np.asarray(x.features, dtype=float), np.asarray(w, dtype=float)
            ]))
            times.append(x.time_step)
            actions.append(a)
    return np.asarray(feats), np.asarray(times, dtype=int), actions


def k_dispersion(db: TransitionDatabase, k: int, metric: DistanceMetric,
                 probes: Union[str, Sequence[Probe]] = "self") -> float:
    """Max over probes of the distance to the k-th nearest stored candidate.

    ``probes="self"`` probes every stored row against the rest of the
    database (self excluded).  External probes are ``MarkovState`` instances
    for a Markov-only metric, or ``(MarkovState, w[, action])`` tuples for a
    full-state metric.
    """
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    if db.is_empty:
        raise ConfigurationError("cannot measure dispersion of an empty database")
    if metric.include_exogenous:
        matrix = np.hstack([db.x, db.w]) if db.exo_dim else db.x
        db_actions = db.behavior_actions
    else:
        matrix = db.x
        db_actions = None
    rows = _standardized_rows(metric, matrix, db.time_steps)
    weights = _dispersion_weights(metric)

    self_probe = isinstance(probes, str)
    if self_probe:
        if probes != "self":
            raise ConfigurationError(f"unknown probe source {probes!r}")
        p_rows, p_times = rows, db.time_steps
        p_actions = [int(a) for a in db_actions] if db_actions is not None else [None] * db.n_rows
    else:
        p_feats, p_times, p_actions = _probe_array(probes, metric)
        p_rows = _standardized_rows(metric, p_feats, p_times)

    if metric.time_mode == "hard":
        bucket_keys = np.unique(db.time_steps)
        buckets = {int(t): np.flatnonzero(db.time_steps == t) for t in bucket_keys}
    else:
        buckets = {None: np.arange(db.n_rows)}

    worst = 0.0
    for p_idx in range(len(p_rows)):
        t = int(p_times[p_idx])
        sel = buckets.get(t if metric.time_mode == "hard" else None)
        if sel is None:
            raise ConfigurationError(f"no database candidates at time step {t}")
        cand = rows[sel]
        diff = p_rows[p_idx][None, :] - cand
        d = np.sqrt((diff * diff * weights).sum(axis=1))
        a = p_actions[p_idx]
        if a is not None and db_actions is not None:
            d = d + metric.action_penalty * (db_actions[sel] != a)
        if self_probe:
            local = np.flatnonzero(sel == p_idx)
            if len(local):
                d[local[0]] = np.inf
        feasible = int(np.isfinite(d).sum())
        if k > feasible:
            raise ConfigurationError(
                f"k={k} exceeds the {feasible} candidates available at time step {t}"
            )
        kth = float(np.partition(d, k - 1)[k - 1])
        if kth > worst:
            worst = kth
    return worst


@dataclass(frozen=True)
class BoundReport:
    """Bias and variance bounds for one (database, query) configuration."""

    kind: str                      # "full_state" or "factored"
    lipschitz: dict
    h: int
    n: int
    k: int
    alpha: float
    constant: float
    bias_bound: float
    variance_bound: float
    sigma_h: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lipschitz": {k: float(v) for k, v in self.lipschitz.items()},
            "h": self.h,
            "n": self.n,
            "k": self.k,
            "alpha": float(self.alpha),
            "constant": float(self.constant),
            "bias_bound": float(self.bias_bound),
            "variance_bound": float(self.variance_bound),
            "sigma_h": float(self.sigma_h),
        }


def bound_report(db: TransitionDatabase, metric: DistanceMetric, h: int, n: int,
                 lipschitz: dict, sigma_h: float,
                 probes: Union[str, Sequence[Probe]] = "self",
                 k: Optional[int] = None) -> BoundReport:
    """Assemble the dispersion, constant, and both bounds in one report.

    ``lipschitz`` supplies {L_R, L_f, L_pi} for a full-state metric or
    {L_Ri, L_fi} for a Markov-only metric.  ``k`` defaults to n*h, the number
    of candidates a trajectory-set query consumes.
    """
    if k is None:
        k = n * h
    if metric.include_exogenous:
        kind = "full_state"
        constant = mfmc_constant_C(
            lipschitz["L_R"], lipschitz["L_f"], lipschitz["L_pi"], h
        )
    else:
        kind = "factored"
        constant = mfmci_constant_Ci(lipschitz["L_Ri"], lipschitz["L_fi"], h)
    alpha = k_dispersion(db, k, metric, probes)
    return BoundReport(
        kind=kind,
        lipschitz=dict(lipschitz),
        h=h,
        n=n,
        k=k,
        alpha=alpha,
        constant=constant,
        bias_bound=bias_bound(constant, alpha),
        variance_bound=variance_bound(sigma_h, n, constant, alpha),
        sigma_h=sigma_h,
    )
