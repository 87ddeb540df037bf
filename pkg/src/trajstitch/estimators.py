"""Value estimates, fan-chart quantiles, and visual-fidelity error.

The fidelity error compares a surrogate trajectory set against a ground-truth
set variable by variable: the absolute offset between the two median curves,
normalized by the truth fan chart's height, summed over variables and time
steps.  A bootstrap floor (truth resampled against itself) gives the smallest
error any surrogate could be expected to reach, and whole stored seed
trajectories drawn at random give a no-stitching baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .database import TransitionDatabase
from .errors import ConfigurationError, ContractViolationError, EstimationError
from .mdp import MarkovState, Trajectory, TrajectorySet, TrajectoryStep

DEFAULT_QUANTILE_LEVELS = tuple(round(0.1 * i, 1) for i in range(11))


def value_estimate(ts: TrajectorySet) -> float:
    """Mean cumulative reward over the set's trajectories."""
    if ts.n == 0:
        raise EstimationError("cannot estimate value from an empty trajectory set")
    return float(ts.returns().mean())


def _validate_levels(levels: Sequence[float]) -> tuple[float, ...]:
    levels = tuple(float(v) for v in levels)
    if not levels:
        raise ConfigurationError("at least one quantile level is required")
    if any(not 0.0 <= v <= 1.0 for v in levels):
        raise ConfigurationError("quantile levels must lie in [0, 1]")
    if list(levels) != sorted(levels):
        raise ConfigurationError("quantile levels must be nondecreasing")
    return levels


@dataclass(frozen=True)
class QuantileSeries:
    """Per-time-step empirical quantiles of one state property."""

    variable: str
    time_steps: tuple[int, ...]
    quantile_levels: tuple[float, ...]
    values: np.ndarray  # (h, levels), nondecreasing across levels per row

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "time_steps": list(self.time_steps),
            "quantile_levels": list(self.quantile_levels),
            "values": [[float(v) for v in row] for row in self.values],
        }


def fan_chart(ts: TrajectorySet, variable: str,
              levels: Sequence[float] = DEFAULT_QUANTILE_LEVELS) -> QuantileSeries:
    """Empirical quantiles of ``variable`` at each time step (linear interpolation)."""
    levels = _validate_levels(levels)
    if ts.n == 0:
        raise EstimationError("cannot build a fan chart from an empty trajectory set")
    try:
        values = ts.variable(variable)  # (n, h)
    except KeyError:
        raise ConfigurationError(
            f"unknown variable {variable!r}; available: {ts.variable_names()}"
        ) from None
    q = np.quantile(values, levels, axis=0, method="linear")  # (levels, h)
    return QuantileSeries(
        variable=variable,
        time_steps=tuple(range(ts.horizon)),
        quantile_levels=levels,
        values=q.T.copy(),
    )


@dataclass(frozen=True)
class FidelityReport:
    """Median-offset errors per variable and time, normalized by chart height."""

    variables: tuple[str, ...]
    errors: dict[str, np.ndarray]      # variable -> (h,) |median offset|
    heights: dict[str, float]          # variable -> truth chart height H_v
    excluded: tuple[str, ...]          # flat-truth variables left out of the total
    weighted_total: float

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "errors": {v: [float(e) for e in err] for v, err in self.errors.items()},
            "heights": {v: float(h) for v, h in self.heights.items()},
            "excluded": list(self.excluded),
            "weighted_total": float(self.weighted_total),
        }


def default_error_variables(ts: TrajectorySet) -> list[str]:
    return list(ts.markov_features) + ["reward", "cumulative_reward"]


def visual_fidelity_error(truth: TrajectorySet, surrogate: TrajectorySet,
                          variables: Optional[Sequence[str]] = None,
                          levels: Sequence[float] = DEFAULT_QUANTILE_LEVELS
                          ) -> FidelityReport:
    """Summed normalized median offsets between truth and surrogate charts.

    A variable whose truth chart has zero height carries no usable scale; it
    is excluded from the total and flagged in the report.
    """
    if truth.horizon != surrogate.horizon:
        raise ContractViolationError(
            f"horizon mismatch: truth {truth.horizon}, surrogate {surrogate.horizon}"
        )
    levels = _validate_levels(levels)
    if variables is None:
        variables = default_error_variables(truth)
    variables = tuple(variables)
    errors: dict[str, np.ndarray] = {}
    heights: dict[str, float] = {}
    excluded: list[str] = []
    total = 0.0
    for v in variables:
        truth_chart = fan_chart(truth, v, levels)
        surr_chart = fan_chart(surrogate, v, levels)
        med = list(levels).index(0.5) if 0.5 in levels else None
        if med is not None:
            truth_med = truth_chart.values[:, med]
            surr_med = surr_chart.values[:, med]
        else:
            truth_med = np.quantile(truth.variable(v), 0.5, axis=0, method="linear")
            surr_med = np.quantile(surrogate.variable(v), 0.5, axis=0, method="linear")
        err = np.abs(truth_med - surr_med)
        band = truth_chart.values[:, -1] - truth_chart.values[:, 0]
        height = float(band.max())
        errors[v] = err
        heights[v] = height
        if height == 0.0:
            excluded.append(v)
            continue
        total += float(np.sum(err / height))
    return FidelityReport(
        variables=variables,
        errors=errors,
        heights=heights,
        excluded=tuple(excluded),
        weighted_total=total,
    )


def bootstrap_floor(truth: TrajectorySet, reps: int, rng: np.random.Generator,
                    variables: Optional[Sequence[str]] = None,
                    levels: Sequence[float] = DEFAULT_QUANTILE_LEVELS,
                    sample_size: Optional[int] = None) -> float:
    """Mean fidelity error of truth resampled (with replacement) against itself.

    ``sample_size`` sets the resample budget; the default resamples at the
    truth set's own size.  Passing the surrogate's trajectory count measures
    the irreducible chart error of any estimate built from that many
    trajectories, however accurate each one is.
    """
    if reps < 1:
        raise ConfigurationError("bootstrap requires at least one repetition")
    if truth.n == 0:
        raise EstimationError("cannot bootstrap an empty trajectory set")
    size = truth.n if sample_size is None else int(sample_size)
    if size < 1:
        raise ConfigurationError("sample_size must be at least 1")
    total = 0.0
    for _ in range(reps):
        idx = rng.integers(0, truth.n, size=size)
        resampled = TrajectorySet(
            truth.markov_features, truth.exo_features,
            truth.x[idx], truth.w[idx], truth.actions[idx], truth.rewards[idx],
        )
        total += visual_fidelity_error(truth, resampled, variables, levels).weighted_total
    return total / reps


def random_baseline(db: TransitionDatabase, n: int,
                    rng: np.random.Generator) -> TrajectorySet:
    """``n`` whole seed trajectories drawn without replacement (realized branches)."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    if db.n_seed_trajectories < n:
        raise ConfigurationError(
            f"database holds {db.n_seed_trajectories} seed trajectories, need {n}"
        )
    chosen = rng.choice(db.n_seed_trajectories, size=n, replace=False)
    trajectories = []
    for k in chosen:
        rows = db.seed_trajectory_rows(int(k))
        steps = [
            TrajectoryStep(
                MarkovState(db.x[i].copy(), int(db.time_steps[i])),
                db.w[i].copy(),
                int(db.behavior_actions[i]),
                db.realized_reward(int(i)),
            )
            for i in rows
        ]
        trajectories.append(Trajectory(steps))
    return TrajectorySet.from_trajectories(
        trajectories, db.markov_features, db.exo_features
    )
