"""Learning-curve experiments: fidelity error as a function of database size.

For each (seed, database size) cell the runner builds paired debiased and
biased databases from a grid of seed policies, synthesizes trajectory sets
for every query policy and algorithm, and scores them against ground truth.
All randomness flows from named SeedSequence keys, so a rerun with the same
config reproduces the table exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .benchmarks import build_mdp
from .database import seed_policy_grid
from .errors import ConfigurationError, ExhaustionError
from .estimators import (
    DEFAULT_QUANTILE_LEVELS,
    bootstrap_floor,
    random_baseline,
    visual_fidelity_error,
)
from .mdp import FactoredMdp, rollout_ground_truth
from .metrics import full_metric, markov_metric
from .policies import Policy, build_policy
from .stitch import ALGORITHMS, generate_trajectory_set

RESULT_COLUMNS = (
    "algorithm",
    "policy_class",
    "policy_params",
    "db_size",
    "weighted_error",
    "bootstrap_floor",
    "random_baseline",
    "seed",
)

# SeedSequence stream tags; fixed so reruns draw identical randomness.
_TAG_TRUTH, _TAG_DB, _TAG_STITCH, _TAG_FLOOR, _TAG_BASELINE = range(5)


@dataclass(frozen=True)
class QuerySpec:
    """A query policy described by class and parameters."""

    policy_class: str
    params: tuple[float, ...]
    feature: Optional[str] = None

    def build(self, mdp: FactoredMdp) -> Policy:
        return build_policy(mdp, self.policy_class, self.params, feature=self.feature)

    @property
    def params_label(self) -> str:
        # "/"-separated so the label stays a single cell in the results CSV.
        return "/".join(format(p, "g") for p in self.params)


@dataclass
class LearningCurveConfig:
    mdp_name: str = "ember"
    mdp_params: dict = field(default_factory=dict)
    db_sizes: tuple[int, ...] = (500, 2000, 10000, 40000)
    horizon: int = 20
    n: int = 30
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    algorithms: tuple[str, ...] = ("mfmc", "mfmci", "mfmci_biased")
    queries: tuple[QuerySpec, ...] = (
        QuerySpec("intensity", (75.0, 95.0, 120.0)),
        QuerySpec("fuel", (0.3,)),
        QuerySpec("location", (0.2,)),
    )
    variables: tuple[str, ...] = ("fuel", "canopy")
    quantile_levels: tuple[float, ...] = DEFAULT_QUANTILE_LEVELS
    truth_n: int = 1000
    bootstrap_reps: int = 30
    seed_policy_class: str = "intensity"
    mfmc_action_penalty: float = 1e6
    cap_n_to_database: bool = True
    engine: str = "vectorized"

    def validate(self) -> None:
        if self.horizon < 1 or self.n < 1 or self.truth_n < 1:
            raise ConfigurationError("horizon, n, and truth_n must be positive")
        for alg in self.algorithms:
            if alg not in ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {alg!r}")
        for size in self.db_sizes:
            if size < self.horizon:
                raise ConfigurationError(
                    f"db size {size} is below one seed trajectory ({self.horizon} sets)"
                )


def intensity_seed_grid(count: int, severity_max: float = 100.0,
                        day_max: float = 180.0) -> list[tuple[float, float, float]]:
    """``count`` grid-cell-center parameterizations spanning the policy space.

    Parameters sweep the suppression band's lower edge over severity and the
    ignition-day threshold over the season; the band's upper edge stays at the
    severity maximum.
    """
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    rows = int(math.isqrt(count))
    while count % rows:
        rows -= 1
    cols = count // rows
    grid = []
    for i in range(rows):
        for j in range(cols):
            lo = (i + 0.5) / rows * severity_max
            day = (j + 0.5) / cols * day_max
            grid.append((lo, severity_max, day))
    return grid


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(key)))


def _stitch_with_fallback(db, policy, n, horizon, start, metric, algorithm,
                          seed_key, exo_sampler, engine):
    """Synthesize up to ``n`` trajectories, shrinking n when the db runs dry."""
    n_try = n
    while True:
        try:
            ts = generate_trajectory_set(
                db, policy, n_try, horizon, start, metric, algorithm,
                rng=_rng(*seed_key), exo_sampler=exo_sampler, engine=engine,
            )
            return ts, n_try
        except ExhaustionError as exc:
            if exc.trajectories_completed < 1:
                raise
            n_try = exc.trajectories_completed


def learning_curve(config: LearningCurveConfig,
                   progress: Optional[Callable[[str], None]] = None,
                   on_row: Optional[Callable[[dict], None]] = None) -> list[dict]:
    """Run the full sweep; returns one result row per (seed, size, query, algorithm).

    ``on_row`` is invoked as each row completes, letting callers flush partial
    results if a later cell fails.
    """
    config.validate()
    mdp = build_mdp(config.mdp_name, config.mdp_params)
    queries = [(qi, spec, spec.build(mdp)) for qi, spec in enumerate(config.queries)]
    alg_order = {alg: i for i, alg in enumerate(ALGORITHMS)}
    rows: list[dict] = []
    for seed in config.seeds:
        truths = {}
        for qi, spec, qpolicy in queries:
            truths[qi] = rollout_ground_truth(
                mdp, qpolicy, config.truth_n, config.horizon, _rng(seed, _TAG_TRUTH, qi)
            )
        for size in config.db_sizes:
            n_policies = size // config.horizon
            grid = intensity_seed_grid(n_policies)
            db_debiased = seed_policy_grid(
                mdp, config.seed_policy_class, grid, config.horizon,
                _rng(seed, _TAG_DB, size), mode="debiased",
            )
            db_biased = seed_policy_grid(
                mdp, config.seed_policy_class, grid, config.horizon,
                _rng(seed, _TAG_DB, size), mode="biased",
            )
            # Cap at half of the seed-trajectory count so the stitchers keep
            # headroom after the exclusion rule; consuming the whole database
            # leaves the last trajectories matching against leftovers.
            if config.cap_n_to_database:
                n_eff = min(config.n, max(1, n_policies // 2))
            else:
                n_eff = config.n
            baseline_set = random_baseline(
                db_debiased, n_eff, _rng(seed, _TAG_BASELINE, size)
            )
            markov = markov_metric(db_debiased)
            markov_b = markov_metric(db_biased)
            full = full_metric(db_biased, action_penalty=config.mfmc_action_penalty)
            for qi, spec, qpolicy in queries:
                truth = truths[qi]
                # Floor at the cell's budget: the chart error a perfect
                # simulator would still incur with only n_eff trajectories.
                floor = bootstrap_floor(
                    truth, config.bootstrap_reps, _rng(seed, _TAG_FLOOR, qi, size),
                    variables=config.variables, levels=config.quantile_levels,
                    sample_size=n_eff,
                )
                baseline_err = visual_fidelity_error(
                    truth, baseline_set, config.variables, config.quantile_levels
                ).weighted_total
                for alg in config.algorithms:
                    if alg == "mfmci":
                        db, metric = db_debiased, markov
                    elif alg == "mfmci_biased":
                        db, metric = db_biased, markov_b
                    else:
                        db, metric = db_biased, full
                    ts, n_used = _stitch_with_fallback(
                        db, qpolicy, n_eff, config.horizon,
                        mdp.initial_state_sampler, metric, alg,
                        (seed, _TAG_STITCH, size, qi, alg_order[alg]),
                        mdp.exo_sampler, config.engine,
                    )
                    err = visual_fidelity_error(
                        truth, ts, config.variables, config.quantile_levels
                    ).weighted_total
                    row = {
                        "algorithm": alg,
                        "policy_class": spec.policy_class,
                        "policy_params": spec.params_label,
                        "db_size": size,
                        "weighted_error": err,
                        "bootstrap_floor": floor,
                        "random_baseline": baseline_err,
                        "seed": seed,
                        "n_used": n_used,
                    }
                    rows.append(row)
                    if on_row:
                        on_row(row)
                    if progress:
                        progress(
                            f"seed={seed} size={size} {spec.policy_class} {alg}: "
                            f"error={err:.4f} (n={n_used})"
                        )
    return rows


def summarize(rows: Sequence[dict]) -> dict:
    """Seed-averaged error per (algorithm, policy_class, db_size)."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["algorithm"], row["policy_class"], row["db_size"])
        groups.setdefault(key, []).append(row)
    cells = []
    for (alg, pclass, size), members in sorted(groups.items()):
        cells.append({
            "algorithm": alg,
            "policy_class": pclass,
            "db_size": size,
            "mean_weighted_error": float(np.mean([m["weighted_error"] for m in members])),
            "mean_bootstrap_floor": float(np.mean([m["bootstrap_floor"] for m in members])),
            "mean_random_baseline": float(np.mean([m["random_baseline"] for m in members])),
            "seeds": sorted(m["seed"] for m in members),
            "n_used": sorted(m["n_used"] for m in members),
        })
    return {"cells": cells}


def _format_value(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_results_csv(rows: Sequence[dict], path: str) -> None:
    lines = [",".join(RESULT_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_value(row[c]) for c in RESULT_COLUMNS))
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")


def write_results_json(rows: Sequence[dict], path: str,
                       status: str = "complete", error: Optional[str] = None) -> None:
    payload = {
        "status": status,
        "rows": list(rows),
        "summary": summarize(rows),
    }
    if error is not None:
        payload["error"] = error
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")
