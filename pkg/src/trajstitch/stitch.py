"""Trajectory synthesis by nearest-neighbor stitching.

Three algorithms share one mechanism: query the database for the nearest
stored state, adopt that row's outcome, mark the row consumed, repeat.

* full-state stitching  - biased database, match on (x, w) with an
                          action-mismatch penalty, adopt (r, x', w').
* factored stitching    - debiased database, match on x alone, adopt the
                          set's exogenous draw, act under the query policy,
                          and read that action's branch.
* biased factored       - biased database, match on x alone but reject
                          candidates whose stored action disagrees with the
                          query policy under the adopted draw.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

from .database import TransitionDatabase, TransitionSet, TransitionTuple
from .errors import ConfigurationError, ContractViolationError, ExhaustionError
from .mdp import MarkovState, Trajectory, TrajectorySet, TrajectoryStep
from .metrics import DistanceMetric
from .neighbors import NeighborIndex, make_index
from .policies import Policy

ALGORITHMS = ("mfmc", "mfmci", "mfmci_biased")
MATCH_TARGETS = ("current", "successor")


class ExclusionLedger:
    """Tracks rows consumed during one trajectory-set query."""

    def __init__(self, n_rows: int):
        self._mask = np.zeros(n_rows, dtype=bool)
        self._order: list[int] = []

    def exclude(self, row_id: int) -> None:
        if self._mask[row_id]:
            raise ContractViolationError(f"row {row_id} excluded twice")
        self._mask[row_id] = True
        self._order.append(int(row_id))

    def is_excluded(self, row_id: int) -> bool:
        return bool(self._mask[row_id])

    @property
    def mask(self) -> np.ndarray:
        return self._mask

    @property
    def count(self) -> int:
        return len(self._order)

    def excluded_ids(self) -> list[int]:
        return list(self._order)

    def reset(self) -> None:
        self._mask[:] = False
        self._order.clear()


class StitchEngine:
    """A database, a metric, and a prebuilt index, ready to answer queries.

    ``match_target`` selects which stored state a debiased set is matched by:
    its pre-transition state (default) or its realized successor.
    """

    def __init__(self, db: TransitionDatabase, metric: DistanceMetric,
                 engine: str = "vectorized", match_target: str = "current"):
        if match_target not in MATCH_TARGETS:
            raise ConfigurationError(f"match_target must be one of {MATCH_TARGETS}")
        if db.is_empty:
            raise ConfigurationError("cannot stitch against an empty database")
        self.db = db
        self.metric = metric
        self.match_target = match_target
        if metric.include_exogenous:
            if db.exo_dim:
                coords = np.hstack([db.x, db.w])
            else:
                coords = db.x
            self.index: NeighborIndex = make_index(
                coords, db.time_steps, metric, actions=db.behavior_actions,
                engine=engine,
            )
        else:
            if match_target == "successor":
                coords = db.realized_next_matrix()
                times = db.time_steps + 1
            else:
                coords = db.x
                times = db.time_steps
            self.index = make_index(coords, times, metric, engine=engine)
        # Rows that cannot seed a (x', w') continuation: last row of each
        # seed trajectory has no stored successor draw.
        self._no_next = ~db.has_next if db.exo_dim else None

    def new_ledger(self) -> ExclusionLedger:
        return ExclusionLedger(self.db.n_rows)

    # ------------------------------------------------------------ queries

    def nearest_set(self, x: MarkovState, ledger: Optional[ExclusionLedger] = None
                    ) -> tuple[TransitionSet, float]:
        if self.db.mode != "debiased":
            raise ContractViolationError("nearest_set requires a debiased database")
        if self.metric.include_exogenous:
            raise ContractViolationError("nearest_set requires a Markov-only metric")
        hit = self.index.nearest(
            x.features, x.time_step,
            excluded=ledger.mask if ledger is not None else None,
        )
        if hit is None:
            raise ExhaustionError(
                f"no feasible transition set at time step {x.time_step}",
                time_step=x.time_step,
            )
        row_id, dist = hit
        return self.db.transition_set(row_id), dist

    def nearest_tuple(self, x: MarkovState, w: np.ndarray, action: int,
                      ledger: Optional[ExclusionLedger] = None,
                      require_next: bool = False) -> tuple[TransitionTuple, float]:
        if self.db.mode != "biased":
            raise ContractViolationError("nearest_tuple requires a biased database")
        if not self.metric.include_exogenous:
            raise ContractViolationError("nearest_tuple requires a full-state metric")
        forbidden = self._no_next if require_next else None
        features = np.concatenate([np.asarray(x.features, float), np.asarray(w, float)]) \
            if self.db.exo_dim else np.asarray(x.features, float)
        hit = self.index.nearest(
            features, x.time_step,
            excluded=ledger.mask if ledger is not None else None,
            action=action, forbidden=forbidden,
        )
        if hit is None:
            raise ExhaustionError(
                f"no feasible transition tuple at time step {x.time_step}",
                time_step=x.time_step,
            )
        row_id, dist = hit
        return self.db.transition_tuple(row_id), dist

    # --------------------------------------------------------- algorithms

    def mfmci_trajectory(self, policy: Policy, horizon: int, x0: np.ndarray,
                         ledger: Optional[ExclusionLedger] = None) -> Trajectory:
        """Match on x, adopt the set's draw, act, read that action's branch."""
        ledger = ledger if ledger is not None else self.new_ledger()
        x = np.asarray(x0, dtype=float).copy()
        steps: list[TrajectoryStep] = []
        matched: list[int] = []
        for t in range(horizon):
            state = MarkovState(x, t)
            best, _ = self.nearest_set(state, ledger)
            w_hat = best.w
            a = int(policy(x, w_hat))
            r = best.reward(a)
            steps.append(TrajectoryStep(state, w_hat, a, r))
            matched.append(best.set_id)
            ledger.exclude(best.set_id)
            x = best.successor(a).features
        return Trajectory(tuple(steps), matched_ids=tuple(matched))

    def mfmc_trajectory(self, policy: Policy, horizon: int, x0: np.ndarray,
                        w0: np.ndarray, ledger: Optional[ExclusionLedger] = None
                        ) -> Trajectory:
        """Match on (x, w, a), adopt the tuple's reward and successor state."""
        ledger = ledger if ledger is not None else self.new_ledger()
        x = np.asarray(x0, dtype=float).copy()
        w = np.asarray(w0, dtype=float).copy()
        steps: list[TrajectoryStep] = []
        matched: list[int] = []
        for t in range(horizon):
            state = MarkovState(x, t)
            a = int(policy(x, w))
            # A mid-trajectory match must carry a successor draw to continue.
            need_next = self.db.exo_dim > 0 and t + 1 < horizon
            best, _ = self.nearest_tuple(state, w, a, ledger, require_next=need_next)
            steps.append(TrajectoryStep(state, w, a, best.reward))
            matched.append(best.tuple_id)
            ledger.exclude(best.tuple_id)
            x = best.x_next.features
            if need_next:
                w = self.db.w_next[best.tuple_id].copy()
        return Trajectory(tuple(steps), matched_ids=tuple(matched))

    def mfmci_biased_trajectory(self, policy: Policy, horizon: int, x0: np.ndarray,
                                ledger: Optional[ExclusionLedger] = None) -> Trajectory:
        """Match on x, rejecting tuples whose stored action disagrees with the policy."""
        if self.db.mode != "biased":
            raise ContractViolationError("biased stitching requires a biased database")
        if self.metric.include_exogenous:
            raise ContractViolationError("biased factored stitching matches on x alone")
        ledger = ledger if ledger is not None else self.new_ledger()
        x = np.asarray(x0, dtype=float).copy()
        steps: list[TrajectoryStep] = []
        matched: list[int] = []
        for t in range(horizon):
            state = MarkovState(x, t)
            accepted = None
            for row_id, dist in self.index.ordered(x, t, excluded=ledger.mask):
                w_tilde = self.db.w[row_id]
                a_stored = int(self.db.behavior_actions[row_id])
                if int(policy(x, w_tilde)) == a_stored:
                    accepted = (row_id, w_tilde, a_stored)
                    break
            if accepted is None:
                raise ExhaustionError(
                    f"no action-consistent candidate at time step {t}",
                    time_step=t,
                )
            row_id, w_tilde, a_stored = accepted
            steps.append(
                TrajectoryStep(state, w_tilde.copy(), a_stored,
                               float(self.db.rewards[row_id]))
            )
            matched.append(row_id)
            ledger.exclude(row_id)
            x = self.db.x_next[row_id].copy()
        return Trajectory(tuple(steps), matched_ids=tuple(matched))

    def trajectory(self, algorithm: str, policy: Policy, horizon: int,
                   x0: np.ndarray, w0: Optional[np.ndarray] = None,
                   ledger: Optional[ExclusionLedger] = None) -> Trajectory:
        if algorithm == "mfmci":
            return self.mfmci_trajectory(policy, horizon, x0, ledger)
        if algorithm == "mfmc":
            if w0 is None:
                raise ConfigurationError("full-state stitching requires an initial w")
            return self.mfmc_trajectory(policy, horizon, x0, w0, ledger)
        if algorithm == "mfmci_biased":
            return self.mfmci_biased_trajectory(policy, horizon, x0, ledger)
        raise ConfigurationError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


# ------------------------------------------------------- module-level facade

StartSpec = Union[np.ndarray, Sequence[float], Callable[[np.random.Generator], np.ndarray]]


def _engine_for(db: TransitionDatabase, metric: DistanceMetric, algorithm: str,
                engine: str, match_target: str) -> StitchEngine:
    if algorithm not in ALGORITHMS:
        raise ConfigurationError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    if algorithm == "mfmci" and db.mode != "debiased":
        raise ContractViolationError("factored stitching requires a debiased database")
    if algorithm in ("mfmc", "mfmci_biased") and db.mode != "biased":
        raise ContractViolationError(f"{algorithm} requires a biased database")
    if algorithm == "mfmc" and not metric.include_exogenous:
        raise ContractViolationError("full-state stitching requires a full-state metric")
    if algorithm != "mfmc" and metric.include_exogenous:
        raise ContractViolationError("factored stitching requires a Markov-only metric")
    return StitchEngine(db, metric, engine=engine, match_target=match_target)


def nearest_set(db: TransitionDatabase, x: MarkovState, metric: DistanceMetric,
                ledger: Optional[ExclusionLedger] = None,
                engine: str = "vectorized") -> tuple[TransitionSet, float]:
    return StitchEngine(db, metric, engine=engine).nearest_set(x, ledger)


def mfmc_trajectory(db, policy, horizon, x0, w0, metric, ledger=None,
                    engine="vectorized") -> Trajectory:
    eng = _engine_for(db, metric, "mfmc", engine, "current")
    return eng.mfmc_trajectory(policy, horizon, x0, w0, ledger)


def mfmci_trajectory(db, policy, horizon, x0, metric, ledger=None,
                     engine="vectorized", match_target="current") -> Trajectory:
    eng = _engine_for(db, metric, "mfmci", engine, match_target)
    return eng.mfmci_trajectory(policy, horizon, x0, ledger)


def mfmci_biased_trajectory(db, policy, horizon, x0, metric, ledger=None,
                            engine="vectorized") -> Trajectory:
    eng = _engine_for(db, metric, "mfmci_biased", engine, "current")
    return eng.mfmci_biased_trajectory(policy, horizon, x0, ledger)


def generate_trajectory_set(db: TransitionDatabase, policy: Policy, n: int,
                            horizon: int, start: StartSpec,
                            metric: DistanceMetric, algorithm: str,
                            rng: Optional[np.random.Generator] = None,
                            exo_sampler: Optional[Callable] = None,
                            engine: str = "vectorized",
                            match_target: str = "current",
                            stitch_engine: Optional[StitchEngine] = None
                            ) -> TrajectorySet:
    """Synthesize ``n`` trajectories sharing one exclusion ledger.

    ``start`` is either a fixed initial Markov state or a callable drawing one
    from ``rng``.  Full-state stitching additionally draws each trajectory's
    initial exogenous state from ``exo_sampler(rng) -> (w, z)``.
    """
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    eng = stitch_engine if stitch_engine is not None else _engine_for(
        db, metric, algorithm, engine, match_target
    )
    needs_rng = callable(start) or (algorithm == "mfmc" and db.exo_dim > 0)
    if needs_rng and rng is None:
        raise ConfigurationError("an rng is required to sample starting states")
    if algorithm == "mfmc" and db.exo_dim > 0 and exo_sampler is None:
        raise ConfigurationError("full-state stitching requires an exogenous sampler")
    ledger = eng.new_ledger()
    trajectories: list[Trajectory] = []
    for i in range(n):
        x0 = np.asarray(start(rng) if callable(start) else start, dtype=float)
        try:
            if algorithm == "mfmc":
                w0 = (np.asarray(exo_sampler(rng).w, dtype=float)
                      if db.exo_dim > 0 else np.zeros(0))
                traj = eng.mfmc_trajectory(policy, horizon, x0, w0, ledger)
            elif algorithm == "mfmci":
                traj = eng.mfmci_trajectory(policy, horizon, x0, ledger)
            else:
                traj = eng.mfmci_biased_trajectory(policy, horizon, x0, ledger)
        except ExhaustionError as exc:
            raise ExhaustionError(
                f"{exc.args[0]} (completed {i} of {n} trajectories)",
                time_step=exc.time_step,
                trajectories_completed=i,
            ) from exc
        trajectories.append(traj)
    return TrajectorySet.from_trajectories(trajectories,
                                           markov_features=db.markov_features,
                                           exo_features=db.exo_features)
