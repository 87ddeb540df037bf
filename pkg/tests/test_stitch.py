"""Stitching algorithms: reproduction, hopping, exclusion, exhaustion."""

import numpy as np
import pytest

from trajstitch import (
    ConfigurationError,
    ContractViolationError,
    ExhaustionError,
    MarkovState,
    StitchEngine,
    build_gridworld,
    build_policy,
    generate_trajectory_set,
    nearest_set,
)
from trajstitch.database import seed_policy_grid
from trajstitch.metrics import full_metric, markov_metric
from trajstitch.stitch import ExclusionLedger

from conftest import make_rng


def _behavior_policy(mdp, db, k):
    spec = db.provenance[k].policy
    return build_policy(mdp, spec["policy_class"], spec["params"], spec.get("feature"))


class TestZeroDistanceReproduction:
    def test_mfmci_reproduces_seed_trajectory(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        engine = StitchEngine(ember_db, metric)
        for k in (0, 4, 8):
            policy = _behavior_policy(ember_mdp, ember_db, k)
            rows = ember_db.seed_trajectory_rows(k)
            traj = engine.mfmci_trajectory(policy, 8, ember_db.x[rows[0]])
            assert traj.matched_ids == tuple(rows)
            for t, s in enumerate(traj.steps):
                row = rows[t]
                assert s.action == ember_db.behavior_actions[row]
                assert s.reward == ember_db.realized_reward(int(row))
                np.testing.assert_array_equal(s.x.features, ember_db.x[row])
                np.testing.assert_array_equal(s.w, ember_db.w[row])

    def test_mfmc_reproduces_seed_trajectory(self, ember_mdp, ember_db_biased):
        metric = full_metric(ember_db_biased)
        engine = StitchEngine(ember_db_biased, metric)
        for k in (1, 5):
            policy = _behavior_policy(ember_mdp, ember_db_biased, k)
            rows = ember_db_biased.seed_trajectory_rows(k)
            traj = engine.mfmc_trajectory(
                policy, 8, ember_db_biased.x[rows[0]], ember_db_biased.w[rows[0]]
            )
            assert traj.matched_ids == tuple(rows)
            for t, s in enumerate(traj.steps):
                row = rows[t]
                assert s.action == ember_db_biased.behavior_actions[row]
                assert s.reward == ember_db_biased.rewards[row]
                np.testing.assert_array_equal(s.x.features, ember_db_biased.x[row])


@pytest.fixture(scope="module")
def grid():
    mdp = build_gridworld(horizon=4)
    query = build_policy(mdp, "tabular", [2, 3, 0, 0, 1, 1, 1, 1])
    return mdp, query


class TestGridworldHopping:
    """Two seed trajectories from (0, 0): always-right and always-up.

    The query policy goes right along the bottom edge for two moves, then up.
    Debiased sets branch on both actions, so stitching never needs to leave
    the rightward rows; the biased variants must hop to the upward rows the
    moment the query action flips.
    """

    def _db(self, mdp, mode):
        return seed_policy_grid(
            mdp, "constant", [[0], [1]], horizon=4, rng=make_rng(0), mode=mode
        )

    def test_debiased_stays_on_rightward_rows(self, grid):
        mdp, query = grid
        db = self._db(mdp, "debiased")
        metric = markov_metric(db, standardize=False)
        traj = StitchEngine(db, metric).mfmci_trajectory(query, 4, np.zeros(2))
        assert traj.matched_ids == (0, 1, 2, 3)
        assert [s.action for s in traj.steps] == [0, 0, 1, 1]
        # adopted branches walk off the stored chain once the action flips
        states = [tuple(s.x.features) for s in traj.steps]
        assert states == [(0, 0), (0, 1), (0, 2), (1, 2)]

    def test_biased_hops_to_action_consistent_rows(self, grid):
        mdp, query = grid
        db = self._db(mdp, "biased")
        metric = markov_metric(db, standardize=False)
        traj = StitchEngine(db, metric).mfmci_biased_trajectory(query, 4, np.zeros(2))
        assert traj.matched_ids == (0, 1, 6, 7)
        assert [s.action for s in traj.steps] == [0, 0, 1, 1]
        states = [tuple(s.x.features) for s in traj.steps]
        assert states == [(0, 0), (0, 1), (0, 2), (3, 0)]

    def test_full_state_stitching_hops_too(self, grid):
        mdp, query = grid
        db = self._db(mdp, "biased")
        metric = full_metric(db, standardize=False)
        traj = StitchEngine(db, metric).mfmc_trajectory(
            query, 4, np.zeros(2), np.empty(0)
        )
        # hard time matching: at t=2 only rows 2 (right) and 6 (up) are
        # candidates, and the action penalty rules out row 2
        assert traj.matched_ids == (0, 1, 6, 7)
        assert [s.action for s in traj.steps] == [0, 0, 1, 1]


class TestExclusion:
    def test_sets_consumed_without_replacement(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        engine = StitchEngine(ember_db, metric)
        ledger = engine.new_ledger()
        policy = build_policy(ember_mdp, "location", [0.5])
        seen: set[int] = set()
        for _ in range(9):  # 9 seeds x 8 steps exactly drains 72 sets
            traj = engine.mfmci_trajectory(policy, 8, np.array([0.1, 0.6]), ledger)
            ids = set(traj.matched_ids)
            assert not ids & seen
            seen |= ids
        assert len(seen) == ember_db.n_rows
        with pytest.raises(ExhaustionError) as e:
            engine.mfmci_trajectory(policy, 8, np.array([0.1, 0.6]), ledger)
        assert e.value.time_step == 0

    def test_generate_set_reports_completed_count(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        policy = build_policy(ember_mdp, "location", [0.5])
        with pytest.raises(ExhaustionError) as e:
            generate_trajectory_set(
                ember_db, policy, n=10, horizon=8, start=np.array([0.1, 0.6]),
                metric=metric, algorithm="mfmci", rng=make_rng(0),
            )
        assert e.value.trajectories_completed == 9

    def test_ledger_rejects_double_exclusion(self):
        ledger = ExclusionLedger(4)
        ledger.exclude(2)
        assert ledger.is_excluded(2)
        assert ledger.excluded_ids() == [2]
        with pytest.raises(ContractViolationError):
            ledger.exclude(2)
        ledger.reset()
        assert ledger.count == 0
        ledger.exclude(2)


class TestContracts:
    def test_mfmci_actions_follow_query_policy(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        policy = build_policy(ember_mdp, "intensity", [30.0, 70.0, 60.0])
        ts = generate_trajectory_set(
            ember_db, policy, n=4, horizon=8, start=np.array([0.1, 0.6]),
            metric=metric, algorithm="mfmci", rng=make_rng(1),
        )
        for i in range(ts.n):
            for t in range(ts.horizon):
                assert ts.actions[i, t] == policy(ts.x[i, t], ts.w[i, t])

    def test_biased_matches_are_action_consistent(self, ember_mdp, ember_db_biased):
        metric = markov_metric(ember_db_biased)
        engine = StitchEngine(ember_db_biased, metric)
        policy = build_policy(ember_mdp, "location", [0.3])
        traj = engine.mfmci_biased_trajectory(policy, 8, np.array([0.1, 0.6]))
        for s, row in zip(traj.steps, traj.matched_ids):
            assert ember_db_biased.behavior_actions[row] == s.action
            assert s.action == policy(s.x.features, ember_db_biased.w[row])

    def test_mfmc_advances_w_through_stored_stream(self, ember_mdp, ember_db_biased):
        metric = full_metric(ember_db_biased)
        engine = StitchEngine(ember_db_biased, metric)
        policy = build_policy(ember_mdp, "fuel", [0.35])
        rng = make_rng(5)
        draw = ember_mdp.exo_sampler(rng)
        traj = engine.mfmc_trajectory(policy, 8, np.array([0.1, 0.6]), draw.w)
        for t in range(len(traj.steps) - 1):
            matched = traj.matched_ids[t]
            np.testing.assert_array_equal(
                traj.steps[t + 1].w, ember_db_biased.w_next[matched]
            )

    def test_mfmc_mid_trajectory_avoids_dead_end_rows(self, ember_mdp, ember_db_biased):
        # rows ending a seed trajectory carry no successor draw; they may only
        # be matched at the final step
        metric = full_metric(ember_db_biased)
        engine = StitchEngine(ember_db_biased, metric)
        policy = build_policy(ember_mdp, "fuel", [0.35])
        last_rows = {
            int(ember_db_biased.seed_trajectory_rows(k)[-1])
            for k in range(ember_db_biased.n_seed_trajectories)
        }
        rng = make_rng(6)
        for _ in range(5):
            draw = ember_mdp.exo_sampler(rng)
            x0 = np.array([rng.uniform(0.05, 0.15), rng.uniform(0.5, 0.7)])
            traj = engine.mfmc_trajectory(policy, 8, x0, draw.w)
            for row in traj.matched_ids[:-1]:
                assert row not in last_rows


class TestValidation:
    def test_mfmci_needs_debiased_db(self, ember_mdp, ember_db_biased):
        metric = markov_metric(ember_db_biased)
        policy = build_policy(ember_mdp, "location", [0.5])
        with pytest.raises(ContractViolationError):
            generate_trajectory_set(
                ember_db_biased, policy, n=1, horizon=4, start=np.array([0.1, 0.6]),
                metric=metric, algorithm="mfmci", rng=make_rng(0),
            )

    def test_mfmc_needs_biased_db(self, ember_mdp, ember_db):
        metric = full_metric(ember_db)
        policy = build_policy(ember_mdp, "location", [0.5])
        with pytest.raises(ContractViolationError):
            generate_trajectory_set(
                ember_db, policy, n=1, horizon=4, start=np.array([0.1, 0.6]),
                metric=metric, algorithm="mfmc", rng=make_rng(0),
            )

    def test_mfmci_rejects_full_metric(self, ember_mdp, ember_db):
        metric = full_metric(ember_db)
        policy = build_policy(ember_mdp, "location", [0.5])
        with pytest.raises(ContractViolationError):
            generate_trajectory_set(
                ember_db, policy, n=1, horizon=4, start=np.array([0.1, 0.6]),
                metric=metric, algorithm="mfmci", rng=make_rng(0),
            )

    def test_unknown_algorithm(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        policy = build_policy(ember_mdp, "location", [0.5])
        with pytest.raises(ConfigurationError):
            generate_trajectory_set(
                ember_db, policy, n=1, horizon=4, start=np.array([0.1, 0.6]),
                metric=metric, algorithm="teleport", rng=make_rng(0),
            )

    def test_empty_database_rejected(self, ember_db):
        from trajstitch.database import _empty_database
        from trajstitch.benchmarks import build_ember

        empty = _empty_database(build_ember(horizon=4), "debiased", 4)
        with pytest.raises(ConfigurationError):
            StitchEngine(empty, markov_metric(ember_db))


class TestNearestSetFacade:
    def test_exact_hit_distance_zero(self, ember_db):
        metric = markov_metric(ember_db)
        state = MarkovState(ember_db.x[10], int(ember_db.time_steps[10]))
        ts, d = nearest_set(ember_db, state, metric)
        assert ts.set_id == 10
        assert d == 0.0

    def test_all_excluded_raises(self, ember_db):
        metric = markov_metric(ember_db)
        ledger = ExclusionLedger(ember_db.n_rows)
        for i in range(ember_db.n_rows):
            ledger.exclude(i)
        state = MarkovState(ember_db.x[0], 0)
        with pytest.raises(ExhaustionError):
            nearest_set(ember_db, state, metric, ledger)


class TestGenerateTrajectorySet:
    def test_deterministic_under_seed(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        policy = build_policy(ember_mdp, "intensity", [20.0, 80.0, 100.0])

        def start(rng):
            return np.array([rng.uniform(0.05, 0.15), rng.uniform(0.5, 0.7)])

        a = generate_trajectory_set(
            ember_db, policy, n=5, horizon=8, start=start, metric=metric,
            algorithm="mfmci", rng=make_rng(77),
        )
        b = generate_trajectory_set(
            ember_db, policy, n=5, horizon=8, start=start, metric=metric,
            algorithm="mfmci", rng=make_rng(77),
        )
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.w, b.w)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.rewards, b.rewards)

    def test_engines_produce_identical_sets(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        policy = build_policy(ember_mdp, "fuel", [0.35])
        results = [
            generate_trajectory_set(
                ember_db, policy, n=5, horizon=8, start=np.array([0.1, 0.6]),
                metric=metric, algorithm="mfmci", rng=make_rng(3), engine=engine,
            )
            for engine in ("linear", "vectorized", "kdtree")
        ]
        for other in results[1:]:
            np.testing.assert_array_equal(results[0].x, other.x)
            np.testing.assert_array_equal(results[0].rewards, other.rewards)

    def test_mfmc_draws_initial_exogenous_state(self, ember_mdp, ember_db_biased):
        metric = full_metric(ember_db_biased)
        policy = build_policy(ember_mdp, "location", [0.5])
        ts = generate_trajectory_set(
            ember_db_biased, policy, n=3, horizon=8, start=np.array([0.1, 0.6]),
            metric=metric, algorithm="mfmc", rng=make_rng(9),
            exo_sampler=ember_mdp.exo_sampler,
        )
        assert ts.n == 3 and ts.horizon == 8
        # initial draws are fresh, not database rows
        assert len({tuple(ts.w[i, 0]) for i in range(3)}) == 3

    def test_successor_matching_mode(self, ember_mdp, ember_db):
        # matching against realized successors needs the weighted time mode:
        # successor coordinates live at t+1, so a hard t=0 query has no bucket
        metric = markov_metric(ember_db, time_mode="weighted", time_weight=1e6)
        policy = build_policy(ember_mdp, "fuel", [0.35])
        ts = generate_trajectory_set(
            ember_db, policy, n=2, horizon=4, start=np.array([0.1, 0.6]),
            metric=metric, algorithm="mfmci", rng=make_rng(4),
            match_target="successor",
        )
        assert ts.n == 2 and ts.horizon == 4
        for i in range(2):
            for t in range(4):
                assert ts.actions[i, t] == policy(ts.x[i, t], ts.w[i, t])

    def test_fixed_and_callable_starts(self, ember_mdp, ember_db):
        metric = markov_metric(ember_db)
        policy = build_policy(ember_mdp, "location", [0.5])
        fixed = generate_trajectory_set(
            ember_db, policy, n=2, horizon=4, start=np.array([0.1, 0.6]),
            metric=metric, algorithm="mfmci", rng=make_rng(0),
        )
        np.testing.assert_array_equal(fixed.x[:, 0], [[0.1, 0.6], [0.1, 0.6]])
