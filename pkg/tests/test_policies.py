"""Policy classes: semantics, parameter validation, describe round-trips."""

import numpy as np
import pytest

from trajstitch import ConfigurationError, build_policy
from trajstitch.policies import POLICY_CLASSES, evaluate_policy


class TestIntensity:
    def test_window_and_day_gate(self, ember_mdp):
        policy = build_policy(ember_mdp, "intensity", [25.0, 75.0, 90.0])
        x = np.array([0.1, 0.6])
        assert policy(x, np.array([50.0, 120.0, 0.5])) == 1
        assert policy(x, np.array([50.0, 90.0, 0.5])) == 0  # day not strictly past
        assert policy(x, np.array([24.9, 120.0, 0.5])) == 0
        assert policy(x, np.array([75.0, 120.0, 0.5])) == 1  # inclusive bounds
        assert policy(x, np.array([75.1, 120.0, 0.5])) == 0

    def test_ignores_markov_state(self, ember_mdp):
        policy = build_policy(ember_mdp, "intensity", [0.0, 100.0, 0.0])
        w = np.array([50.0, 1.0, 0.5])
        assert policy(np.array([0.0, 0.0]), w) == policy(np.array([1.0, 1.0]), w)

    def test_param_arity(self, ember_mdp):
        with pytest.raises(ConfigurationError):
            build_policy(ember_mdp, "intensity", [1.0, 2.0])


class TestFuel:
    def test_threshold(self, ember_mdp):
        policy = build_policy(ember_mdp, "fuel", [0.3])
        w = np.zeros(3)
        assert policy(np.array([0.29, 0.5]), w) == 0
        assert policy(np.array([0.30, 0.5]), w) == 1  # inclusive
        assert policy(np.array([0.31, 0.5]), w) == 1

    def test_feature_override(self, ember_mdp):
        policy = build_policy(ember_mdp, "fuel", [0.6], feature="canopy")
        w = np.zeros(3)
        assert policy(np.array([0.9, 0.5]), w) == 0
        assert policy(np.array([0.1, 0.7]), w) == 1
        assert policy.feature == "canopy"

    def test_unknown_feature(self, ember_mdp):
        with pytest.raises(ConfigurationError):
            build_policy(ember_mdp, "fuel", [0.5], feature="nope")


class TestLocation:
    def test_boundary(self, ember_mdp):
        policy = build_policy(ember_mdp, "location", [0.5])
        x = np.zeros(2)
        assert policy(x, np.array([0.0, 0.0, 0.49])) == 0
        assert policy(x, np.array([0.0, 0.0, 0.50])) == 1
        assert policy(x, np.array([0.0, 0.0, 0.51])) == 1


class TestConstant:
    def test_fixed_action(self, ember_mdp):
        assert build_policy(ember_mdp, "constant", [1])(np.zeros(2), np.zeros(3)) == 1

    def test_out_of_range(self, ember_mdp):
        with pytest.raises(ConfigurationError):
            build_policy(ember_mdp, "constant", [2])


class TestTabular:
    def test_lookup_and_clamp(self, gridworld_mdp):
        # 2x2 table, row-major: (0,0)->right, elsewhere up
        policy = build_policy(gridworld_mdp, "tabular", [2, 2, 0, 1, 1, 1])
        w = np.empty(0)
        assert policy(np.array([0.0, 0.0]), w) == 0
        assert policy(np.array([0.0, 1.0]), w) == 1
        assert policy(np.array([1.0, 0.0]), w) == 1
        # out-of-table states clamp to the nearest cell
        assert policy(np.array([5.0, 5.0]), w) == 1
        assert policy(np.array([-1.0, -1.0]), w) == 0

    def test_size_mismatch(self, gridworld_mdp):
        with pytest.raises(ConfigurationError):
            build_policy(gridworld_mdp, "tabular", [2, 2, 0, 1, 1])

    def test_action_range_checked(self, gridworld_mdp):
        with pytest.raises(ConfigurationError):
            build_policy(gridworld_mdp, "tabular", [1, 1, 7])


def test_unknown_class(ember_mdp):
    with pytest.raises(ConfigurationError):
        build_policy(ember_mdp, "mystery", [1.0])


def test_describe_round_trip(ember_mdp):
    rng = np.random.default_rng(5)
    for policy in (
        build_policy(ember_mdp, "intensity", [30.0, 70.0, 100.0]),
        build_policy(ember_mdp, "fuel", [0.4], feature="canopy"),
        build_policy(ember_mdp, "location", [0.25]),
    ):
        d = policy.describe()
        rebuilt = build_policy(
            ember_mdp, d["policy_class"], d["params"], d.get("feature")
        )
        for _ in range(50):
            x = rng.uniform(0, 1, size=2)
            w = np.array([rng.uniform(0, 100), rng.uniform(0, 180), rng.uniform(0, 1)])
            assert policy(x, w) == rebuilt(x, w)


def test_evaluate_policy_accepts_markov_state(ember_mdp):
    from trajstitch import MarkovState

    policy = build_policy(ember_mdp, "fuel", [0.3])
    state = MarkovState([0.5, 0.5], 2)
    assert evaluate_policy(policy, state, np.zeros(3)) == 1


def test_policy_classes_enumeration():
    assert set(POLICY_CLASSES) == {"intensity", "fuel", "location", "tabular", "constant"}
