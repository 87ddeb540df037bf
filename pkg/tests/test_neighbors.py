"""Neighbor search engines: all three must return the identical argmin.

The reference here is a from-scratch brute force written against the metric
definition alone, so the linear engine is checked by something other than
itself.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from trajstitch import ConfigurationError
from trajstitch.metrics import DistanceMetric, FeatureStats
from trajstitch.neighbors import ENGINE_NAMES, make_index

from conftest import make_rng


def brute_nearest(coords, times, metric, q, t, excluded=None, action=None,
                  actions=None, forbidden=None):
    """Reference argmin: standardize, weight, square, scan in id order."""
    qs = metric.stats.standardize(q)
    best = (math.inf, None)
    for i in range(len(coords)):
        if excluded is not None and excluded[i]:
            continue
        if forbidden is not None and forbidden[i]:
            continue
        if metric.time_mode == "hard" and times[i] != t:
            continue
        cs = metric.stats.standardize(coords[i])
        d2 = float(((qs - cs) ** 2 * metric.effective_weights).sum())
        if metric.time_mode == "weighted":
            d2 += metric.time_weight * float(t - times[i]) ** 2
        d = math.sqrt(d2)
        if action is not None and actions is not None and actions[i] != action:
            d += metric.action_penalty
        if d < best[0]:
            best = (d, i)
    return None if best[1] is None else (best[1], best[0])


def _identity_metric(dim, **kw):
    names = tuple(f"f{i}" for i in range(dim))
    return DistanceMetric(names, FeatureStats.identity(names), np.ones(dim), **kw)


def _random_problem(rng, n=60, dim=3, n_times=4):
    coords = rng.normal(size=(n, dim))
    times = rng.integers(0, n_times, size=n)
    stats = FeatureStats.from_matrix(
        tuple(f"f{i}" for i in range(dim)), coords
    )
    names = tuple(f"f{i}" for i in range(dim))
    metric = DistanceMetric(names, stats, rng.uniform(0.5, 2.0, size=dim))
    return coords, times, metric


class TestEngineAgreement:
    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_matches_brute_force(self, engine):
        rng = make_rng(40)
        coords, times, metric = _random_problem(rng)
        index = make_index(coords, times, metric, engine=engine)
        for _ in range(100):
            q = rng.normal(size=3)
            t = int(rng.integers(0, 4))
            expected = brute_nearest(coords, times, metric, q, t)
            got = index.nearest(q, t)
            assert got is not None and expected is not None
            assert got[0] == expected[0]
            assert got[1] == pytest.approx(expected[1], abs=1e-12)

    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_respects_exclusions(self, engine):
        rng = make_rng(41)
        coords, times, metric = _random_problem(rng)
        index = make_index(coords, times, metric, engine=engine)
        excluded = np.zeros(len(coords), dtype=bool)
        q = rng.normal(size=3)
        seen = []
        # repeatedly excluding the winner enumerates the bucket in brute order
        while True:
            got = index.nearest(q, 1, excluded=excluded)
            if got is None:
                break
            expected = brute_nearest(coords, times, metric, q, 1, excluded=excluded)
            assert got[0] == expected[0]
            excluded[got[0]] = True
            seen.append(got[0])
        assert sorted(seen) == sorted(np.flatnonzero(times == 1).tolist())

    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_action_penalty_ranking(self, engine):
        rng = make_rng(42)
        coords, times, metric_plain = _random_problem(rng)
        metric = DistanceMetric(
            metric_plain.feature_names, metric_plain.stats, metric_plain.weights,
            include_exogenous=True, markov_dim=2, action_penalty=3.0,
        )
        actions = rng.integers(0, 2, size=len(coords))
        index = make_index(coords, times, metric, actions=actions, engine=engine)
        for _ in range(60):
            q = rng.normal(size=3)
            t = int(rng.integers(0, 4))
            a = int(rng.integers(0, 2))
            expected = brute_nearest(
                coords, times, metric, q, t, action=a, actions=actions
            )
            got = index.nearest(q, t, action=a)
            assert got[0] == expected[0]
            assert got[1] == pytest.approx(expected[1], abs=1e-12)

    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_weighted_time_crosses_buckets(self, engine):
        rng = make_rng(43)
        coords = rng.normal(size=(40, 2))
        times = rng.integers(0, 5, size=40)
        metric = _identity_metric(2, time_mode="weighted", time_weight=0.7)
        index = make_index(coords, times, metric, engine=engine)
        for _ in range(40):
            q = rng.normal(size=2)
            t = int(rng.integers(0, 5))
            expected = brute_nearest(coords, times, metric, q, t)
            got = index.nearest(q, t)
            assert got[0] == expected[0]
            assert got[1] == pytest.approx(expected[1], abs=1e-12)


class TestTieBreak:
    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_lowest_id_wins_on_exact_ties(self, engine):
        coords = np.array([[1.0], [0.0], [0.0], [0.0]])
        times = np.zeros(4, dtype=int)
        metric = _identity_metric(1)
        index = make_index(coords, times, metric, engine=engine)
        row, d = index.nearest(np.array([0.0]), 0)
        assert (row, d) == (1, 0.0)
        excluded = np.array([False, True, False, False])
        row, _ = index.nearest(np.array([0.0]), 0, excluded=excluded)
        assert row == 2

    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_ordered_sorts_by_distance_then_id(self, engine):
        coords = np.array([[2.0], [1.0], [1.0], [0.5], [9.0]])
        times = np.zeros(5, dtype=int)
        metric = _identity_metric(1)
        index = make_index(coords, times, metric, engine=engine)
        out = list(index.ordered(np.array([0.0]), 0))
        assert [rid for rid, _ in out] == [3, 1, 2, 0, 4]
        dists = [d for _, d in out]
        assert dists == sorted(dists)


class TestEdgeCases:
    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_empty_bucket_returns_none(self, engine):
        coords = np.array([[0.0], [1.0]])
        times = np.array([0, 0])
        metric = _identity_metric(1)
        index = make_index(coords, times, metric, engine=engine)
        assert index.nearest(np.array([0.0]), 3) is None

    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_all_excluded_returns_none(self, engine):
        coords = np.array([[0.0], [1.0]])
        times = np.array([0, 0])
        metric = _identity_metric(1)
        index = make_index(coords, times, metric, engine=engine)
        assert index.nearest(np.array([0.0]), 0, excluded=np.array([True, True])) is None

    @pytest.mark.parametrize("engine", ENGINE_NAMES)
    def test_forbidden_rows_skipped(self, engine):
        coords = np.array([[0.0], [0.1], [5.0]])
        times = np.zeros(3, dtype=int)
        metric = _identity_metric(1)
        index = make_index(coords, times, metric, engine=engine)
        forbidden = np.array([True, False, False])
        row, _ = index.nearest(np.array([0.0]), 0, forbidden=forbidden)
        assert row == 1
        # forbidden and excluded combine
        row, _ = index.nearest(
            np.array([0.0]), 0, forbidden=forbidden,
            excluded=np.array([False, True, False]),
        )
        assert row == 2

    def test_unknown_engine(self):
        metric = _identity_metric(1)
        with pytest.raises(ConfigurationError):
            make_index(np.zeros((2, 1)), np.zeros(2, dtype=int), metric, engine="quantum")

    def test_distance_evaluation_counter(self):
        coords = np.array([[0.0], [1.0], [2.0]])
        times = np.zeros(3, dtype=int)
        metric = _identity_metric(1)
        index = make_index(coords, times, metric, engine="vectorized")
        before = index.distance_evaluations
        index.nearest(np.array([0.5]), 0)
        assert index.distance_evaluations == before + 3


@settings(max_examples=40, deadline=None)
@given(
    coords=hnp.arrays(
        float, (25, 2),
        elements=st.floats(min_value=-100, max_value=100, allow_nan=False),
    ),
    q=st.tuples(
        st.floats(min_value=-100, max_value=100, allow_nan=False),
        st.floats(min_value=-100, max_value=100, allow_nan=False),
    ),
)
def test_engines_agree_on_arbitrary_coordinates(coords, q):
    times = np.zeros(25, dtype=int)
    metric = _identity_metric(2)
    q = np.array(q)
    results = {
        engine: make_index(coords, times, metric, engine=engine).nearest(q, 0)
        for engine in ENGINE_NAMES
    }
    ids = {r[0] for r in results.values()}
    assert len(ids) == 1
    expected = brute_nearest(coords, times, metric, q, 0)
    assert ids == {expected[0]}
