"""Nearest-neighbor engines over a database's standardized coordinates.

Three interchangeable engines answer the same query: nearest stored row to a
standardized query point among rows that are not excluded, with ties broken
toward the lowest row id.

* ``linear``     - plain Python scan; the reference implementation.
* ``vectorized`` - masked argmin over the bucket matrix (default).
* ``kdtree``     - scipy cKDTree with an exact-distance recheck, so results
                   match the other engines bitwise.

Hard time matching partitions rows into per-time-step buckets; weighted time
matching keeps one bucket and appends the time step as an extra weighted
coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, ContractViolationError
from .metrics import DistanceMetric

ENGINE_NAMES = ("linear", "vectorized", "kdtree")


@dataclass
class _Bucket:
    ids: np.ndarray                  # global row ids, strictly ascending
    std: np.ndarray                  # standardized coords (+ time column if weighted)
    actions: Optional[np.ndarray]    # stored actions, for penalty queries


class NeighborIndex:
    """Shared bucket construction; subclasses implement ``_nearest_in_bucket``."""

    name = "base"

    def __init__(self, coords: np.ndarray, time_steps: np.ndarray,
                 metric: DistanceMetric, actions: Optional[np.ndarray] = None):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2:
            raise ContractViolationError("index coordinates must be a 2-D matrix")
        self.metric = metric
        self.n_rows = coords.shape[0]
        std = metric.stats.standardize(coords) if self.n_rows else coords.copy()
        weights = metric.effective_weights
        self._weighted_time = metric.time_mode == "weighted"
        if self._weighted_time:
            std = np.hstack([std, np.asarray(time_steps, dtype=float)[:, None]])
            weights = np.append(weights, metric.time_weight)
        self.weights = weights
        self.coordinate_width = coords.shape[1]
        self.distance_evaluations = 0
        self._buckets: dict[Optional[int], _Bucket] = {}
        if self.n_rows == 0:
            return
        if self._weighted_time:
            ids = np.arange(self.n_rows)
            self._buckets[None] = _Bucket(ids, std, actions)
        else:
            ts = np.asarray(time_steps, dtype=int)
            for t in np.unique(ts):
                sel = np.flatnonzero(ts == t)
                self._buckets[int(t)] = _Bucket(
                    sel, std[sel], actions[sel] if actions is not None else None
                )

    # ------------------------------------------------------------- plumbing

    def _query_vec(self, features: np.ndarray, t: int) -> np.ndarray:
        q = self.metric.stats.standardize(np.asarray(features, dtype=float))
        if self._weighted_time:
            q = np.append(q, float(t))
        return q

    def _bucket_for(self, t: int) -> Optional[_Bucket]:
        key = None if self._weighted_time else int(t)
        return self._buckets.get(key)

    def _candidate_mask(self, bucket: _Bucket, excluded: Optional[np.ndarray],
                        forbidden: Optional[np.ndarray]) -> np.ndarray:
        bad = np.zeros(len(bucket.ids), dtype=bool)
        if excluded is not None:
            bad |= excluded[bucket.ids]
        if forbidden is not None:
            bad |= forbidden[bucket.ids]
        return bad

    def _exact_sq(self, q: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Weighted squared distances, computed the same way in every engine."""
        diff = q[None, :] - rows
        return (diff * diff * self.weights).sum(axis=1)

    def _penalized(self, d: np.ndarray, bucket: _Bucket,
                   action: Optional[int]) -> np.ndarray:
        if action is None:
            return d
        if bucket.actions is None:
            raise ContractViolationError("index was built without stored actions")
        return d + self.metric.action_penalty * (bucket.actions != action)

    # -------------------------------------------------------------- queries

    def nearest(self, features: np.ndarray, t: int,
                excluded: Optional[np.ndarray] = None,
                action: Optional[int] = None,
                forbidden: Optional[np.ndarray] = None) -> Optional[tuple[int, float]]:
        """Lowest-id row at minimum distance, or None if nothing is feasible."""
        bucket = self._bucket_for(t)
        if bucket is None:
            return None
        bad = self._candidate_mask(bucket, excluded, forbidden)
        if bad.all():
            return None
        q = self._query_vec(features, t)
        return self._nearest_in_bucket(q, bucket, bad, action)

    def ordered(self, features: np.ndarray, t: int,
                excluded: Optional[np.ndarray] = None,
                action: Optional[int] = None,
                forbidden: Optional[np.ndarray] = None) -> Iterator[tuple[int, float]]:
        """All feasible rows in ascending (distance, row id) order."""
        bucket = self._bucket_for(t)
        if bucket is None:
            return
        bad = self._candidate_mask(bucket, excluded, forbidden)
        keep = ~bad
        if not keep.any():
            return
        q = self._query_vec(features, t)
        rows = np.flatnonzero(keep)
        d = np.sqrt(self._exact_sq(q, bucket.std[rows]))
        d = self._penalized(d, _Bucket(bucket.ids[rows], None,
                                       None if bucket.actions is None
                                       else bucket.actions[rows]), action)
        self.distance_evaluations += len(rows)
        order = np.lexsort((bucket.ids[rows], d))
        for j in order:
            yield int(bucket.ids[rows[j]]), float(d[j])

    def _nearest_in_bucket(self, q, bucket, bad, action):
        raise NotImplementedError


class LinearScanIndex(NeighborIndex):
    """Reference engine: explicit per-candidate loop."""

    name = "linear"

    def _nearest_in_bucket(self, q, bucket, bad, action):
        best_id = -1
        best_d = math.inf
        for j in range(len(bucket.ids)):
            if bad[j]:
                continue
            diff = q - bucket.std[j]
            d = math.sqrt(float(np.sum(diff * diff * self.weights)))
            if action is not None and bucket.actions[j] != action:
                d = d + self.metric.action_penalty
            self.distance_evaluations += 1
            if d < best_d:
                best_d = d
                best_id = int(bucket.ids[j])
        if best_id < 0:
            return None
        return best_id, best_d


class VectorizedIndex(NeighborIndex):
    """Default engine: one masked argmin per query."""

    name = "vectorized"

    def _nearest_in_bucket(self, q, bucket, bad, action):
        d = np.sqrt(self._exact_sq(q, bucket.std))
        d = self._penalized(d, bucket, action)
        self.distance_evaluations += int((~bad).sum())
        d = np.where(bad, math.inf, d)
        j = int(np.argmin(d))  # first occurrence wins, ids ascend within buckets
        if not np.isfinite(d[j]):
            return None
        return int(bucket.ids[j]), float(d[j])


class KdTreeIndex(NeighborIndex):
    """Tree-accelerated engine with an exact recheck pass.

    Trees are built per bucket (and per stored action when the index carries
    actions) over sqrt-weight scaled coordinates, so tree distances equal the
    metric distances up to rounding.  Every answer is re-derived with the
    exact formula over a small candidate ball, keeping results identical to
    the scanning engines.
    """

    name = "kdtree"

    def __init__(self, coords, time_steps, metric, actions=None):
        super().__init__(coords, time_steps, metric, actions)
        self._scale = np.sqrt(self.weights)
        self._trees: dict[tuple, tuple[cKDTree, np.ndarray]] = {}

    def _tree_for(self, t_key, bucket: _Bucket, action_key) -> Optional[tuple]:
        key = (t_key, action_key)
        if key not in self._trees:
            if action_key is None:
                local = np.arange(len(bucket.ids))
            else:
                local = np.flatnonzero(bucket.actions == action_key)
            if len(local) == 0:
                self._trees[key] = None
            else:
                scaled = bucket.std[local] * self._scale
                self._trees[key] = (cKDTree(scaled), local)
        return self._trees[key]

    def _group_nearest(self, q, t_key, bucket, bad, action_key):
        """Exact (distance, id) of the best row in one action group."""
        entry = self._tree_for(t_key, bucket, action_key)
        if entry is None:
            return None
        tree, local = entry
        good = np.flatnonzero(~bad[local])
        if len(good) == 0:
            return None
        q_scaled = q * self._scale
        n_in_tree = len(local)
        k = 1
        d_tree = None
        while d_tree is None:
            dist, idx = tree.query(q_scaled, k=min(k, n_in_tree))
            for dv, j in zip(np.atleast_1d(dist), np.atleast_1d(idx)):
                if j < n_in_tree and not bad[local[j]]:
                    d_tree = float(dv)
                    break
            else:
                if k >= n_in_tree:
                    return None
                k = min(2 * k, n_in_tree)
        radius = d_tree * (1.0 + 1e-9) + 1e-12
        ball = tree.query_ball_point(q_scaled, radius)
        cands = [j for j in ball if not bad[local[j]]]
        rows = local[np.asarray(cands, dtype=int)]
        d_sq = self._exact_sq(q, bucket.std[rows])
        self.distance_evaluations += len(rows)
        d = np.sqrt(d_sq)
        order = np.lexsort((bucket.ids[rows], d))[0]
        return float(d[order]), int(bucket.ids[rows[order]])

    def _nearest_in_bucket(self, q, bucket, bad, action):
        t_key = None
        for key, b in self._buckets.items():
            if b is bucket:
                t_key = key
                break
        if action is None:
            hit = self._group_nearest(q, t_key, bucket, bad, None)
            if hit is None:
                return None
            d, rid = hit
            return rid, d
        best = None
        for a in np.unique(bucket.actions):
            hit = self._group_nearest(q, t_key, bucket, bad, int(a))
            if hit is None:
                continue
            d, rid = hit
            if int(a) != action:
                d = d + self.metric.action_penalty
            if best is None or (d, rid) < best:
                best = (d, rid)
        if best is None:
            return None
        return best[1], best[0]


ENGINES = {
    "linear": LinearScanIndex,
    "vectorized": VectorizedIndex,
    "kdtree": KdTreeIndex,
}


def make_index(coords: np.ndarray, time_steps: np.ndarray, metric: DistanceMetric,
               actions: Optional[np.ndarray] = None,
               engine: str = "vectorized") -> NeighborIndex:
    if engine not in ENGINES:
        raise ConfigurationError(
            f"unknown engine {engine!r}; choose from {ENGINE_NAMES}"
        )
    return ENGINES[engine](coords, time_steps, metric, actions)
