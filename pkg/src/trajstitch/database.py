"""Transition databases: debiased (all-action outcome sets) and biased.

A debiased database stores one transition *set* per visited state: the state
``(x, w)`` at a time step plus the simulated reward and successor for every
action, all sharing one exogenous draw.  A biased database stores only the
behavior policy's branch per visited state.  Both keep rows grouped by seed
trajectory in insertion order.

Persistence is a directory holding ``manifest.json`` and ``transitions.csv``;
floats are written with repr-exact precision and the CSV is checksummed so
that corruption and truncation are detected at load time.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolationError,
    DatabaseFormatError,
    DatabaseIntegrityError,
    NumericError,
)
from .mdp import FactoredMdp, MarkovState
from .metrics import FeatureStats
from .policies import Policy, build_policy

FORMAT_VERSION = 1
MODES = ("debiased", "biased")

_FLOAT_FMT = "%.17g"


def _fmt(v: float) -> str:
    return _FLOAT_FMT % v


@dataclass(frozen=True)
class TransitionTuple:
    """One stored transition from a biased database."""

    tuple_id: int
    x: MarkovState
    w: np.ndarray
    action: int
    reward: float
    x_next: MarkovState


@dataclass(frozen=True)
class TransitionSet:
    """One stored state with the outcome of every action (debiased mode)."""

    set_id: int
    x: MarkovState
    w: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    realized_action: int

    def reward(self, action: int) -> float:
        return float(self.rewards[action])

    def successor(self, action: int) -> MarkovState:
        return MarkovState(self.next_states[action].copy(), self.x.time_step + 1)


@dataclass
class TrajectoryProvenance:
    """Bookkeeping for one seed trajectory: who generated it and where it lives."""

    policy: dict
    start_row: int
    length: int
    realized_actions: list[int]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "start_row": self.start_row,
            "length": self.length,
            "realized_actions": list(int(a) for a in self.realized_actions),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectoryProvenance":
        return cls(
            policy=dict(d["policy"]),
            start_row=int(d["start_row"]),
            length=int(d["length"]),
            realized_actions=[int(a) for a in d["realized_actions"]],
        )


@dataclass
class TransitionDatabase:
    """Columnar store of transition sets (debiased) or tuples (biased)."""

    mode: str
    markov_features: tuple[str, ...]
    exo_features: tuple[str, ...]
    action_names: tuple[str, ...]
    horizon: int
    x: np.ndarray                      # (N, dx) state at the stored time step
    w: np.ndarray                      # (N, dw) exogenous draw consumed there
    time_steps: np.ndarray             # (N,) int
    traj_ids: np.ndarray               # (N,) int seed-trajectory index
    behavior_actions: np.ndarray       # (N,) int action the seed policy took
    rewards_all: Optional[np.ndarray] = None   # (N, A) debiased only
    x_next_all: Optional[np.ndarray] = None    # (N, A, dx) debiased only
    rewards: Optional[np.ndarray] = None       # (N,) biased only
    x_next: Optional[np.ndarray] = None        # (N, dx) biased only
    provenance: list[TrajectoryProvenance] = field(default_factory=list)
    mdp_config: Optional[dict] = None
    feature_stats: Optional[FeatureStats] = None
    stats_stale: bool = False
    z_records: Optional[list] = None   # in-memory only, never persisted
    _w_next: Optional[np.ndarray] = field(default=None, repr=False)
    _has_next: Optional[np.ndarray] = field(default=None, repr=False)

    # ---------------------------------------------------------------- basics

    @property
    def n_rows(self) -> int:
        return int(self.x.shape[0])

    @property
    def set_count(self) -> int:
        return self.n_rows

    @property
    def markov_dim(self) -> int:
        return len(self.markov_features)

    @property
    def exo_dim(self) -> int:
        return len(self.exo_features)

    @property
    def action_count(self) -> int:
        return len(self.action_names)

    @property
    def is_empty(self) -> bool:
        return self.n_rows == 0

    @property
    def n_seed_trajectories(self) -> int:
        return len(self.provenance)

    def _check_id(self, i: int) -> None:
        if not 0 <= i < self.n_rows:
            raise ContractViolationError(f"row id {i} out of range [0, {self.n_rows})")

    def transition_set(self, i: int) -> TransitionSet:
        if self.mode != "debiased":
            raise ContractViolationError("transition sets exist only in debiased mode")
        self._check_id(i)
        return TransitionSet(
            set_id=i,
            x=MarkovState(self.x[i].copy(), int(self.time_steps[i])),
            w=self.w[i].copy(),
            rewards=self.rewards_all[i].copy(),
            next_states=self.x_next_all[i].copy(),
            realized_action=int(self.behavior_actions[i]),
        )

    def transition_tuple(self, i: int) -> TransitionTuple:
        if self.mode != "biased":
            raise ContractViolationError("transition tuples exist only in biased mode")
        self._check_id(i)
        return TransitionTuple(
            tuple_id=i,
            x=MarkovState(self.x[i].copy(), int(self.time_steps[i])),
            w=self.w[i].copy(),
            action=int(self.behavior_actions[i]),
            reward=float(self.rewards[i]),
            x_next=MarkovState(self.x_next[i].copy(), int(self.time_steps[i]) + 1),
        )

    def realized_reward(self, i: int) -> float:
        self._check_id(i)
        if self.mode == "debiased":
            return float(self.rewards_all[i, self.behavior_actions[i]])
        return float(self.rewards[i])

    def realized_next(self, i: int) -> np.ndarray:
        self._check_id(i)
        if self.mode == "debiased":
            return self.x_next_all[i, self.behavior_actions[i]]
        return self.x_next[i]

    def realized_next_matrix(self) -> np.ndarray:
        if self.mode == "debiased":
            return self.x_next_all[np.arange(self.n_rows), self.behavior_actions]
        return self.x_next

    def seed_trajectory_rows(self, k: int) -> np.ndarray:
        prov = self.provenance[k]
        return np.arange(prov.start_row, prov.start_row + prov.length)

    # Successor exogenous draw within the same seed trajectory, used by
    # full-state stitching to advance w alongside x.
    def _ensure_w_next(self) -> None:
        if self._w_next is not None:
            return
        w_next = np.zeros_like(self.w)
        has_next = np.zeros(self.n_rows, dtype=bool)
        for prov in self.provenance:
            lo, hi = prov.start_row, prov.start_row + prov.length
            if hi - lo > 1:
                w_next[lo : hi - 1] = self.w[lo + 1 : hi]
                has_next[lo : hi - 1] = True
        self._w_next = w_next
        self._has_next = has_next

    @property
    def w_next(self) -> np.ndarray:
        self._ensure_w_next()
        return self._w_next

    @property
    def has_next(self) -> np.ndarray:
        self._ensure_w_next()
        return self._has_next

    # ----------------------------------------------------------------- stats

    def compute_feature_stats(self) -> FeatureStats:
        """Recompute per-feature stats over every stored (x, w) row."""
        if self.is_empty:
            raise ConfigurationError("cannot compute feature stats on an empty database")
        names = self.markov_features + self.exo_features
        matrix = np.hstack([self.x, self.w]) if self.exo_dim else self.x
        self.feature_stats = FeatureStats.from_matrix(names, matrix)
        self.stats_stale = False
        return self.feature_stats

    def markov_stats(self) -> FeatureStats:
        stats = self._current_stats()
        d = self.markov_dim
        return FeatureStats(
            self.markov_features, stats.mean[:d], stats.std[:d], stats.constant[:d]
        )

    def _current_stats(self) -> FeatureStats:
        if self.feature_stats is None or self.stats_stale:
            self.compute_feature_stats()
        return self.feature_stats

    # ---------------------------------------------------------------- extend

    def extend(self, other: "TransitionDatabase") -> None:
        """Append another database's rows in place; stats become stale."""
        for attr in ("mode", "markov_features", "exo_features", "action_names"):
            if getattr(self, attr) != getattr(other, attr):
                raise ContractViolationError(f"cannot extend: {attr} differs")
        offset = self.n_rows
        self.x = np.vstack([self.x, other.x])
        self.w = np.vstack([self.w, other.w])
        self.time_steps = np.concatenate([self.time_steps, other.time_steps])
        self.traj_ids = np.concatenate(
            [self.traj_ids, other.traj_ids + self.n_seed_trajectories]
        )
        self.behavior_actions = np.concatenate(
            [self.behavior_actions, other.behavior_actions]
        )
        if self.mode == "debiased":
            self.rewards_all = np.vstack([self.rewards_all, other.rewards_all])
            self.x_next_all = np.concatenate([self.x_next_all, other.x_next_all])
        else:
            self.rewards = np.concatenate([self.rewards, other.rewards])
            self.x_next = np.vstack([self.x_next, other.x_next])
        for prov in other.provenance:
            self.provenance.append(
                TrajectoryProvenance(
                    policy=dict(prov.policy),
                    start_row=prov.start_row + offset,
                    length=prov.length,
                    realized_actions=list(prov.realized_actions),
                )
            )
        self.horizon = max(self.horizon, other.horizon)
        self.stats_stale = self.feature_stats is not None
        self._w_next = None
        self._has_next = None
        if self.z_records is not None and other.z_records is not None:
            self.z_records = self.z_records + other.z_records
        else:
            self.z_records = None

    def subset(self, trajectory_ids: Sequence[int]) -> "TransitionDatabase":
        """New database holding only the given seed trajectories, reindexed."""
        rows: list[np.ndarray] = []
        provenance: list[TrajectoryProvenance] = []
        cursor = 0
        for new_tid, k in enumerate(trajectory_ids):
            if not 0 <= k < self.n_seed_trajectories:
                raise ContractViolationError(f"seed trajectory {k} out of range")
            prov = self.provenance[k]
            rows.append(self.seed_trajectory_rows(k))
            provenance.append(
                TrajectoryProvenance(
                    policy=dict(prov.policy),
                    start_row=cursor,
                    length=prov.length,
                    realized_actions=list(prov.realized_actions),
                )
            )
            cursor += prov.length
        idx = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        traj_ids = np.concatenate(
            [np.full(self.provenance[k].length, t, dtype=int)
             for t, k in enumerate(trajectory_ids)]
        ) if rows else np.zeros(0, dtype=int)
        return TransitionDatabase(
            mode=self.mode,
            markov_features=self.markov_features,
            exo_features=self.exo_features,
            action_names=self.action_names,
            horizon=self.horizon,
            x=self.x[idx].copy(),
            w=self.w[idx].copy(),
            time_steps=self.time_steps[idx].copy(),
            traj_ids=traj_ids,
            behavior_actions=self.behavior_actions[idx].copy(),
            rewards_all=self.rewards_all[idx].copy() if self.mode == "debiased" else None,
            x_next_all=self.x_next_all[idx].copy() if self.mode == "debiased" else None,
            rewards=self.rewards[idx].copy() if self.mode == "biased" else None,
            x_next=self.x_next[idx].copy() if self.mode == "biased" else None,
            provenance=provenance,
            mdp_config=dict(self.mdp_config) if self.mdp_config else None,
            feature_stats=None,
        )


# ------------------------------------------------------------------ builders


def _empty_database(mdp: FactoredMdp, mode: str, horizon: int) -> TransitionDatabase:
    dx, dw, A = mdp.markov_dim, mdp.exo_dim, mdp.action_count
    return TransitionDatabase(
        mode=mode,
        markov_features=mdp.markov_features,
        exo_features=mdp.exo_features,
        action_names=mdp.actions,
        horizon=horizon,
        x=np.zeros((0, dx)),
        w=np.zeros((0, dw)),
        time_steps=np.zeros(0, dtype=int),
        traj_ids=np.zeros(0, dtype=int),
        behavior_actions=np.zeros(0, dtype=int),
        rewards_all=np.zeros((0, A)) if mode == "debiased" else None,
        x_next_all=np.zeros((0, A, dx)) if mode == "debiased" else None,
        rewards=np.zeros(0) if mode == "biased" else None,
        x_next=np.zeros((0, dx)) if mode == "biased" else None,
        mdp_config=dict(mdp.config) if mdp.config else None,
        z_records=[],
    )


def _populate(mdp: FactoredMdp, policies: Sequence[Policy], horizon: int,
              rng: np.random.Generator, mode: str,
              starts: Optional[Sequence[np.ndarray]] = None) -> TransitionDatabase:
    """Shared seed-trajectory loop for both modes.

    One exogenous draw is consumed per visited state and, in debiased mode,
    shared across every action branched from that state, so that paired
    debiased/biased builds see identical randomness.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    if horizon < 1:
        raise ConfigurationError("horizon must be at least 1")
    db = _empty_database(mdp, mode, horizon)
    A, dx = mdp.action_count, mdp.markov_dim
    xs, ws, ts, tids, acts = [], [], [], [], []
    r_all, xn_all, r_one, xn_one = [], [], [], []
    z_records = []
    for tid, policy in enumerate(policies):
        if starts is not None:
            x = np.asarray(starts[tid], dtype=float).copy()
        else:
            x = np.asarray(mdp.initial_state_sampler(rng), dtype=float).copy()
        if x.shape != (dx,):
            raise ContractViolationError(
                f"initial state shape {x.shape} does not match markov dim {dx}"
            )
        realized = []
        for t in range(horizon):
            draw = mdp.exo_sampler(rng)
            a_real = int(policy(x, draw.w))
            if not 0 <= a_real < A:
                raise ContractViolationError(
                    f"policy returned action {a_real}, valid range is [0, {A})"
                )
            xs.append(x.copy())
            ws.append(np.asarray(draw.w, dtype=float).copy())
            ts.append(t)
            tids.append(tid)
            acts.append(a_real)
            realized.append(a_real)
            z_records.append(np.asarray(draw.z, dtype=float).copy())
            if mode == "debiased":
                branch_r = np.zeros(A)
                branch_x = np.zeros((A, dx))
                for a in range(A):
                    branch_x[a] = mdp.transition_fn(x, a, draw.w, draw.z)
                    branch_r[a] = mdp.reward_fn(x, a, draw.w, draw.z, t)
                r_all.append(branch_r)
                xn_all.append(branch_x)
                x = branch_x[a_real].copy()
            else:
                x_next = np.asarray(
                    mdp.transition_fn(x, a_real, draw.w, draw.z), dtype=float
                )
                r = float(mdp.reward_fn(x, a_real, draw.w, draw.z, t))
                r_one.append(r)
                xn_one.append(x_next.copy())
                x = x_next.copy()
        db.provenance.append(
            TrajectoryProvenance(
                policy=policy.describe(),
                start_row=len(xs) - horizon,
                length=horizon,
                realized_actions=realized,
            )
        )
    n_rows = len(xs)
    if n_rows:
        db.x = np.asarray(xs)
        db.w = np.asarray(ws).reshape(n_rows, mdp.exo_dim)
        db.time_steps = np.asarray(ts, dtype=int)
        db.traj_ids = np.asarray(tids, dtype=int)
        db.behavior_actions = np.asarray(acts, dtype=int)
        if mode == "debiased":
            db.rewards_all = np.asarray(r_all)
            db.x_next_all = np.asarray(xn_all)
            finite = np.isfinite(db.rewards_all).all() and np.isfinite(db.x_next_all).all()
        else:
            db.rewards = np.asarray(r_one)
            db.x_next = np.asarray(xn_one)
            finite = np.isfinite(db.rewards).all() and np.isfinite(db.x_next).all()
        if not (finite and np.isfinite(db.x).all() and np.isfinite(db.w).all()):
            raise NumericError("non-finite value produced while populating database")
        db.z_records = z_records
        db.compute_feature_stats()
    return db


def populate_debiased(mdp: FactoredMdp, behavior_policy: Policy, n: int, horizon: int,
                      rng: np.random.Generator,
                      starts: Optional[Sequence[np.ndarray]] = None) -> TransitionDatabase:
    """Roll out ``n`` seed trajectories, simulating every action at each state."""
    return _populate(mdp, [behavior_policy] * n, horizon, rng, "debiased", starts)


def populate_biased(mdp: FactoredMdp, behavior_policy: Policy, n: int, horizon: int,
                    rng: np.random.Generator,
                    starts: Optional[Sequence[np.ndarray]] = None) -> TransitionDatabase:
    """Roll out ``n`` seed trajectories, storing only the behavior action's branch."""
    return _populate(mdp, [behavior_policy] * n, horizon, rng, "biased", starts)


def seed_policy_grid(mdp: FactoredMdp, policy_class: str,
                     param_grid: Sequence[Sequence[float]], horizon: int,
                     rng: np.random.Generator, mode: str = "debiased",
                     feature: Optional[str] = None,
                     trajectories_per_policy: int = 1,
                     starts: Optional[Sequence[np.ndarray]] = None) -> TransitionDatabase:
    """Populate with one (or more) seed trajectories per policy parameterization."""
    if len(param_grid) == 0:
        raise ConfigurationError("policy grid is empty")
    policies = [
        build_policy(mdp, policy_class, tuple(params), feature=feature)
        for params in param_grid
        for _ in range(trajectories_per_policy)
    ]
    return _populate(mdp, policies, horizon, rng, mode, starts)


def populate_enumerated(mdp: FactoredMdp, states_by_time: Sequence[Sequence[np.ndarray]],
                        copies: int, rng: np.random.Generator,
                        realized_policy: Optional[Policy] = None) -> TransitionDatabase:
    """Debiased database covering an explicit list of states per time step.

    Each listed state becomes ``copies`` single-step seed trajectories (fresh
    exogenous draws each), so queries that land exactly on an enumerated state
    can stitch without feature error even when sets are consumed.
    """
    if copies < 1:
        raise ConfigurationError("copies must be at least 1")
    db = _empty_database(mdp, "debiased", len(states_by_time))
    A, dx = mdp.action_count, mdp.markov_dim
    xs, ws, ts, tids, acts = [], [], [], [], []
    r_all, xn_all = [], []
    tid = 0
    for t, states in enumerate(states_by_time):
        for x0 in states:
            x0 = np.asarray(x0, dtype=float)
            for _ in range(copies):
                draw = mdp.exo_sampler(rng)
                a_real = int(realized_policy(x0, draw.w)) if realized_policy else 0
                branch_r = np.zeros(A)
                branch_x = np.zeros((A, dx))
                for a in range(A):
                    branch_x[a] = mdp.transition_fn(x0, a, draw.w, draw.z)
                    branch_r[a] = mdp.reward_fn(x0, a, draw.w, draw.z, t)
                xs.append(x0.copy())
                ws.append(np.asarray(draw.w, dtype=float).copy())
                ts.append(t)
                tids.append(tid)
                acts.append(a_real)
                r_all.append(branch_r)
                xn_all.append(branch_x)
                db.provenance.append(
                    TrajectoryProvenance(
                        policy={"policy_class": "constant", "params": [a_real]},
                        start_row=len(xs) - 1,
                        length=1,
                        realized_actions=[a_real],
                    )
                )
                tid += 1
    if xs:
        db.x = np.asarray(xs)
        db.w = np.asarray(ws).reshape(len(xs), mdp.exo_dim)
        db.time_steps = np.asarray(ts, dtype=int)
        db.traj_ids = np.asarray(tids, dtype=int)
        db.behavior_actions = np.asarray(acts, dtype=int)
        db.rewards_all = np.asarray(r_all)
        db.x_next_all = np.asarray(xn_all)
        db.compute_feature_stats()
    return db


# --------------------------------------------------------------- persistence

MANIFEST_NAME = "manifest.json"
CSV_NAME = "transitions.csv"


def _csv_header(db: TransitionDatabase) -> str:
    cols = ["set_id", "time_step", "action_id"]
    cols += [f"x_{name}" for name in db.markov_features]
    cols += [f"w_{name}" for name in db.exo_features]
    cols += ["r"]
    cols += [f"xnext_{name}" for name in db.markov_features]
    return ",".join(cols)


def _csv_rows(db: TransitionDatabase):
    for i in range(db.n_rows):
        x_part = [_fmt(v) for v in db.x[i]]
        w_part = [_fmt(v) for v in db.w[i]]
        head = [str(i), str(int(db.time_steps[i]))]
        if db.mode == "debiased":
            for a in range(db.action_count):
                yield ",".join(
                    head
                    + [str(a)]
                    + x_part
                    + w_part
                    + [_fmt(db.rewards_all[i, a])]
                    + [_fmt(v) for v in db.x_next_all[i, a]]
                )
        else:
            yield ",".join(
                head
                + [str(int(db.behavior_actions[i]))]
                + x_part
                + w_part
                + [_fmt(db.rewards[i])]
                + [_fmt(v) for v in db.x_next[i]]
            )


def save(db: TransitionDatabase, path: str) -> None:
    """Write the database to ``path`` as manifest.json + transitions.csv."""
    os.makedirs(path, exist_ok=True)
    lines = [_csv_header(db)]
    lines.extend(_csv_rows(db))
    csv_bytes = ("\n".join(lines) + "\n").encode("utf-8")
    checksum = hashlib.sha256(csv_bytes).hexdigest()
    manifest = {
        "format_version": FORMAT_VERSION,
        "mode": db.mode,
        "markov_features": list(db.markov_features),
        "exo_features": list(db.exo_features),
        "action_names": list(db.action_names),
        "horizon": int(db.horizon),
        "row_count": db.n_rows,
        "mdp": db.mdp_config,
        "feature_stats": db.feature_stats.to_dict() if db.feature_stats else None,
        "stats_stale": bool(db.stats_stale),
        "provenance": [p.to_dict() for p in db.provenance],
        "transitions_sha256": checksum,
    }
    with open(os.path.join(path, CSV_NAME), "wb") as f:
        f.write(csv_bytes)
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def _parse_float(token: str, line_no: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise DatabaseFormatError(
            "malformed_row", f"line {line_no}: cannot parse float {token!r}"
        ) from None


def load(path: str) -> TransitionDatabase:
    """Load a saved database, verifying checksum, schema, and set structure."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    csv_path = os.path.join(path, CSV_NAME)
    if not os.path.exists(manifest_path):
        raise DatabaseFormatError("missing_file", f"{manifest_path} not found")
    if not os.path.exists(csv_path):
        raise DatabaseFormatError("missing_file", f"{csv_path} not found")
    with open(manifest_path, "r", encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as exc:
            raise DatabaseFormatError("malformed_row", f"manifest is not valid JSON: {exc}")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise DatabaseFormatError(
            "version_mismatch",
            f"format version {version!r} is not supported (expected {FORMAT_VERSION})",
        )
    with open(csv_path, "rb") as f:
        csv_bytes = f.read()
    checksum = hashlib.sha256(csv_bytes).hexdigest()
    if checksum != manifest.get("transitions_sha256"):
        raise DatabaseFormatError(
            "checksum_mismatch",
            f"transitions.csv checksum {checksum} does not match manifest",
        )
    mode = manifest.get("mode")
    if mode not in MODES:
        raise DatabaseFormatError("malformed_row", f"unknown mode {mode!r}")
    markov_features = tuple(manifest["markov_features"])
    exo_features = tuple(manifest["exo_features"])
    action_names = tuple(manifest["action_names"])
    dx, dw, A = len(markov_features), len(exo_features), len(action_names)

    text = csv_bytes.decode("utf-8")
    lines = text.splitlines()
    if not lines:
        raise DatabaseFormatError("empty_database", "transitions.csv has no header")
    expected_header = (
        ["set_id", "time_step", "action_id"]
        + [f"x_{n}" for n in markov_features]
        + [f"w_{n}" for n in exo_features]
        + ["r"]
        + [f"xnext_{n}" for n in markov_features]
    )
    header = lines[0].split(",")
    if header != expected_header:
        raise DatabaseFormatError("malformed_row", "header does not match manifest schema")
    data_lines = lines[1:]
    if not data_lines:
        raise DatabaseFormatError("empty_database", "database contains no transitions")
    n_cols = len(expected_header)

    # Group rows by set id, preserving file order.
    parsed: list[tuple[int, int, int, np.ndarray, np.ndarray, float, np.ndarray]] = []
    for line_no, line in enumerate(data_lines, start=2):
        parts = line.split(",")
        if len(parts) != n_cols:
            raise DatabaseFormatError(
                "malformed_row",
                f"line {line_no}: expected {n_cols} columns, got {len(parts)}",
            )
        try:
            set_id = int(parts[0])
            t = int(parts[1])
            action = int(parts[2])
        except ValueError:
            raise DatabaseFormatError(
                "malformed_row", f"line {line_no}: non-integer id column"
            ) from None
        if not 0 <= action < A:
            raise DatabaseFormatError(
                "malformed_row", f"line {line_no}: action {action} out of range"
            )
        off = 3
        x_vals = np.array([_parse_float(p, line_no) for p in parts[off : off + dx]])
        off += dx
        w_vals = np.array([_parse_float(p, line_no) for p in parts[off : off + dw]])
        off += dw
        r = _parse_float(parts[off], line_no)
        off += 1
        xn_vals = np.array([_parse_float(p, line_no) for p in parts[off : off + dx]])
        parsed.append((set_id, t, action, x_vals, w_vals, r, xn_vals))

    rows_per_set = A if mode == "debiased" else 1
    n_sets, rem = divmod(len(parsed), rows_per_set)
    if rem != 0:
        raise DatabaseIntegrityError(
            f"row count {len(parsed)} is not a multiple of {rows_per_set}"
        )
    if manifest.get("row_count") != n_sets:
        raise DatabaseIntegrityError(
            f"manifest row_count {manifest.get('row_count')} != {n_sets} stored sets"
        )

    x = np.zeros((n_sets, dx))
    w = np.zeros((n_sets, dw))
    time_steps = np.zeros(n_sets, dtype=int)
    behavior_actions = np.zeros(n_sets, dtype=int)
    rewards_all = np.zeros((n_sets, A)) if mode == "debiased" else None
    x_next_all = np.zeros((n_sets, A, dx)) if mode == "debiased" else None
    rewards = np.zeros(n_sets) if mode == "biased" else None
    x_next = np.zeros((n_sets, dx)) if mode == "biased" else None

    for i in range(n_sets):
        group = parsed[i * rows_per_set : (i + 1) * rows_per_set]
        sid = group[0][0]
        if sid != i:
            raise DatabaseIntegrityError(
                f"expected set id {i}, found {sid}", set_id=sid
            )
        if mode == "debiased":
            seen = [g[2] for g in group]
            if sorted(seen) != list(range(A)):
                missing = sorted(set(range(A)) - set(seen))
                raise DatabaseIntegrityError(
                    f"set {i} is missing action branch(es) {missing}", set_id=i
                )
            base = group[0]
            for g in group:
                if g[0] != i:
                    raise DatabaseIntegrityError(
                        f"set {i} mixes rows from set {g[0]}", set_id=i
                    )
                if g[1] != base[1] or not (
                    np.array_equal(g[3], base[3]) and np.array_equal(g[4], base[4])
                ):
                    raise DatabaseIntegrityError(
                        f"set {i} has inconsistent shared state across action rows",
                        set_id=i,
                    )
                rewards_all[i, g[2]] = g[5]
                x_next_all[i, g[2]] = g[6]
            x[i], w[i], time_steps[i] = base[3], base[4], base[1]
        else:
            sid, t, action, x_vals, w_vals, r, xn_vals = group[0]
            x[i], w[i], time_steps[i] = x_vals, w_vals, t
            behavior_actions[i] = action
            rewards[i] = r
            x_next[i] = xn_vals

    provenance = [
        TrajectoryProvenance.from_dict(p) for p in manifest.get("provenance", [])
    ]
    covered = sum(p.length for p in provenance)
    if covered != n_sets:
        raise DatabaseIntegrityError(
            f"provenance covers {covered} rows but database has {n_sets}"
        )
    traj_ids = np.zeros(n_sets, dtype=int)
    for k, prov in enumerate(provenance):
        traj_ids[prov.start_row : prov.start_row + prov.length] = k
        if mode == "debiased":
            if len(prov.realized_actions) != prov.length:
                raise DatabaseIntegrityError(
                    f"trajectory {k} realized actions do not match its length"
                )
            behavior_actions[prov.start_row : prov.start_row + prov.length] = (
                prov.realized_actions
            )

    stats = manifest.get("feature_stats")
    db = TransitionDatabase(
        mode=mode,
        markov_features=markov_features,
        exo_features=exo_features,
        action_names=action_names,
        horizon=int(manifest.get("horizon", 0)),
        x=x,
        w=w,
        time_steps=time_steps,
        traj_ids=traj_ids,
        behavior_actions=behavior_actions,
        rewards_all=rewards_all,
        x_next_all=x_next_all,
        rewards=rewards,
        x_next=x_next,
        provenance=provenance,
        mdp_config=manifest.get("mdp"),
        feature_stats=FeatureStats.from_dict(stats) if stats else None,
        stats_stale=bool(manifest.get("stats_stale", False)),
    )
    return db
