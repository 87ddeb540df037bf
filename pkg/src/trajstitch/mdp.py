"""Factored-exogenous MDP core: state types, single steps, ground-truth rollouts.

The state of an MDP is split into a Markov part ``x`` (evolves under the
transition function) and an exogenous part ``w`` (time-independent draws that
do not depend on past states or actions).  All stochasticity beyond ``w`` is
funnelled through an opaque noise record ``z``, so transitions and rewards are
pure functions of ``(x, a, w, z)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractViolationError, NumericError

Vector = np.ndarray
TransitionFn = Callable[[Vector, int, Vector, Vector], Vector]
# Reward functions additionally receive the current time step, so terminal
# rewards can be expressed without widening the Markov feature vector.
RewardFn = Callable[[Vector, int, Vector, Vector, int], float]
ExoSampler = Callable[[np.random.Generator], "ExogenousDraw"]
InitialSampler = Callable[[np.random.Generator], Vector]


@dataclass(frozen=True)
class MarkovState:
    """Endogenous feature vector plus its position along the trajectory."""

    features: Vector
    time_step: int

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=float))


@dataclass(frozen=True)
class ExogenousDraw:
    """One time step's exogenous variables ``w`` and hidden noise ``z``."""

    w: Vector
    z: Vector

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))


@dataclass(frozen=True)
class LipschitzConstants:
    """Declared smoothness constants; ``None`` means undeclared."""

    L_f: float | None = None
    L_R: float | None = None
    L_pi: float | None = None
    L_fi: float | None = None
    L_Ri: float | None = None


@dataclass(frozen=True)
class FactoredMdp:
    """An immutable factored-exogenous MDP definition.

    ``transition_fn`` and ``reward_fn`` must be pure: identical
    ``(x, a, w, z)`` inputs give identical outputs, and they must not consume
    any random state.  ``exo_sampler`` is the only stochastic piece and takes
    an explicit RNG.
    """

    name: str
    markov_features: tuple[str, ...]
    exo_features: tuple[str, ...]
    actions: tuple[str, ...]
    horizon_default: int
    transition_fn: TransitionFn
    reward_fn: RewardFn
    exo_sampler: ExoSampler
    initial_state_sampler: InitialSampler
    lipschitz: LipschitzConstants | None = None
    config: dict = field(default_factory=dict)

    @property
    def markov_dim(self) -> int:
        return len(self.markov_features)

    @property
    def exo_dim(self) -> int:
        return len(self.exo_features)

    @property
    def action_count(self) -> int:
        return len(self.actions)

    def action_index(self, name_or_index) -> int:
        if isinstance(name_or_index, str):
            try:
                return self.actions.index(name_or_index)
            except ValueError:
                raise ContractViolationError(
                    f"unknown action {name_or_index!r} for MDP {self.name!r}"
                ) from None
        return int(name_or_index)


def step(mdp: FactoredMdp, x: MarkovState, a: int, draw: ExogenousDraw) -> tuple[MarkovState, float]:
    """Apply one transition: returns the successor state and the step reward.

    Raises ``ContractViolationError`` for a bad action index and
    ``NumericError`` if the MDP produces a non-finite output.
    """
    if not 0 <= a < mdp.action_count:
        raise ContractViolationError(
            f"action index {a} out of range [0, {mdp.action_count}) for MDP {mdp.name!r}"
        )
    x_next = np.asarray(mdp.transition_fn(x.features, a, draw.w, draw.z), dtype=float)
    r = float(mdp.reward_fn(x.features, a, draw.w, draw.z, x.time_step))
    if x_next.shape != (mdp.markov_dim,):
        raise ContractViolationError(
            f"transition produced shape {x_next.shape}, expected ({mdp.markov_dim},)"
        )
    if not (np.all(np.isfinite(x_next)) and np.isfinite(r)):
        raise NumericError(
            f"non-finite output from MDP {mdp.name!r}: x={x.features!r} a={a} "
            f"w={draw.w!r} z={draw.z!r} -> x'={x_next!r} r={r!r}"
        )
    return MarkovState(x_next, x.time_step + 1), r


def sample_exogenous(mdp: FactoredMdp, rng: np.random.Generator) -> ExogenousDraw:
    """Draw one (w, z) pair; independent of any state by construction."""
    draw = mdp.exo_sampler(rng)
    if draw.w.shape != (mdp.exo_dim,):
        raise ContractViolationError(
            f"exogenous sampler produced shape {draw.w.shape}, expected ({mdp.exo_dim},)"
        )
    return draw


@dataclass(frozen=True)
class TrajectoryStep:
    x: MarkovState
    w: Vector
    action: int
    reward: float


@dataclass
class Trajectory:
    """One rollout of length ``h``: steps[t].x.time_step == t for all t."""

    steps: list[TrajectoryStep]
    matched_ids: list[int] | None = None  # database rows consumed, for stitched runs

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def cumulative_reward(self) -> float:
        return float(sum(s.reward for s in self.steps))


class TrajectorySet:
    """A batch of ``n`` equal-length trajectories, stored as dense arrays."""

    def __init__(
        self,
        markov_features: tuple[str, ...],
        exo_features: tuple[str, ...],
        x: Vector,
        w: Vector,
        actions: Vector,
        rewards: Vector,
    ):
        self.markov_features = tuple(markov_features)
        self.exo_features = tuple(exo_features)
        self.x = np.asarray(x, dtype=float)  # (n, h, dx)
        self.w = np.asarray(w, dtype=float)  # (n, h, dw)
        self.actions = np.asarray(actions, dtype=int)  # (n, h)
        self.rewards = np.asarray(rewards, dtype=float)  # (n, h)

    @classmethod
    def from_trajectories(
        cls,
        trajectories: list[Trajectory],
        markov_features: tuple[str, ...],
        exo_features: tuple[str, ...],
    ) -> "TrajectorySet":
        n = len(trajectories)
        h = len(trajectories[0]) if n else 0
        dx, dw = len(markov_features), len(exo_features)
        x = np.empty((n, h, dx))
        w = np.empty((n, h, dw))
        actions = np.empty((n, h), dtype=int)
        rewards = np.empty((n, h))
        for i, traj in enumerate(trajectories):
            if len(traj) != h:
                raise ContractViolationError("trajectories in a set must share one length")
            for t, s in enumerate(traj.steps):
                x[i, t] = s.x.features
                w[i, t] = s.w
                actions[i, t] = s.action
                rewards[i, t] = s.reward
        return cls(markov_features, exo_features, x, w, actions, rewards)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def horizon(self) -> int:
        return self.x.shape[1]

    def trajectory(self, i: int) -> Trajectory:
        steps = [
            TrajectoryStep(
                MarkovState(self.x[i, t].copy(), t),
                self.w[i, t].copy(),
                int(self.actions[i, t]),
                float(self.rewards[i, t]),
            )
            for t in range(self.horizon)
        ]
        return Trajectory(steps)

    def returns(self) -> Vector:
        return self.rewards.sum(axis=1)

    def variable_names(self) -> list[str]:
        return list(self.markov_features) + list(self.exo_features) + ["reward", "cumulative_reward"]

    def variable(self, name: str) -> Vector:
        """Per-trajectory, per-step values of a named state property, shape (n, h)."""
        if name in self.markov_features:
            return self.x[:, :, self.markov_features.index(name)]
        if name in self.exo_features:
            return self.w[:, :, self.exo_features.index(name)]
        if name == "reward":
            return self.rewards
        if name == "cumulative_reward":
            return np.cumsum(self.rewards, axis=1)
        raise KeyError(name)

    def truncated(self, h: int) -> "TrajectorySet":
        if h > self.horizon:
            raise ContractViolationError(f"cannot extend horizon {self.horizon} to {h}")
        return TrajectorySet(
            self.markov_features,
            self.exo_features,
            self.x[:, :h],
            self.w[:, :h],
            self.actions[:, :h],
            self.rewards[:, :h],
        )


def rollout_ground_truth(mdp, policy, n: int, h: int, rng: np.random.Generator) -> TrajectorySet:
    """Simulate ``n`` independent on-policy trajectories of length ``h``."""
    if n < 1 or h < 1:
        raise ContractViolationError("rollout requires n >= 1 and h >= 1")
    trajectories = []
    for _ in range(n):
        x = MarkovState(mdp.initial_state_sampler(rng), 0)
        steps = []
        for _t in range(h):
            draw = sample_exogenous(mdp, rng)
            a = policy(x.features, draw.w)
            x_next, r = step(mdp, x, a, draw)
            steps.append(TrajectoryStep(x, draw.w, a, r))
            x = x_next
        trajectories.append(Trajectory(steps))
    return TrajectorySet.from_trajectories(trajectories, mdp.markov_features, mdp.exo_features)


def check_lipschitz(
    mdp: FactoredMdp, n_pairs: int, rng: np.random.Generator, pair_sampler=None
) -> dict[str, int]:
    """Spot-check declared Lipschitz constants on random input pairs.

    Returns a violation count per declared constant.  Pairs are drawn from the
    initial-state sampler unless ``pair_sampler`` supplies ``(x, x')`` pairs.
    Full-state constants are checked with matched actions, which is the only
    well-defined case for finite action sets.
    """
    lc = mdp.lipschitz
    if lc is None:
        return {}
    violations = {}
    if lc.L_fi is not None:
        violations["L_fi"] = 0
    if lc.L_Ri is not None:
        violations["L_Ri"] = 0
    if lc.L_f is not None:
        violations["L_f"] = 0
    if lc.L_R is not None:
        violations["L_R"] = 0
    for _ in range(n_pairs):
        if pair_sampler is not None:
            xa, xb = pair_sampler(rng)
        else:
            xa = mdp.initial_state_sampler(rng)
            xb = mdp.initial_state_sampler(rng)
        draw = sample_exogenous(mdp, rng)
        a = int(rng.integers(mdp.action_count))
        dx = float(np.linalg.norm(xa - xb))
        if dx == 0.0:
            continue
        fa = np.asarray(mdp.transition_fn(xa, a, draw.w, draw.z), dtype=float)
        fb = np.asarray(mdp.transition_fn(xb, a, draw.w, draw.z), dtype=float)
        ra = float(mdp.reward_fn(xa, a, draw.w, draw.z, 0))
        rb = float(mdp.reward_fn(xb, a, draw.w, draw.z, 0))
        df = float(np.linalg.norm(fa - fb))
        dr = abs(ra - rb)
        tol = 1e-9 * max(1.0, dx)
        if lc.L_fi is not None and df > lc.L_fi * dx + tol:
            violations["L_fi"] += 1
        if lc.L_Ri is not None and dr > lc.L_Ri * dx + tol:
            violations["L_Ri"] += 1
        if lc.L_f is not None and df > lc.L_f * dx + tol:
            violations["L_f"] += 1
        if lc.L_R is not None and dr > lc.L_R * dx + tol:
            violations["L_R"] += 1
    return violations
