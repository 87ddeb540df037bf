"""Benchmark MDPs used for desk-scale validation.

Three families:

* ``gridworld`` -- a deterministic two-action grid (move right or up) for
  exact stitching-behavior tests.
* ``ember`` -- a two-feature wildfire analog with exogenous fire severity,
  season day and ignition position, rich enough to show all three policy
  classes' behavior.
* ``linear`` -- linear dynamics with Lipschitz constants that can be read off
  the matrices exactly, used to validate the bias/variance bounds.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .mdp import ExogenousDraw, FactoredMdp, LipschitzConstants


def _snap(value: float, q: float) -> float:
    return min(max(round(value / q) * q, 0.0), 1.0)


def build_gridworld(
    rows: int = 12,
    cols: int = 12,
    horizon: int = 10,
    row_weight: float = 1.0,
    col_weight: float = -1.0,
    start_row: int = 0,
    start_col: int = 0,
) -> FactoredMdp:
    """Deterministic grid: action 0 moves right, action 1 moves up.

    Moves clamp at the grid edge.  Reward is 0 everywhere except the final
    step of the configured horizon, which scores the successor cell as
    ``row_weight * row + col_weight * col``.
    """

    def transition(x, a, w, z):
        row, col = x[0], x[1]
        if a == 1:
            row = min(row + 1, rows - 1)
        else:
            col = min(col + 1, cols - 1)
        return np.array([row, col])

    def reward(x, a, w, z, t):
        if t != horizon - 1:
            return 0.0
        nxt = transition(x, a, w, z)
        return row_weight * nxt[0] + col_weight * nxt[1]

    empty = np.empty(0)

    def exo_sampler(rng):
        return ExogenousDraw(empty, empty)

    def initial_state(rng):
        return np.array([float(start_row), float(start_col)])

    return FactoredMdp(
        name="gridworld",
        markov_features=("row", "col"),
        exo_features=(),
        actions=("right", "up"),
        horizon_default=horizon,
        transition_fn=transition,
        reward_fn=reward,
        exo_sampler=exo_sampler,
        initial_state_sampler=initial_state,
        config={
            "name": "gridworld",
            "params": {
                "rows": rows,
                "cols": cols,
                "horizon": horizon,
                "row_weight": row_weight,
                "col_weight": col_weight,
                "start_row": start_row,
                "start_col": start_col,
            },
        },
    )


# Ember dynamics: the per-step burned fraction scales with the hidden burn
# noise, the fire severity and the available fuel.  Suppression cuts the burn
# by 20x at a fixed cost.
EMBER_BURN_RATE = (0.008, 0.0004)  # (let burn, suppress)
EMBER_FUEL_GROWTH = 0.05
EMBER_CANOPY_GROWTH = 0.02
EMBER_BURN_PENALTY = 10.0
EMBER_SUPPRESS_COST = 5.0


def build_ember(
    horizon: int = 100,
    discretization: float | None = None,
    start_fuel: tuple[float, float] = (0.05, 0.15),
    start_canopy: tuple[float, float] = (0.5, 0.7),
) -> FactoredMdp:
    """Wildfire analog with Markov (fuel, canopy) and exogenous (severity, day, position).

    ``discretization`` snaps fuel and canopy (including initial states) to a
    grid with the given spacing, which makes exact stitching matches possible.
    """

    q = discretization

    def transition(x, a, w, z):
        burn = EMBER_BURN_RATE[a] * z[0] * w[0] * x[0]
        fuel = min(max(x[0] - burn + EMBER_FUEL_GROWTH, 0.0), 1.0)
        canopy = min(max(x[1] - burn + EMBER_CANOPY_GROWTH, 0.0), 1.0)
        if q is not None:
            fuel = _snap(fuel, q)
            canopy = _snap(canopy, q)
        return np.array([fuel, canopy])

    def reward(x, a, w, z, t):
        burn = EMBER_BURN_RATE[a] * z[0] * w[0] * x[0]
        return -EMBER_BURN_PENALTY * burn - (EMBER_SUPPRESS_COST if a == 1 else 0.0)

    def exo_sampler(rng):
        w = np.array([rng.uniform(0.0, 100.0), rng.uniform(0.0, 180.0), rng.uniform(0.0, 1.0)])
        z = np.array([rng.uniform(0.0, 1.0)])
        return ExogenousDraw(w, z)

    def initial_state(rng):
        fuel = rng.uniform(*start_fuel)
        canopy = rng.uniform(*start_canopy)
        if q is not None:
            fuel, canopy = _snap(fuel, q), _snap(canopy, q)
        return np.array([fuel, canopy])

    return FactoredMdp(
        name="ember",
        markov_features=("fuel", "canopy"),
        exo_features=("severity", "day", "position"),
        actions=("letburn", "suppress"),
        horizon_default=horizon,
        transition_fn=transition,
        reward_fn=reward,
        exo_sampler=exo_sampler,
        initial_state_sampler=initial_state,
        config={
            "name": "ember",
            "params": {
                "horizon": horizon,
                "discretization": discretization,
                "start_fuel": list(start_fuel),
                "start_canopy": list(start_canopy),
            },
        },
    )


def ember_reachable_states(
    mdp: FactoredMdp, x0: np.ndarray, h: int
) -> list[list[tuple[float, float]]]:
    """Enumerate every (fuel, canopy) grid point reachable at each time step.

    Only valid for a discretized ember MDP.  Reachability is bounded by
    interval arithmetic on the burn law, so the result is a superset of the
    states any trajectory from ``x0`` can visit.
    """
    q = mdp.config["params"]["discretization"]
    if q is None:
        raise ConfigurationError("reachable-state enumeration requires a discretized ember MDP")

    def levels(lo: float, hi: float) -> list[float]:
        lo_i = int(math.floor(max(lo, 0.0) / q + 0.5))
        hi_i = int(math.floor(min(hi, 1.0) / q + 0.5))
        return [round(i * q, 12) for i in range(max(lo_i, 0), hi_i + 1)]

    per_time: list[list[tuple[float, float]]] = [[(float(x0[0]), float(x0[1]))]]
    for _t in range(1, h):
        nxt: set[tuple[float, float]] = set()
        for fuel, canopy in per_time[-1]:
            for rate in EMBER_BURN_RATE:
                burn_max = rate * 1.0 * 100.0 * fuel
                fuels = levels(fuel - burn_max + EMBER_FUEL_GROWTH - q / 2,
                               fuel + EMBER_FUEL_GROWTH + q / 2)
                canopies = levels(canopy - burn_max + EMBER_CANOPY_GROWTH - q / 2,
                                  canopy + EMBER_CANOPY_GROWTH + q / 2)
                nxt.update((f, c) for f in fuels for c in canopies)
        per_time.append(sorted(nxt))
    return per_time


def build_linear(
    z_scale: float = 0.01,
    horizon: int = 8,
    state_range: float = 1.0,
) -> FactoredMdp:
    """Linear dynamics x' = A x + b[a] + C w + z_scale * z with exact constants.

    The contraction A gives L_fi = ||A||_2 and the linear reward gives
    L_Ri = ||r_x||_2, both declared on the returned MDP.
    """
    A = np.array(
        [
            [0.55, 0.15, 0.00],
            [0.10, 0.50, 0.10],
            [0.00, 0.20, 0.45],
        ]
    )
    b = np.array([[0.0, 0.0, 0.0], [0.12, -0.06, 0.04]])
    C = np.array([[0.05, 0.00], [0.02, 0.03], [0.00, 0.04]])
    r_x = np.array([1.0, -0.5, 0.25])
    r_a = np.array([0.0, -0.1])

    def transition(x, a, w, z):
        return A @ x + b[a] + C @ w + z_scale * z

    def reward(x, a, w, z, t):
        return float(r_x @ x + r_a[a])

    def exo_sampler(rng):
        return ExogenousDraw(rng.uniform(0.0, 1.0, size=2), rng.standard_normal(3))

    def initial_state(rng):
        return rng.uniform(-state_range, state_range, size=3)

    lipschitz = LipschitzConstants(
        L_fi=float(np.linalg.norm(A, 2)),
        L_Ri=float(np.linalg.norm(r_x, 2)),
    )
    return FactoredMdp(
        name="linear",
        markov_features=("x0", "x1", "x2"),
        exo_features=("w0", "w1"),
        actions=("hold", "push"),
        horizon_default=horizon,
        transition_fn=transition,
        reward_fn=reward,
        exo_sampler=exo_sampler,
        initial_state_sampler=initial_state,
        lipschitz=lipschitz,
        config={
            "name": "linear",
            "params": {"z_scale": z_scale, "horizon": horizon, "state_range": state_range},
        },
    )


MDP_BUILDERS = {
    "gridworld": build_gridworld,
    "ember": build_ember,
    "linear": build_linear,
}


def build_mdp(name: str, params: dict | None = None) -> FactoredMdp:
    if name not in MDP_BUILDERS:
        raise ConfigurationError(f"unknown MDP {name!r}; expected one of {sorted(MDP_BUILDERS)}")
    params = dict(params or {})
    # JSON configs carry tuples as lists.
    for key in ("start_fuel", "start_canopy"):
        if key in params and isinstance(params[key], list):
            params[key] = tuple(params[key])
    try:
        return MDP_BUILDERS[name](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for MDP {name!r}: {exc}") from None
