"""Deterministic parametric policies over factored states.

Action index 1 is the "suppress-like" action of a policy class and 0 the
"let-burn-like" action; each MDP documents what those mean for it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .mdp import FactoredMdp

POLICY_CLASSES = ("intensity", "fuel", "location", "tabular", "constant")


@dataclass(frozen=True)
class Policy:
    """A policy bound to one MDP's feature layout.

    Calling the policy with ``(x_features, w)`` returns an action index.
    Identical inputs always yield identical actions.
    """

    policy_class: str
    params: tuple[float, ...]
    feature: str | None = None
    _fn: Callable[[np.ndarray, np.ndarray], int] = field(repr=False, compare=False, default=None)

    def __call__(self, x: np.ndarray, w: np.ndarray) -> int:
        return self._fn(x, w)

    def describe(self) -> dict:
        d = {"policy_class": self.policy_class, "params": list(self.params)}
        if self.feature is not None:
            d["feature"] = self.feature
        return d


def _index_of(names: tuple[str, ...], wanted: str, kind: str, mdp_name: str) -> int:
    try:
        return names.index(wanted)
    except ValueError:
        raise ConfigurationError(
            f"MDP {mdp_name!r} has no {kind} feature {wanted!r} (available: {list(names)})"
        ) from None


def build_policy(
    mdp: FactoredMdp, policy_class: str, params, feature: str | None = None
) -> Policy:
    """Construct a policy of the given class, resolving feature names for ``mdp``."""
    params = tuple(float(p) for p in params)
    if policy_class == "intensity":
        # Suppress when the ignition severity falls in [lo, hi] and the
        # season day is past the threshold.  Reads exogenous features only.
        if len(params) != 3:
            raise ConfigurationError("intensity policy takes params (severity_lo, severity_hi, day_min)")
        lo, hi, day_min = params
        i_sev = _index_of(mdp.exo_features, "severity", "exogenous", mdp.name)
        i_day = _index_of(mdp.exo_features, "day", "exogenous", mdp.name)

        def fn(x, w, lo=lo, hi=hi, day_min=day_min, i_sev=i_sev, i_day=i_day):
            return 1 if (lo <= w[i_sev] <= hi and w[i_day] > day_min) else 0

    elif policy_class == "fuel":
        # Suppress once an accumulating Markov feature reaches a threshold.
        if len(params) != 1:
            raise ConfigurationError("fuel policy takes params (threshold,)")
        (threshold,) = params
        feat = feature or "fuel"
        i_feat = _index_of(mdp.markov_features, feat, "Markov", mdp.name)

        def fn(x, w, threshold=threshold, i_feat=i_feat):
            return 1 if x[i_feat] >= threshold else 0

        feature = feat
    elif policy_class == "location":
        # Suppress when the exogenous ignition position is past a boundary.
        if len(params) != 1:
            raise ConfigurationError("location policy takes params (boundary,)")
        (boundary,) = params
        feat = feature or "position"
        i_feat = _index_of(mdp.exo_features, feat, "exogenous", mdp.name)

        def fn(x, w, boundary=boundary, i_feat=i_feat):
            return 1 if w[i_feat] >= boundary else 0

        feature = feat
    elif policy_class == "constant":
        if len(params) != 1:
            raise ConfigurationError("constant policy takes params (action_index,)")
        a = int(params[0])
        if not 0 <= a < mdp.action_count:
            raise ConfigurationError(f"constant action {a} out of range for {mdp.name!r}")

        def fn(x, w, a=a):
            return a

    elif policy_class == "tabular":
        # Action table over two integer-valued Markov features, row-major:
        # params = (n_rows, n_cols, a[0][0], a[0][1], ...).  Out-of-table
        # states clamp to the nearest cell.
        if len(params) < 3:
            raise ConfigurationError("tabular policy takes params (n_rows, n_cols, actions...)")
        n_rows, n_cols = int(params[0]), int(params[1])
        table = np.asarray(params[2:], dtype=int)
        if table.size != n_rows * n_cols:
            raise ConfigurationError(
                f"tabular policy expects {n_rows * n_cols} actions, got {table.size}"
            )
        if table.size and (table.min() < 0 or table.max() >= mdp.action_count):
            raise ConfigurationError("tabular policy contains out-of-range actions")
        table = table.reshape(n_rows, n_cols)
        i_row = _index_of(mdp.markov_features, "row", "Markov", mdp.name)
        i_col = _index_of(mdp.markov_features, "col", "Markov", mdp.name)

        def fn(x, w, table=table, i_row=i_row, i_col=i_col, n_rows=n_rows, n_cols=n_cols):
            r = min(max(int(round(x[i_row])), 0), n_rows - 1)
            c = min(max(int(round(x[i_col])), 0), n_cols - 1)
            return int(table[r, c])

    else:
        raise ConfigurationError(
            f"unknown policy class {policy_class!r}; expected one of {POLICY_CLASSES}"
        )
    return Policy(policy_class, params, feature, fn)


def evaluate_policy(policy: Policy, x, w) -> int:
    """Action chosen by ``policy`` at Markov features ``x`` and exogenous ``w``."""
    x = getattr(x, "features", x)
    return policy(np.asarray(x, dtype=float), np.asarray(w, dtype=float))
