"""Request/response models for the HTTP service.

These mirror the JSON schemas the explorer UI consumes; field names are part
of the wire contract and must stay in sync with the frontend client.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..estimators import DEFAULT_QUANTILE_LEVELS

Algorithm = Literal["ground_truth", "random_baseline", "mfmc", "mfmci", "mfmci_biased"]


class MetricConfig(BaseModel):
    weights: Optional[dict[str, float]] = None
    time_mode: Literal["hard", "weighted"] = "hard"
    time_weight: float = 0.0
    action_penalty: float = 1e6
    standardize: bool = True


class PolicyQueryRequest(BaseModel):
    policy_class: str
    params: list[float] = Field(default_factory=list)
    feature: Optional[str] = None
    algorithm: Algorithm = "mfmci"
    n: int = 30
    h: int
    db_id: str
    seed: int = 0
    variables: list[str] = Field(default_factory=list)
    quantile_levels: list[float] = Field(
        default_factory=lambda: list(DEFAULT_QUANTILE_LEVELS)
    )
    metric: Optional[MetricConfig] = None
    engine: Literal["linear", "vectorized", "kdtree"] = "vectorized"

    def to_request_dict(self) -> dict:
        d = self.model_dump()
        if self.metric is not None:
            d["metric"] = self.metric.model_dump(exclude_none=True)
        else:
            d["metric"] = {}
        return d


class TrajectoryQueryResponse(BaseModel):
    set_id: str
    value_estimate: float
    algorithm: str
    n: int
    h: int
    cached: bool


class QuantileSeriesModel(BaseModel):
    variable: str
    time_steps: list[int]
    quantile_levels: list[float]
    values: list[list[float]]


class FidelityRequest(BaseModel):
    truth_set_id: str
    surrogate_set_id: str
    variables: Optional[list[str]] = None
    quantile_levels: list[float] = Field(
        default_factory=lambda: list(DEFAULT_QUANTILE_LEVELS)
    )


class FidelityResponse(BaseModel):
    variables: list[str]
    errors: dict[str, list[float]]
    heights: dict[str, float]
    excluded: list[str]
    weighted_total: float


class DatabaseInfo(BaseModel):
    db_id: str
    mode: str
    sets: int
    horizon: int
    seed_trajectories: int
    markov_features: list[str]
    exo_features: list[str]
    actions: list[str]
    mdp: Optional[dict] = None
    dispersion: Optional[float] = None


class BoundsResponse(BaseModel):
    kind: str
    lipschitz: dict[str, float]
    h: int
    n: int
    k: int
    alpha: float
    constant: float
    bias_bound: float
    variance_bound: float
    sigma_h: float


class ErrorBody(BaseModel):
    code: str
    message: str
