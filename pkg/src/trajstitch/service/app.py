"""HTTP service: database listing, trajectory synthesis, charts, and bounds.

Databases are loaded once at startup and never mutated; each stitching
request owns a private exclusion ledger.  Completed trajectory sets are
cached in memory keyed by the canonical request hash, so repeated fan-chart
reads for the same query cost one stitching run.
"""

from __future__ import annotations

import os
import threading
from typing import Optional

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import database as dbio
from ..bounds import bound_report
from ..errors import ConfigurationError, ExhaustionError, TrajstitchError
from ..estimators import fan_chart, visual_fidelity_error
from ..mdp import TrajectorySet
from ..metrics import full_metric, markov_metric
from ..query import QueryValidationError, request_id, run_policy_query
from .schemas import (
    BoundsResponse,
    DatabaseInfo,
    ErrorBody,
    FidelityRequest,
    FidelityResponse,
    PolicyQueryRequest,
    QuantileSeriesModel,
    TrajectoryQueryResponse,
)

_STATUS_FOR_CODE = {
    "unknown_db": 404,
    "unknown_set": 404,
    "bad_policy": 400,
    "bad_params": 400,
    "exhaustion": 409,
}


def _error(code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=_STATUS_FOR_CODE.get(code, 400),
        content=ErrorBody(code=code, message=message).model_dump(),
    )


class TrajectorySetCache:
    """Thread-safe id -> TrajectorySet store."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sets: dict[str, TrajectorySet] = {}

    def get(self, set_id: str) -> Optional[TrajectorySet]:
        with self._lock:
            return self._sets.get(set_id)

    def put(self, set_id: str, ts: TrajectorySet) -> None:
        with self._lock:
            self._sets[set_id] = ts


def load_databases(db_dir: str) -> dict[str, dbio.TransitionDatabase]:
    """Every immediate subdirectory holding a manifest becomes one database."""
    found = {}
    if not os.path.isdir(db_dir):
        raise ConfigurationError(f"database directory not found: {db_dir}")
    for name in sorted(os.listdir(db_dir)):
        path = os.path.join(db_dir, name)
        if os.path.isdir(path) and os.path.exists(os.path.join(path, dbio.MANIFEST_NAME)):
            found[name] = dbio.load(path)
    return found


def create_app(db_dir: Optional[str] = None,
               databases: Optional[dict[str, dbio.TransitionDatabase]] = None,
               frontend_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="trajstitch", docs_url=None, redoc_url=None)
    loaded = dict(databases) if databases else {}
    if db_dir:
        loaded.update(load_databases(db_dir))
    app.state.databases = loaded
    app.state.cache = TrajectorySetCache()

    @app.exception_handler(QueryValidationError)
    async def _validation_handler(request: Request, exc: QueryValidationError):
        return _error(exc.code, exc.message)

    @app.exception_handler(ExhaustionError)
    async def _exhaustion_handler(request: Request, exc: ExhaustionError):
        return _error("exhaustion", str(exc))

    @app.exception_handler(TrajstitchError)
    async def _domain_handler(request: Request, exc: TrajstitchError):
        return _error("bad_params", str(exc))

    def _db_or_raise(db_id: str) -> dbio.TransitionDatabase:
        db = app.state.databases.get(db_id)
        if db is None:
            raise QueryValidationError("unknown_db", f"database {db_id!r} is not loaded")
        return db

    def _set_or_raise(set_id: str) -> TrajectorySet:
        ts = app.state.cache.get(set_id)
        if ts is None:
            raise QueryValidationError("unknown_set", f"trajectory set {set_id!r} not found")
        return ts

    @app.get("/api/databases", response_model=list[DatabaseInfo])
    def list_databases(dispersion_k: Optional[int] = Query(default=None, ge=1)):
        infos = []
        for db_id in sorted(app.state.databases):
            db = app.state.databases[db_id]
            alpha = None
            if dispersion_k is not None:
                from ..bounds import k_dispersion

                metric = markov_metric(db)
                alpha = k_dispersion(db, dispersion_k, metric, probes="self")
            infos.append(DatabaseInfo(
                db_id=db_id,
                mode=db.mode,
                sets=db.set_count,
                horizon=db.horizon,
                seed_trajectories=db.n_seed_trajectories,
                markov_features=list(db.markov_features),
                exo_features=list(db.exo_features),
                actions=list(db.action_names),
                mdp=db.mdp_config,
                dispersion=alpha,
            ))
        return infos

    @app.post("/api/trajectories", response_model=TrajectoryQueryResponse)
    def post_trajectories(body: PolicyQueryRequest):
        request = body.to_request_dict()
        set_id = request_id(request)
        cached = app.state.cache.get(set_id)
        if cached is not None:
            from ..estimators import value_estimate

            return TrajectoryQueryResponse(
                set_id=set_id,
                value_estimate=value_estimate(cached),
                algorithm=body.algorithm,
                n=cached.n,
                h=cached.horizon,
                cached=True,
            )
        db = None
        if body.algorithm != "ground_truth" or body.db_id:
            db = _db_or_raise(body.db_id)
        result = run_policy_query(request, db=db)
        app.state.cache.put(result.request_id, result.trajectories)
        return TrajectoryQueryResponse(
            set_id=result.request_id,
            value_estimate=result.value,
            algorithm=result.algorithm,
            n=result.n,
            h=result.h,
            cached=False,
        )

    @app.get("/api/fanchart", response_model=QuantileSeriesModel)
    def get_fanchart(set_id: str, variable: str,
                     levels: Optional[str] = Query(default=None)):
        ts = _set_or_raise(set_id)
        if levels:
            try:
                level_list = [float(v) for v in levels.split(",")]
            except ValueError:
                raise QueryValidationError("bad_params", f"bad levels {levels!r}")
        else:
            from ..estimators import DEFAULT_QUANTILE_LEVELS

            level_list = list(DEFAULT_QUANTILE_LEVELS)
        series = fan_chart(ts, variable, level_list)
        return QuantileSeriesModel(**series.to_dict())

    @app.post("/api/fidelity", response_model=FidelityResponse)
    def post_fidelity(body: FidelityRequest):
        truth = _set_or_raise(body.truth_set_id)
        surrogate = _set_or_raise(body.surrogate_set_id)
        report = visual_fidelity_error(
            truth, surrogate, body.variables, body.quantile_levels
        )
        return FidelityResponse(**report.to_dict())

    @app.get("/api/bounds", response_model=BoundsResponse)
    def get_bounds(db_id: str, h: int, n: int, constants: str,
                   kind: str = "factored", sigma_h: float = 0.0,
                   k: Optional[int] = None):
        db = _db_or_raise(db_id)
        try:
            values = [float(v) for v in constants.split(",")]
        except ValueError:
            raise QueryValidationError("bad_params", f"bad constants {constants!r}")
        if kind == "factored":
            if len(values) != 2:
                raise QueryValidationError(
                    "bad_params", "factored bounds need constants=L_Ri,L_fi"
                )
            lipschitz = {"L_Ri": values[0], "L_fi": values[1]}
            metric = markov_metric(db)
        elif kind == "full_state":
            if len(values) != 3:
                raise QueryValidationError(
                    "bad_params", "full-state bounds need constants=L_R,L_f,L_pi"
                )
            lipschitz = {"L_R": values[0], "L_f": values[1], "L_pi": values[2]}
            metric = full_metric(db)
        else:
            raise QueryValidationError("bad_params", f"unknown kind {kind!r}")
        report = bound_report(db, metric, h, n, lipschitz, sigma_h, k=k)
        return BoundsResponse(**report.to_dict())

    if frontend_dir and os.path.isdir(frontend_dir):
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")

    return app
