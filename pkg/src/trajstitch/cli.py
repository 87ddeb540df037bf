"""Command-line front end: build databases, synthesize trajectories, run sweeps.

Every subcommand is deterministic under a fixed seed: reruns with identical
flags produce byte-identical output files.  Exit codes: 0 success, 1 runtime
failure (e.g. database exhaustion), 2 configuration or usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np

from . import database as dbio
from .config import learning_curve_config, load_config, mdp_from_config, policy_from_config
from .database import populate_biased, populate_debiased, seed_policy_grid
from .errors import ConfigurationError, ExhaustionError, TrajstitchError
from .experiments import (
    intensity_seed_grid,
    learning_curve,
    write_results_csv,
    write_results_json,
)
from .query import QueryValidationError, run_policy_query, write_trajectory_csv
from .stitch import ALGORITHMS


def _env(name: str, fallback):
    return os.environ.get(name, fallback)


def _seed_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed)]))


def _parse_params(text: Optional[str]) -> tuple[float, ...]:
    if not text:
        return ()
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ConfigurationError(f"cannot parse --params {text!r} as floats") from None


# ----------------------------------------------------------------- build-db


def cmd_build_db(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    mdp = mdp_from_config(cfg)
    db_cfg = cfg.get("database", {})
    mode = args.mode or db_cfg.get("mode", "debiased")
    horizon = args.horizon or db_cfg.get("horizon")
    if not horizon:
        raise ConfigurationError("horizon required (flag --horizon or database.horizon)")
    seed = args.seed if args.seed is not None else db_cfg.get("seed", 0)
    rng = _seed_rng(seed)

    if "grid" in db_cfg or "grid_count" in db_cfg:
        policy_class = db_cfg.get("seed_policy_class", "intensity")
        if "grid" in db_cfg:
            grid = [tuple(float(v) for v in row) for row in db_cfg["grid"]]
        else:
            if policy_class != "intensity":
                raise ConfigurationError(
                    "grid_count auto-generation is defined for intensity policies; "
                    "list an explicit grid for other classes"
                )
            grid = intensity_seed_grid(int(db_cfg["grid_count"]))
        db = seed_policy_grid(
            mdp, policy_class, grid, int(horizon), rng, mode=mode,
            feature=db_cfg.get("seed_policy_feature"),
        )
        seed_desc = f"{policy_class} x {len(grid)}"
    else:
        policy_cfg = db_cfg.get("behavior_policy")
        if not policy_cfg:
            raise ConfigurationError(
                'database config needs "behavior_policy" or a policy "grid"'
            )
        policy = policy_from_config(mdp, policy_cfg)
        n = args.trajectories or db_cfg.get("trajectories")
        if not n:
            raise ConfigurationError(
                "trajectory count required (flag --trajectories or database.trajectories)"
            )
        builder = populate_debiased if mode == "debiased" else populate_biased
        db = builder(mdp, policy, int(n), int(horizon), rng)
        seed_desc = f"{policy_cfg['policy_class']} x {n}"

    dbio.save(db, args.out)
    print(f"mode: {db.mode}")
    print(f"transition sets: {db.set_count}")
    print(f"seed trajectories: {db.n_seed_trajectories}")
    print(f"seed policies: {seed_desc}")
    print(f"written: {args.out}")
    return 0


# ----------------------------------------------------------------- simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    db = dbio.load(args.db) if args.db else None
    mdp = None
    metric_cfg = {}
    if args.config:
        cfg = load_config(args.config)
        mdp = mdp_from_config(cfg)
        metric_cfg = cfg.get("metric", {})

    if args.request:
        try:
            with open(args.request, "r", encoding="utf-8") as f:
                request = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError(f"request file not found: {args.request}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"request file is not valid JSON: {exc}") from None
    else:
        if not args.policy:
            raise ConfigurationError("--policy is required without --request")
        h = args.h or (db.horizon if db is not None else 0)
        request = {
            "policy_class": args.policy,
            "params": list(_parse_params(args.params)),
            "feature": args.feature,
            "algorithm": args.algorithm,
            "n": args.n,
            "h": h,
            "db_id": args.db or "",
            "seed": args.seed,
            "metric": metric_cfg,
            "engine": args.engine,
        }

    result = run_policy_query(request, db=db, mdp=mdp)
    if args.out:
        write_trajectory_csv(result.trajectories, args.out)
        print(f"written: {args.out}")
    print(f"request_id: {result.request_id}")
    print(f"trajectories: {result.n} x {result.h}")
    print("value_estimate: %.17g" % result.value)
    return 0


# ----------------------------------------------------- learning-curve sweep


def cmd_learning_curve(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    config = learning_curve_config(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "results.csv")
    json_path = os.path.join(args.out_dir, "summary.json")
    collected: list[dict] = []
    progress = print if args.verbose else None
    try:
        rows = learning_curve(config, progress=progress, on_row=collected.append)
    except Exception as exc:  # flush whatever finished, then report failure
        write_results_csv(collected, csv_path)
        write_results_json(collected, json_path, status="failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        print(f"partial results ({len(collected)} rows) written to {args.out_dir}",
              file=sys.stderr)
        return 1
    write_results_csv(rows, csv_path)
    write_results_json(rows, json_path, status="complete")
    print(f"rows: {len(rows)}")
    print(f"written: {csv_path}")
    print(f"written: {json_path}")
    return 0


# -------------------------------------------------------------------- serve


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(db_dir=args.db_dir, frontend_dir=args.frontend_dir)
    uvicorn.run(app, host=args.host, port=int(args.port))
    return 0


# ------------------------------------------------------------------- parser


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajstitch",
        description="Trajectory stitching: surrogate policy evaluation from "
                    "transition databases.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build-db", help="populate and save a transition database")
    p_build.add_argument("--config", required=True, help="experiment config JSON")
    p_build.add_argument("--out", required=True, help="output database directory")
    p_build.add_argument("--mode", choices=("debiased", "biased"), default=None)
    p_build.add_argument("--horizon", type=int, default=None)
    p_build.add_argument("--seed", type=int, default=None)
    p_build.add_argument("--trajectories", type=int, default=None)
    p_build.set_defaults(func=cmd_build_db)

    p_sim = sub.add_parser("simulate", help="synthesize a trajectory set")
    p_sim.add_argument("--db", default=None, help="database directory")
    p_sim.add_argument("--config", default=None, help="config JSON (MDP + metric)")
    p_sim.add_argument("--algorithm", default="mfmci",
                       choices=("ground_truth", "random_baseline") + ALGORITHMS)
    p_sim.add_argument("--policy", default=None, help="policy class")
    p_sim.add_argument("--params", default=None, help="comma-separated policy params")
    p_sim.add_argument("--feature", default=None)
    p_sim.add_argument("--n", type=int, default=30)
    p_sim.add_argument("--h", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--engine", default="vectorized",
                       choices=("linear", "vectorized", "kdtree"))
    p_sim.add_argument("--out", default=None, help="trajectory CSV path")
    p_sim.add_argument("--request", default=None,
                       help="policy-query request JSON to replay (overrides policy flags)")
    p_sim.set_defaults(func=cmd_simulate)

    p_lc = sub.add_parser("learning-curve", help="fidelity error vs database size")
    p_lc.add_argument("--config", required=True)
    p_lc.add_argument("--out-dir", required=True)
    p_lc.add_argument("--verbose", action="store_true")
    p_lc.set_defaults(func=cmd_learning_curve)

    p_srv = sub.add_parser("serve", help="run the HTTP service")
    p_srv.add_argument("--db-dir", default=_env("TRAJSTITCH_DB_DIR", "databases"))
    p_srv.add_argument("--host", default=_env("TRAJSTITCH_HOST", "127.0.0.1"))
    p_srv.add_argument("--port", type=int, default=int(_env("TRAJSTITCH_PORT", "8000")))
    p_srv.add_argument("--frontend-dir", default=_env("TRAJSTITCH_FRONTEND", None))
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, QueryValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except ExhaustionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrajstitchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
