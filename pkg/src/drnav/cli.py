"""Command line entry point: ``drnav run`` and ``drnav plan-debug``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .geometry import Pose2
from .harness import build_world, export, export_trajectories, format_summary, run_experiment, sample_goal
from .planner import OccupancyGrid, Planner
from .world import LidarConfig, lidar_scan


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drnav", description="Distributionally robust CBF navigation experiments")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run seeded trials and write metrics")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--controller", choices=("dr-cbf", "nominal"))
    run.add_argument("--out", type=Path, help="directory for results.csv / results.json")
    run.add_argument("--dump-trajectories", action="store_true")
    run.add_argument("--workers", type=int, default=1)

    dbg = sub.add_parser("plan-debug", help="scan once from the start pose and print the grid and plan")
    dbg.add_argument("--config", required=True, type=Path)
    dbg.add_argument("--seed", type=int)
    return p


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "trials", None) is not None:
        out["trial_count"] = args.trials
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "controller", None) is not None:
        out["controller"] = args.controller
    return out


def _run(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    result = run_experiment(cfg, workers=max(1, args.workers), dump_trajectories=args.dump_trajectories)
    print(format_summary(result, cfg.controller))
    if args.out is not None:
        export(result, "csv", args.out / "results.csv")
        export(result, "json", args.out / "results.json")
        if args.dump_trajectories:
            export_trajectories(result, args.out / "trajectories")
        print(f"wrote results to {args.out}")
    return 0


def _plan_debug(args) -> int:
    cfg = load_config(args.config, **_overrides(args))
    goal_rng, world_rng, lidar_rng = np.random.default_rng(cfg.seed).spawn(3)
    goal = sample_goal(cfg, goal_rng)
    world = build_world(cfg, world_rng)
    start = Pose2(*cfg.scenario.start)
    grid = OccupancyGrid.covering(cfg.scenario.bounds, cfg.grid_resolution, margin=1.0)
    planner = Planner(grid, cfg.planner)
    # noiseless scan so the printed map shows geometry rather than noise
    lidar = LidarConfig(**{**cfg.lidar.__dict__, "noise_sigma": 0.0, "velocity_noise_sigma": 0.0})
    _, _, scan = lidar_scan(world, start, lidar, lidar_rng)
    planner.integrate(start, scan)
    path, ok = planner.replan(start.position, goal)
    print(grid.render(planner.cells if ok else None))
    print(f"start={start.position.round(3).tolist()} goal={goal.round(3).tolist()} "
          f"planned={'yes' if ok else 'no'} length={path.length:.3f} m waypoints={len(path.waypoints)}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        return _plan_debug(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
