"""Trial execution at fixed rates, metric aggregation and result export."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path as FsPath
from typing import Any

import numpy as np

from .config import ConfigError, ExperimentConfig
from .controller import STATUS_OK, clf_dr_cbf_step, closest_point, nominal_clf_cbf_step
from .drcbf import PointCloud
from .dynamics import step_rk4, unicycle_model
from .geometry import ConvexPolygon, Pose2, pack, sdf_batch
from .planner import OccupancyGrid, Planner
from .stabilizer import GovernorState, Path, governor_step, rebase_governor
from .world import Pedestrian, World, lidar_scan, localize, separation, step_world

OUTCOMES = ("success", "stuck", "collision")
CSV_COLUMNS = (
    "trial_id",
    "outcome",
    "tracking_error_mean",
    "tracking_error_std",
    "completion_time_s",
    "mean_solve_time_s",
    "infeasible_ticks",
)
TRAJ_COLUMNS = ("t", "x", "y", "theta", "v", "omega", "min_h", "separation", "g")

_MODEL = unicycle_model()


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    outcome: str
    tracking_error_mean: float
    tracking_error_std: float
    completion_time_s: float
    infeasible_ticks: int
    solve_times: list[float] = field(default_factory=list)
    goal: tuple[float, float] = (0.0, 0.0)
    min_separation: float = math.inf
    ticks: int = 0
    replan_failures: int = 0
    trajectory: list[list[float]] | None = None

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    @property
    def mean_solve_time_s(self) -> float:
        return float(np.mean(self.solve_times)) if self.solve_times else 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        d["goal"] = list(self.goal)
        if include_timing:
            d["mean_solve_time_s"] = self.mean_solve_time_s
        else:
            d["solve_times"] = []
        if self.trajectory is None:
            d.pop("trajectory")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrialRecord":
        d = dict(d)
        d.pop("mean_solve_time_s", None)
        d["goal"] = tuple(d["goal"])
        return cls(**d)


@dataclass
class ExperimentResult:
    records: list[TrialRecord]
    aggregates: dict[str, Any]


# ---------------------------------------------------------------------------
# scenario instantiation
# ---------------------------------------------------------------------------


def _walls(bounds, thickness: float) -> list:
    xmin, xmax, ymin, ymax = bounds
    t = thickness
    cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
    hx, hy = 0.5 * (xmax - xmin) + t, 0.5 * (ymax - ymin) + t
    return [
        ConvexPolygon.box(hx, t / 2, (cx, ymin - t / 2)),
        ConvexPolygon.box(hx, t / 2, (cx, ymax + t / 2)),
        ConvexPolygon.box(t / 2, hy, (xmin - t / 2, cy)),
        ConvexPolygon.box(t / 2, hy, (xmax + t / 2, cy)),
    ]


def static_shapes(cfg: ExperimentConfig) -> list:
    sc = cfg.scenario
    shapes = list(sc.static)
    if sc.walls:
        shapes += _walls(sc.bounds, sc.wall_thickness)
    return shapes


def _free_point(rng, bounds, packed, clearance: float, accept, tries: int = 20000) -> np.ndarray:
    xmin, xmax, ymin, ymax = bounds
    for _ in range(tries):
        p = np.array([rng.uniform(xmin + clearance, xmax - clearance), rng.uniform(ymin + clearance, ymax - clearance)])
        if packed is not None and sdf_batch(packed, p[None])[0][0] < clearance:
            continue
        if accept(p):
            return p
    raise ConfigError("could not sample a free point satisfying the constraints")


def sample_goal(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    gs = cfg.goal_sampling
    if gs.mode == "fixed":
        return np.array(gs.point, dtype=float)
    shapes = static_shapes(cfg)
    packed = pack(shapes) if shapes else None
    start = np.array(cfg.scenario.start[:2])
    return _free_point(rng, cfg.scenario.bounds, packed, gs.clearance, lambda p: np.hypot(*(p - start)) >= gs.min_distance)


def build_world(cfg: ExperimentConfig, rng: np.random.Generator) -> World:
    sc = cfg.scenario
    shapes = static_shapes(cfg)
    packed = pack(shapes) if shapes else None
    start = np.array(sc.start[:2])
    peds = []
    spec = sc.pedestrians
    for _ in range(spec.count):
        others = [p.position for p in peds]

        def ok(p, others=others):
            if np.hypot(*(p - start)) < spec.min_start_distance:
                return False
            return all(np.hypot(*(p - o)) >= 2.5 * spec.radius for o in others)

        pos = _free_point(rng, sc.bounds, packed, spec.radius + 0.3, ok)
        goal = _free_point(rng, sc.bounds, packed, spec.radius + 0.3, lambda p: True)
        peds.append(Pedestrian(pos, np.zeros(2), goal, spec.radius, spec.max_speed))
    return World(shapes, list(sc.moving), peds, sc.bounds, sc.speed_bound, 0.0, sc.pedestrian_params, rng)


# ---------------------------------------------------------------------------
# one trial
# ---------------------------------------------------------------------------


def run_trial(cfg: ExperimentConfig, trial_seed: int, trial_id: int = 0, dump_trajectory: bool = False) -> TrialRecord:
    goal_rng, world_rng, lidar_rng, loc_rng = np.random.default_rng(trial_seed).spawn(4)
    goal = sample_goal(cfg, goal_rng)
    world = build_world(cfg, world_rng)
    shape = cfg.robot_shape
    ccfg = cfg.controller_config
    dt = cfg.dt
    true = Pose2(*cfg.scenario.start)
    grid = OccupancyGrid.covering(cfg.scenario.bounds, cfg.grid_resolution, margin=1.0)
    planner = Planner(grid, cfg.planner)
    gov = GovernorState(0.0, 1.0, cfg.governor.zeta)
    path: Path | None = None
    cloud = PointCloud(np.zeros((0, 2)), np.zeros((0, 2)))
    scan_age = 0
    dynamic = world.is_dynamic()
    snap = world.snapshot()

    track: list[float] = []
    solve_times: list[float] = []
    infeasible = 0
    min_sep = math.inf
    traj: list[list[float]] | None = [] if dump_trajectory else None
    stall_ticks = max(1, int(round(cfg.stall_window_s / dt)))
    history: list[np.ndarray] = []
    outcome = "stuck"
    max_ticks = int(round(cfg.timeout_s / dt))
    ticks = 0

    for tick in range(max_ticks):
        if tick % cfg.lidar_every == 0:
            _, _, scan = lidar_scan(world, true, cfg.lidar, lidar_rng, snap)
            est_scan, _ = localize(true, cfg.localization, loc_rng)
            cloud = scan.points(est_scan)
            scan_age = 0
            planner.integrate(est_scan, scan)
        est, samples = localize(true, cfg.localization, loc_rng)
        if tick % cfg.planner_every == 0:
            anchor = path.eval(gov.g) if path is not None else None
            new_path, _ = planner.replan(est.position, goal)
            if path is None:
                gov = replace(gov, g=0.0)
            elif new_path is not path:
                gov = rebase_governor(gov, new_path, anchor, est.position, cfg.governor.max_lead)
            path = new_path

        k_eff = cfg.governor.k_gov / max(path.length, 1e-6) if cfg.governor.per_meter else cfg.governor.k_gov
        gov = replace(gov, k_gov=k_eff)
        ref = path.eval(gov.g)
        pts = cloud
        if scan_age and len(cloud):
            pts = PointCloud(cloud.positions + cloud.velocities * (scan_age * dt), cloud.velocities)

        if cfg.controller == "dr-cbf":
            out = clf_dr_cbf_step(ccfg, est, samples, pts, ref, shape)
        else:
            out = nominal_clf_cbf_step(ccfg, est, closest_point(pts, shape, est), ref, shape)
        solve_times.append(out.solve_time)
        if out.status != STATUS_OK:
            infeasible += 1
        track.append(path.distance(true.position))

        u = out.control
        true = step_rk4(_MODEL, true, u, dt)
        step_world(world, dt, true.position)
        if dynamic:
            snap = world.snapshot()
        gov = governor_step(gov, est.position, path, dt)
        scan_age += 1
        ticks = tick + 1

        sep = separation(world, shape, true, snap)
        min_sep = min(min_sep, sep)
        if traj is not None:
            min_h = float(np.min(out.samples[:, 3]) / ccfg.alpha_h_gain) if out.samples is not None else math.inf
            traj.append([ticks * dt, true.x, true.y, true.theta, u.v, u.omega, min_h, sep, gov.g])
        if sep <= 1e-6:
            outcome = "collision"
            break
        if math.hypot(true.x - goal[0], true.y - goal[1]) <= cfg.goal_tolerance:
            outcome = "success"
            break
        history.append(true.position)
        if len(history) > stall_ticks:
            old = history[-stall_ticks - 1]
            if float(np.hypot(*(true.position - old))) < cfg.stall_distance:
                break

    tr = np.asarray(track) if track else np.zeros(1)
    return TrialRecord(
        trial_id=trial_id,
        seed=int(trial_seed),
        outcome=outcome,
        tracking_error_mean=float(np.mean(tr)),
        tracking_error_std=float(np.std(tr)),
        completion_time_s=ticks * dt,
        infeasible_ticks=infeasible,
        solve_times=solve_times,
        goal=(float(goal[0]), float(goal[1])),
        min_separation=float(min_sep),
        ticks=ticks,
        replan_failures=planner.failures,
        trajectory=traj,
    )


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _trial_job(args):
    cfg, seed, tid, dump = args
    return run_trial(cfg, seed, tid, dump)


def aggregate(records: list[TrialRecord]) -> dict[str, Any]:
    n = len(records)
    counts = {o: sum(r.outcome == o for r in records) for o in OUTCOMES}
    te = np.array([r.tracking_error_mean for r in records])
    done = np.array([r.completion_time_s for r in records if r.outcome == "success"])
    st = np.concatenate([r.solve_times for r in records]) if records else np.zeros(0)

    def ms(a):
        return (float(np.mean(a)), float(np.std(a))) if a.size else (math.nan, math.nan)

    agg: dict[str, Any] = {"trials": n}
    for o in OUTCOMES:
        agg[f"{o}_rate"] = 100.0 * counts[o] / n
    agg["tracking_error_mean"], agg["tracking_error_std"] = ms(te)
    agg["completion_time_mean"], agg["completion_time_std"] = ms(done)
    agg["solve_time_mean"], agg["solve_time_std"] = ms(st)
    agg["infeasible_ticks"] = int(sum(r.infeasible_ticks for r in records))
    return agg


def run_experiment(cfg: ExperimentConfig, workers: int = 1, dump_trajectories: bool = False) -> ExperimentResult:
    jobs = [(cfg, cfg.seed + i, i, dump_trajectories) for i in range(cfg.trial_count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial_job, jobs))
    else:
        records = [_trial_job(j) for j in jobs]
    return ExperimentResult(records, aggregate(records))


def format_summary(result: ExperimentResult, label: str = "") -> str:
    a = result.aggregates
    head = f"{label}: " if label else ""
    return (
        f"{head}trials={a['trials']} success={a['success_rate']:.1f}% stuck={a['stuck_rate']:.1f}% "
        f"collision={a['collision_rate']:.1f}% tracking={a['tracking_error_mean']:.2f}+-{a['tracking_error_std']:.2f} m "
        f"time={a['completion_time_mean']:.2f}+-{a['completion_time_std']:.2f} s "
        f"solve={1e3 * a['solve_time_mean']:.2f}+-{1e3 * a['solve_time_std']:.2f} ms"
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def export(result: ExperimentResult, fmt: str, path, include_timing: bool = True) -> FsPath:
    """Write results as CSV (one row per trial) or JSON (full records)."""
    path = FsPath(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in result.records:
                    w.writerow(
                        [
                            r.trial_id,
                            r.outcome,
                            repr(r.tracking_error_mean),
                            repr(r.tracking_error_std),
                            repr(r.completion_time_s),
                            repr(r.mean_solve_time_s) if include_timing else "",
                            r.infeasible_ticks,
                        ]
                    )
        elif fmt == "json":
            agg = dict(result.aggregates)
            if not include_timing:
                agg = {k: v for k, v in agg.items() if not k.startswith("solve_time")}
            doc = {"aggregates": agg, "records": [r.to_dict(include_timing) for r in result.records]}
            path.write_text(json.dumps(doc, indent=1, sort_keys=True))
        else:
            raise ValueError(f"unknown export format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def load_json(path) -> ExperimentResult:
    doc = json.loads(FsPath(path).read_text())
    return ExperimentResult([TrialRecord.from_dict(r) for r in doc["records"]], doc["aggregates"])


def export_trajectories(result: ExperimentResult, directory) -> list[FsPath]:
    out = []
    d = FsPath(directory)
    d.mkdir(parents=True, exist_ok=True)
    for r in result.records:
        if r.trajectory is None:
            continue
        p = d / f"trajectory_{r.trial_id:04d}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRAJ_COLUMNS)
            w.writerows([[repr(float(v)) for v in row] for row in r.trajectory])
        out.append(p)
    return out
