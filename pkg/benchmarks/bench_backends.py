"""Compare the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the choice is made at import
time from ``DRNAV_NO_JIT``. Usage::

    python benchmarks/bench_backends.py [--repeat 200] [--trial]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from drnav import backend_name, kernels
from drnav.controller import ControllerConfig, clf_dr_cbf_step
from drnav.drcbf import PointCloud
from drnav.geometry import ConvexPolygon, Pose2, cast_rays, pack, Circle

repeat = int(sys.argv[1])
run_trial = sys.argv[2] == "1"
rng = np.random.default_rng(0)
robot = ConvexPolygon.box(0.254, 0.215)
cfg = ControllerConfig()
ang = np.linspace(-np.pi, np.pi, 100, endpoint=False)
dirs = np.c_[np.cos(ang), np.sin(ang)]
world = pack([Circle(tuple(rng.uniform(-8, 8, 2)), rng.uniform(0.3, 0.8)) for _ in range(30)]
             + [ConvexPolygon.box(*rng.uniform(0.3, 1.0, 2), center=tuple(rng.uniform(-8, 8, 2)), angle=rng.uniform(0, 3)) for _ in range(30)])
blocked = rng.random((120, 120)) < 0.2
blocked[0, 0] = blocked[119, 119] = False

def clock(fn):
    fn()  # warm-up, includes compilation
    t = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t) / repeat

def step():
    r = rng.uniform(0.6, 5.0, 100)
    pts = PointCloud(np.c_[r * np.cos(ang), r * np.sin(ang)], np.zeros((100, 2)))
    pose = Pose2(0.0, 0.0, rng.uniform(-3, 3))
    clf_dr_cbf_step(cfg, pose, [pose] * 3, pts, (1.0, 0.3), robot)

out = {
    "backend": backend_name(),
    "controller_step_s": clock(step),
    "raycast_100_s": clock(lambda: cast_rays(world, (0.0, 0.0), dirs, 10.0)),
    "astar_120x120_s": clock(lambda: kernels.astar(blocked, 0, 0, 119, 119, 1.0)),
}
if run_trial:
    from drnav.config import load_config
    from drnav.harness import run_trial as trial
    c = load_config("configs/static_cluttered.yaml")
    t = time.perf_counter()
    trial(c, c.seed)
    out["static_trial_s"] = time.perf_counter() - t
print(json.dumps(out))
"""


def run(no_jit: bool, repeat: int, trial: bool) -> dict:
    env = dict(os.environ)
    env.pop("DRNAV_NO_JIT", None)
    if no_jit:
        env["DRNAV_NO_JIT"] = "1"
    res = subprocess.run(
        [sys.executable, "-c", WORKLOAD, str(repeat), "1" if trial else "0"],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--trial", action="store_true", help="also time one full static trial")
    args = ap.parse_args(argv)
    jit = run(False, args.repeat, args.trial)
    plain = run(True, args.repeat, args.trial)
    print(f"{'workload':<22}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for key in jit:
        if key == "backend":
            continue
        a, b = jit[key], plain[key]
        print(f"{key:<22}{1e3 * a:>10.3f}ms{1e3 * b:>10.3f}ms{b / a:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
