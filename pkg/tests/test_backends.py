import json
import os
import subprocess
import sys

import pytest

PROBE = r"""
import json, numpy as np
from drnav import backend_name
from drnav.controller import ControllerConfig, clf_dr_cbf_step
from drnav.drcbf import PointCloud
from drnav.geometry import ConvexPolygon, Pose2
from drnav.kernels.grid import astar_python
from drnav import kernels
rng = np.random.default_rng(4)
ang = np.linspace(-np.pi, np.pi, 60, endpoint=False)
r = rng.uniform(0.6, 4.0, 60)
pts = PointCloud(np.c_[r * np.cos(ang), r * np.sin(ang)], np.zeros((60, 2)))
pose = Pose2(0.1, -0.2, 0.4)
samples = [pose, Pose2(0.11, -0.2, 0.41), Pose2(0.1, -0.19, 0.39)]
out = clf_dr_cbf_step(ControllerConfig(), pose, samples, pts, (1.0, 0.5), ConvexPolygon.box(0.254, 0.215))
blocked = rng.random((30, 30)) < 0.25
blocked[0, 0] = blocked[29, 29] = False
_, cost = kernels.astar(blocked, 0, 0, 29, 29, 1.0)
print(json.dumps({"backend": backend_name(), "u": [out.control.v, out.control.omega], "cost": cost}))
"""


def _probe(no_jit: bool) -> dict:
    env = dict(os.environ)
    env.pop("DRNAV_NO_JIT", None)
    if no_jit:
        env["DRNAV_NO_JIT"] = "1"
    res = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, timeout=300)
    assert res.returncode == 0, res.stderr
    return json.loads(res.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_env_flag_selects_fallback_and_results_agree():
    jit = _probe(False)
    plain = _probe(True)
    assert jit["backend"] == "numba" and plain["backend"] == "numpy"
    assert plain["u"] == pytest.approx(jit["u"], abs=1e-7)
    assert plain["cost"] == pytest.approx(jit["cost"], abs=1e-12)
