"""Hot kernels with a numba path and a numpy/Python fallback.

The active implementation is chosen once at import from ``DRNAV_NO_JIT``.
"""

from .._jit import USE_NUMBA, backend_name
from . import geom, grid, qp

if USE_NUMBA:
    sdf_grad = geom.sdf_grad_loops
    raycast = geom.raycast_loops
    astar = grid.astar_loops
else:
    sdf_grad = geom.sdf_grad_numpy
    raycast = geom.raycast_numpy
    astar = grid.astar_python

mark_rays = grid.mark_rays_loops
line_clear = grid.line_clear_loops
ipm_solve = qp.ipm_solve
kkt_residuals = qp.kkt_residuals

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "sdf_grad",
    "raycast",
    "astar",
    "mark_rays",
    "line_clear",
    "ipm_solve",
    "kkt_residuals",
]
