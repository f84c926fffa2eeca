"""Eight-direction neighbor scan over single-timestamp scenes.

The scan is the hot inner loop of feature extraction: it runs once per
(vehicle, frame) over whole datasets. ``scan_scene`` dispatches to a numba
build of the same function unless CULTURE_BRIDGE_NUMBA disables it.

Direction codes: 0 front, 1 back, 2 left, 3 right, 4 front-left,
5 front-right, 6 back-left, 7 back-right. Left is the +y side.
"""

import numpy as np

from .accel import HAS_NUMBA, jit_kernel, numba_enabled

N_DIRECTIONS = 8
FRONT, BACK, LEFT, RIGHT, FRONT_LEFT, FRONT_RIGHT, BACK_LEFT, BACK_RIGHT = range(8)

TTC_CAP = 100.0  # s, an order above the largest TTC worth plotting
EPS_V = 1e-3  # m/s, closing-speed threshold


def _scan_scene_impl(x, y, vx, vy, half_len, half_wid, lane_ord):
    """Assign each vehicle's eight neighbor slots within one scene.

    Returns (occ, geo): occ[i, d] is the scene index of the occupant of
    direction d around vehicle i (-1 empty); geo[i, d] holds the
    bumper-to-bumper gaps and signed closing speeds (dx, dy, dvx, dvy).
    Nearest longitudinal distance wins a slot; exact ties keep the lower
    scene index.
    """
    n = x.shape[0]
    occ = np.full((n, N_DIRECTIONS), -1, dtype=np.int64)
    best = np.empty((n, N_DIRECTIONS), dtype=np.float64)
    geo = np.zeros((n, N_DIRECTIONS, 4), dtype=np.float64)
    for e in range(n):
        for d in range(N_DIRECTIONS):
            best[e, d] = np.inf
        for o in range(n):
            if o == e:
                continue
            dlane = lane_ord[o] - lane_ord[e]
            if dlane > 1 or dlane < -1:
                continue
            dxc = x[o] - x[e]
            adx = abs(dxc)
            if dlane == 0:
                d = FRONT if dxc >= 0.0 else BACK
            else:
                on_left = dlane == 1
                if adx <= half_len[e] + half_len[o]:
                    d = LEFT if on_left else RIGHT
                elif dxc > 0.0:
                    d = FRONT_LEFT if on_left else FRONT_RIGHT
                else:
                    d = BACK_LEFT if on_left else BACK_RIGHT
            if adx < best[e, d]:
                best[e, d] = adx
                occ[e, d] = o
                dyc = y[o] - y[e]
                gap_x = adx - (half_len[e] + half_len[o])
                gap_y = abs(dyc) - (half_wid[e] + half_wid[o])
                sx = 1.0 if dxc >= 0.0 else -1.0
                sy = 1.0 if dyc >= 0.0 else -1.0
                geo[e, d, 0] = gap_x if gap_x > 0.0 else 0.0
                geo[e, d, 1] = gap_y if gap_y > 0.0 else 0.0
                geo[e, d, 2] = (vx[e] - vx[o]) * sx
                geo[e, d, 3] = (vy[e] - vy[o]) * sy
    return occ, geo


_scan_scene_py = _scan_scene_impl
_scan_scene_jit = jit_kernel(_scan_scene_impl) if HAS_NUMBA else None


def scan_scene(x, y, vx, vy, half_len, half_wid, lane_ord):
    if _scan_scene_jit is not None and numba_enabled():
        return _scan_scene_jit(x, y, vx, vy, half_len, half_wid, lane_ord)
    return _scan_scene_py(x, y, vx, vy, half_len, half_wid, lane_ord)


def ttc_values(occ: np.ndarray, geo: np.ndarray) -> np.ndarray:
    """Per-direction TTC for scanned slots; -1 where the slot is empty.

    An axis contributes gap/closing-speed only while closing faster than
    EPS_V; each axis term and the direction total are clamped to TTC_CAP. A
    present but non-closing neighbor reads as TTC_CAP.
    """
    dx, dy = geo[..., 0], geo[..., 1]
    dvx, dvy = geo[..., 2], geo[..., 3]
    cx = dvx > EPS_V
    cy = dvy > EPS_V
    with np.errstate(divide="ignore", invalid="ignore"):
        tx = np.where(cx, np.clip(dx / np.where(cx, dvx, 1.0), 0.0, TTC_CAP), 0.0)
        ty = np.where(cy, np.clip(dy / np.where(cy, dvy, 1.0), 0.0, TTC_CAP), 0.0)
    total = np.minimum(tx + ty, TTC_CAP)
    total = np.where(cx | cy, total, TTC_CAP)
    return np.where(occ >= 0, total, -1.0)
