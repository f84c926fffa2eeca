"""Neighbor slots, per-direction TTC, and model sample construction.

A model input is a 4-frame window of 12-feature state vectors
(vx, vy, previous ax, previous ay, eight direction TTCs); the target is the
acceleration recorded at the window's final frame, i.e. the next action in
sequence after the accelerations the window encodes. Because each state
vector carries the *previous* frame's acceleration, windows start at a
track's second frame.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

from ._scan import EPS_V, N_DIRECTIONS, TTC_CAP, scan_scene, ttc_values
from .errors import UnknownTime, UnknownVehicle
from .trajectory import AX, AY, LANE, T, VX, VY, X, Y, TrajectoryDataset

WINDOW_LEN = 4
STATE_DIM = 12

# Typical magnitudes of the 12 state features (vx, vy, ax, ay, 8 ttc); used to
# bring raw windows to O(1) before any squashing nonlinearity sees them.
FEATURE_SCALE = np.array([30.0, 2.0, 3.0, 3.0] + [TTC_CAP] * N_DIRECTIONS)


class Direction(IntEnum):
    FRONT = 0
    BACK = 1
    LEFT = 2
    RIGHT = 3
    FRONT_LEFT = 4
    FRONT_RIGHT = 5
    BACK_LEFT = 6
    BACK_RIGHT = 7


@dataclass(frozen=True)
class NeighborSlot:
    """One direction around the ego; gap/velocity fields exist only when occupied."""

    direction: Direction
    occupant: Optional[int] = None  # vehicle_id
    d_x: Optional[float] = None  # bumper-to-bumper gaps, >= 0
    d_y: Optional[float] = None
    dv_x: Optional[float] = None  # signed closing speeds, positive = closing
    dv_y: Optional[float] = None


class StateWindow:
    """Four consecutive 12-feature state vectors plus the frame interval."""

    def __init__(self, values: np.ndarray, dt: float):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (WINDOW_LEN, STATE_DIM):
            raise ValueError(f"window must be {WINDOW_LEN}x{STATE_DIM}, got {values.shape}")
        ttc = values[:, 4:]
        ok = (ttc == -1.0) | ((ttc >= 0.0) & (ttc <= TTC_CAP))
        if not ok.all():
            raise ValueError("ttc entries must be -1 or within [0, ttc_cap]")
        self.values = values
        self.dt = float(dt)

    def __eq__(self, other):
        return (
            isinstance(other, StateWindow)
            and self.dt == other.dt
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True)
class ActionSample:
    window: StateWindow
    target: tuple  # (ax, ay) at the frame after the window's encoded actions
    source: tuple  # (vehicle_id, t of the target frame)


# ---------------------------------------------------------------------------
# scene assembly
# ---------------------------------------------------------------------------

class _SceneIndex:
    """Groups frames of all tracks by their position on the shared dt grid."""

    def __init__(self, ds: TrajectoryDataset):
        self.ds = ds
        order = ds.lane_order()
        self.start_key = []
        self.lane_ord = []
        for tr in ds.tracks:
            self.start_key.append(ds.time_key(tr.t[0]))
            self.lane_ord.append(
                np.array([order[int(l)] for l in tr.lane_ids], dtype=np.int64)
            )
        self.buckets: dict = {}
        for ti, tr in enumerate(ds.tracks):
            k0 = self.start_key[ti]
            for fi in range(tr.n_frames):
                self.buckets.setdefault(k0 + fi, []).append((ti, fi))

    def scene_arrays(self, key: int):
        members = self.buckets.get(key, [])
        n = len(members)
        x = np.empty(n)
        y = np.empty(n)
        vx = np.empty(n)
        vy = np.empty(n)
        hl = np.empty(n)
        hw = np.empty(n)
        lo = np.empty(n, dtype=np.int64)
        for i, (ti, fi) in enumerate(members):
            row = self.ds.tracks[ti].data[fi]
            x[i], y[i] = row[X], row[Y]
            vx[i], vy[i] = row[VX], row[VY]
            hl[i] = self.ds.tracks[ti].length / 2.0
            hw[i] = self.ds.tracks[ti].width / 2.0
            lo[i] = self.lane_ord[ti][fi]
        return members, (x, y, vx, vy, hl, hw, lo)


def scene_index(ds: TrajectoryDataset) -> "_SceneIndex":
    return _SceneIndex(ds)


def ego_ttc_against(index: "_SceneIndex", key: int, x: float, y: float,
                    vx: float, vy: float, half_len: float, half_wid: float,
                    lane_ord: int) -> np.ndarray:
    """Eight-direction TTC for an injected ego state versus the indexed scene."""
    _, (sx, sy, svx, svy, shl, shw, slo) = index.scene_arrays(key)
    occ, geo = scan_scene(
        np.append(sx, x), np.append(sy, y),
        np.append(svx, vx), np.append(svy, vy),
        np.append(shl, half_len), np.append(shw, half_wid),
        np.append(slo, lane_ord),
    )
    return ttc_values(occ[-1:], geo[-1:])[0]


def assign_neighbors(ds: TrajectoryDataset, vehicle_id: int, t: float):
    """Eight NeighborSlots around (vehicle_id, t), one scan of that scene."""
    if not ds.has_track(vehicle_id):
        raise UnknownVehicle(vehicle_id)
    tr = ds.track(vehicle_id)
    key = ds.time_key(t)
    fi = key - ds.time_key(tr.t[0])
    if not (0 <= fi < tr.n_frames) or abs(tr.t[fi] - t) > 1e-6:
        raise UnknownTime(vehicle_id, t)

    index = _SceneIndex(ds)
    members, arrays = index.scene_arrays(key)
    ego_pos = members.index((ds.tracks.index(tr), fi))
    occ, geo = scan_scene(*arrays)

    slots = []
    for d in Direction:
        o = occ[ego_pos, d]
        if o < 0:
            slots.append(NeighborSlot(direction=d))
        else:
            ti = members[o][0]
            slots.append(
                NeighborSlot(
                    direction=d,
                    occupant=ds.tracks[ti].vehicle_id,
                    d_x=float(geo[ego_pos, d, 0]),
                    d_y=float(geo[ego_pos, d, 1]),
                    dv_x=float(geo[ego_pos, d, 2]),
                    dv_y=float(geo[ego_pos, d, 3]),
                )
            )
    return slots


# ---------------------------------------------------------------------------
# TTC
# ---------------------------------------------------------------------------

def direction_ttc(slot: NeighborSlot) -> Optional[float]:
    """TTC toward one slot; None when empty, TTC_CAP when present but opening."""
    if slot.occupant is None:
        return None
    total = 0.0
    contributed = False
    for d, dv in ((slot.d_x, slot.dv_x), (slot.d_y, slot.dv_y)):
        if dv > EPS_V:
            total += min(max(d / dv, 0.0), TTC_CAP)
            contributed = True
    return min(total, TTC_CAP) if contributed else TTC_CAP


def total_ttc(slots) -> Optional[float]:
    """Mean direction TTC over occupied slots; None when nothing is around."""
    vals = [direction_ttc(s) for s in slots]
    vals = [v for v in vals if v is not None]
    if not vals:
        return None
    return float(sum(vals) / len(vals))


# ---------------------------------------------------------------------------
# dataset-wide extraction
# ---------------------------------------------------------------------------

def dataset_ttc(ds: TrajectoryDataset) -> dict:
    """vehicle_id -> (F, 8) per-direction TTC matrix (-1 marks empty slots)."""
    index = _SceneIndex(ds)
    out = {tr.vehicle_id: np.empty((tr.n_frames, N_DIRECTIONS)) for tr in ds.tracks}
    for key in sorted(index.buckets):
        members, arrays = index.scene_arrays(key)
        occ, geo = scan_scene(*arrays)
        ttc = ttc_values(occ, geo)
        for i, (ti, fi) in enumerate(members):
            out[ds.tracks[ti].vehicle_id][fi] = ttc[i]
    return out


def track_features(ds: TrajectoryDataset, ttc_by_id: dict) -> dict:
    """vehicle_id -> (F, 12) state-vector matrix; row j is valid for j >= 1."""
    out = {}
    for tr in ds.tracks:
        feats = np.zeros((tr.n_frames, STATE_DIM))
        feats[:, 0] = tr.data[:, VX]
        feats[:, 1] = tr.data[:, VY]
        feats[1:, 2] = tr.data[:-1, AX]
        feats[1:, 3] = tr.data[:-1, AY]
        feats[:, 4:] = ttc_by_id[tr.vehicle_id]
        out[tr.vehicle_id] = feats
    return out


def extract_samples(ds: TrajectoryDataset):
    """All (window, target) pairs of the dataset, ordered by track id then time.

    A track with F frames yields F - 4 samples: windows begin at the second
    frame (the first frame only supplies the lagged acceleration) and each
    needs a final frame to read the target action from.
    """
    ttc_by_id = dataset_ttc(ds)
    feats_by_id = track_features(ds, ttc_by_id)
    samples = []
    for vid in ds.vehicle_ids():
        tr = ds.track(vid)
        feats = feats_by_id[vid]
        for k in range(1, tr.n_frames - WINDOW_LEN + 1):
            last = k + WINDOW_LEN - 1
            window = StateWindow(feats[k:k + WINDOW_LEN].copy(), ds.dt)
            target = (float(tr.data[last, AX]), float(tr.data[last, AY]))
            samples.append(ActionSample(window, target, (vid, float(tr.data[last, T]))))
    return samples


def samples_to_arrays(samples):
    """Stack samples into (n, 4, 12) inputs and (n, 2) targets."""
    xs = np.stack([s.window.values for s in samples])
    ys = np.array([s.target for s in samples])
    return xs, ys


def write_samples_csv(samples, path):
    """Debug dump: 48 window values then the 2 targets per row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = [f"w{i}" for i in range(WINDOW_LEN * STATE_DIM)] + ["ax", "ay"]
        writer.writerow(header)
        for s in samples:
            writer.writerow(list(s.window.values.ravel()) + list(s.target))
