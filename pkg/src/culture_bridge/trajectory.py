"""Canonical trajectory data model and dataset I/O.

This module:
- defines the canonical in-memory types (Frame, VehicleTrack, TrajectoryDataset)
- parses/writes the canonical CSV schema plus its JSON sidecar
- imports HighD-like (25 Hz, SI) and NGSIM-like (10 Hz, feet) CSV schemas
- draws seeded whole-track subsets for data-light calibration slices

Everything downstream assumes SI units (m, s) and a single shared frame
interval ``dt``; importers normalise on entry and never resample.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    EmptyFile,
    FractionOutOfRange,
    InconsistentDt,
    MissingColumn,
    NonMonotonicTime,
)

CANONICAL_COLUMNS = [
    "vehicle_id", "t", "x", "y", "vx", "vy", "ax", "ay", "lane_id", "length", "width",
]

# column layout of VehicleTrack.data
T, X, Y, VX, VY, AX, AY, LANE = range(8)

TIME_TOL = 1e-9
MIN_TRACK_FRAMES = 5  # one 4-frame window plus its action target

FOOT = 0.3048  # m


@dataclass(frozen=True)
class Frame:
    """One observation of one vehicle. x is longitudinal, y lateral, SI units."""

    t: float
    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float
    lane_id: int


class VehicleTrack:
    """Time-ordered frames of a single vehicle.

    Frames are stored as an (F, 8) float array in the column order
    t, x, y, vx, vy, ax, ay, lane_id; the ``frames`` property materialises
    Frame objects on demand.
    """

    def __init__(self, vehicle_id: int, data: np.ndarray, length: float, width: float):
        if data.ndim != 2 or data.shape[1] != 8:
            raise ValueError("track data must be (F, 8)")
        if length <= 0 or width <= 0:
            raise ValueError(f"vehicle {vehicle_id}: length and width must be positive")
        self.vehicle_id = int(vehicle_id)
        self.data = np.asarray(data, dtype=np.float64)
        self.data.setflags(write=False)
        self.length = float(length)
        self.width = float(width)

    @classmethod
    def from_frames(cls, vehicle_id: int, frames, length: float, width: float) -> "VehicleTrack":
        data = np.array(
            [[f.t, f.x, f.y, f.vx, f.vy, f.ax, f.ay, f.lane_id] for f in frames],
            dtype=np.float64,
        )
        return cls(vehicle_id, data, length, width)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def frames(self) -> tuple:
        return tuple(
            Frame(r[T], r[X], r[Y], r[VX], r[VY], r[AX], r[AY], int(r[LANE]))
            for r in self.data
        )

    @property
    def t(self) -> np.ndarray:
        return self.data[:, T]

    @property
    def lane_ids(self) -> np.ndarray:
        return self.data[:, LANE].astype(np.int64)

    def __repr__(self):
        return f"VehicleTrack(id={self.vehicle_id}, frames={self.n_frames})"


@dataclass
class DatasetMeta:
    source: str = "canonical"
    si_units: bool = True
    ego_ids: tuple = ()  # synthetic worlds tag their culture-driven tracks


@dataclass
class TrajectoryDataset:
    """Immutable-by-convention bundle of tracks sharing one frame interval."""

    tracks: list
    dt: float
    lane_count: int
    lane_centers_y: np.ndarray  # ascending y, aligned with lane_ids
    lane_ids: tuple
    meta: DatasetMeta = field(default_factory=DatasetMeta)

    def __post_init__(self):
        self.lane_centers_y = np.asarray(self.lane_centers_y, dtype=np.float64)
        self._by_id = {tr.vehicle_id: tr for tr in self.tracks}
        if len(self._by_id) != len(self.tracks):
            raise ValueError("duplicate vehicle_id in dataset")

    @property
    def n_tracks(self) -> int:
        return len(self.tracks)

    def track(self, vehicle_id: int) -> VehicleTrack:
        return self._by_id[vehicle_id]

    def has_track(self, vehicle_id: int) -> bool:
        return vehicle_id in self._by_id

    def vehicle_ids(self) -> list:
        return sorted(self._by_id)

    def time_key(self, t: float) -> int:
        """Integer index of a timestamp on the shared dt grid."""
        return int(round(t / self.dt))

    def lane_order(self) -> dict:
        """lane_id -> ordinal position of its center in ascending y."""
        return {lid: i for i, lid in enumerate(self.lane_ids)}

    def subset(self, vehicle_ids) -> "TrajectoryDataset":
        keep = sorted(set(vehicle_ids))
        tracks = [self._by_id[v] for v in keep]
        ego = tuple(v for v in self.meta.ego_ids if v in set(keep))
        meta = DatasetMeta(self.meta.source, self.meta.si_units, ego)
        return TrajectoryDataset(
            tracks, self.dt, self.lane_count, self.lane_centers_y, self.lane_ids, meta
        )


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def _check_strictly_increasing(vehicle_id: int, t: np.ndarray):
    diffs = np.diff(t)
    bad = np.nonzero(diffs <= 0)[0]
    if bad.size:
        i = int(bad[0])
        raise NonMonotonicTime(vehicle_id, f"t[{i}]={t[i]!r} followed by t[{i + 1}]={t[i + 1]!r}")


def _check_dt(vehicle_id: int, t: np.ndarray, dt: float):
    diffs = np.diff(t)
    off = np.nonzero(np.abs(diffs - dt) > TIME_TOL)[0]
    if off.size:
        raise InconsistentDt(vehicle_id, dt, float(diffs[off[0]]))


def _lane_geometry(tracks):
    """Observed lane ids sorted by their mean lateral position."""
    ys = {}
    for tr in tracks:
        for lid in np.unique(tr.lane_ids):
            ys.setdefault(int(lid), []).append(
                float(tr.data[tr.lane_ids == lid, Y].mean())
            )
    lane_ids = sorted(ys, key=lambda lid: float(np.mean(ys[lid])))
    centers = np.array([float(np.mean(ys[lid])) for lid in lane_ids])
    return tuple(lane_ids), centers


def _assemble(tracks, dt, source, lane_ids=None, lane_centers=None, ego_ids=()):
    tracks = [tr for tr in tracks if tr.n_frames >= MIN_TRACK_FRAMES]
    for tr in tracks:
        _check_dt(tr.vehicle_id, tr.t, dt)
    if lane_ids is None or lane_centers is None:
        lane_ids, lane_centers = _lane_geometry(tracks)
    meta = DatasetMeta(source=source, si_units=True, ego_ids=tuple(ego_ids))
    return TrajectoryDataset(
        tracks, dt, len(lane_ids), np.asarray(lane_centers, dtype=np.float64),
        tuple(lane_ids), meta,
    )


# ---------------------------------------------------------------------------
# canonical CSV
# ---------------------------------------------------------------------------

def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _read_table(path, required, sort_within=None):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.stat().st_size == 0:
        raise EmptyFile(str(path))
    df = pd.read_csv(path)
    for col in required:
        if col not in df.columns:
            raise MissingColumn(col, str(path))
    if df.empty:
        raise EmptyFile(f"{path}: header only")
    if sort_within:
        df = df.sort_values(sort_within, kind="stable")
    return df


def parse_canonical_csv(path) -> TrajectoryDataset:
    """Read the canonical schema; rows must already be time-ordered per vehicle.

    A sidecar JSON next to the file supplies dt / lane geometry; absent a
    sidecar they are inferred from the data.
    """
    df = _read_table(path, CANONICAL_COLUMNS)

    sidecar = None
    sc_path = sidecar_path(path)
    if sc_path.exists():
        sidecar = json.loads(sc_path.read_text())

    tracks = []
    for vid, grp in df.groupby("vehicle_id", sort=True):
        t = grp["t"].to_numpy(dtype=np.float64)
        _check_strictly_increasing(int(vid), t)
        data = grp[["t", "x", "y", "vx", "vy", "ax", "ay", "lane_id"]].to_numpy(
            dtype=np.float64
        )
        tracks.append(
            VehicleTrack(int(vid), data, float(grp["length"].iloc[0]), float(grp["width"].iloc[0]))
        )

    if sidecar and "dt" in sidecar:
        dt = float(sidecar["dt"])
    else:
        first = next((tr for tr in tracks if tr.n_frames >= 2), None)
        if first is None:
            raise EmptyFile(f"{path}: no track long enough to infer dt")
        dt = float(first.t[1] - first.t[0])

    lane_ids = lane_centers = None
    if sidecar and "lane_centers_y" in sidecar:
        observed = sorted({int(l) for tr in tracks for l in np.unique(tr.lane_ids)})
        centers = np.asarray(sidecar["lane_centers_y"], dtype=np.float64)
        if len(centers) == len(observed):
            # sidecar centers are ascending; align with observed ids by mean y
            ids_by_y, _ = _lane_geometry(tracks)
            lane_ids, lane_centers = ids_by_y, np.sort(centers)

    source = (sidecar or {}).get("source", "canonical")
    ego_ids = tuple((sidecar or {}).get("ego_ids", ()))
    return _assemble(tracks, dt, source, lane_ids, lane_centers, ego_ids)


def write_canonical_csv(ds: TrajectoryDataset, path) -> Path:
    """Write CSV + sidecar. Floats use repr so a round trip is exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL_COLUMNS)
        for tr in sorted(ds.tracks, key=lambda tr: tr.vehicle_id):
            for r in tr.data:
                writer.writerow(
                    [tr.vehicle_id]
                    + [repr(float(v)) for v in r[:LANE]]
                    + [int(r[LANE]), repr(tr.length), repr(tr.width)]
                )
    sidecar = {
        "dt": ds.dt,
        "lane_count": ds.lane_count,
        "lane_centers_y": [float(c) for c in ds.lane_centers_y],
        "source": ds.meta.source,
    }
    if ds.meta.ego_ids:
        sidecar["ego_ids"] = list(ds.meta.ego_ids)
    sidecar_path(path).write_text(json.dumps(sidecar, indent=1))
    return path


# ---------------------------------------------------------------------------
# importers
# ---------------------------------------------------------------------------

HIGHD_COLUMNS = ["frame", "id", "x", "y", "xVelocity", "yVelocity",
                 "xAcceleration", "yAcceleration", "laneId"]
HIGHD_RATE = 25.0

NGSIM_COLUMNS = ["Vehicle_ID", "Frame_ID", "Local_X", "Local_Y", "v_Vel", "v_Acc", "Lane_ID"]
NGSIM_DT = 0.1

_DEFAULT_LENGTH = 4.5
_DEFAULT_WIDTH = 2.0


def import_highd_like(path) -> TrajectoryDataset:
    """HighD-style schema: 25 Hz frame indices, SI values, per-axis kinematics."""
    df = _read_table(path, HIGHD_COLUMNS, sort_within=["id", "frame"])
    tracks = []
    for vid, grp in df.groupby("id", sort=True):
        t = grp["frame"].to_numpy(dtype=np.float64) / HIGHD_RATE
        _check_strictly_increasing(int(vid), t)
        data = np.column_stack([
            t,
            grp["x"].to_numpy(dtype=np.float64),
            grp["y"].to_numpy(dtype=np.float64),
            grp["xVelocity"].to_numpy(dtype=np.float64),
            grp["yVelocity"].to_numpy(dtype=np.float64),
            grp["xAcceleration"].to_numpy(dtype=np.float64),
            grp["yAcceleration"].to_numpy(dtype=np.float64),
            grp["laneId"].to_numpy(dtype=np.float64),
        ])
        length = float(grp["width"].iloc[0]) if "width" in grp else _DEFAULT_LENGTH
        width = float(grp["height"].iloc[0]) if "height" in grp else _DEFAULT_WIDTH
        tracks.append(VehicleTrack(int(vid), data, length, width))
    return _assemble(tracks, 1.0 / HIGHD_RATE, "highd-like")


def _finite_difference(p: np.ndarray, dt: float) -> np.ndarray:
    """Central differences, one-sided at the ends."""
    d = np.empty_like(p)
    if p.size >= 3:
        d[1:-1] = (p[2:] - p[:-2]) / (2.0 * dt)
    d[0] = (p[1] - p[0]) / dt
    d[-1] = (p[-1] - p[-2]) / dt
    return d


def import_ngsim_like(path) -> TrajectoryDataset:
    """NGSIM-style schema: 10 Hz, positions in feet, scalar speed only.

    Positions convert at 0.3048 m/ft; per-axis velocity and acceleration are
    rebuilt by finite differences of the converted positions.
    """
    df = _read_table(path, NGSIM_COLUMNS, sort_within=["Vehicle_ID", "Frame_ID"])
    tracks = []
    for vid, grp in df.groupby("Vehicle_ID", sort=True):
        t = grp["Frame_ID"].to_numpy(dtype=np.float64) * NGSIM_DT
        _check_strictly_increasing(int(vid), t)
        x = grp["Local_X"].to_numpy(dtype=np.float64) * FOOT
        y = grp["Local_Y"].to_numpy(dtype=np.float64) * FOOT
        vx = _finite_difference(x, NGSIM_DT)
        vy = _finite_difference(y, NGSIM_DT)
        ax = _finite_difference(vx, NGSIM_DT)
        ay = _finite_difference(vy, NGSIM_DT)
        lane = grp["Lane_ID"].to_numpy(dtype=np.float64)
        data = np.column_stack([t, x, y, vx, vy, ax, ay, lane])
        length = float(grp["v_Length"].iloc[0]) * FOOT if "v_Length" in grp else _DEFAULT_LENGTH
        width = float(grp["v_Width"].iloc[0]) * FOOT if "v_Width" in grp else _DEFAULT_WIDTH
        tracks.append(VehicleTrack(int(vid), data, length, width))
    return _assemble(tracks, NGSIM_DT, "ngsim-like")


# ---------------------------------------------------------------------------
# data-light slicing
# ---------------------------------------------------------------------------

def sample_fraction(ds: TrajectoryDataset, fraction: float, seed: int) -> TrajectoryDataset:
    """Seeded selection of ceil(fraction * n_tracks) whole tracks.

    Tracks are never split: the returned dataset keeps complete trajectories
    so temporal windows stay intact.
    """
    if not (0.0 < fraction <= 1.0):
        raise FractionOutOfRange(f"fraction must be in (0, 1], got {fraction}")
    ids = ds.vehicle_ids()
    if not ids:
        raise FractionOutOfRange("cannot sample from an empty dataset")
    k = math.ceil(fraction * len(ids))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(ids), size=k, replace=False)
    return ds.subset([ids[i] for i in chosen])
