"""Closed-loop replay: a model-driven ego among recorded neighbors.

The ego copies its first five recorded frames (the window needs four frames
plus one lagged acceleration), then drives itself with the model while every
other vehicle replays its recording. Teacher-forced mode predicts each
action from the recorded history instead of the simulated one and propagates
each frame from the recorded state, isolating one-step errors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import TrackTooShort, UnknownVehicle
from .features import (
    STATE_DIM,
    WINDOW_LEN,
    StateWindow,
    ego_ttc_against,
    scene_index,
)
from .dlirl.gpi import gpi_select_action
from .dlirl.model import predict_action
from .dlirl.training import TrainingConfig
from .trajectory import (
    AX, AY, LANE, T, VX, VY, X, Y,
    TrajectoryDataset,
    VehicleTrack,
    write_canonical_csv,
)

WARMUP_FRAMES = 5


@dataclass
class RolloutResult:
    simulated: VehicleTrack
    reference: VehicleTrack
    actions: np.ndarray  # (F, 2) applied accelerations; warm-up rows are recorded ones
    ttc_sim: np.ndarray  # (F,) mean TTC over occupied directions, NaN when alone
    ttc_ref: np.ndarray
    deviation: np.ndarray  # (F, 2) simulated minus reference position
    control_start: int = WARMUP_FRAMES - 1


def step_ego(x: float, y: float, vx: float, vy: float, ax: float, ay: float, dt: float):
    """One kinematic step; longitudinal speed floors at zero."""
    x_next = x + vx * dt + 0.5 * ax * dt * dt
    y_next = y + vy * dt + 0.5 * ay * dt * dt
    vx_next = max(vx + ax * dt, 0.0)
    vy_next = vy + ay * dt
    return x_next, y_next, vx_next, vy_next


def _mean_present(ttc8: np.ndarray) -> float:
    present = ttc8[ttc8 >= 0.0]
    return float(present.mean()) if present.size else float("nan")


def run_rollout(
    ds: TrajectoryDataset,
    vehicle_id: int,
    model,
    culture,
    cfg: TrainingConfig | None = None,
    *,
    teacher_forced: bool = False,
    policy=None,
) -> RolloutResult:
    """Simulate one ego against replayed neighbors; fully deterministic.

    ``policy(window, t) -> (ax, ay)`` overrides the model when given (used
    for stubs such as the perfect imitator).
    """
    cfg = cfg or TrainingConfig()
    if not ds.has_track(vehicle_id):
        raise UnknownVehicle(vehicle_id)
    ref = ds.track(vehicle_id)
    n = ref.n_frames
    if n < WARMUP_FRAMES:
        raise TrackTooShort(vehicle_id, n, WARMUP_FRAMES)

    others = ds.subset([v for v in ds.vehicle_ids() if v != vehicle_id])
    index = scene_index(others)
    lane_order = ds.lane_order()
    centers = ds.lane_centers_y
    lane_ids = ds.lane_ids
    half_len = ref.length / 2.0
    half_wid = ref.width / 2.0

    sim = ref.data.copy()
    sim.setflags(write=True)
    actions = sim[:, (AX, AY)].copy()
    ttc_sim = np.full(n, np.nan)
    ttc_ref = np.full(n, np.nan)
    feats_sim = np.zeros((n, STATE_DIM))
    feats_rec = np.zeros((n, STATE_DIM))

    def state_row(src: np.ndarray, f: int) -> np.ndarray:
        key = ds.time_key(src[f, T])
        lane_ord = lane_order[int(src[f, LANE])]
        ttc8 = ego_ttc_against(
            index, key, src[f, X], src[f, Y], src[f, VX], src[f, VY],
            half_len, half_wid, lane_ord,
        )
        row = np.zeros(STATE_DIM)
        row[0], row[1] = src[f, VX], src[f, VY]
        if f > 0:
            row[2], row[3] = src[f - 1, AX], src[f - 1, AY]
        row[4:] = ttc8
        return row

    for f in range(n):
        if f < WARMUP_FRAMES:
            feats_sim[f] = state_row(sim, f)
            feats_rec[f] = state_row(ref.data, f)
        else:
            feats_sim[f] = state_row(sim, f)
            if teacher_forced:
                feats_rec[f] = state_row(ref.data, f)
        ttc_sim[f] = _mean_present(feats_sim[f, 4:])
        if teacher_forced or f < WARMUP_FRAMES:
            ttc_ref[f] = _mean_present(feats_rec[f, 4:])
        else:
            ttc_ref[f] = _mean_present(state_row(ref.data, f)[4:])

        if f >= WARMUP_FRAMES - 1 and f >= WINDOW_LEN:
            source = feats_rec if teacher_forced else feats_sim
            window = StateWindow(source[f - WINDOW_LEN + 1:f + 1].copy(), ds.dt)
            t_now = float(ref.data[f, T])
            if policy is not None:
                a = policy(window, t_now)
            elif cfg.gpi_enabled:
                a = gpi_select_action(model, culture, window,
                                      gamma=cfg.gamma, bound=cfg.action_bound)
            else:
                a = predict_action(model, culture, window, cfg.action_bound)
            actions[f] = a
            sim[f, AX], sim[f, AY] = a

            if f + 1 < n:
                base = ref.data if teacher_forced else sim
                xn, yn, vxn, vyn = step_ego(
                    base[f, X], base[f, Y], base[f, VX], base[f, VY],
                    a[0], a[1], ds.dt,
                )
                sim[f + 1, X], sim[f + 1, Y] = xn, yn
                sim[f + 1, VX], sim[f + 1, VY] = vxn, vyn
                sim[f + 1, LANE] = lane_ids[int(np.argmin(np.abs(yn - centers)))]

    deviation = sim[:, (X, Y)] - ref.data[:, (X, Y)]
    simulated = VehicleTrack(vehicle_id, sim, ref.length, ref.width)
    return RolloutResult(simulated, ref, actions, ttc_sim, ttc_ref, deviation)


def export_trace(result: RolloutResult, out_dir, stem: str, ds: TrajectoryDataset) -> dict:
    """Write the simulated track as canonical CSV plus a JSON error summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_ds = TrajectoryDataset(
        [result.simulated], ds.dt, ds.lane_count, ds.lane_centers_y, ds.lane_ids, ds.meta,
    )
    write_canonical_csv(trace_ds, out_dir / f"{stem}.csv")
    start = result.control_start
    both = np.isfinite(result.ttc_sim[start:]) & np.isfinite(result.ttc_ref[start:])
    ttc_err = np.abs(result.ttc_sim[start:][both] - result.ttc_ref[start:][both])
    da = np.abs(result.actions[start:] - result.reference.data[start:, (AX, AY)])
    summary = {
        "vehicle_id": result.reference.vehicle_id,
        "mean_ttc_error_s": float(ttc_err.mean()) if ttc_err.size else 0.0,
        "mean_abs_da_ms2": float(da.mean()),
        "final_path_deviation_m": float(np.linalg.norm(result.deviation[-1])),
    }
    (out_dir / f"{stem}.json").write_text(json.dumps(summary, indent=1, sort_keys=True))
    return summary
