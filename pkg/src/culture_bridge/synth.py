"""Synthetic highway cultures with a known linear ground truth.

Each generated world has one culture-driven ego (vehicle id 1) whose
accelerations are phi(window) . w_true per axis plus Gaussian noise, where
phi is a fixed bounded feature map. Every other vehicle follows IDM-style
car following with optional scripted lane changes. Because the ego action
is exactly linear in w_true, calibration has a closed-form oracle and the
transfer claims can be checked against exact recovery.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._scan import scan_scene, ttc_values
from .errors import DegenerateWorld
from .features import FEATURE_SCALE, STATE_DIM, WINDOW_LEN, StateWindow
from .trajectory import DatasetMeta, TrajectoryDataset, VehicleTrack

EGO_ID = 1
SYNTH_DT = 0.2  # s; 4-frame windows then cover 0.8 s of history

LANE_IDS = (0, 1, 2)
LANE_CENTERS = (0.0, 3.5, 7.0)
LANE_CHANGE_DURATION = 4.0  # s, smooth cosine lateral profile

_IDM_JAM_DISTANCE = 2.0  # m
_IDM_EXPONENT = 4.0
_MAX_BRAKE = 9.0  # m/s^2 braking clip for neighbors
_WARMUP_FRAMES = 10  # collision screen for degenerate car-following dynamics
_MIN_SPAWN_GAP = 4.0  # m bumper-to-bumper at t=0

DEFAULT_MAP_SEED = 7


@dataclass(frozen=True)
class IdmParams:
    desired_speed: float = 28.0  # m/s
    time_headway: float = 1.5  # s
    max_accel: float = 1.8  # m/s^2
    comfort_decel: float = 2.2  # m/s^2


@dataclass
class CultureSpec:
    """Ground-truth culture: preference vectors plus world composition knobs."""

    w_true_x: np.ndarray
    w_true_y: np.ndarray
    noise_sigma: float = 0.05  # m/s^2 on ego actions
    neighbor_params: IdmParams = field(default_factory=IdmParams)
    lane_change_rate: float = 0.3  # fraction of neighbors scripted to change lanes

    def __post_init__(self):
        self.w_true_x = np.asarray(self.w_true_x, dtype=np.float64)
        self.w_true_y = np.asarray(self.w_true_y, dtype=np.float64)

    def validate(self):
        for name, w in (("w_true_x", self.w_true_x), ("w_true_y", self.w_true_y)):
            if w.shape != (STATE_DIM,):
                raise ValueError(f"{name}: expected {STATE_DIM} components, got {w.shape}")
            if not np.isfinite(w).all():
                raise ValueError(f"{name}: components must be finite")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma: must be >= 0")
        p = self.neighbor_params
        for name in ("desired_speed", "time_headway", "max_accel", "comfort_decel"):
            if getattr(p, name) <= 0:
                raise ValueError(f"neighbor_params.{name}: must be > 0")
        if not (0.0 <= self.lane_change_rate <= 1.0):
            raise ValueError("lane_change_rate: must be within [0, 1]")

    def to_json(self) -> str:
        p = self.neighbor_params
        return json.dumps(
            {
                "w_true_x": self.w_true_x.tolist(),
                "w_true_y": self.w_true_y.tolist(),
                "noise_sigma": self.noise_sigma,
                "neighbor_params": {
                    "desired_speed": p.desired_speed,
                    "time_headway": p.time_headway,
                    "max_accel": p.max_accel,
                    "comfort_decel": p.comfort_decel,
                },
                "lane_change_rate": self.lane_change_rate,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "CultureSpec":
        raw = json.loads(text)
        return cls(
            w_true_x=np.asarray(raw["w_true_x"], dtype=np.float64),
            w_true_y=np.asarray(raw["w_true_y"], dtype=np.float64),
            noise_sigma=float(raw.get("noise_sigma", 0.05)),
            neighbor_params=IdmParams(**raw.get("neighbor_params", {})),
            lane_change_rate=float(raw.get("lane_change_rate", 0.3)),
        )


class GroundTruthFeatureMap:
    """Fixed bounded map from a state window to 12 features.

    phi(window) = tanh(P @ (latest state vector / FEATURE_SCALE)) with P a
    seeded 12x12 projection, so phi(0) = 0 and every component stays in
    (-1, 1). Reading the newest frame keeps consecutive targets weakly
    correlated (fresh action noise re-enters through the lagged-acceleration
    features). Identical seeds build identical maps.
    """

    def __init__(self, seed: int = DEFAULT_MAP_SEED, nonlinearity: str = "tanh"):
        if nonlinearity != "tanh":
            raise ValueError(f"unsupported nonlinearity {nonlinearity!r}")
        self.seed = int(seed)
        self.nonlinearity = nonlinearity
        rng = np.random.default_rng(self.seed)
        # wide enough that the squashing bites; keeps phi nonlinear in the
        # state without saturating the typical operating range
        self.projection = rng.normal(0.0, 1.4, size=(STATE_DIM, STATE_DIM))

    def from_values(self, values: np.ndarray) -> np.ndarray:
        z = values[-1] / FEATURE_SCALE
        return np.tanh(self.projection @ z)

    def __call__(self, window: StateWindow) -> np.ndarray:
        return self.from_values(window.values)


def eval_ground_truth(feature_map: GroundTruthFeatureMap, window: StateWindow) -> np.ndarray:
    return feature_map(window)


def ego_action(
    feature_map: GroundTruthFeatureMap, spec: CultureSpec, window_values: np.ndarray
) -> np.ndarray:
    """Noise-free culture action for a window; exactly linear in w_true."""
    phi = feature_map.from_values(window_values)
    return np.array([phi @ spec.w_true_x, phi @ spec.w_true_y])


# ---------------------------------------------------------------------------
# world generation
# ---------------------------------------------------------------------------

def idm_accel(v: float, v_lead: float, gap: float, p: IdmParams) -> float:
    """IDM longitudinal command. gap is bumper-to-bumper; no leader -> inf."""
    v = max(v, 0.0)
    free = p.max_accel * (1.0 - (v / p.desired_speed) ** _IDM_EXPONENT)
    if not math.isfinite(gap):
        a = free
    else:
        dv = v - v_lead
        s_star = _IDM_JAM_DISTANCE + max(
            0.0,
            v * p.time_headway + v * dv / (2.0 * math.sqrt(p.max_accel * p.comfort_decel)),
        )
        s = max(gap, 0.1)
        a = free - p.max_accel * (s_star / s) ** 2
    return min(max(a, -_MAX_BRAKE), p.max_accel)


def _lane_profile(y0: float, y1: float, t0: float, t: float):
    """Cosine-smooth lateral transition (y, vy, ay) for a scripted lane change."""
    T = LANE_CHANGE_DURATION
    dy = y1 - y0
    u = (t - t0) / T
    if u <= 0.0:
        return y0, 0.0, 0.0
    if u >= 1.0:
        return y1, 0.0, 0.0
    y = y0 + dy * 0.5 * (1.0 - math.cos(math.pi * u))
    vy = dy * math.pi / (2.0 * T) * math.sin(math.pi * u)
    ay = dy * math.pi * math.pi / (2.0 * T * T) * math.cos(math.pi * u)
    return y, vy, ay


def _nearest_lane(y: float) -> int:
    return int(np.argmin([abs(y - c) for c in LANE_CENTERS]))


def gen_world(
    spec: CultureSpec,
    n_tracks: int,
    duration: float,
    seed: int,
    feature_map: GroundTruthFeatureMap | None = None,
) -> TrajectoryDataset:
    """Simulate one world: IDM neighbors around a culture-driven ego.

    The ego holds zero acceleration for its first four frames (no full
    window yet), then follows phi(window)^T w_true per axis plus noise.
    Deterministic for identical arguments.
    """
    if n_tracks < 2:
        raise ValueError("n_tracks must be >= 2")
    if duration < 5.0:
        raise ValueError("duration must be >= 5 s")
    spec.validate()
    fmap = feature_map if feature_map is not None else GroundTruthFeatureMap()

    rng = np.random.default_rng(seed)
    dt = SYNTH_DT
    n_frames = int(round(duration / dt)) + 1
    n = n_tracks
    p = spec.neighbor_params
    ego_slot = n // 2  # round-robin lanes put the ego mid-pack

    # spawn: round-robin over lanes with randomized gaps
    slot_lane = [(i % len(LANE_IDS)) for i in range(n)]
    cursors = dict.fromkeys(range(len(LANE_IDS)), 0.0)
    slot_x = []
    for i in range(n):
        slot_x.append(cursors[slot_lane[i]])
        cursors[slot_lane[i]] += rng.uniform(28.0, 45.0)

    lengths = rng.uniform(4.2, 5.0, size=n)
    widths = rng.uniform(1.8, 2.0, size=n)
    x = np.array(slot_x)
    y = np.array([LANE_CENTERS[l] for l in slot_lane], dtype=np.float64)
    vx = p.desired_speed * rng.uniform(0.85, 1.05, size=n)
    vy = np.zeros(n)

    # leaders start at least as fast as their followers so spawn gaps never
    # close during warm-up; diversity stays across lanes and over time
    for lane in range(len(LANE_IDS)):
        idx = sorted((i for i in range(n) if slot_lane[i] == lane), key=lambda i: x[i])
        vx[idx] = np.sort(vx[idx])

    for lane in range(len(LANE_IDS)):
        idx = sorted((i for i in range(n) if slot_lane[i] == lane), key=lambda i: x[i])
        for a, b in zip(idx, idx[1:]):
            gap = x[b] - x[a] - (lengths[a] + lengths[b]) / 2.0
            if gap < _MIN_SPAWN_GAP:
                raise DegenerateWorld(f"spawn gap {gap:.2f} m in lane {lane}")

    # scripted lane changes for neighbors
    change_start = np.full(n, np.inf)
    change_from = np.array([LANE_CENTERS[l] for l in slot_lane])
    change_to = change_from.copy()
    for i in range(n):
        if i == ego_slot:
            continue
        if rng.random() < spec.lane_change_rate:
            lane = slot_lane[i]
            options = [l for l in (lane - 1, lane + 1) if 0 <= l < len(LANE_IDS)]
            target = options[rng.integers(len(options))]
            # changes begin after the warm-up screen and, when the world is
            # long enough, finish before the recording ends
            lo = max(_WARMUP_FRAMES * dt + dt, 0.2 * duration)
            hi = max(lo + dt, min(0.6 * duration, duration - LANE_CHANGE_DURATION - 1.0))
            change_start[i] = rng.uniform(lo, hi)
            change_to[i] = LANE_CENTERS[target]

    ids = np.arange(n) + 2
    ids[ego_slot] = EGO_ID
    order = np.argsort(ids)  # scene arrays in ascending vehicle id
    ego_pos = int(np.nonzero(ids[order] == EGO_ID)[0][0])
    e = ego_slot

    data = np.zeros((n, n_frames, 8))
    ax_cmd = np.zeros(n)
    ay_cmd = np.zeros(n)
    ay_prof = np.zeros(n)
    ego_hist: list = []  # rolling state vectors i_t for the ego

    for f in range(n_frames):
        t = f * dt

        # neighbor lateral state comes straight from the script
        for i in range(n):
            if i != e:
                y[i], vy[i], ay_prof[i] = _lane_profile(
                    change_from[i], change_to[i], change_start[i], t
                )
        lane_now = np.array([_nearest_lane(yy) for yy in y])

        # record the pre-action state
        for i in range(n):
            data[i, f, :] = (t, x[i], y[i], vx[i], vy[i], 0.0, 0.0, lane_now[i])

        # ego state vector against the current scene (ax_cmd still holds a_{t-1})
        occ, geo = scan_scene(
            x[order], y[order], vx[order], vy[order],
            lengths[order] / 2.0, widths[order] / 2.0,
            lane_now[order].astype(np.int64),
        )
        ttc8 = ttc_values(occ[ego_pos:ego_pos + 1], geo[ego_pos:ego_pos + 1])[0]
        ego_hist.append(np.concatenate(([vx[e], vy[e], ax_cmd[e], ay_cmd[e]], ttc8)))

        # actions: IDM for neighbors, culture policy for the ego once it has a window
        for i in range(n):
            if i == e:
                continue
            gap = math.inf
            v_lead = 0.0
            for j in range(n):
                if j == i or lane_now[j] != lane_now[i] or x[j] <= x[i]:
                    continue
                g = x[j] - x[i] - (lengths[i] + lengths[j]) / 2.0
                if g < gap:
                    gap = g
                    v_lead = vx[j]
            ax_cmd[i] = idm_accel(vx[i], v_lead, gap, p)

        if f >= WINDOW_LEN:
            action = ego_action(fmap, spec, np.stack(ego_hist[-WINDOW_LEN:]))
            action = action + rng.normal(0.0, spec.noise_sigma, size=2)
            ax_cmd[e], ay_cmd[e] = action
        else:
            ax_cmd[e] = 0.0
            ay_cmd[e] = 0.0

        for i in range(n):
            data[i, f, 5] = ax_cmd[i]
            data[i, f, 6] = ay_cmd[i] if i == e else ay_prof[i]

        if f < _WARMUP_FRAMES:
            # guards degenerate car-following dynamics; the culture-driven ego
            # has no avoidance by construction and is exempt
            for a in range(n):
                for b in range(a + 1, n):
                    if a == e or b == e:
                        continue
                    if (
                        abs(x[b] - x[a]) < (lengths[a] + lengths[b]) / 2.0
                        and abs(y[b] - y[a]) < (widths[a] + widths[b]) / 2.0
                    ):
                        raise DegenerateWorld(
                            f"vehicles {ids[a]} and {ids[b]} collided during warm-up"
                        )

        # longitudinal integration for everyone, lateral only for the ego
        for i in range(n):
            x[i] = x[i] + vx[i] * dt + 0.5 * ax_cmd[i] * dt * dt
            vx[i] = max(vx[i] + ax_cmd[i] * dt, 0.0)
        y[e] = y[e] + vy[e] * dt + 0.5 * ay_cmd[e] * dt * dt
        vy[e] = vy[e] + ay_cmd[e] * dt

    tracks = []
    for i in np.argsort(ids):
        tracks.append(VehicleTrack(int(ids[i]), data[i], float(lengths[i]), float(widths[i])))
    meta = DatasetMeta(source="synth", si_units=True, ego_ids=(EGO_ID,))
    return TrajectoryDataset(
        tracks,
        dt,
        len(LANE_IDS),
        np.array(LANE_CENTERS),
        LANE_IDS,
        meta,
    )


def gen_corpus(
    spec: CultureSpec,
    n_worlds: int,
    n_tracks: int,
    duration: float,
    seed: int,
    feature_map: GroundTruthFeatureMap | None = None,
) -> TrajectoryDataset:
    """Merge several independently seeded worlds into one dataset.

    Worlds are shifted in time so their scenes never overlap; vehicle ids get
    a per-world offset. Ego tracks are listed in meta.ego_ids.
    """
    n_frames = int(round(duration / SYNTH_DT)) + 1
    stride = n_frames + 10
    tracks = []
    ego_ids = []
    for w in range(n_worlds):
        world = gen_world(spec, n_tracks, duration, seed + w, feature_map)
        shift = w * stride * SYNTH_DT
        offset = w * 1000
        for tr in world.tracks:
            shifted = tr.data.copy()
            shifted[:, 0] += shift
            tracks.append(VehicleTrack(tr.vehicle_id + offset, shifted, tr.length, tr.width))
        ego_ids.append(EGO_ID + offset)
    meta = DatasetMeta(source="synth-corpus", si_units=True, ego_ids=tuple(ego_ids))
    return TrajectoryDataset(
        tracks, SYNTH_DT, len(LANE_IDS), np.array(LANE_CENTERS), LANE_IDS, meta
    )


def demo_culture(kind: str) -> CultureSpec:
    """Two distinct, recoverable reference cultures used by tests and docs.

    The lateral vectors are aligned against the default feature map's vy
    sensitivity so both cultures damp lateral speed instead of wandering off
    the road; they differ in directions orthogonal to that damping axis. The
    longitudinal vectors share part of their structure, mirroring how real
    driving cultures are variations on a common archetype, and the worlds
    use matched traffic parameters so the feature distributions overlap.
    """
    idm = IdmParams(desired_speed=26.0, time_headway=1.5, max_accel=1.8, comfort_decel=2.2)
    if kind == "a":
        return CultureSpec(
            w_true_x=np.array([0.45, -0.30, 0.25, 0.10, 0.35, -0.20, 0.15, -0.10, 0.20, -0.15, 0.10, -0.25]),
            w_true_y=np.array([0.017, 0.072, -0.006, -0.100, -0.195, 0.031, -0.021, 0.044, -0.030, 0.012, -0.037, 0.132]),
            noise_sigma=0.1,
            neighbor_params=idm,
            lane_change_rate=0.3,
        )
    if kind == "b":
        return CultureSpec(
            w_true_x=np.array([0.382, -0.180, 0.165, -0.229, 0.298, -0.412, 0.221, 0.009, 0.245, 0.003, 0.108, -0.242]),
            w_true_y=np.array([-0.117, 0.139, 0.048, -0.070, -0.098, 0.042, 0.048, 0.123, 0.009, 0.055, 0.071, 0.100]),
            noise_sigma=0.1,
            neighbor_params=idm,
            lane_change_rate=0.3,
        )
    raise ValueError(f"unknown demo culture {kind!r}")
