"""Evaluation suite: behavioral densities, lane-change frequency, driving
styles, TTC distribution error, and per-case rollout summaries.

Density estimation is fixed to a Gaussian kernel with Silverman bandwidth on
a 512-point grid so reported MSE numbers are reproducible. The kernel sum is
the hot loop and runs through numba unless CULTURE_BRIDGE_NUMBA disables it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .accel import HAS_NUMBA, jit_kernel, numba_enabled
from .errors import (
    DegenerateSample,
    EmptyDataset,
    InsufficientTracks,
    VariableMismatch,
    ZeroVariance,
)
from .features import dataset_ttc
from .rollout import RolloutResult
from .trajectory import AX, AY, VX, VY, TrajectoryDataset

GRID_POINTS = 512
LANE_PERSIST_FRAMES = 5
STYLE_CLASSES = ("conservative", "moderate", "aggressive")

# Units of sqrt(density MSE) are 1/s for a TTC density; scaling by the grid
# span expresses the mismatch on the paper's seconds axis. Recorded in every
# report for auditability.
TTC_RMSE_CONVENTION = "sqrt(mean((p - q)^2)) * grid_span"


@dataclass
class DensityProfile:
    variable: str
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


@dataclass
class StyleClassification:
    scores: dict  # vehicle_id -> normalized squared-sum score
    labels: dict  # vehicle_id -> class name
    lambdas: tuple  # (lambda1, lambda2) boundary scores
    sigma_v: float
    sigma_a: float
    centroids: dict  # class -> (mean speed m/s, mean |a| m/s^2)


@dataclass
class CaseReport:
    mean_ttc_error: float  # s
    mean_ax_error: float  # m/s^2
    mean_ay_error: float  # m/s^2
    max_path_deviation: float  # m


# ---------------------------------------------------------------------------
# kernel density estimation
# ---------------------------------------------------------------------------

def _kde_sum_impl(values, grid, bandwidth):
    out = np.zeros(grid.shape[0])
    norm = 1.0 / (values.shape[0] * bandwidth * math.sqrt(2.0 * math.pi))
    for j in range(grid.shape[0]):
        s = 0.0
        for i in range(values.shape[0]):
            u = (grid[j] - values[i]) / bandwidth
            s += math.exp(-0.5 * u * u)
        out[j] = norm * s
    return out


_kde_sum_py = _kde_sum_impl
_kde_sum_jit = jit_kernel(_kde_sum_impl) if HAS_NUMBA else None


def _kde_sum(values, grid, bandwidth):
    if _kde_sum_jit is not None and numba_enabled():
        return _kde_sum_jit(values, grid, bandwidth)
    return _kde_sum_py(values, grid, bandwidth)


def silverman_bandwidth(values: np.ndarray) -> float:
    """0.9 * min(std, IQR/1.34) * n^(-1/5); falls back to std when IQR is 0."""
    n = values.size
    std = float(np.std(values, ddof=1))
    q75, q25 = np.percentile(values, [75.0, 25.0])
    iqr = float(q75 - q25)
    spread = min(std, iqr / 1.34) if iqr > 0.0 else std
    return 0.9 * spread * n ** (-0.2)


def density_estimate(values, variable: str) -> DensityProfile:
    """Gaussian KDE over a 512-point grid spanning the data +- 3 bandwidths."""
    values = np.asarray(values, dtype=np.float64)
    if np.unique(values).size < 2:
        raise DegenerateSample(f"{variable}: need at least 2 distinct values")
    bw = silverman_bandwidth(values)
    if not (bw > 0.0):
        raise DegenerateSample(f"{variable}: zero spread")
    lo = float(values.min()) - 3.0 * bw
    hi = float(values.max()) + 3.0 * bw
    grid = np.linspace(lo, hi, GRID_POINTS)
    density = _kde_sum(values, grid, bw)
    return DensityProfile(variable, grid, density, bw)


def density_mse(p: DensityProfile, q: DensityProfile) -> float:
    """Mean squared pointwise gap after re-evaluating q on p's grid."""
    if p.variable != q.variable:
        raise VariableMismatch(p.variable, q.variable)
    q_on_p = np.interp(p.grid, q.grid, q.density, left=0.0, right=0.0)
    diff = p.density - q_on_p
    return float(np.mean(diff * diff))


def ttc_density_rmse(reference: DensityProfile, candidate: DensityProfile) -> float:
    """Root density MSE scaled by the reference grid span (seconds convention)."""
    if reference.variable != "ttc" or candidate.variable != "ttc":
        raise VariableMismatch(reference.variable, candidate.variable)
    span = float(reference.grid[-1] - reference.grid[0])
    return math.sqrt(density_mse(reference, candidate)) * span


# ---------------------------------------------------------------------------
# dataset-level behavior metrics
# ---------------------------------------------------------------------------

def _sustained_lane_change(lanes: np.ndarray) -> bool:
    for i in range(1, lanes.size):
        if lanes[i] != lanes[i - 1]:
            run = 1
            j = i + 1
            while j < lanes.size and lanes[j] == lanes[i]:
                run += 1
                j += 1
            if run >= LANE_PERSIST_FRAMES:
                return True
    return False


def lane_change_frequency(ds: TrajectoryDataset) -> float:
    """Share of tracks whose lane id changes and holds for >= 5 frames."""
    if ds.n_tracks == 0:
        raise EmptyDataset("lane_change_frequency needs at least one track")
    changed = sum(1 for tr in ds.tracks if _sustained_lane_change(tr.lane_ids))
    return changed / ds.n_tracks


def classify_styles(ds: TrajectoryDataset) -> StyleClassification:
    """Tertile split of per-track normalized speed/acceleration intensity."""
    if ds.n_tracks < 3:
        raise InsufficientTracks(f"need >= 3 tracks, got {ds.n_tracks}")
    ids = ds.vehicle_ids()
    mean_v = {}
    mean_a = {}
    for vid in ids:
        tr = ds.track(vid)
        mean_v[vid] = float(np.mean(np.hypot(tr.data[:, VX], tr.data[:, VY])))
        mean_a[vid] = float(np.mean(np.hypot(tr.data[:, AX], tr.data[:, AY])))
    sigma_v = float(np.std([mean_v[v] for v in ids]))
    sigma_a = float(np.std([mean_a[v] for v in ids]))
    if sigma_v == 0.0 or sigma_a == 0.0:
        raise ZeroVariance("population spread of speed or acceleration is zero")

    scores = {
        v: (mean_v[v] / sigma_v) ** 2 + (mean_a[v] / sigma_a) ** 2 for v in ids
    }
    ranked = sorted(ids, key=lambda v: (scores[v], v))
    chunks = np.array_split(np.array(ranked), 3)
    labels = {}
    centroids = {}
    for cls, chunk in zip(STYLE_CLASSES, chunks):
        for v in chunk:
            labels[int(v)] = cls
        centroids[cls] = (
            float(np.mean([mean_v[int(v)] for v in chunk])),
            float(np.mean([mean_a[int(v)] for v in chunk])),
        )
    lambdas = (scores[int(chunks[1][0])], scores[int(chunks[2][0])])
    return StyleClassification(scores, labels, lambdas, sigma_v, sigma_a, centroids)


def collect_values(ds: TrajectoryDataset, variable: str) -> np.ndarray:
    """Per-frame values of one variable pooled over all tracks."""
    col = {"ax": AX, "ay": AY, "vx": VX, "vy": VY}
    if variable in col:
        return np.concatenate([tr.data[:, col[variable]] for tr in ds.tracks])
    if variable == "ttc":
        ttc = dataset_ttc(ds)
        vals = []
        for vid, mat in sorted(ttc.items()):
            present = mat >= 0.0
            counts = present.sum(axis=1)
            sums = np.where(present, mat, 0.0).sum(axis=1)
            mask = counts > 0
            vals.append(sums[mask] / counts[mask])
        return np.concatenate(vals) if vals else np.array([])
    raise ValueError(f"unknown variable {variable!r}")


# ---------------------------------------------------------------------------
# per-case rollout summary
# ---------------------------------------------------------------------------

def case_report(r: RolloutResult) -> CaseReport:
    """Mean absolute errors of a rollout against its reference recording."""
    s = r.control_start
    ref_a = r.reference.data[s:, (AX, AY)]
    da = np.abs(r.actions[s:] - ref_a)
    both = np.isfinite(r.ttc_sim[s:]) & np.isfinite(r.ttc_ref[s:])
    ttc_err = np.abs(r.ttc_sim[s:][both] - r.ttc_ref[s:][both])
    return CaseReport(
        mean_ttc_error=float(ttc_err.mean()) if ttc_err.size else 0.0,
        mean_ax_error=float(da[:, 0].mean()),
        mean_ay_error=float(da[:, 1].mean()),
        max_path_deviation=float(np.max(np.hypot(r.deviation[:, 0], r.deviation[:, 1]))),
    )
