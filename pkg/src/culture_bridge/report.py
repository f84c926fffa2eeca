"""Evaluation report assembly and emission (JSON, CSV, SVG).

The report compares a candidate dataset (usually rollout output) against a
reference dataset using the full metric suite. SVG plots are plain line
paths with axes, written directly; no plotting dependency.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .metrics import (
    TTC_RMSE_CONVENTION,
    CaseReport,
    DensityProfile,
    classify_styles,
    collect_values,
    density_estimate,
    density_mse,
    lane_change_frequency,
    ttc_density_rmse,
)
from .trajectory import TrajectoryDataset

DENSITY_VARIABLES = ("ax", "ay", "vx", "vy", "ttc")


def build_report(reference: TrajectoryDataset, candidate: TrajectoryDataset,
                 cases=None, meta=None) -> dict:
    densities = {}
    mse = {}
    ttc_rmse = None
    profiles = {}
    for var in DENSITY_VARIABLES:
        ref_p = density_estimate(collect_values(reference, var), var)
        cand_p = density_estimate(collect_values(candidate, var), var)
        profiles[var] = (ref_p, cand_p)
        densities[var] = {
            "grid": cand_p.grid.tolist(),
            "density": cand_p.density.tolist(),
            "reference_grid": ref_p.grid.tolist(),
            "reference_density": ref_p.density.tolist(),
        }
        mse[var] = density_mse(ref_p, cand_p)
        if var == "ttc":
            ttc_rmse = ttc_density_rmse(ref_p, cand_p)

    styles_cand = classify_styles(candidate)
    styles_ref = classify_styles(reference)
    report = {
        "densities": densities,
        "mse": mse,
        "lane_change_freq": lane_change_frequency(candidate),
        "lane_change_freq_reference": lane_change_frequency(reference),
        "styles": {
            "centroids": {k: list(v) for k, v in styles_cand.centroids.items()},
            "lambdas": list(styles_cand.lambdas),
            "reference_centroids": {k: list(v) for k, v in styles_ref.centroids.items()},
        },
        "ttc_rmse": ttc_rmse,
        "cases": [
            {
                "mean_ttc_error_s": c.mean_ttc_error,
                "mean_ax_error_ms2": c.mean_ax_error,
                "mean_ay_error_ms2": c.mean_ay_error,
                "max_path_deviation_m": c.max_path_deviation,
            }
            for c in (cases or [])
        ],
        "meta": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "ttc_rmse_convention": TTC_RMSE_CONVENTION,
            **(meta or {}),
        },
    }
    report["_profiles"] = profiles  # for emitters; stripped before serialization
    return report


def write_report(report: dict, out_dir, plots: bool = False) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profiles = report.pop("_profiles", {})
    path = out_dir / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=1, allow_nan=False))
    for var, (ref_p, cand_p) in profiles.items():
        _write_density_csv(out_dir / f"density_{var}.csv", ref_p, cand_p)
        if plots:
            _write_density_svg(out_dir / f"density_{var}.svg", ref_p, cand_p)
    return path


def _write_density_csv(path, ref_p: DensityProfile, cand_p: DensityProfile):
    ref_on_cand = np.interp(cand_p.grid, ref_p.grid, ref_p.density, left=0.0, right=0.0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["grid", "candidate", "reference"])
        for g, c, r in zip(cand_p.grid, cand_p.density, ref_on_cand):
            writer.writerow([repr(float(g)), repr(float(c)), repr(float(r))])


def _polyline(xs, ys, x0, x1, y1, width, height, pad) -> str:
    sx = (width - 2 * pad) / (x1 - x0) if x1 > x0 else 1.0
    sy = (height - 2 * pad) / y1 if y1 > 0 else 1.0
    pts = " ".join(
        f"{pad + (x - x0) * sx:.2f},{height - pad - y * sy:.2f}" for x, y in zip(xs, ys)
    )
    return pts


def _write_density_svg(path, ref_p: DensityProfile, cand_p: DensityProfile,
                       width=640, height=400, pad=45):
    x0 = min(ref_p.grid[0], cand_p.grid[0])
    x1 = max(ref_p.grid[-1], cand_p.grid[-1])
    y1 = max(ref_p.density.max(), cand_p.density.max()) * 1.05
    ref_pts = _polyline(ref_p.grid, ref_p.density, x0, x1, y1, width, height, pad)
    cand_pts = _polyline(cand_p.grid, cand_p.density, x0, x1, y1, width, height, pad)
    svg = f"""<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">
<rect width="{width}" height="{height}" fill="white"/>
<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>
<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>
<text x="{pad}" y="{height - pad + 18}" font-size="12">{x0:.3g}</text>
<text x="{width - pad - 30}" y="{height - pad + 18}" font-size="12">{x1:.3g}</text>
<text x="{pad - 40}" y="{pad + 4}" font-size="12">{y1:.3g}</text>
<text x="{width / 2 - 30}" y="{pad - 18}" font-size="14">{cand_p.variable} density</text>
<polyline points="{ref_pts}" fill="none" stroke="#1f77b4" stroke-width="1.5"/>
<polyline points="{cand_pts}" fill="none" stroke="#ff7f0e" stroke-width="1.5"/>
<text x="{width - pad - 120}" y="{pad}" font-size="12" fill="#1f77b4">reference</text>
<text x="{width - pad - 120}" y="{pad + 16}" font-size="12" fill="#ff7f0e">candidate</text>
</svg>
"""
    Path(path).write_text(svg)
