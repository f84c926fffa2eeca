"""Pipeline driver: synth, ingest, train, calibrate, rollout, evaluate.

Configuration is a JSON file mirrored one-to-one by flags, plus
``--set key.path=value`` overrides. Exit codes are disjoint by failure
class: 2 config, 3 data, 4 numeric divergence.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import synth as synth_mod
from .dlirl import (
    TrainingConfig,
    calibrate_culture,
    load_model,
    save_model,
    train_archetype,
)
from .dlirl.model import CultureVector
from .errors import (
    CultureBridgeError,
    NonFiniteActivation,
    NonFiniteLoss,
)
from .features import extract_samples
from .metrics import case_report
from .report import build_report, write_report
from .rollout import export_trace, run_rollout
from .trajectory import (
    TrajectoryDataset,
    import_highd_like,
    import_ngsim_like,
    parse_canonical_csv,
    sample_fraction,
    write_canonical_csv,
)

log = logging.getLogger("culture_bridge")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

MODES = ("localized", "direct", "cross-cultural")

_TRAINING_KEYS = (
    "gamma", "batch_size", "epochs", "td_weight", "hidden", "learning_rate",
    "w_learning_rate", "val_fraction", "calib_max_steps", "calib_tol", "action_bound",
)

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "jobs": 1,
    "fraction": 1.0,
    "mode": "localized",
    "gpi": False,
    "teacher_forced": False,
    "plots": False,
    "ego_only": None,  # None = use ego tracks when the dataset declares them
    "data": None,
    "candidate": None,
    "model": None,
    "vehicle": None,
    "cases": None,
    "format": "canonical",
    "name": None,
    "input": None,
    "spec": None,
    "synth": {"n_tracks": 8, "duration": 60.0, "worlds": 1},
    "training": {
        "gamma": 0.9, "batch_size": 128, "epochs": 80, "td_weight": 0.0,
        "hidden": 32, "learning_rate": 1e-3, "w_learning_rate": 0.01,
        "val_fraction": 0.1, "calib_max_steps": 5000, "calib_tol": 1e-8,
        "action_bound": 5.0,
    },
}


@dataclass
class RunConfig:
    """Resolved configuration for one command invocation."""

    raw: dict

    def __getitem__(self, key):
        return self.raw[key]

    def training(self) -> TrainingConfig:
        kw = {k: self.raw["training"][k] for k in _TRAINING_KEYS}
        return TrainingConfig(seed=int(self.raw["seed"]), gpi_enabled=bool(self.raw["gpi"]), **kw)

    def validate(self):
        if self.raw["mode"] not in MODES:
            raise ValueError(f"mode: must be one of {', '.join(MODES)}")
        if not (0.0 < float(self.raw["fraction"]) <= 1.0):
            raise ValueError("fraction: must be in (0, 1]")
        if int(self.raw["jobs"]) < 1:
            raise ValueError("jobs: must be >= 1")
        if self.raw["mode"] == "cross-cultural":
            if not (self.raw["model"] and self.raw["data"]):
                raise ValueError(
                    "mode: cross-cultural requires both a source model and target data"
                )


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_set(cfg: dict, expr: str):
    if "=" not in expr:
        raise ValueError(f"--set expects key=value, got {expr!r}")
    key, value = expr.split("=", 1)
    node = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ValueError(f"--set: unknown config section {p!r} in {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ValueError(f"--set: unknown config key {key!r}")
    node[parts[-1]] = _coerce(value)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        for k, v in loaded.items():
            if k not in cfg:
                raise ValueError(f"config: unknown key {k!r}")
            if isinstance(cfg[k], dict) and isinstance(v, dict):
                cfg[k].update(v)
            else:
                cfg[k] = v
    for expr in args.set or []:
        _apply_set(cfg, expr)
    for key, value in vars(args).items():
        if key in ("command", "config", "set") or value is None:
            continue
        if key in ("n_tracks", "duration", "worlds"):
            cfg["synth"][key] = value
        elif key in cfg:
            cfg[key] = value
    rc = RunConfig(cfg)
    rc.validate()
    return rc


# ---------------------------------------------------------------------------
# data helpers
# ---------------------------------------------------------------------------

def _load_dataset(path) -> TrajectoryDataset:
    return parse_canonical_csv(path)

def _training_samples(ds: TrajectoryDataset, ego_only):
    samples = extract_samples(ds)
    use_ego = bool(ds.meta.ego_ids) if ego_only is None else ego_only
    if use_ego and ds.meta.ego_ids:
        ego = set(ds.meta.ego_ids)
        samples = [s for s in samples if s.source[0] in ego]
    return samples


def _maybe_slice(ds: TrajectoryDataset, cfg: RunConfig) -> TrajectoryDataset:
    fraction = float(cfg["fraction"])
    if fraction >= 1.0:
        return ds
    if ds.meta.ego_ids and (cfg["ego_only"] is None or cfg["ego_only"]):
        # data-light slices draw from the culture-bearing tracks
        ego_ds = ds.subset(ds.meta.ego_ids)
        sliced = sample_fraction(ego_ds, fraction, int(cfg["seed"]))
        keep = set(sliced.vehicle_ids())
        other = [v for v in ds.vehicle_ids() if v not in set(ds.meta.ego_ids)]
        return ds.subset(sorted(keep | set(other)))
    return sample_fraction(ds, fraction, int(cfg["seed"]))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_synth(cfg: RunConfig) -> int:
    if not cfg["spec"]:
        raise ValueError("spec: synth requires a culture spec JSON path")
    spec = synth_mod.CultureSpec.from_json(Path(cfg["spec"]).read_text())
    spec.validate()
    s = cfg["synth"]
    worlds = int(s["worlds"])
    if worlds < 1:
        raise ValueError("synth.worlds: must be >= 1")
    if worlds == 1:
        ds = synth_mod.gen_world(spec, int(s["n_tracks"]), float(s["duration"]), int(cfg["seed"]))
    else:
        ds = synth_mod.gen_corpus(
            spec, worlds, int(s["n_tracks"]), float(s["duration"]), int(cfg["seed"])
        )
    name = cfg["name"] or "synth"
    out = Path(cfg["out"])
    path = write_canonical_csv(ds, out / f"{name}.csv")
    log.info("wrote %s (%d tracks)", path, ds.n_tracks)
    return EXIT_OK


def cmd_ingest(cfg: RunConfig) -> int:
    src = cfg["input"] or cfg["data"]
    if not src:
        raise ValueError("input: ingest requires an input file")
    fmt = cfg["format"]
    if fmt == "canonical":
        ds = parse_canonical_csv(src)
    elif fmt == "highd":
        ds = import_highd_like(src)
    elif fmt == "ngsim":
        ds = import_ngsim_like(src)
    else:
        raise ValueError(f"format: unknown format {fmt!r}")
    if float(cfg["fraction"]) < 1.0:
        ds = sample_fraction(ds, float(cfg["fraction"]), int(cfg["seed"]))
    name = cfg["name"] or "ingested"
    path = write_canonical_csv(ds, Path(cfg["out"]) / f"{name}.csv")
    log.info("wrote %s (%d tracks)", path, ds.n_tracks)
    return EXIT_OK


def cmd_train(cfg: RunConfig) -> int:
    if not cfg["data"]:
        raise ValueError("data: train requires a dataset")
    ds = _maybe_slice(_load_dataset(cfg["data"]), cfg)
    samples = _training_samples(ds, cfg["ego_only"])
    model = train_archetype(samples, cfg.training())
    name = cfg["name"] or "model.json"
    path = save_model(Path(cfg["out"]) / name, model, CultureVector.all_ones())
    log.info("trained on %d samples -> %s", len(samples), path)
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    if not cfg["model"]:
        raise ValueError("model: calibrate requires a trained model")
    if not cfg["data"]:
        raise ValueError("data: calibrate requires local data")
    model, _ = load_model(cfg["model"])
    ds = _maybe_slice(_load_dataset(cfg["data"]), cfg)
    samples = _training_samples(ds, cfg["ego_only"])
    culture = calibrate_culture(model, samples, cfg.training())
    name = cfg["name"] or "calibrated.json"
    path = save_model(Path(cfg["out"]) / name, model, culture)
    log.info("calibrated on %d samples -> %s", len(samples), path)
    return EXIT_OK


def cmd_rollout(cfg: RunConfig) -> int:
    if not (cfg["model"] and cfg["data"]):
        raise ValueError("model/data: rollout requires both")
    if cfg["vehicle"] is None:
        raise ValueError("vehicle: rollout requires a vehicle id")
    model, culture = load_model(cfg["model"])
    ds = _load_dataset(cfg["data"])
    result = run_rollout(
        ds, int(cfg["vehicle"]), model, culture, cfg.training(),
        teacher_forced=bool(cfg["teacher_forced"]),
    )
    summary = export_trace(result, cfg["out"], f"rollout_{cfg['vehicle']}", ds)
    log.info("rollout summary: %s", summary)
    return EXIT_OK


def _simulate_dataset(ds, model, culture, tcfg, teacher_forced, ids, jobs):
    def one(vid):
        return run_rollout(ds, vid, model, culture, tcfg, teacher_forced=teacher_forced)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, ids))
    else:
        results = [one(v) for v in ids]
    tracks = [r.simulated for r in results]
    sim_ds = TrajectoryDataset(
        tracks, ds.dt, ds.lane_count, ds.lane_centers_y, ds.lane_ids, ds.meta
    )
    return sim_ds, results


def cmd_evaluate(cfg: RunConfig) -> int:
    if not cfg["data"]:
        raise ValueError("data: evaluate requires a reference dataset")
    ref = _load_dataset(cfg["data"])
    cases = []
    if cfg["candidate"]:
        cand = _load_dataset(cfg["candidate"])
        ref_cmp = ref
    elif cfg["model"]:
        model, culture = load_model(cfg["model"])
        ids = ref.vehicle_ids()
        if cfg["cases"] is not None:
            ids = ids[: int(cfg["cases"])]
        cand, results = _simulate_dataset(
            ref, model, culture, cfg.training(), bool(cfg["teacher_forced"]),
            ids, int(cfg["jobs"]),
        )
        cases = [case_report(r) for r in results]
        ref_cmp = ref.subset(ids)
    else:
        raise ValueError("candidate/model: evaluate needs a candidate dataset or a model")
    report = build_report(
        ref_cmp, cand, cases,
        meta={"seed": int(cfg["seed"]), "mode": cfg["mode"]},
    )
    path = write_report(report, cfg["out"], plots=bool(cfg["plots"]))
    log.info("wrote %s", path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (dotted path)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--gpi", action="store_const", const=True)
    p.add_argument("--teacher-forced", dest="teacher_forced",
                   action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="culture-bridge",
        description="Driving archetype transfer and culture calibration pipeline",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic culture dataset")
    p.add_argument("--spec", help="culture spec JSON")
    p.add_argument("--n-tracks", dest="n_tracks", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--worlds", type=int)
    p.add_argument("--name")
    _add_common(p)

    p = sub.add_parser("ingest", help="convert a dataset to the canonical schema")
    p.add_argument("--in", dest="input", help="input file")
    p.add_argument("--format", choices=("canonical", "highd", "ngsim"))
    p.add_argument("--name")
    _add_common(p)

    p = sub.add_parser("train", help="train a driving archetype (w = all-ones)")
    p.add_argument("--data", help="canonical CSV")
    p.add_argument("--name")
    p.add_argument("--ego-only", dest="ego_only", action="store_const", const=True)
    p.add_argument("--all-tracks", dest="ego_only", action="store_const", const=False)
    _add_common(p)

    p = sub.add_parser("calibrate", help="re-estimate the culture vector only")
    p.add_argument("--model", help="trained model JSON")
    p.add_argument("--data", help="local canonical CSV")
    p.add_argument("--name")
    p.add_argument("--ego-only", dest="ego_only", action="store_const", const=True)
    p.add_argument("--all-tracks", dest="ego_only", action="store_const", const=False)
    _add_common(p)

    p = sub.add_parser("rollout", help="closed-loop replay of one vehicle")
    p.add_argument("--model")
    p.add_argument("--data")
    p.add_argument("--vehicle", type=int)
    _add_common(p)

    p = sub.add_parser("evaluate", help="metric report for a model or dataset pair")
    p.add_argument("--data", help="reference canonical CSV")
    p.add_argument("--candidate", help="candidate canonical CSV")
    p.add_argument("--model", help="model JSON to roll out")
    p.add_argument("--cases", type=int, help="limit rollouts to the first N tracks")
    p.add_argument("--plots", action="store_const", const=True)
    _add_common(p)

    return ap


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "rollout": cmd_rollout,
    "evaluate": cmd_evaluate,
}

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def main(argv=None) -> int:
    logging.basicConfig(
        level=_LOG_LEVELS.get(os.environ.get("CULTURE_BRIDGE_LOG", "warn"), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteLoss, NonFiniteActivation) as exc:
        print(f"numeric divergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CultureBridgeError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
