"""Archetype model container, action prediction, and persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CorruptFile, NonFiniteActivation, VersionMismatch
from ..features import StateWindow
from . import network

MODEL_FORMAT_VERSION = 1
ACTION_BOUND = 5.0  # m/s^2, generous next to observed highway accelerations

AXES = ("x", "y")


@dataclass
class CultureVector:
    """Per-axis 12-component preference weights; all-ones while the archetype trains."""

    w_x: np.ndarray
    w_y: np.ndarray

    def __post_init__(self):
        self.w_x = np.asarray(self.w_x, dtype=np.float64)
        self.w_y = np.asarray(self.w_y, dtype=np.float64)
        for name, w in (("w_x", self.w_x), ("w_y", self.w_y)):
            if w.shape != (network.OUT_DIM,):
                raise ValueError(f"{name} must have {network.OUT_DIM} components")
            if not np.isfinite(w).all():
                raise ValueError(f"{name} must be finite")

    @classmethod
    def all_ones(cls) -> "CultureVector":
        return cls(np.ones(network.OUT_DIM), np.ones(network.OUT_DIM))

    def axis(self, axis: str) -> np.ndarray:
        return self.w_x if axis == "x" else self.w_y


class ArchetypeModel:
    """Two recurrent branches (longitudinal, lateral), each emitting a 12-vector."""

    def __init__(self, branches: dict, hidden: int, seed: int,
                 version: int = MODEL_FORMAT_VERSION):
        self.branches = branches  # {"x": params dict, "y": params dict}
        self.hidden = int(hidden)
        self.seed = int(seed)
        self.version = int(version)
        self.loss_curve: list = []  # (epoch, train_loss, val_loss), not persisted

    @classmethod
    def init(cls, hidden: int, rng: np.random.Generator, seed: int) -> "ArchetypeModel":
        branches = {axis: network.init_branch(hidden, rng) for axis in AXES}
        return cls(branches, hidden, seed)

    def copy_params(self) -> dict:
        return {a: {k: v.copy() for k, v in p.items()} for a, p in self.branches.items()}

    def set_params(self, snapshot: dict):
        self.branches = {a: {k: v.copy() for k, v in p.items()} for a, p in snapshot.items()}


def forward_psi_batch(model: ArchetypeModel, windows: np.ndarray):
    """(N, 4, 12) windows -> per-axis (N, 12) successor vectors."""
    psi = {}
    for axis in AXES:
        out, _ = network.forward(model.branches[axis], windows)
        if not np.isfinite(out).all():
            raise NonFiniteActivation(f"{axis}-branch produced non-finite output")
        psi[axis] = out
    return psi["x"], psi["y"]


def forward_psi(model: ArchetypeModel, window: StateWindow):
    px, py = forward_psi_batch(model, window.values[None, :, :])
    return px[0], py[0]


def predict_action_batch(model: ArchetypeModel, culture: CultureVector,
                         windows: np.ndarray, bound: float = ACTION_BOUND) -> np.ndarray:
    px, py = forward_psi_batch(model, windows)
    ax = px @ culture.w_x
    ay = py @ culture.w_y
    return np.clip(np.column_stack([ax, ay]), -bound, bound)


def predict_action(model: ArchetypeModel, culture: CultureVector,
                   window: StateWindow, bound: float = ACTION_BOUND):
    out = predict_action_batch(model, culture, window.values[None, :, :], bound)
    return float(out[0, 0]), float(out[0, 1])


# ---------------------------------------------------------------------------
# persistence: versioned JSON, coefficient arrays row-major
# ---------------------------------------------------------------------------

def _branch_to_json(params: dict) -> dict:
    return {k: params[k].tolist() for k in network.PARAM_KEYS}


def _branch_from_json(raw: dict, hidden: int) -> dict:
    params = {}
    for k in network.PARAM_KEYS:
        if k not in raw:
            raise CorruptFile(f"branch missing coefficient block {k!r}")
        params[k] = np.asarray(raw[k], dtype=np.float64)
    ref = network.init_branch(hidden, np.random.default_rng(0))
    for k in network.PARAM_KEYS:
        if params[k].shape != ref[k].shape:
            raise CorruptFile(
                f"coefficient {k!r} has shape {params[k].shape}, expected {ref[k].shape}"
            )
    return params


def save_model(path, model: ArchetypeModel, culture: CultureVector) -> Path:
    payload = {
        "version": model.version,
        "seed": model.seed,
        "hidden": model.hidden,
        "branches": {a: _branch_to_json(model.branches[a]) for a in AXES},
        "culture": {"w_x": culture.w_x.tolist(), "w_y": culture.w_y.tolist()},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, allow_nan=False))
    return path


def load_model(path):
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    if not isinstance(payload, dict) or "version" not in payload:
        raise CorruptFile(f"{path}: not a model file")
    if payload["version"] != MODEL_FORMAT_VERSION:
        raise VersionMismatch(payload["version"], MODEL_FORMAT_VERSION)
    try:
        hidden = int(payload["hidden"])
        branches = {
            a: _branch_from_json(payload["branches"][a], hidden) for a in AXES
        }
        culture = CultureVector(
            np.asarray(payload["culture"]["w_x"], dtype=np.float64),
            np.asarray(payload["culture"]["w_y"], dtype=np.float64),
        )
        model = ArchetypeModel(branches, hidden, int(payload["seed"]))
    except CorruptFile:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFile(f"{path}: {exc}") from exc
    return model, culture
