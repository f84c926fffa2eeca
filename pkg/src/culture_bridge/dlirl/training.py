"""Archetype training and data-light culture calibration.

Training fits the successor branches by mini-batch MSE on recorded actions
with the culture vector pinned to all-ones; calibration freezes every
network coefficient and re-estimates only the two 12-component culture
vectors with the moment-tracked update, which reduces to a linear least
squares problem the closed-form oracle can check exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientData, NonFiniteLoss, RankDeficientWarning
from ..features import samples_to_arrays
from . import network
from .adam import AdamState
from .model import ACTION_BOUND, AXES, ArchetypeModel, CultureVector, predict_action_batch

RIDGE_LAMBDA = 1e-6


@dataclass
class TrainingConfig:
    gamma: float = 0.9  # discount for successor consistency and GPI
    batch_size: int = 128
    epochs: int = 80
    seed: int = 0
    td_weight: float = 0.0  # weight of the cumulant-consistency penalty
    gpi_enabled: bool = False
    action_bound: float = ACTION_BOUND
    learning_rate: float = 1e-3  # network coefficients
    w_learning_rate: float = 0.01  # culture vector
    hidden: int = 32
    val_fraction: float = 0.1
    calib_max_steps: int = 5000
    calib_tol: float = 1e-8

    def validate(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma: must be in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size: must be >= 1")
        if self.td_weight < 0.0:
            raise ValueError("td_weight: must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs: must be >= 1")


def _axis_loss_and_grads(params, windows, targets, w):
    """MSE of (psi . w) against targets plus backprop through the branch."""
    psi, cache = network.forward(params, windows)
    pred = psi @ w
    err = pred - targets
    loss = float(np.mean(err * err))
    dpred = 2.0 * err / err.shape[0]
    dpsi = dpred[:, None] * w[None, :]
    grads = network.backward(params, cache, dpsi)
    return loss, grads


def _td_pairs(samples, dt):
    """Indices (i, j) of samples from the same track one frame apart."""
    pairs = []
    for i in range(len(samples) - 1):
        a, b = samples[i], samples[i + 1]
        if a.source[0] == b.source[0] and abs((b.source[1] - a.source[1]) - dt) < 1e-9:
            pairs.append((i, i + 1))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _axis_td_grads(params, w_now, w_next, gamma, td_weight):
    """Consistency penalty ||psi(t) - phi(t) - gamma psi(t+1)||^2 on pairs."""
    psi_now, cache_now = network.forward(params, w_now, want_phi=True)
    psi_next, cache_next = network.forward(params, w_next)
    phi_now = cache_now["phi"]
    resid = psi_now - phi_now - gamma * psi_next
    m = resid.shape[0]
    loss = td_weight * float(np.mean(np.sum(resid * resid, axis=1)))
    dresid = td_weight * 2.0 * resid / m
    g_now = network.backward(params, cache_now, dresid, dphi=-dresid)
    g_next = network.backward(params, cache_next, -gamma * dresid)
    return loss, {k: g_now[k] + g_next[k] for k in g_now}


def train_archetype(samples, cfg: TrainingConfig) -> ArchetypeModel:
    """Fit both branches with the culture vector fixed to all-ones.

    Returns the coefficients with the lowest held-out loss; the loss curve
    is kept on the model as (epoch, train, val) triples.
    """
    cfg.validate()
    if len(samples) < cfg.batch_size:
        raise InsufficientData(
            f"need at least {cfg.batch_size} samples, got {len(samples)}"
        )
    windows, targets = samples_to_arrays(samples)
    n = windows.shape[0]

    rng = np.random.default_rng(cfg.seed)
    model = ArchetypeModel.init(cfg.hidden, rng, cfg.seed)
    ones = CultureVector.all_ones()

    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    td_pairs = _td_pairs(samples, samples[0].window.dt) if cfg.td_weight > 0 else None

    flat = {}
    for axis in AXES:
        for k, v in model.branches[axis].items():
            flat[f"{axis}.{k}"] = v
    opt = AdamState(alpha=cfg.learning_rate)

    best_val = np.inf
    best_snapshot = model.copy_params()
    for epoch in range(cfg.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, order.size, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grads = {}
            loss = 0.0
            for ai, axis in enumerate(AXES):
                l, g = _axis_loss_and_grads(
                    model.branches[axis], windows[batch], targets[batch, ai],
                    ones.axis(axis),
                )
                loss += l
                for k, v in g.items():
                    grads[f"{axis}.{k}"] = v
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training loss diverged at epoch {epoch}")
            opt.step(flat, grads)
            epoch_loss += loss
            n_batches += 1

        if td_pairs is not None and td_pairs.size:
            for start in range(0, td_pairs.shape[0], cfg.batch_size):
                chunk = td_pairs[start:start + cfg.batch_size]
                grads = {}
                for axis in AXES:
                    _, g = _axis_td_grads(
                        model.branches[axis],
                        windows[chunk[:, 0]], windows[chunk[:, 1]],
                        cfg.gamma, cfg.td_weight,
                    )
                    for k, v in g.items():
                        grads[f"{axis}.{k}"] = v
                opt.step(flat, grads)

        val_pred = predict_action_batch(model, ones, windows[val_idx], cfg.action_bound)
        val_loss = float(np.mean((val_pred - targets[val_idx]) ** 2))
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(f"validation loss diverged at epoch {epoch}")
        model.loss_curve.append((epoch, epoch_loss / max(n_batches, 1), val_loss))
        if val_loss < best_val:
            best_val = val_loss
            best_snapshot = model.copy_params()

    model.set_params(best_snapshot)
    return model


def _design_matrices(model: ArchetypeModel, samples):
    windows, targets = samples_to_arrays(samples)
    psi = {}
    for axis in AXES:
        out, _ = network.forward(model.branches[axis], windows)
        psi[axis] = out
    return psi, targets


def calibrate_culture(model: ArchetypeModel, samples, cfg: TrainingConfig) -> CultureVector:
    """Re-estimate only the culture vectors on frozen successor features.

    Starts from all-ones and iterates the moment-tracked update on the MSE
    gradient with respect to w until the update norm drops below
    cfg.calib_tol or cfg.calib_max_steps is reached. Network coefficients
    are never touched.
    """
    if len(samples) < network.OUT_DIM:
        raise InsufficientData(
            f"calibration needs at least {network.OUT_DIM} samples, got {len(samples)}"
        )
    psi, targets = _design_matrices(model, samples)
    n = targets.shape[0]

    w = {"x": np.ones(network.OUT_DIM), "y": np.ones(network.OUT_DIM)}
    opt = AdamState(alpha=cfg.w_learning_rate)
    for _ in range(cfg.calib_max_steps):
        grads = {}
        for ai, axis in enumerate(AXES):
            err = psi[axis] @ w[axis] - targets[:, ai]
            grads[axis] = 2.0 / n * (psi[axis].T @ err)
        upd_norm = opt.step(w, grads)
        if not (np.isfinite(w["x"]).all() and np.isfinite(w["y"]).all()):
            raise NonFiniteLoss("culture update diverged")
        if upd_norm < cfg.calib_tol:
            break
    return CultureVector(w["x"], w["y"])


def closed_form_culture(model: ArchetypeModel, samples) -> CultureVector:
    """Exact per-axis least squares over the frozen successor features.

    Rank-deficient designs fall back to a ridge solve (lambda = 1e-6) and
    raise RankDeficientWarning.
    """
    if len(samples) < network.OUT_DIM:
        raise InsufficientData(
            f"closed form needs at least {network.OUT_DIM} samples, got {len(samples)}"
        )
    psi, targets = _design_matrices(model, samples)
    out = {}
    for ai, axis in enumerate(AXES):
        a = psi[axis]
        sol, _, rank, _ = np.linalg.lstsq(a, targets[:, ai], rcond=None)
        if rank < network.OUT_DIM:
            warnings.warn(
                f"{axis}-axis design rank {rank} < {network.OUT_DIM}; using ridge",
                RankDeficientWarning,
            )
            gram = a.T @ a + RIDGE_LAMBDA * np.eye(network.OUT_DIM)
            sol = np.linalg.solve(gram, a.T @ targets[:, ai])
        out[axis] = sol
    return CultureVector(out["x"], out["y"])


def action_mse(model: ArchetypeModel, culture: CultureVector, samples,
               bound: float = ACTION_BOUND) -> float:
    """Mean squared action error over samples and both axes."""
    windows, targets = samples_to_arrays(samples)
    pred = predict_action_batch(model, culture, windows, bound)
    return float(np.mean((pred - targets) ** 2))
