"""Minimal gated recurrent branch with hand-written backprop.

One branch per action axis: the 4-frame window (scaled to O(1) features)
runs through a single-gate recurrent cell, and the final hidden state maps
through tanh heads to the 12-component successor vector (plus an optional
12-component cumulant head used only by the TD-consistency regularizer).

Cell equations, h_0 = 0:
    f_t = sigmoid(x_t Wf + h_{t-1} Uf + bf)
    c_t = tanh(x_t Wc + (f_t * h_{t-1}) Uc + bc)
    h_t = (1 - f_t) * h_{t-1} + f_t * c_t
Heads:
    psi = tanh(h_T Wp + bp)        phi = tanh(h_T Wq + bq)
"""

import numpy as np

from ..features import FEATURE_SCALE, STATE_DIM

OUT_DIM = 12

PARAM_KEYS = ("Wf", "Uf", "bf", "Wc", "Uc", "bc", "Wp", "bp", "Wq", "bq")


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _xavier(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_branch(hidden: int, rng: np.random.Generator) -> dict:
    d = STATE_DIM
    return {
        "Wf": _xavier(rng, d, hidden),
        "Uf": _xavier(rng, hidden, hidden),
        "bf": np.zeros(hidden),
        "Wc": _xavier(rng, d, hidden),
        "Uc": _xavier(rng, hidden, hidden),
        "bc": np.zeros(hidden),
        "Wp": _xavier(rng, hidden, OUT_DIM),
        "bp": np.zeros(OUT_DIM),
        "Wq": _xavier(rng, hidden, OUT_DIM),
        "bq": np.zeros(OUT_DIM),
    }


def zero_grads(params: dict) -> dict:
    return {k: np.zeros_like(v) for k, v in params.items()}


def forward(params: dict, windows: np.ndarray, want_phi: bool = False):
    """windows: (N, 4, 12) raw feature values. Returns (psi, cache)."""
    xs = windows / FEATURE_SCALE
    n, steps, _ = xs.shape
    hidden = params["bf"].shape[0]
    h = np.zeros((n, hidden))
    trace = []
    for t in range(steps):
        xt = xs[:, t, :]
        f = _sigmoid(xt @ params["Wf"] + h @ params["Uf"] + params["bf"])
        g = f * h
        c = np.tanh(xt @ params["Wc"] + g @ params["Uc"] + params["bc"])
        h_new = (1.0 - f) * h + f * c
        trace.append((h, f, g, c))
        h = h_new
    psi = np.tanh(h @ params["Wp"] + params["bp"])
    phi = np.tanh(h @ params["Wq"] + params["bq"]) if want_phi else None
    cache = {"xs": xs, "trace": trace, "h_last": h, "psi": psi, "phi": phi}
    return psi, cache


def backward(params: dict, cache: dict, dpsi: np.ndarray, dphi=None) -> dict:
    """Gradients of a scalar loss given d loss / d psi (and optionally d phi)."""
    grads = zero_grads(params)
    h_last = cache["h_last"]
    psi = cache["psi"]

    dzp = dpsi * (1.0 - psi * psi)
    grads["Wp"] = h_last.T @ dzp
    grads["bp"] = dzp.sum(axis=0)
    dh = dzp @ params["Wp"].T

    if dphi is not None:
        phi = cache["phi"]
        dzq = dphi * (1.0 - phi * phi)
        grads["Wq"] = h_last.T @ dzq
        grads["bq"] = dzq.sum(axis=0)
        dh = dh + dzq @ params["Wq"].T

    xs = cache["xs"]
    for t in range(len(cache["trace"]) - 1, -1, -1):
        h_prev, f, g, c = cache["trace"][t]
        xt = xs[:, t, :]
        dc = dh * f
        df = dh * (c - h_prev)
        dh_prev = dh * (1.0 - f)

        dzc = dc * (1.0 - c * c)
        grads["Wc"] += xt.T @ dzc
        grads["Uc"] += g.T @ dzc
        grads["bc"] += dzc.sum(axis=0)
        dg = dzc @ params["Uc"].T
        df += dg * h_prev
        dh_prev += dg * f

        dzf = df * f * (1.0 - f)
        grads["Wf"] += xt.T @ dzf
        grads["Uf"] += h_prev.T @ dzf
        grads["bf"] += dzf.sum(axis=0)
        dh_prev += dzf @ params["Uf"].T

        dh = dh_prev
    return grads
