"""Deployment-time action refinement via one-step policy iteration.

The state-action value of a candidate acceleration is read from the window
advanced by that action under deterministic kinematics (transition
probability 1, risk context frozen at the last observation):

    Q(s, a)  = psi(adv(s, a)) . w   summed over both axes
    score(a) = Q(s, a) + gamma * max_a' Q(adv(s, a), a')

The argmax candidate wins; ties go to the candidate closest to the plain
regressed action, then to the lexicographically smallest pair.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyGrid
from ..features import StateWindow
from .model import ACTION_BOUND, ArchetypeModel, CultureVector, forward_psi_batch, predict_action

DEFAULT_GRID_POINTS = 5
DEFAULT_GRID_SPAN = 1.0  # m/s^2 around the regressed action


def advance_window(window: StateWindow, action) -> StateWindow:
    """Shift the window one frame: kinematic update, TTC features carried over."""
    ax, ay = float(action[0]), float(action[1])
    vals = window.values
    dt = window.dt
    last = vals[-1]
    new = last.copy()
    new[0] = max(last[0] + ax * dt, 0.0)
    new[1] = last[1] + ay * dt
    new[2] = ax
    new[3] = ay
    return StateWindow(np.vstack([vals[1:], new[None, :]]), dt)


def default_grid(model: ArchetypeModel, culture: CultureVector, window: StateWindow,
                 bound: float = ACTION_BOUND):
    base = predict_action(model, culture, window, bound)
    offsets = np.linspace(-DEFAULT_GRID_SPAN, DEFAULT_GRID_SPAN, DEFAULT_GRID_POINTS)
    return base[0] + offsets, base[1] + offsets


def gpi_select_action(model: ArchetypeModel, culture: CultureVector,
                      window: StateWindow, grid=None, gamma: float = 0.9,
                      bound: float = ACTION_BOUND):
    """Pick the grid action maximizing the one-step lookahead score."""
    if grid is None:
        grid_x, grid_y = default_grid(model, culture, window, bound)
    else:
        grid_x, grid_y = (np.asarray(g, dtype=np.float64) for g in grid)
    if grid_x.size == 0 or grid_y.size == 0:
        raise EmptyGrid("gpi grid must contain at least one candidate per axis")

    candidates = [(float(ax), float(ay)) for ax in grid_x for ay in grid_y]
    m = len(candidates)

    def q_batch(windows):
        stack = np.stack([w.values for w in windows])
        px, py = forward_psi_batch(model, stack)
        return px @ culture.w_x + py @ culture.w_y

    first = [advance_window(window, a) for a in candidates]
    q1 = q_batch(first)
    second = [advance_window(s1, a2) for s1 in first for a2 in candidates]
    q2 = q_batch(second).reshape(m, m)
    scores = q1 + gamma * q2.max(axis=1)

    base = predict_action(model, culture, window, bound)
    best = None
    for i, cand in enumerate(candidates):
        if best is None or scores[i] > scores[best]:
            best = i
        elif scores[i] == scores[best]:
            di = (cand[0] - base[0]) ** 2 + (cand[1] - base[1]) ** 2
            bi = (candidates[best][0] - base[0]) ** 2 + (candidates[best][1] - base[1]) ** 2
            if di < bi or (di == bi and cand < candidates[best]):
                best = i
    return candidates[best]
