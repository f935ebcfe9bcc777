"""Recorded simulation output and convergence bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# A node counts as converged when |x_i| stays below X_TOL over the final
# FINAL_FRAC fraction of the horizon. Stated in every summary.
X_TOL = 1e-3
FINAL_FRAC = 0.05


def final_window_mask(times, sigma, horizon):
    return times >= sigma + horizon * (1.0 - FINAL_FRAC) - 1e-12


def convergence_flags(times, states, sigma, horizon, tol=X_TOL):
    """Per-node flags: max |x_i| over the final window below `tol`."""
    mask = final_window_mask(times, sigma, horizon)
    tail = np.abs(states[mask])
    return np.max(tail, axis=0) < tol


def summarize(times, states, gains, flags, sigma, horizon):
    mask = final_window_mask(times, sigma, horizon)
    tail = np.abs(states[mask])
    max_final_x = float(np.max(tail))
    mean_final_gain = float(np.mean(gains[-1])) if gains is not None else None

    # earliest recorded time from which max_i |x_i| stays under X_TOL
    sup = np.max(np.abs(states), axis=1)
    below = sup < X_TOL
    t_conv = None
    if below[-1]:
        idx = len(below) - 1
        while idx > 0 and below[idx - 1]:
            idx -= 1
        t_conv = float(times[idx])

    return {
        "x_tol": X_TOL,
        "final_window_fraction": FINAL_FRAC,
        "max_final_x": max_final_x,
        "mean_final_gain": mean_final_gain,
        "n_converged": int(np.sum(flags)),
        "n_nodes": int(states.shape[1]),
        "all_converged": bool(np.all(flags)),
        "t_convergence": t_conv,
    }


@dataclass
class Trajectory:
    """Time series of state and gains plus summary statistics.

    `gains` holds the adaptive gains per sample; for a fixed controller it is
    the constant gain vector broadcast over samples so the record schema does
    not change shape between modes.
    """

    times: np.ndarray
    states: np.ndarray
    gains: np.ndarray
    converged: np.ndarray
    summary: dict = field(default_factory=dict)
    vs: np.ndarray | None = None
    vm: np.ndarray | None = None

    @property
    def n(self):
        return self.states.shape[1]

    def final_state(self):
        return self.states[-1]

    def final_gains(self):
        return self.gains[-1]
