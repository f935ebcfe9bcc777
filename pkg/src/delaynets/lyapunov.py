"""Lyapunov functionals evaluated along simulated trajectories.

Two witnesses are available: the segment functional

    V_s(t) = sum_i v_i ( |x_i(t)|
             + a/(1-d) * sum_l integral_{t-T_l(t)}^{t} sum_j |x_j(s)| ds )

whose decrease certifies column-dominance stabilization, and the weighted
max-norm V_m(x) = max_i |x_i| / w_i used in the row-dominance argument.
Decrease is checked empirically: forward differences of V_s after the gains
clear a supplied gate, with a blackout around state sign changes where the
|.| kinks make one-sample artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dde import HistoryBuffer
from .errors import ParameterError
from .systems import DelaySpec


@dataclass
class FunctionalConfig:
    """Weights and constants entering V_s / V_m."""

    weights: np.ndarray
    a: float = 0.0
    d: float = 0.0
    delays: list = None
    quadrature_stride: int = 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(w > 0):
            raise ParameterError("weights must be a positive 1-d vector")
        self.weights = w
        if self.a < 0:
            raise ParameterError(f"a must be >= 0, got {self.a}")
        if not (0.0 <= self.d < 1.0):
            raise ParameterError(f"d must lie in [0, 1), got {self.d}")
        if self.delays is None:
            self.delays = []
        for spec in self.delays:
            if not isinstance(spec, DelaySpec):
                raise ParameterError("delays must be DelaySpec instances")
        if int(self.quadrature_stride) != self.quadrature_stride or \
                self.quadrature_stride < 1:
            raise ParameterError("quadrature_stride must be a positive integer")
        self.quadrature_stride = int(self.quadrature_stride)


def eval_Vs(buf: HistoryBuffer, t: float, cfg: FunctionalConfig) -> float:
    """Segment functional at time t over the buffer's knots.

    Integrals use the composite trapezoid rule on the knot grid restricted to
    each delay window (subsampled by quadrature_stride); window endpoints off
    the grid get interpolated values. The integrand sum_j |x_j| is the same
    for every weighted term, so it is integrated once and scaled by sum(v).
    """
    v = cfg.weights
    if buf.dim != v.shape[0]:
        raise ParameterError(
            f"buffer dim {buf.dim} does not match weights ({v.shape[0]})"
        )
    x_t = buf.evaluate(t)
    base = float(v @ np.abs(x_t))
    if cfg.a == 0.0 or not cfg.delays:
        return base

    ts = buf.times
    xs = buf.states
    total = 0.0
    stride = cfg.quadrature_stride
    for spec in cfg.delays:
        lower = t - spec.value(t)
        i0 = int(np.searchsorted(ts, lower, side="right"))
        i1 = int(np.searchsorted(ts, t, side="left"))
        interior_t = ts[i0:i1:stride]
        interior_v = np.sum(np.abs(xs[i0:i1:stride]), axis=1)
        nodes = np.concatenate(([lower], interior_t, [t]))
        vals = np.concatenate((
            [np.sum(np.abs(buf.evaluate(lower)))],
            interior_v,
            [np.sum(np.abs(x_t))],
        ))
        total += float(np.trapezoid(vals, nodes))
    return base + float(v.sum()) * cfg.a / (1.0 - cfg.d) * total


def eval_Vm(x, w) -> float:
    """Weighted max-norm max_i |x_i| / w_i."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape or x.ndim != 1:
        raise ParameterError(
            f"state {x.shape} and weights {w.shape} must be matching vectors"
        )
    if not np.all(w > 0):
        raise ParameterError("weights must be element-wise positive")
    return float(np.max(np.abs(x) / w))


def dini_series(times, values):
    """Forward-difference derivative estimates: ((V_{k+1}-V_k)/dt at t_k)."""
    t = np.asarray(times, dtype=float)
    V = np.asarray(values, dtype=float)
    if t.ndim != 1 or t.shape != V.shape or t.shape[0] < 2:
        raise ParameterError("need matching 1-d series with at least 2 samples")
    if not np.all(np.diff(t) > 0):
        raise ParameterError("times must be strictly increasing")
    return t[:-1], np.diff(V) / np.diff(t)


def monitor_decrease(traj, cfg: FunctionalConfig, gate: float) -> dict:
    """Empirical decrease report for V_s after the gains clear `gate`.

    t_star is the first recorded time with min_i k_i(t) > gate. V_s is
    evaluated on recorded samples from max(t_star, first time with full
    window coverage); the report gives the fraction of forward differences
    <= tol with tol = 1e-9 * V_s(reference) + 1e-12, the reference being
    t_star itself when coverage allows, else the first covered sample.
    Steps adjacent to a state sign change are blacked out (|.| kinks).
    Gate never reached is reported as t_star = None, not an error.
    """
    times = np.asarray(traj.times, dtype=float)
    if traj.gains is None:
        raise ParameterError("trajectory has no gain record")
    mins = np.min(traj.gains, axis=1)
    hit = np.flatnonzero(mins > gate)
    if hit.size == 0:
        return {"t_star": None, "fraction": None, "worst_violation": None,
                "tol": None}
    t_star = float(times[hit[0]])

    max_T = max((spec.T_max for spec in cfg.delays), default=0.0)
    buf = HistoryBuffer(times, traj.states, window=max_T)
    t_min = times[0] + max_T
    start = max(t_star, t_min)
    elig = np.flatnonzero(times >= start - 1e-12)
    if elig.size < 2:
        raise ParameterError(
            "too few recorded samples after the gate for a decrease estimate"
        )

    e0 = int(elig[0])
    Vs = np.array([eval_Vs(buf, float(times[k]), cfg) for k in elig])
    tol = 1e-9 * Vs[0] + 1e-12

    _, D = dini_series(times[elig], Vs)

    # blackout: forward steps whose interval or neighbors contain a sign change
    xs = traj.states
    cross = np.any(xs[e0:-1] * xs[e0 + 1:] < 0.0, axis=1)
    keep = ~(cross | np.roll(cross, 1) | np.roll(cross, -1))
    # roll wraps ends; the wrapped entries only widen the blackout, never
    # un-blackout a crossing step, so no correction is needed
    D_kept = D[keep[: D.shape[0]]]
    if D_kept.size == 0:
        return {"t_star": t_star, "fraction": None, "worst_violation": None,
                "tol": float(tol)}

    viol = D_kept > tol
    worst = float(np.max(D_kept)) if np.any(viol) else None
    return {
        "t_star": t_star,
        "fraction": float(np.mean(~viol)),
        "worst_violation": worst,
        "tol": float(tol),
    }
