"""Fixed-step integration of delay differential equations.

The integrator is classical RK4; delayed-state arguments are resolved through
a sliding `HistoryBuffer` holding time-stamped states with piecewise-cubic
Hermite interpolation. Slopes for the Hermite pieces come from three-point
finite differences of the knots themselves, so nothing but states is stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericBlowupError, OutOfRangeError, ParameterError
from .trajectory import Trajectory, convergence_flags, summarize


@dataclass
class SolverConfig:
    """Step size, horizon, and recording stride for one simulation run."""

    h: float
    horizon: float
    record_stride: int = 1

    def __post_init__(self):
        if not (self.h > 0):
            raise ParameterError(f"step h must be > 0, got {self.h}")
        if not (self.horizon >= self.h):
            raise ParameterError(
                f"horizon must be >= h, got horizon={self.horizon}, h={self.h}"
            )
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ParameterError(
                f"record_stride must be a positive integer, got {self.record_stride}"
            )
        self.record_stride = int(self.record_stride)


class HistoryBuffer:
    """Time-stamped states on a sliding window with Hermite interpolation.

    Knot times are strictly increasing. Once integration has started the
    buffer always spans at least ``[t_now - window, t_now]``; knots older
    than ``t_now - window - margin`` are dropped (margin of a few spacings so
    interior slope stencils near the window edge never change when old knots
    go away).

    Parameters
    ----------
    times, states : arrays
        Initial knots, typically the sampled initial function.
    window : float
        Maximum lookback the buffer must keep covered.
    junction : float, optional
        Time separating pre-seeded history from computed solution. Slope
        stencils never straddle it: the solution's derivative generally
        differs from the initial function's, and a central difference across
        that point would contaminate both neighbouring intervals.
    """

    def __init__(self, times, states, window, junction=None):
        t = np.asarray(times, dtype=float)
        x = np.asarray(states, dtype=float)
        if t.ndim != 1 or len(t) == 0:
            raise ParameterError("need at least one knot")
        if x.ndim == 1:
            x = x[:, None] if len(t) > 1 else x[None, :]
        if x.shape[0] != t.shape[0]:
            raise ParameterError(
                f"times ({t.shape[0]}) and states ({x.shape[0]}) disagree"
            )
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ParameterError("knot times must be strictly increasing")
        if not (window >= 0):
            raise ParameterError(f"window must be >= 0, got {window}")

        self.window = float(window)
        self.junction = None if junction is None else float(junction)
        self.dim = x.shape[1]
        cap = len(t) + 4096
        self._t = np.empty(cap, dtype=float)
        self._x = np.empty((cap, self.dim), dtype=float)
        self._t[: len(t)] = t
        self._x[: len(t)] = x
        self._lo = 0
        self._hi = len(t)
        # lookup instrumentation: smallest slack between a query and the
        # window edge actually in force, for window-sufficiency assertions
        self.lookup_low_water = math.inf
        self.n_lookups = 0

    # -- knot access -------------------------------------------------------

    @property
    def times(self):
        return self._t[self._lo : self._hi]

    @property
    def states(self):
        return self._x[self._lo : self._hi]

    @property
    def t_last(self):
        return self._t[self._hi - 1]

    @property
    def last_state(self):
        return self._x[self._hi - 1]

    def span(self):
        return self._t[self._lo], self._t[self._hi - 1]

    # -- growth ------------------------------------------------------------

    def append(self, t, state):
        if not t > self._t[self._hi - 1]:
            raise ParameterError(
                f"appended knot t={t!r} not after last knot {self._t[self._hi - 1]!r}"
            )
        if self._hi == len(self._t):
            self._compact()
        self._t[self._hi] = t
        self._x[self._hi] = state
        self._hi += 1
        # retention: drop knots behind the window plus a 4-spacing margin so
        # slope stencils of any in-window interval keep their neighbours
        if self._hi - self._lo > 4:
            spacing = t - self._t[self._hi - 2]
            cutoff = t - self.window - 4.0 * spacing
            lo = self._lo
            while self._t[lo] < cutoff and self._hi - lo > 4:
                lo += 1
            self._lo = lo

    def _compact(self):
        live = self._hi - self._lo
        cap = max(2 * live, live + 4096)
        nt = np.empty(cap, dtype=float)
        nx = np.empty((cap, self.dim), dtype=float)
        nt[:live] = self._t[self._lo : self._hi]
        nx[:live] = self._x[self._lo : self._hi]
        self._t, self._x = nt, nx
        self._lo, self._hi = 0, live

    # -- interpolation -----------------------------------------------------

    def _slope(self, j, side):
        """Finite-difference slope at knot j for the interval on `side`.

        side=+1: j is the left endpoint of [t_j, t_{j+1}];
        side=-1: j is the right endpoint of [t_{j-1}, t_j].
        Central except at buffer edges and at the junction knot, where the
        stencil stays on the interval's side.
        """
        t, x, lo, hi = self._t, self._x, self._lo, self._hi
        one_sided = (self.junction is not None and t[j] == self.junction)
        if side > 0:
            if j - 1 < lo or one_sided:
                # right-facing stencil j, j+1, j+2
                if j + 2 >= hi:
                    return (x[j + 1] - x[j]) / (t[j + 1] - t[j])
                e0 = t[j + 1] - t[j]
                e1 = t[j + 2] - t[j + 1]
                return (
                    -(2 * e0 + e1) / (e0 * (e0 + e1)) * x[j]
                    + (e0 + e1) / (e0 * e1) * x[j + 1]
                    - e0 / (e1 * (e0 + e1)) * x[j + 2]
                )
        else:
            if j + 1 >= hi or one_sided:
                # left-facing stencil j-2, j-1, j
                if j - 2 < lo:
                    return (x[j] - x[j - 1]) / (t[j] - t[j - 1])
                d0 = t[j - 1] - t[j - 2]
                d1 = t[j] - t[j - 1]
                return (
                    (2 * d1 + d0) / (d1 * (d0 + d1)) * x[j]
                    - (d0 + d1) / (d0 * d1) * x[j - 1]
                    + d1 / (d0 * (d0 + d1)) * x[j - 2]
                )
        d0 = t[j] - t[j - 1]
        d1 = t[j + 1] - t[j]
        if d0 == d1:
            return (x[j + 1] - x[j - 1]) / (2.0 * d0)
        # unequal spacing: derivative of the quadratic through the three knots
        return (
            x[j + 1] * d0 / (d1 * (d0 + d1))
            + x[j] * (d1 - d0) / (d0 * d1)
            - x[j - 1] * d1 / (d0 * (d0 + d1))
        )

    def evaluate(self, t_query):
        """State at `t_query`, exact at knots, cubic Hermite between them."""
        lo, hi = self._lo, self._hi
        t = self._t
        tq = float(t_query)
        t0, t1 = t[lo], t[hi - 1]
        if tq < t0 or tq > t1:
            raise OutOfRangeError(tq, (t0, t1))
        self.n_lookups += 1
        slack = min(tq - t0, t1 - tq)
        if slack < self.lookup_low_water:
            self.lookup_low_water = slack
        if hi - lo == 1:
            return self._x[lo].copy()
        j = lo + int(np.searchsorted(t[lo:hi], tq, side="right")) - 1
        if t[j] == tq:
            return self._x[j].copy()
        if j == hi - 1:
            j -= 1
        dt = t[j + 1] - t[j]
        s = (tq - t[j]) / dt
        m0 = self._slope(j, +1)
        m1 = self._slope(j + 1, -1)
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        return (
            h00 * self._x[j]
            + h01 * self._x[j + 1]
            + (h10 * dt) * m0
            + (h11 * dt) * m1
        )


def history_eval(buf: HistoryBuffer, t_query: float):
    """Interpolated state at `t_query`; raises OutOfRangeError off the span."""
    return buf.evaluate(t_query)


def _rk4_increment(rhs, buf: HistoryBuffer, t0: float, t1: float, h: float, x0):
    """The RK4 update (h/6)(k1 + 2k2 + 2k3 + k4) without adding it to x0.

    t1 is the step's right endpoint as the caller will record it; stage times
    are derived from both endpoints so the k4 stage queries the exact knot
    time that is about to be appended.
    """
    cache = {}

    def hist(tq):
        v = cache.get(tq)
        if v is None:
            v = buf.evaluate(tq)
            cache[tq] = v
        return v

    half = 0.5 * h
    tm = 0.5 * (t0 + t1)
    k1 = rhs(t0, x0, hist)
    k2 = rhs(tm, x0 + half * k1, hist)
    k3 = rhs(tm, x0 + half * k2, hist)
    k4 = rhs(t1, x0 + h * k3, hist)
    # dividing the stage sum by 6 before scaling keeps the h factor exact
    # whenever the stage sum is, e.g. on constant-slope segments
    return h * ((k1 + 2.0 * (k2 + k3) + k4) / 6.0)


def step_rk4(rhs, buf: HistoryBuffer, t: float, h: float):
    """One classical RK4 step from the buffer's last knot.

    `rhs(t, x, hist)` must resolve every delayed-state argument through
    `hist`, a memoized view of `history_eval` on `buf` (stage lookups at the
    same past time are computed once). Returns the state at t + h; the caller
    appends it to the buffer.
    """
    x0 = buf.last_state
    out = x0 + _rk4_increment(rhs, buf, t, t + h, h, x0)
    if not np.all(np.isfinite(out)):
        raise NumericBlowupError(t, np.asarray(x0).copy())
    return out


def extend_phi_periodic(phi, domain: float):
    """Continue an initial function defined on [-domain, 0] periodically.

    Used when a gain measurement delay exceeds the system's maximum delay and
    the buffer window must reach further back than phi's domain.
    """
    if not (domain > 0):
        raise ParameterError(f"phi domain must be positive, got {domain}")

    def extended(theta):
        if theta >= -domain:
            return phi(theta)
        wrapped = -((-theta) % domain)
        if wrapped == 0.0:
            wrapped = -domain
        return phi(wrapped)

    return extended


def simulate(system, controller, phi, cfg: SolverConfig, sigma: float = 0.0,
             allow_gain_delay_beyond_Td: bool = False) -> Trajectory:
    """Integrate the closed loop of `system` under `controller` from `phi`.

    phi is a callable theta -> state vector on [-window, 0] (theta relative
    to sigma); the adaptive-gain part of the augmented state is seeded at
    k0. Returns recorded (t, x, k) samples at the configured stride plus
    per-node convergence flags.
    """
    from .control import assemble_closed_loop

    loop = assemble_closed_loop(
        system, controller, allow_gain_delay_beyond_Td=allow_gain_delay_beyond_Td
    )
    h = cfg.h
    min_delay = loop.min_positive_delay
    if min_delay is not None and h > min_delay / 2.0 + 1e-12:
        raise ParameterError(
            f"step h={h} exceeds half the smallest delay ({min_delay}); "
            "intra-step lookups would reach into the future of the buffer"
        )

    probe = np.asarray(phi(0.0), dtype=float).reshape(-1)
    if probe.shape[0] != system.n:
        raise ParameterError(
            f"phi has dimension {probe.shape[0]}, system expects {system.n}"
        )

    window = loop.window
    n_seed = max(1, math.ceil(window / h - 1e-9))
    thetas = (np.arange(n_seed + 1) - n_seed) * h
    knots_t = sigma + thetas
    knots_x = np.empty((n_seed + 1, loop.dim))
    for idx, theta in enumerate(thetas):
        th = max(theta, -window)  # guard rounding below -window
        knots_x[idx, : system.n] = np.asarray(phi(th), dtype=float).reshape(-1)
    if loop.dim > system.n:
        knots_x[:, system.n :] = loop.k0  # gains are flat before sigma

    buf = HistoryBuffer(knots_t, knots_x, window, junction=sigma)

    n_steps = math.ceil(cfg.horizon / h - 1e-9)
    stride = cfg.record_stride
    rec_t = [sigma]
    rec_z = [knots_x[-1].copy()]
    z = knots_x[-1].copy()
    comp = np.zeros_like(z)  # Kahan carry: keeps state roundoff from drifting
    # overflow inside a diverging step is diagnosed by the finite check below;
    # the warnings would only duplicate the NumericBlowupError
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(n_steps):
            t_j = sigma + j * h
            t_next = sigma + (j + 1) * h
            incr = _rk4_increment(loop.rhs, buf, t_j, t_next, h, z) - comp
            z_new = z + incr
            comp = (z_new - z) - incr
            z = z_new
            if not np.all(np.isfinite(z)):
                raise NumericBlowupError(t_j, buf.last_state.copy())
            buf.append(t_next, z)
            if (j + 1) % stride == 0 or j + 1 == n_steps:
                rec_t.append(t_next)
                rec_z.append(z.copy())

    times = np.asarray(rec_t)
    zs = np.vstack(rec_z)
    states = zs[:, : system.n]
    gains = loop.recorded_gains(zs)
    flags = convergence_flags(times, states, sigma, cfg.horizon)
    summary = summarize(times, states, gains, flags, sigma, cfg.horizon)
    return Trajectory(
        times=times, states=states, gains=gains, converged=flags, summary=summary
    )
