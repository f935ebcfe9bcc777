"""Decentralized adaptive gain law and closed-loop assembly.

Each node tunes its own gain from its own (delayed) state only:

    dk_i/dt = min{ a_i, b_i |x_i(t - T_i^k)| }

The closed loop is integrated as one augmented DDE: state x stacked with the
gain vector k, both advanced by the same RK4 scheme (the rule's right-hand
side is Lipschitz, so nothing is gained by a separate Euler update).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParameterError
from .systems import DelayedNetwork


def _as_vector(val, n, name):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ParameterError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr


class GainState:
    """Per-node adaptive gains with rate caps a, slopes b, delays T_k."""

    def __init__(self, n, k0, a, b, T_k):
        self.n = int(n)
        self.k0 = _as_vector(k0, n, "k0")
        self.a = _as_vector(a, n, "a")
        self.b = _as_vector(b, n, "b")
        self.T_k = _as_vector(T_k, n, "T_k")
        if np.any(self.k0 < 0):
            raise ParameterError("initial gains k0 must be >= 0")
        if np.any(self.a <= 0):
            raise ParameterError("rate caps a must be > 0")
        # b = 0 is allowed: it freezes the gain at k0 (fixed-gain equivalence)
        if np.any(self.b < 0):
            raise ParameterError("slopes b must be >= 0")
        if np.any(self.T_k < 0):
            raise ParameterError("measurement delays T_k must be >= 0")


def gain_rate(i, x_i_delayed, gains: GainState):
    """min(a_i, b_i |x_i(t - T_i^k)|); always in [0, a_i]."""
    return min(gains.a[i], gains.b[i] * abs(float(x_i_delayed)))


class Controller:
    """Adaptive (GainState) or fixed (constant vector) diagonal gains."""

    def __init__(self, mode, gains=None, k_fixed=None):
        if mode == "adaptive":
            if not isinstance(gains, GainState):
                raise ParameterError("adaptive mode needs a GainState")
            self.gains = gains
            self.k_fixed = None
        elif mode == "fixed":
            arr = np.asarray(k_fixed, dtype=float)
            if arr.ndim != 1 or not np.all(np.isfinite(arr)):
                raise ParameterError("fixed mode needs a finite gain vector")
            self.gains = None
            self.k_fixed = arr
        else:
            raise ParameterError(f"unknown controller mode {mode!r}")
        self.mode = mode

    @classmethod
    def adaptive(cls, gains: GainState):
        return cls("adaptive", gains=gains)

    @classmethod
    def fixed(cls, k_fixed):
        return cls("fixed", k_fixed=k_fixed)

    def dimension(self):
        return self.gains.n if self.mode == "adaptive" else len(self.k_fixed)


@dataclass
class ClosedLoop:
    """Assembled augmented DDE ready for the integrator."""

    dim: int
    n: int
    window: float
    min_positive_delay: float | None
    rhs: callable
    k0: np.ndarray | None
    mode: str
    _k_fixed: np.ndarray | None = None

    def recorded_gains(self, zs):
        """Gain samples from recorded augmented states (constant in fixed mode)."""
        if self.mode == "adaptive":
            return zs[:, self.n :].copy()
        return np.broadcast_to(self._k_fixed, (zs.shape[0], self.n)).copy()


def assemble_closed_loop(system: DelayedNetwork, controller: Controller,
                         allow_gain_delay_beyond_Td=False) -> ClosedLoop:
    """Build the closed-loop right-hand side in augmented form.

    State feedback: dx = f + B diag(k) x; dual: dx = f + diag(k) H. Adaptive
    mode appends dk per the update rule with delayed lookups at t - T_i^k;
    the delay set is the union of the system delays and the distinct T_i^k.
    """
    n = system.n
    if controller.dimension() != n:
        raise ParameterError(
            f"controller dimension {controller.dimension()} does not match n={n}"
        )

    delays = system.delays
    drift = system.drift
    state_fb = system.form_tag == "state_feedback"
    Bfn = system.input_matrix
    Hfn = system.output_map

    positive_delays = [spec.T_min for spec in delays]

    if controller.mode == "adaptive":
        g = controller.gains
        max_Tk = float(np.max(g.T_k))
        if max_Tk > system.T_d and not allow_gain_delay_beyond_Td:
            raise ConfigError(
                f"gain measurement delay {max_Tk} exceeds the system's maximum "
                f"delay T_d={system.T_d}; the update rule assumes T_i^k in "
                "[0, T_d]. Set allow_gain_delay_beyond_Td to extend the buffer "
                "window (phi is continued periodically)."
            )
        window = max(system.T_d, max_Tk)
        # group nodes by distinct T_k so each distinct delay costs one lookup
        groups = []
        for val in sorted(set(g.T_k.tolist())):
            idx = np.flatnonzero(g.T_k == val)
            groups.append((float(val), idx))
            if val > 0:
                positive_delays.append(float(val))
        a_vec, b_vec = g.a, g.b

        def rhs(t, z, hist):
            x = z[:n]
            ys = [hist(t - spec.value(t))[:n] for spec in delays]
            if state_fb:
                dx = drift(t, x, ys) + Bfn(t, x, ys) @ (z[n:] * x)
            else:
                dx = drift(t, x, ys) + z[n:] * Hfn(t, x, ys)
            dz = np.empty(2 * n)
            dz[:n] = dx
            for Tk, idx in groups:
                xd = x if Tk == 0.0 else hist(t - Tk)[:n]
                dz[n + idx] = np.minimum(a_vec[idx], b_vec[idx] * np.abs(xd[idx]))
            return dz

        return ClosedLoop(
            dim=2 * n, n=n, window=window,
            min_positive_delay=min(positive_delays) if positive_delays else None,
            rhs=rhs, k0=g.k0.copy(), mode="adaptive",
        )

    k_fixed = controller.k_fixed

    def rhs(t, z, hist):
        ys = [hist(t - spec.value(t))[:n] for spec in delays]
        if state_fb:
            return drift(t, z, ys) + Bfn(t, z, ys) @ (k_fixed * z)
        return drift(t, z, ys) + k_fixed * Hfn(t, z, ys)

    return ClosedLoop(
        dim=n, n=n, window=system.T_d,
        min_positive_delay=min(positive_delays) if positive_delays else None,
        rhs=rhs, k0=None, mode="fixed", _k_fixed=k_fixed.copy(),
    )
