"""Delayed-network definitions: SIS epidemics, linear test nets, graphs.

A `DelayedNetwork` bundles the uncontrolled drift f(t, x, y_1..y_r), the
delay specifications, and either an input matrix B (state-feedback form,
control enters as B K x) or an output map H (dual form, control enters as
K H). Concrete builders below cover the SIS case study and the linear
constant-coefficient networks used as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_SPOT_CHECK_TIMES = (0.0, 1.0, 17.3)


class DelaySpec:
    """One delay T_l(t): constant, or time-varying with derivative bound d < 1."""

    def __init__(self, kind, T, d=0.0, T_min=None, T_max=None):
        if kind not in ("constant", "time_varying"):
            raise ParameterError(f"unknown delay kind {kind!r}")
        self.kind = kind
        if kind == "constant":
            T = float(T)
            if not (T > 0):
                raise ParameterError(f"constant delay must be > 0, got {T}")
            self.T = T
            self.d = 0.0
            self.T_min = T
            self.T_max = T
        else:
            if not callable(T):
                raise ParameterError("time-varying delay needs a callable T(t)")
            if not (0 <= d < 1):
                raise ParameterError(f"derivative bound d must be in [0,1), got {d}")
            if T_min is None or T_max is None:
                raise ParameterError(
                    "time-varying delay needs declared T_min and T_max bounds"
                )
            if not (0 < T_min <= T_max):
                raise ParameterError(
                    f"need 0 < T_min <= T_max, got {T_min}, {T_max}"
                )
            self.T = T
            self.d = float(d)
            self.T_min = float(T_min)
            self.T_max = float(T_max)

    @classmethod
    def constant(cls, T):
        return cls("constant", T)

    @classmethod
    def varying(cls, fn, d, T_min, T_max):
        return cls("time_varying", fn, d=d, T_min=T_min, T_max=T_max)

    def value(self, t):
        if self.kind == "constant":
            return self.T
        return float(self.T(t))

    def __repr__(self):
        if self.kind == "constant":
            return f"DelaySpec.constant({self.T!r})"
        return (
            f"DelaySpec.varying(d={self.d!r}, T_min={self.T_min!r}, "
            f"T_max={self.T_max!r})"
        )


class DelayedNetwork:
    """System definition: drift, delays, and B or H (exactly one)."""

    def __init__(self, n, delays, drift, input_matrix=None, output_map=None):
        if int(n) != n or n < 1:
            raise ParameterError(f"node count must be a positive integer, got {n}")
        if not delays:
            raise ParameterError("need at least one DelaySpec")
        if (input_matrix is None) == (output_map is None):
            raise ParameterError(
                "exactly one of input_matrix / output_map must be given"
            )
        self.n = int(n)
        self.delays = list(delays)
        self.r = len(self.delays)
        self.drift = drift
        self.input_matrix = input_matrix
        self.output_map = output_map
        self.form_tag = "state_feedback" if input_matrix is not None else "output_feedback"
        self.T_d = max(spec.T_max for spec in self.delays)
        self._spot_check()

    def _spot_check(self):
        zero = np.zeros(self.n)
        ys = [zero] * self.r
        for t in _SPOT_CHECK_TIMES:
            f0 = np.asarray(self.drift(t, zero, ys), dtype=float)
            if f0.shape != (self.n,):
                raise ParameterError(
                    f"drift returned shape {f0.shape}, expected ({self.n},)"
                )
            if np.max(np.abs(f0)) > 1e-9:
                raise ParameterError(
                    f"drift(t, 0, ..., 0) != 0 at t={t} (origin must be an equilibrium)"
                )
            if self.output_map is not None:
                h0 = np.asarray(self.output_map(t, zero, ys), dtype=float)
                if h0.shape != (self.n,):
                    raise ParameterError(
                        f"output_map returned shape {h0.shape}, expected ({self.n},)"
                    )
                if np.max(np.abs(h0)) > 1e-9:
                    raise ParameterError(
                        f"output_map(t, 0, ..., 0) != 0 at t={t}"
                    )
            if self.input_matrix is not None:
                b0 = np.asarray(self.input_matrix(t, zero, ys), dtype=float)
                if b0.shape != (self.n, self.n):
                    raise ParameterError(
                        f"input_matrix returned shape {b0.shape}, "
                        f"expected ({self.n}, {self.n})"
                    )

    @property
    def min_delay(self):
        return min(spec.T_min for spec in self.delays)


@dataclass
class CouplingGraph:
    """Nonnegative transmission rates c_{i,j} with the generator's seed."""

    n: int
    weights: np.ndarray
    seed: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n, self.n):
            raise ParameterError(
                f"weights shape {w.shape} does not match n={self.n}"
            )
        if np.any(w < 0):
            raise ParameterError("coupling weights must be nonnegative")
        self.weights = w

    def degree_sum(self):
        return int(np.count_nonzero(self.weights))


def sis_drift(t, x, y, graph: CouplingGraph):
    """Uncontrolled epidemic drift: component i is (1 - x_i) sum_j c_ij y_j.

    The recovery term -k_i x_i is supplied by the controller through
    B = -I_n, so the closed-loop rate of node i is this minus k_i x_i.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (graph.n,) or y.shape != (graph.n,):
        raise ParameterError(
            f"state/delayed-state dimensions {x.shape}/{y.shape} "
            f"do not match n={graph.n}"
        )
    return (1.0 - x) * (graph.weights @ y)


def make_sis_network(graph: CouplingGraph, T: float) -> DelayedNetwork:
    """SIS model as a DelayedNetwork: one constant delay, B = -I_n."""
    n = graph.n
    minus_eye = -np.eye(n)
    C = graph.weights

    def drift(t, x, ys):
        return (1.0 - x) * (C @ ys[0])

    def input_matrix(t, x, ys):
        return minus_eye

    return DelayedNetwork(
        n, [DelaySpec.constant(T)], drift, input_matrix=input_matrix
    )


def generate_scale_free(n, m, seed, coupling_scale=0.05) -> CouplingGraph:
    """Preferential-attachment graph, seeded with a complete graph on m+1 nodes.

    Each node beyond the seed core attaches m edges to existing nodes with
    probability proportional to current degree, without duplicate edges.
    Edge weights are coupling_scale on edges, symmetric. Deterministic in
    `seed`.
    """
    if not (n > m >= 1):
        raise ParameterError(f"need n > m >= 1, got n={n}, m={m}")
    rng = np.random.default_rng(int(seed))
    adj = np.zeros((n, n))
    core = m + 1
    for i in range(core):
        for j in range(i + 1, core):
            adj[i, j] = adj[j, i] = 1.0
    # repeated-nodes roulette: each node appears once per incident edge
    repeated = []
    for i in range(core):
        repeated.extend([i] * m)
    for source in range(core, n):
        targets = set()
        while len(targets) < m:
            targets.add(repeated[rng.integers(len(repeated))])
        for tgt in sorted(targets):
            adj[source, tgt] = adj[tgt, source] = 1.0
            repeated.append(tgt)
        repeated.extend([source] * m)
    return CouplingGraph(n=n, weights=coupling_scale * adj, seed=int(seed))


def check_box_invariance(traj, tol=1e-9):
    """True iff every recorded state lies in [-tol, 1+tol]^n.

    On failure also returns the first violation as (t, node, value), scanning
    in time order then node order.
    """
    states = traj.states
    bad = (states < -tol) | (states > 1.0 + tol)
    if not np.any(bad):
        return True, None
    flat = np.argwhere(bad)
    s, i = flat[0]
    return False, (float(traj.times[s]), int(i), float(states[s, i]))


def save_graph(graph: CouplingGraph, path):
    """Edge-list text export: header `# n=<n> seed=<seed>`, lines `i j weight`."""
    lines = [f"# n={graph.n} seed={graph.seed}\n"]
    w = graph.weights
    for i in range(graph.n):
        for j in range(i, graph.n):
            if w[i, j] != 0.0:
                lines.append(f"{i} {j} {float(w[i, j])!r}\n")
    with open(path, "w") as fh:
        fh.writelines(lines)


def load_graph(path) -> CouplingGraph:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# n="):
            raise ParameterError(f"bad edge-list header: {header!r}")
        fields = dict(part.split("=") for part in header[2:].split())
        n = int(fields["n"])
        seed = int(fields["seed"])
        w = np.zeros((n, n))
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i_s, j_s, w_s = line.split()
            i, j = int(i_s), int(j_s)
            w[i, j] = w[j, i] = float(w_s)
    return CouplingGraph(n=n, weights=w, seed=seed)


def linear_test_network(n=3, a=0.4, T=1.0) -> DelayedNetwork:
    """All-ones delayed coupling with B = -I: x' = a * 1 1^T x(t-T) + B K x.

    The delayed-Jacobian bound is exactly `a`. With gains 0 the Perron mode
    grows (planted unstable drift); with gains above the required bound the
    loop is certified column-dominant.
    """
    A1 = np.full((n, n), float(a))
    minus_eye = -np.eye(n)

    def drift(t, x, ys):
        return A1 @ ys[0]

    def input_matrix(t, x, ys):
        return minus_eye

    return DelayedNetwork(
        n, [DelaySpec.constant(T)], drift, input_matrix=input_matrix
    )
