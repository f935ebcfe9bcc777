"""Sampled verification of weighted diagonal-dominance stability conditions.

The dominance inequalities are quantified over continuous domains of states,
delayed states, and virtual arguments. Here they are checked on a
deterministic low-discrepancy point set plus seeded random points over
user-declared boxes, so a PASS means "certified on the checked samples",
never a proof. Margins are normalized by the weight of their own column/row,
which makes PASS/FAIL and the decay rate invariant under positive scaling of
the weight vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import EvaluationError, ParameterError


def _positive_vector(vec, name):
    arr = np.asarray(vec, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ParameterError(f"{name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
        raise ParameterError(f"{name} must be element-wise positive and finite")
    return arr


# ---------------------------------------------------------------------------
# sample domains


@dataclass
class Box:
    """Axis-aligned box; lo == hi collapses a coordinate to a point."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ParameterError("box lo/hi must be 1-d arrays of equal length")
        if np.any(self.hi < self.lo):
            raise ParameterError("box upper bounds must be >= lower bounds")

    @property
    def dim(self):
        return self.lo.shape[0]

    def map_unit(self, u):
        return self.lo + u * (self.hi - self.lo)


@dataclass
class SampleDomain:
    """Boxes for the argument groups (t, x, y_l, xi, eta_l) plus budget|seed.

    y defaults to the x box, xi to x, eta to y. Half the budget (rounded down
    to a power of two) comes from an unscrambled Sobol sequence whose first
    point is the all-lo corner; the rest are seeded uniform draws.
    """

    x: Box
    t_range: tuple = (0.0, 0.0)
    y: Box | None = None
    xi: Box | None = None
    eta: Box | None = None
    n_samples: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ParameterError("n_samples must be a positive integer")
        self.n_samples = int(self.n_samples)
        if self.y is None:
            self.y = self.x
        if self.xi is None:
            self.xi = self.x
        if self.eta is None:
            self.eta = self.y


@dataclass
class SamplePoint:
    """One evaluation point for the Jacobian / matrix evaluators."""

    t: float
    x: np.ndarray
    ys: list
    xi: np.ndarray | None = None
    etas: list = field(default_factory=list)
    tag: str = "sampled"

    def as_dict(self):
        if self.tag == "constant":
            return {"constant": True}
        out = {
            "t": self.t,
            "x": self.x.tolist(),
            "ys": [y.tolist() for y in self.ys],
        }
        if self.xi is not None:
            out["xi"] = self.xi.tolist()
        if self.etas:
            out["etas"] = [e.tolist() for e in self.etas]
        return out


def _unit_rows(n_samples, dim, seed):
    """Sobol block (power-of-two count, first row all zeros) then RNG rows."""
    n_sobol = 1
    while n_sobol * 2 <= max(1, n_samples // 2):
        n_sobol *= 2
    if n_samples == 1:
        n_sobol = 1
    sob = qmc.Sobol(d=dim, scramble=False)
    block = sob.random_base2(int(math.log2(n_sobol)))
    n_rand = n_samples - n_sobol
    if n_rand > 0:
        rand = np.random.default_rng(seed).random((n_rand, dim))
        return np.vstack([block, rand])
    return block


class JacobianSampler:
    """Streams (point, Jacobian) pairs for a virtual system g.

    dg_dxi(t, x, ys, xi, etas) must return an n x n matrix; dg_deta adds a
    trailing delay index ell. Matrices are produced one at a time; nothing
    proportional to n_samples * n^2 is ever materialized.
    """

    def __init__(self, n, r, dg_dxi, dg_deta=None, domain: SampleDomain = None):
        if domain is None:
            raise ParameterError("a SampleDomain is required")
        if int(r) != r or r < 0:
            raise ParameterError(f"delay count r must be a nonneg integer, got {r}")
        self.n = int(n)
        self.r = int(r)
        self.dg_dxi = dg_dxi
        self.dg_deta = dg_deta
        self.domain = domain

    @classmethod
    def constant(cls, J, deta=(), r=None):
        """Sampler for constant Jacobians; one degenerate sample point.

        r defaults to the number of deta matrices, or 1 when none are given
        (a system with one delay whose delayed Jacobian is not needed).
        """
        J = np.asarray(J, dtype=float)
        n = J.shape[0]
        mats = [np.asarray(D, dtype=float) for D in deta]
        if r is None:
            r = len(mats) if mats else 1
        dom = SampleDomain(x=Box(np.zeros(n), np.zeros(n)), n_samples=1)
        dg_deta = None
        if mats:
            dg_deta = lambda t, x, ys, xi, etas, ell: mats[ell]
        sampler = cls(n, r, lambda t, x, ys, xi, etas: J, dg_deta, dom)
        sampler._constant = True
        return sampler

    def iter_points(self):
        dom = self.domain
        n, r = self.n, self.r
        if dom.x.dim != n or dom.xi.dim != n:
            raise ParameterError(
                f"domain boxes have dim {dom.x.dim}, sampler expects {n}"
            )
        constant = getattr(self, "_constant", False)
        dim = 1 + n + r * dom.y.dim + n + r * dom.eta.dim
        t0, t1 = dom.t_range
        for u in _unit_rows(dom.n_samples, dim, dom.seed):
            pos = 1
            t = t0 + u[0] * (t1 - t0)
            x = dom.x.map_unit(u[pos : pos + n]); pos += n
            ys = []
            for _ in range(r):
                ys.append(dom.y.map_unit(u[pos : pos + dom.y.dim]))
                pos += dom.y.dim
            xi = dom.xi.map_unit(u[pos : pos + n]); pos += n
            etas = []
            for _ in range(r):
                etas.append(dom.eta.map_unit(u[pos : pos + dom.eta.dim]))
                pos += dom.eta.dim
            yield SamplePoint(float(t), x, ys, xi, etas,
                              tag="constant" if constant else "sampled")

    def iter_dxi(self):
        for p in self.iter_points():
            J = np.asarray(self.dg_dxi(p.t, p.x, p.ys, p.xi, p.etas), dtype=float)
            if J.shape != (self.n, self.n):
                raise EvaluationError(
                    f"dg_dxi returned shape {J.shape}, expected {(self.n, self.n)}"
                )
            yield p, J


class MatrixSampler:
    """Streams (point, matrix) pairs for an input matrix B(t, x, ys)."""

    def __init__(self, n, evaluator, domain: SampleDomain, r=1):
        self.n = int(n)
        self.r = int(r)
        self.evaluator = evaluator
        self.domain = domain

    @classmethod
    def constant(cls, M, r=1):
        M = np.asarray(M, dtype=float)
        n = M.shape[0]
        dom = SampleDomain(x=Box(np.zeros(n), np.zeros(n)), n_samples=1)
        sampler = cls(n, lambda t, x, ys: M, dom, r=r)
        sampler._constant = True
        return sampler

    def iter_matrices(self):
        dom = self.domain
        n, r = self.n, self.r
        constant = getattr(self, "_constant", False)
        dim = 1 + n + r * dom.y.dim
        t0, t1 = dom.t_range
        for u in _unit_rows(dom.n_samples, dim, dom.seed):
            pos = 1
            t = t0 + u[0] * (t1 - t0)
            x = dom.x.map_unit(u[pos : pos + n]); pos += n
            ys = []
            for _ in range(r):
                ys.append(dom.y.map_unit(u[pos : pos + dom.y.dim]))
                pos += dom.y.dim
            p = SamplePoint(float(t), x, ys, tag="constant" if constant else "sampled")
            M = np.asarray(self.evaluator(p.t, p.x, p.ys), dtype=float)
            if M.shape != (n, n):
                raise EvaluationError(
                    f"matrix evaluator returned shape {M.shape}, expected {(n, n)}"
                )
            yield p, M


# ---------------------------------------------------------------------------
# reports


@dataclass
class CertificateReport:
    """Outcome of one sampled dominance check.

    c_star is minus the worst normalized margin: c_star > 0 means every
    checked sample satisfied its inequality with slack at least c_star
    (PASS at decay rate c_star); c_star <= 0 means FAIL and worst_sample
    is the witness.
    """

    condition: str
    weight: list
    c_star: float
    worst_sample: dict
    samples_checked: int
    a_bound: float | None
    d_bound: float | None
    r: int

    @property
    def passed(self):
        return self.c_star > 0

    def to_dict(self):
        return {
            "condition": self.condition,
            "weight": list(map(float, self.weight)),
            "c_star": float(self.c_star),
            "worst_sample": self.worst_sample,
            "samples_checked": int(self.samples_checked),
            "a_bound": None if self.a_bound is None else float(self.a_bound),
            "d_bound": None if self.d_bound is None else float(self.d_bound),
            "r": int(self.r),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())


def _scan_margins(pairs, weight, offset, axis):
    """Worst normalized margin over streamed (point, matrix) pairs.

    axis="column": margin_j = [sum_i w_i (offset + A_ij)] / w_j with the
    diagonal entry signed; axis="row" transposes the roles. Returns
    (worst margin, witness point, witness index, count).
    """
    w_sum = float(weight.sum())
    worst = -math.inf
    worst_point = None
    worst_index = -1
    count = 0
    for point, M in pairs:
        if not np.all(np.isfinite(M)):
            raise EvaluationError(
                f"non-finite matrix entries at sample {point.as_dict()!r}"
            )
        A = np.abs(M)
        np.fill_diagonal(A, M.diagonal())
        if axis == "column":
            margins = (weight @ A + offset * w_sum) / weight
        else:
            margins = (A @ weight + offset * w_sum) / weight
        j = int(np.argmax(margins))
        count += 1
        if margins[j] > worst:
            worst = float(margins[j])
            worst_point = point
            worst_index = j
    if count == 0:
        raise ParameterError("empty sample set")
    return worst, worst_point, worst_index, count


def _report(condition, weight, worst, point, index, count, a, d, r):
    sample = point.as_dict()
    sample["index"] = index
    return CertificateReport(
        condition=condition, weight=weight.tolist(), c_star=-worst,
        worst_sample=sample, samples_checked=count, a_bound=a, d_bound=d, r=r,
    )


def check_column_dominance(sampler: JacobianSampler, v, a, d=0.0):
    """Weighted column dominance of dg/dxi with delay offset a*r/(1-d).

    Requires, at every sample and column j,
        v_j (a r/(1-d) + J_jj) + sum_{i!=j} v_i (a r/(1-d) + |J_ij|) <= -c v_j.
    """
    v = _positive_vector(v, "v")
    if a < 0:
        raise ParameterError(f"a must be >= 0, got {a}")
    if not (0.0 <= d < 1.0):
        raise ParameterError(f"d must lie in [0, 1), got {d}")
    offset = a * sampler.r / (1.0 - d)
    worst, point, idx, count = _scan_margins(sampler.iter_dxi(), v, offset, "column")
    return _report("column_dominance", v, worst, point, idx, count, a, d, sampler.r)


def check_row_dominance(sampler: JacobianSampler, w, a):
    """Weighted row dominance of dg/dxi with offset a*r (no 1/(1-d) factor)."""
    w = _positive_vector(w, "w")
    if a < 0:
        raise ParameterError(f"a must be >= 0, got {a}")
    offset = a * sampler.r
    worst, point, idx, count = _scan_margins(sampler.iter_dxi(), w, offset, "row")
    return _report("row_dominance", w, worst, point, idx, count, a, None, sampler.r)


def check_input_matrix_dominance(sampler: MatrixSampler, v):
    """Weighted column dominance of the input matrix B itself (no offset)."""
    v = _positive_vector(v, "v")
    worst, point, idx, count = _scan_margins(sampler.iter_matrices(), v, 0.0, "column")
    return _report("input_matrix_columns", v, worst, point, idx, count,
                   None, None, sampler.r)


def check_output_map_dominance(sampler, w):
    """Weighted row dominance of the output-map Jacobian dH/dx (no offset).

    Accepts a MatrixSampler over dH/dx values or a JacobianSampler whose
    dg_dxi plays that role.
    """
    w = _positive_vector(w, "w")
    pairs = (sampler.iter_matrices() if hasattr(sampler, "iter_matrices")
             else sampler.iter_dxi())
    worst, point, idx, count = _scan_margins(pairs, w, 0.0, "row")
    return _report("output_jacobian_rows", w, worst, point, idx, count,
                   None, None, sampler.r)


def estimate_a(sampler: JacobianSampler):
    """Largest |dg_i/deta_{l,j}| seen over all samples, delays, and entries.

    A sampled lower estimate of the true interconnection bound; consumers of
    required_gain_bound should inflate it (factor 1.2 by convention).
    """
    if sampler.r == 0:
        return 0.0
    if sampler.dg_deta is None:
        raise ParameterError("sampler has r > 0 but no dg_deta evaluator")
    best = 0.0
    for p in sampler.iter_points():
        for ell in range(sampler.r):
            G = np.asarray(sampler.dg_deta(p.t, p.x, p.ys, p.xi, p.etas, ell),
                           dtype=float)
            if not np.all(np.isfinite(G)):
                raise EvaluationError(
                    f"non-finite Jacobian entries at sample {p.as_dict()!r}"
                )
            m = float(np.max(np.abs(G)))
            if m > best:
                best = m
    return best


# ---------------------------------------------------------------------------
# weight search


@dataclass
class WeightSearchResult:
    feasible: bool
    weight: np.ndarray | None
    c: float
    mode: str
    n_matrices: int
    reduced: bool

    def to_dict(self):
        return {
            "feasible": self.feasible,
            "weight": None if self.weight is None else [float(v) for v in self.weight],
            "c": float(self.c),
            "mode": self.mode,
            "n_matrices": int(self.n_matrices),
            "reduced": self.reduced,
        }


# constraint blocks beyond this size are collapsed to an entrywise envelope
_MAX_EXACT_CONSTRAINTS = 20_000


def _iter_plain(matrices):
    if isinstance(matrices, MatrixSampler):
        for _, M in matrices.iter_matrices():
            yield M
        return
    if isinstance(matrices, np.ndarray) and matrices.ndim == 2:
        yield matrices
        return
    for M in matrices:
        yield np.asarray(M, dtype=float)


def find_weights(matrices, mode="column", V_max=1e6):
    """Search a positive weight vector certifying dominance of all samples.

    For fixed c the inequalities are linear in the weights, so feasibility is
    one linear program (weights boxed to [1, V_max], objective min sum of
    weights for a canonical representative). The decay rate c is maximized by
    monotone bisection; c can never exceed -max diagonal entry, and that cap
    is often attained exactly. Huge sample sets are collapsed to their
    entrywise envelope (max diagonal, max |off-diagonal|), which certifies a
    superset of the samples; the result is then flagged `reduced`.
    """
    if mode not in ("column", "row"):
        raise ParameterError(f"mode must be 'column' or 'row', got {mode!r}")

    blocks = []
    env = None
    count = 0
    n = None
    keep_exact = True
    for M in _iter_plain(matrices):
        if n is None:
            n = M.shape[0]
            if M.shape != (n, n):
                raise ParameterError("matrices must be square")
            env = np.full((n, n), -math.inf)
        A = np.abs(M)
        np.fill_diagonal(A, M.diagonal())
        env = np.maximum(env, A)
        count += 1
        if keep_exact:
            blocks.append(A.T.copy() if mode == "column" else A)
            if count * n > _MAX_EXACT_CONSTRAINTS:
                blocks = []
                keep_exact = False
    if count == 0:
        raise ParameterError("empty sample set")

    if keep_exact:
        base = np.vstack(blocks)
        reduced = False
    else:
        base = env.T.copy() if mode == "column" else env.copy()
        reduced = True
    m_rows = base.shape[0]
    diag_cols = np.tile(np.arange(n), m_rows // n)
    rows = np.arange(m_rows)

    def solve(c):
        A_ub = base.copy()
        A_ub[rows, diag_cols] += c
        res = optimize.linprog(
            np.ones(n), A_ub=A_ub, b_ub=np.zeros(m_rows),
            bounds=[(1.0, V_max)] * n, method="highs",
        )
        return res if res.status == 0 else None

    hi0 = float(-np.max(env.diagonal()))
    if hi0 <= 0:
        # some sampled diagonal entry is >= 0: its column/row sum cannot be
        # pushed strictly negative by positive weights
        return WeightSearchResult(False, None, 0.0, mode, count, reduced)

    res = solve(hi0)
    if res is not None:
        return WeightSearchResult(True, res.x.copy(), hi0, mode, count, reduced)

    # geometric probe down for a feasible level, then bisect to the boundary
    lo, hi = None, hi0
    c_try = hi0
    for _ in range(64):
        c_try *= 0.5
        res = solve(c_try)
        if res is not None:
            lo = c_try
            break
        hi = c_try
    if lo is None:
        return WeightSearchResult(False, None, 0.0, mode, count, reduced)
    best = res
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        r_mid = solve(mid)
        if r_mid is not None:
            lo, best = mid, r_mid
        else:
            hi = mid
    return WeightSearchResult(True, best.x.copy(), lo, mode, count, reduced)


# ---------------------------------------------------------------------------
# explicit gain levels


def required_gain_bound(a, r, d, c, v):
    """Uniform gain level above which column-dominance stabilization holds.

    k_min = max_j (a r / (c (1 - d))) (1 + sum_i v_i / v_j). Gains strictly
    above this certify the sampled domain when a upper-bounds the delayed
    Jacobians and c is the dominance margin for weights v.
    """
    v = _positive_vector(v, "v")
    if c <= 0:
        raise ParameterError(f"c must be > 0, got {c}")
    if not (0.0 <= d < 1.0):
        raise ParameterError(f"d must lie in [0, 1), got {d}")
    if a < 0:
        raise ParameterError(f"a must be >= 0, got {a}")
    if a == 0:
        return 0.0
    s = float(v.sum())
    return float(np.max(a * r / (c * (1.0 - d)) * (1.0 + s / v)))


def required_gain_bound_dual(a, r, c, w):
    """Row-dominance analog: k_min = max_i (a r / c)(1 + sum_j w_j / w_i)."""
    w = _positive_vector(w, "w")
    if c <= 0:
        raise ParameterError(f"c must be > 0, got {c}")
    if a < 0:
        raise ParameterError(f"a must be >= 0, got {a}")
    if a == 0:
        return 0.0
    s = float(w.sum())
    return float(np.max(a * r / c * (1.0 + s / w)))


# ---------------------------------------------------------------------------
# planted failing cases, kept here so checker regressions are self-contained


PLANTED_FAILURES = [
    {
        "check": "column_dominance",
        "matrix": [[-3.0, 0.0], [0.0, -3.0]],
        "a": 2.0, "d": 0.0,
        "weight": [1.0, 1.0],
        "expected_margin": 1.0, "expected_index": 0,
    },
    {
        "check": "row_dominance",
        "matrix": [[-1.0, 2.0], [2.0, -1.0]],
        "a": 0.0,
        "weight": [1.0, 1.0],
        "expected_margin": 1.0, "expected_index": 0,
    },
    {
        "check": "input_matrix_columns",
        "matrix": [[-1.0, 2.0], [2.0, -1.0]],
        "weight": [1.0, 1.0],
        "expected_margin": 1.0, "expected_index": 0,
    },
    {
        "check": "output_jacobian_rows",
        "matrix": [[-1.0, 2.0], [0.0, -1.0]],
        "weight": [1.0, 1.0],
        "expected_margin": 1.0, "expected_index": 0,
    },
]


def run_planted_case(case):
    """Evaluate one PLANTED_FAILURES entry; the report must FAIL."""
    M = np.asarray(case["matrix"], dtype=float)
    w = case["weight"]
    kind = case["check"]
    if kind == "column_dominance":
        return check_column_dominance(
            JacobianSampler.constant(M), w, case["a"], case["d"]
        )
    if kind == "row_dominance":
        return check_row_dominance(JacobianSampler.constant(M), w, case["a"])
    if kind == "input_matrix_columns":
        return check_input_matrix_dominance(MatrixSampler.constant(M), w)
    if kind == "output_jacobian_rows":
        return check_output_map_dominance(JacobianSampler.constant(M), w)
    raise ParameterError(f"unknown planted check {kind!r}")
