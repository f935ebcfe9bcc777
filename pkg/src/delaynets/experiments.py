"""Experiment orchestration: configuration, runs, sweeps, certification.

The JSON config schema has four sections (model, controller, sim, outputs)
plus an optional certify section. Seed handling is explicit everywhere: a
sweep/compare seed s becomes graph_seed = s and phi seed = s + 10000, so
model topology and initial data vary together but reproducibly. All outputs
are written with repr() floats and sorted JSON keys; rerunning a config
byte-reproduces every file.
"""

from __future__ import annotations

import copy
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .certificates import (
    Box,
    JacobianSampler,
    MatrixSampler,
    SampleDomain,
    check_input_matrix_dominance,
    estimate_a,
    find_weights,
    required_gain_bound,
)
from .control import Controller, GainState
from .dde import SolverConfig, extend_phi_periodic, simulate
from .errors import ConfigError, ParameterError
from .lyapunov import FunctionalConfig, monitor_decrease
from .systems import (
    check_box_invariance,
    generate_scale_free,
    linear_test_network,
    make_sis_network,
    save_graph,
)
from .trajectory import Trajectory

# sampled estimates of a under-shoot the true bound; gain-bound consumers
# inflate by this factor
A_INFLATION = 1.2
PHI_SEED_OFFSET = 10_000


# ---------------------------------------------------------------------------
# configuration


def _field(src, prefix, problems, key, *, required=False, default=None,
           kind=None, pred=None, msg="invalid value"):
    if key not in src or src[key] is None:
        if required:
            problems.append(f"{prefix}.{key}: required")
        return default
    val = src[key]
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            val = int(val)
        elif kind is float:
            if isinstance(val, bool):
                raise ValueError
            val = float(val)
        elif kind is bool:
            if not isinstance(val, bool):
                raise ValueError
        elif kind is str:
            if not isinstance(val, str):
                raise ValueError
        elif kind == "vector":
            if isinstance(val, bool):
                raise ValueError
            if isinstance(val, (int, float)):
                val = float(val)
            else:
                val = [float(x) for x in val]
    except (TypeError, ValueError):
        problems.append(f"{prefix}.{key}: expected {getattr(kind, '__name__', kind)}")
        return default
    if pred is not None and not pred(val):
        problems.append(f"{prefix}.{key}: {msg}")
        return default
    return val


def _reject_unknown(src, allowed, prefix, problems):
    for key in src:
        if key not in allowed:
            problems.append(f"{prefix}.{key}: unknown field")


@dataclass
class ModelConfig:
    type: str
    n: int | None = None
    m: int | None = None
    graph_seed: int | None = None
    coupling_scale: float | None = None
    delay: float | None = None

    def to_dict(self):
        return {
            "type": self.type, "n": self.n, "m": self.m,
            "graph_seed": self.graph_seed,
            "coupling_scale": self.coupling_scale, "delay": self.delay,
        }


@dataclass
class ControllerConfig:
    mode: str
    a: object = None
    b: object = None
    T_k: object = None
    k0: object = None
    k_fixed: object = None
    allow_gain_delay_beyond_Td: bool = False

    def to_dict(self):
        return {
            "mode": self.mode, "a": self.a, "b": self.b, "T_k": self.T_k,
            "k0": self.k0, "k_fixed": self.k_fixed,
            "allow_gain_delay_beyond_Td": self.allow_gain_delay_beyond_Td,
        }


@dataclass
class PhiConfig:
    type: str
    lo: float | None = None
    hi: float | None = None
    seed: int | None = None
    value: object = None

    def to_dict(self):
        return {"type": self.type, "lo": self.lo, "hi": self.hi,
                "seed": self.seed, "value": self.value}


@dataclass
class SimConfig:
    h: float
    horizon: float
    record_stride: int
    phi: PhiConfig

    def to_dict(self):
        return {"h": self.h, "horizon": self.horizon,
                "record_stride": self.record_stride, "phi": self.phi.to_dict()}


@dataclass
class OutputsConfig:
    dir: str | None = None
    emit_lyapunov: bool = False
    lyapunov_gate: float | None = None

    def to_dict(self):
        return {"dir": self.dir, "emit_lyapunov": self.emit_lyapunov,
                "lyapunov_gate": self.lyapunov_gate}


@dataclass
class CertifySettings:
    budget: int = 10_000
    seed: int = 0
    find_weights: bool = False
    V_max: float = 1e6

    def to_dict(self):
        return {"budget": self.budget, "seed": self.seed,
                "find_weights": self.find_weights, "V_max": self.V_max}


@dataclass
class ExperimentConfig:
    model: ModelConfig
    controller: ControllerConfig
    sim: SimConfig
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    certify: CertifySettings = field(default_factory=CertifySettings)
    # programmatic escape hatch for model.type == "custom"; never parsed
    # from JSON (a DelayedNetwork holds callables)
    custom_system: object = None
    custom_phi: object = None

    def to_dict(self):
        return {
            "model": self.model.to_dict(),
            "controller": self.controller.to_dict(),
            "sim": self.sim.to_dict(),
            "outputs": self.outputs.to_dict(),
            "certify": self.certify.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        """Parse and validate; raises ConfigError with dotted field paths."""
        problems = []
        if not isinstance(d, dict):
            raise ConfigError(["config: expected a JSON object"])
        _reject_unknown(d, {"model", "controller", "sim", "outputs", "certify"},
                        "config", problems)

        model = _parse_model(d.get("model"), problems)
        controller = _parse_controller(d.get("controller"), problems)
        sim = _parse_sim(d.get("sim"), problems)
        outputs = _parse_outputs(d.get("outputs"), problems)
        certify = _parse_certify(d.get("certify"), problems)

        if not problems:
            _cross_validate(model, controller, sim, outputs, problems)
        if problems:
            raise ConfigError(problems)
        return cls(model=model, controller=controller, sim=sim,
                   outputs=outputs, certify=certify)


def _parse_model(src, problems):
    if src is None:
        problems.append("model: required section")
        return None
    _reject_unknown(src, {"type", "n", "m", "graph_seed", "coupling_scale",
                          "delay"}, "model", problems)
    mtype = _field(src, "model", problems, "type", required=True, kind=str,
                   pred=lambda v: v in ("sis", "linear_test", "custom"),
                   msg="must be one of sis, linear_test, custom")
    cfg = ModelConfig(type=mtype or "sis")
    if mtype == "sis":
        cfg.n = _field(src, "model", problems, "n", required=True, kind=int,
                       pred=lambda v: v >= 2, msg="must be >= 2")
        cfg.m = _field(src, "model", problems, "m", required=True, kind=int,
                       pred=lambda v: v >= 1, msg="must be >= 1")
        cfg.graph_seed = _field(src, "model", problems, "graph_seed",
                                required=True, kind=int)
        cfg.coupling_scale = _field(src, "model", problems, "coupling_scale",
                                    default=0.05, kind=float,
                                    pred=lambda v: v > 0, msg="must be > 0")
        cfg.delay = _field(src, "model", problems, "delay", required=True,
                           kind=float, pred=lambda v: v > 0, msg="must be > 0")
        if cfg.n is not None and cfg.m is not None and not cfg.n > cfg.m:
            problems.append("model.n: must exceed model.m")
    elif mtype == "linear_test":
        cfg.n = _field(src, "model", problems, "n", default=3, kind=int,
                       pred=lambda v: v >= 1, msg="must be >= 1")
        cfg.coupling_scale = _field(src, "model", problems, "coupling_scale",
                                    default=0.4, kind=float,
                                    pred=lambda v: v >= 0, msg="must be >= 0")
        cfg.delay = _field(src, "model", problems, "delay", default=1.0,
                           kind=float, pred=lambda v: v > 0, msg="must be > 0")
    elif mtype == "custom":
        # the attached system defines dimensions and delays; delay is still
        # read so the cross check can reject it instead of ignoring it
        cfg.delay = _field(src, "model", problems, "delay", kind=float)
    return cfg


def _parse_controller(src, problems):
    if src is None:
        problems.append("controller: required section")
        return None
    _reject_unknown(src, {"mode", "a", "b", "T_k", "k0", "k_fixed",
                          "allow_gain_delay_beyond_Td"}, "controller", problems)
    mode = _field(src, "controller", problems, "mode", required=True, kind=str,
                  pred=lambda v: v in ("adaptive", "fixed"),
                  msg="must be adaptive or fixed")
    cfg = ControllerConfig(mode=mode or "adaptive")
    cfg.allow_gain_delay_beyond_Td = _field(
        src, "controller", problems, "allow_gain_delay_beyond_Td",
        default=False, kind=bool)
    if mode == "adaptive":
        for key in ("a", "b", "T_k", "k0"):
            setattr(cfg, key, _field(src, "controller", problems, key,
                                     required=True, kind="vector"))
        # null counts as absent, matching _field; to_dict() emits unset
        # fields as null and from_dict(to_dict()) must round-trip
        if src.get("k_fixed") is not None:
            problems.append("controller.k_fixed: not allowed in adaptive mode")
    elif mode == "fixed":
        cfg.k_fixed = _field(src, "controller", problems, "k_fixed",
                             required=True, kind="vector")
        for key in ("a", "b", "T_k", "k0"):
            if src.get(key) is not None:
                problems.append(f"controller.{key}: not allowed in fixed mode")
    return cfg


def _parse_sim(src, problems):
    if src is None:
        problems.append("sim: required section")
        return None
    _reject_unknown(src, {"h", "horizon", "record_stride", "phi"}, "sim",
                    problems)
    h = _field(src, "sim", problems, "h", required=True, kind=float,
               pred=lambda v: v > 0, msg="must be > 0")
    horizon = _field(src, "sim", problems, "horizon", required=True,
                     kind=float, pred=lambda v: v > 0, msg="must be > 0")
    stride = _field(src, "sim", problems, "record_stride", default=1, kind=int,
                    pred=lambda v: v >= 1, msg="must be >= 1")
    phi_src = src.get("phi")
    if phi_src is None:
        problems.append("sim.phi: required section")
        phi = None
    else:
        _reject_unknown(phi_src, {"type", "lo", "hi", "seed", "value"},
                        "sim.phi", problems)
        ptype = _field(phi_src, "sim.phi", problems, "type", required=True,
                       kind=str,
                       pred=lambda v: v in ("uniform_const", "constant"),
                       msg="must be uniform_const or constant")
        phi = PhiConfig(type=ptype or "constant")
        if ptype == "uniform_const":
            phi.lo = _field(phi_src, "sim.phi", problems, "lo", required=True,
                            kind=float)
            phi.hi = _field(phi_src, "sim.phi", problems, "hi", required=True,
                            kind=float)
            # explicit seed required: no wall-clock seeding anywhere
            phi.seed = _field(phi_src, "sim.phi", problems, "seed",
                              required=True, kind=int)
            if phi.lo is not None and phi.hi is not None and phi.hi < phi.lo:
                problems.append("sim.phi.hi: must be >= lo")
        elif ptype == "constant":
            phi.value = _field(phi_src, "sim.phi", problems, "value",
                               required=True, kind="vector")
    if h is None or horizon is None or phi is None:
        return None
    if horizon < h:
        problems.append("sim.horizon: must be >= h")
    return SimConfig(h=h, horizon=horizon, record_stride=stride, phi=phi)


def _parse_outputs(src, problems):
    if src is None:
        return OutputsConfig()
    _reject_unknown(src, {"dir", "emit_lyapunov", "lyapunov_gate"}, "outputs",
                    problems)
    return OutputsConfig(
        dir=_field(src, "outputs", problems, "dir", kind=str),
        emit_lyapunov=_field(src, "outputs", problems, "emit_lyapunov",
                             default=False, kind=bool),
        lyapunov_gate=_field(src, "outputs", problems, "lyapunov_gate",
                             kind=float),
    )


def _parse_certify(src, problems):
    if src is None:
        return CertifySettings()
    _reject_unknown(src, {"budget", "seed", "find_weights", "V_max"},
                    "certify", problems)
    return CertifySettings(
        budget=_field(src, "certify", problems, "budget", default=10_000,
                      kind=int, pred=lambda v: v >= 1, msg="must be >= 1"),
        seed=_field(src, "certify", problems, "seed", default=0, kind=int),
        find_weights=_field(src, "certify", problems, "find_weights",
                            default=False, kind=bool),
        V_max=_field(src, "certify", problems, "V_max", default=1e6,
                     kind=float, pred=lambda v: v >= 1, msg="must be >= 1"),
    )


def _cross_validate(model, controller, sim, outputs, problems):
    # step must leave room for intra-step lookups strictly in the past
    delays = []
    if model.type in ("sis", "linear_test") and model.delay is not None:
        delays.append(model.delay)
    if controller.mode == "adaptive" and controller.T_k is not None:
        tks = controller.T_k if isinstance(controller.T_k, list) else [controller.T_k]
        delays.extend(tk for tk in tks if tk > 0)
    if delays and sim.h > min(delays) / 2.0 + 1e-12:
        problems.append(
            f"sim.h: {sim.h} exceeds half the smallest delay ({min(delays)})"
        )
    if outputs.emit_lyapunov and outputs.lyapunov_gate is None:
        problems.append("outputs.lyapunov_gate: required when emit_lyapunov")
    if outputs.emit_lyapunov and model.type == "custom":
        problems.append(
            "outputs.emit_lyapunov: not supported for custom models "
            "(call monitor_decrease directly)"
        )
    if model.type == "custom" and model.delay is not None:
        problems.append("model.delay: not used for custom models")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config: file not found: {path}"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: invalid JSON: {exc}"])
    return ExperimentConfig.from_dict(raw)


def with_seed(config: ExperimentConfig, seed: int) -> ExperimentConfig:
    """Copy with graph_seed = seed and phi seed = seed + 10000."""
    out = copy.deepcopy(config)
    if out.model.type == "sis":
        out.model.graph_seed = int(seed)
    if out.sim.phi.type == "uniform_const":
        out.sim.phi.seed = int(seed) + PHI_SEED_OFFSET
    return out


# ---------------------------------------------------------------------------
# building blocks


def _broadcast(val, n):
    arr = np.asarray(val, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    return arr


def build_system(config: ExperimentConfig):
    """Returns (system, graph-or-None)."""
    model = config.model
    if model.type == "sis":
        graph = generate_scale_free(model.n, model.m, model.graph_seed,
                                    coupling_scale=model.coupling_scale)
        return make_sis_network(graph, model.delay), graph
    if model.type == "linear_test":
        return linear_test_network(n=model.n, a=model.coupling_scale,
                                   T=model.delay), None
    if model.type == "custom":
        if config.custom_system is None:
            raise ConfigError(
                ["model.type: custom requires an attached system "
                 "(set config.custom_system in code)"]
            )
        return config.custom_system, None
    raise ConfigError([f"model.type: unknown type {model.type!r}"])


def build_controller(config: ExperimentConfig, n: int) -> Controller:
    ctl = config.controller
    if ctl.mode == "adaptive":
        gains = GainState(n, _broadcast(ctl.k0, n), _broadcast(ctl.a, n),
                          _broadcast(ctl.b, n), _broadcast(ctl.T_k, n))
        return Controller.adaptive(gains)
    return Controller.fixed(_broadcast(ctl.k_fixed, n))


def build_phi(config: ExperimentConfig, n: int):
    if config.model.type == "custom" and config.custom_phi is not None:
        return config.custom_phi
    phi = config.sim.phi
    if phi.type == "uniform_const":
        rng = np.random.default_rng(int(phi.seed))
        vals = phi.lo + (phi.hi - phi.lo) * rng.random(n)
        return lambda theta: vals
    vec = _broadcast(phi.value, n)
    if vec.shape != (n,):
        raise ConfigError([f"sim.phi.value: expected scalar or length {n}"])
    return lambda theta: vec


def _execute(config: ExperimentConfig) -> Trajectory:
    system, graph = build_system(config)
    controller = build_controller(config, system.n)
    phi = build_phi(config, system.n)
    if controller.mode == "adaptive":
        max_tk = float(np.max(controller.gains.T_k))
        if max_tk > system.T_d:
            # buffer reaches beyond phi's nominal domain [-T_d, 0]
            phi = extend_phi_periodic(phi, system.T_d)
    cfg = SolverConfig(h=config.sim.h, horizon=config.sim.horizon,
                       record_stride=config.sim.record_stride)
    traj = simulate(
        system, controller, phi, cfg,
        allow_gain_delay_beyond_Td=config.controller.allow_gain_delay_beyond_Td,
    )
    if config.model.type == "sis":
        ok, violation = check_box_invariance(traj)
        traj.summary["box_invariant"] = bool(ok)
        traj.summary["box_violation"] = (
            None if violation is None
            else {"t": violation[0], "node": violation[1], "value": violation[2]}
        )
    return traj


# ---------------------------------------------------------------------------
# output files


def _fmt(val):
    return repr(float(val))


def write_trajectory_csv(path, traj: Trajectory):
    """Long-form CSV: one (t, node, x, k) row per node per recorded sample."""
    n = traj.n
    lines = ["t,node,x,k\n"]
    for t, xrow, krow in zip(traj.times, traj.states, traj.gains):
        ts = _fmt(t)
        for i in range(n):
            lines.append(f"{ts},{i},{_fmt(xrow[i])},{_fmt(krow[i])}\n")
    with open(path, "w") as fh:
        fh.writelines(lines)


def _write_json(path, payload):
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def run(config: ExperimentConfig, out_dir=None, write_outputs=True) -> Trajectory:
    """Build, simulate, and persist one run.

    Writes trajectory.csv, summary.json, graph.txt (sis models), and
    lyapunov.json when outputs.emit_lyapunov is set. Returns the Trajectory.
    """
    traj = _execute(config)
    if not write_outputs:
        return traj
    target = out_dir or config.outputs.dir
    if target is None:
        raise ConfigError(["outputs.dir: required to write run artifacts"])
    out = Path(target)
    out.mkdir(parents=True, exist_ok=True)

    write_trajectory_csv(out / "trajectory.csv", traj)
    summary = dict(traj.summary)
    summary["config"] = config.to_dict()
    summary["converged"] = [bool(f) for f in traj.converged]
    _write_json(out / "summary.json", summary)
    if config.model.type == "sis":
        _, graph = build_system(config)
        save_graph(graph, out / "graph.txt")
    if config.outputs.emit_lyapunov:
        system, _ = build_system(config)
        fcfg = FunctionalConfig(
            weights=np.ones(system.n),
            a=float(config.model.coupling_scale),
            d=0.0,
            delays=system.delays,
        )
        report = monitor_decrease(traj, fcfg, config.outputs.lyapunov_gate)
        _write_json(out / "lyapunov.json", report)
    return traj


# ---------------------------------------------------------------------------
# multi-run drivers


def _sweep_worker(args):
    cfg_dict, seed = args
    cfg = with_seed(ExperimentConfig.from_dict(cfg_dict), seed)
    traj = _execute(cfg)
    return seed, traj.summary


def _compare_worker(args):
    a_dict, f_dict, seed = args
    cfg_a = with_seed(ExperimentConfig.from_dict(a_dict), seed)
    cfg_f = with_seed(ExperimentConfig.from_dict(f_dict), seed)
    return seed, _execute(cfg_a).summary, _execute(cfg_f).summary


def sweep(config: ExperimentConfig, seeds, out_dir=None, workers=1):
    """Run one config across seeds; returns per-seed summary rows.

    Writes sweep.csv when a directory is available. Rows are assembled in
    seed order regardless of execution order.
    """
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ParameterError("duplicate seeds in sweep")
    rows = []
    if workers > 1:
        jobs = [(config.to_dict(), s) for s in seeds]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_sweep_worker, jobs))
    else:
        results = {}
        for s in seeds:
            results[s] = _execute(with_seed(config, s)).summary
    for s in seeds:
        summ = results[s]
        rows.append({
            "seed": s,
            "converged_all": summ["all_converged"],
            "n_converged": summ["n_converged"],
            "mean_final_gain": summ["mean_final_gain"],
            "max_final_x": summ["max_final_x"],
        })
    target = out_dir or config.outputs.dir
    if target is not None:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["seed,converged_all,n_converged,mean_final_gain,max_final_x\n"]
        for row in rows:
            gain = "" if row["mean_final_gain"] is None else _fmt(row["mean_final_gain"])
            lines.append(
                f"{row['seed']},{str(row['converged_all']).lower()},"
                f"{row['n_converged']},{gain},{_fmt(row['max_final_x'])}\n"
            )
        with open(out / "sweep.csv", "w") as fh:
            fh.writelines(lines)
    return rows


def compare(config_adaptive: ExperimentConfig, config_fixed: ExperimentConfig,
            seeds, out_dir=None, workers=1, keep_trajectories=False):
    """Adaptive-vs-fixed comparison over shared seeds.

    Model and sim sections must match between the two configs; controllers
    must be adaptive and fixed respectively. Returns per-seed rows (and the
    trajectories when keep_trajectories, inline execution only); writes
    compare.csv when a directory is available.
    """
    if config_adaptive.model.to_dict() != config_fixed.model.to_dict():
        raise ConfigError(["compare: model sections differ between configs"])
    if config_adaptive.sim.to_dict() != config_fixed.sim.to_dict():
        raise ConfigError(["compare: sim sections differ between configs"])
    if config_adaptive.controller.mode != "adaptive":
        raise ConfigError(["compare: first config must use an adaptive controller"])
    if config_fixed.controller.mode != "fixed":
        raise ConfigError(["compare: second config must use a fixed controller"])
    seeds = [int(s) for s in seeds]

    rows = []
    trajs = {}
    if workers > 1 and not keep_trajectories:
        jobs = [(config_adaptive.to_dict(), config_fixed.to_dict(), s)
                for s in seeds]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = {seed: (sa, sf) for seed, sa, sf in
                       pool.map(_compare_worker, jobs)}
    else:
        results = {}
        for s in seeds:
            traj_a = _execute(with_seed(config_adaptive, s))
            traj_f = _execute(with_seed(config_fixed, s))
            results[s] = (traj_a.summary, traj_f.summary)
            if keep_trajectories:
                trajs[s] = {"adaptive": traj_a, "fixed": traj_f}
    for s in seeds:
        summ_a, summ_f = results[s]
        rows.append({
            "seed": s,
            "adaptive_converged_all": summ_a["all_converged"],
            "fixed_converged_all": summ_f["all_converged"],
            "adaptive_mean_final_gain": summ_a["mean_final_gain"],
            "fixed_worst_final_x": summ_f["max_final_x"],
        })

    target = out_dir or config_adaptive.outputs.dir
    if target is not None:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["seed,adaptive_converged_all,fixed_converged_all,"
                 "adaptive_mean_final_gain,fixed_worst_final_x\n"]
        for row in rows:
            lines.append(
                f"{row['seed']},{str(row['adaptive_converged_all']).lower()},"
                f"{str(row['fixed_converged_all']).lower()},"
                f"{_fmt(row['adaptive_mean_final_gain'])},"
                f"{_fmt(row['fixed_worst_final_x'])}\n"
            )
        with open(out / "compare.csv", "w") as fh:
            fh.writelines(lines)
    if keep_trajectories:
        return rows, trajs
    return rows


# ---------------------------------------------------------------------------
# certification driver


def certify(config: ExperimentConfig, out_dir=None):
    """Dominance certificate, interconnection-bound estimate, and gain level.

    Checks column dominance of the input matrix with unit weights, estimates
    the delayed-Jacobian bound a by sampling, inflates it, and evaluates the
    sufficient uniform gain level. Reports are written as JSON when a
    directory is available and always returned.
    """
    model = config.model
    system, graph = build_system(config)
    n = system.n
    if system.form_tag != "state_feedback":
        raise ConfigError(
            ["model.type: certify requires a state-feedback model (input matrix)"]
        )

    ctl = config.controller
    if ctl.mode == "adaptive":
        kref = _broadcast(ctl.k0, n)
    else:
        kref = _broadcast(ctl.k_fixed, n)

    settings = config.certify
    ones = np.ones(n)

    if model.type == "sis":
        C = graph.weights
        b_sampler = MatrixSampler.constant(-np.eye(n), r=1)
        box01 = Box(np.zeros(n), np.ones(n))
        domain = SampleDomain(x=box01, n_samples=settings.budget,
                              seed=settings.seed)
        # virtual form: g_i = (1 - x_i) sum_j c_ij eta_{1,j} - k_i xi_i
        jac = JacobianSampler(
            n, 1,
            dg_dxi=lambda t, x, ys, xi, etas: -np.diag(kref),
            dg_deta=lambda t, x, ys, xi, etas, ell: (1.0 - x)[:, None] * C,
            domain=domain,
        )
    elif model.type == "linear_test":
        b_sampler = MatrixSampler.constant(-np.eye(n), r=1)
        A1 = np.full((n, n), float(model.coupling_scale))
        jac = JacobianSampler.constant(-np.diag(kref), deta=[A1])
    else:
        raise ConfigError(
            ["model.type: certify supports sis and linear_test models"]
        )

    report = check_input_matrix_dominance(b_sampler, ones)
    a_est = estimate_a(jac)
    a_used = A_INFLATION * a_est
    results = {
        "input_matrix": report,
        "a_estimate": a_est,
        "a_used": a_used,
        "gain_bound": None,
        "weights": None,
    }
    bound_payload = {
        "a_estimate": a_est,
        "a_inflation": A_INFLATION,
        "a_used": a_used,
        "r": system.r,
        "d": 0.0,
        "c": report.c_star,
        "k_min": None,
        "note": "certified on samples only; a is a sampled lower estimate",
    }
    if report.passed:
        k_min = required_gain_bound(a_used, system.r, 0.0, report.c_star, ones)
        results["gain_bound"] = k_min
        bound_payload["k_min"] = k_min

    ws = None
    if settings.find_weights:
        ws = find_weights(b_sampler, mode="column", V_max=settings.V_max)
        results["weights"] = ws

    target = out_dir or config.outputs.dir
    if target is not None:
        out = Path(target)
        out.mkdir(parents=True, exist_ok=True)
        report.save(out / "certificate_input_matrix.json")
        _write_json(out / "gain_bound.json", bound_payload)
        if ws is not None:
            _write_json(out / "weights.json", ws.to_dict())
    return results
