"""Simulation and certification toolkit for delayed networks under
decentralized adaptive high-gain control.

Core pieces: a fixed-step DDE integrator with interpolating history buffers,
the per-node adaptive gain law and closed-loop assembly, sampled
diagonal-dominance certificates with explicit gain levels, Lyapunov
functional monitors, and experiment drivers reproducing the SIS epidemic
case study.
"""

from .certificates import (
    Box,
    CertificateReport,
    JacobianSampler,
    MatrixSampler,
    PLANTED_FAILURES,
    SampleDomain,
    WeightSearchResult,
    check_column_dominance,
    check_input_matrix_dominance,
    check_output_map_dominance,
    check_row_dominance,
    estimate_a,
    find_weights,
    required_gain_bound,
    required_gain_bound_dual,
    run_planted_case,
)
from .control import ClosedLoop, Controller, GainState, assemble_closed_loop, gain_rate
from .dde import (
    HistoryBuffer,
    SolverConfig,
    extend_phi_periodic,
    history_eval,
    simulate,
    step_rk4,
)
from .errors import (
    ConfigError,
    DelaynetsError,
    EvaluationError,
    NumericBlowupError,
    OutOfRangeError,
    ParameterError,
)
from .experiments import (
    CertifySettings,
    ControllerConfig,
    ExperimentConfig,
    ModelConfig,
    OutputsConfig,
    PhiConfig,
    SimConfig,
    build_controller,
    build_phi,
    build_system,
    certify,
    compare,
    load_config,
    run,
    sweep,
    with_seed,
)
from .lyapunov import FunctionalConfig, dini_series, eval_Vm, eval_Vs, monitor_decrease
from .systems import (
    CouplingGraph,
    DelayedNetwork,
    DelaySpec,
    check_box_invariance,
    generate_scale_free,
    linear_test_network,
    load_graph,
    make_sis_network,
    save_graph,
    sis_drift,
)
from .trajectory import Trajectory, convergence_flags, summarize

__version__ = "0.1.0"

__all__ = [
    "Box",
    "CertificateReport",
    "CertifySettings",
    "ClosedLoop",
    "ConfigError",
    "Controller",
    "ControllerConfig",
    "CouplingGraph",
    "DelaySpec",
    "DelayedNetwork",
    "DelaynetsError",
    "EvaluationError",
    "ExperimentConfig",
    "FunctionalConfig",
    "GainState",
    "HistoryBuffer",
    "JacobianSampler",
    "MatrixSampler",
    "ModelConfig",
    "NumericBlowupError",
    "OutOfRangeError",
    "OutputsConfig",
    "PLANTED_FAILURES",
    "ParameterError",
    "PhiConfig",
    "SampleDomain",
    "SimConfig",
    "SolverConfig",
    "Trajectory",
    "WeightSearchResult",
    "assemble_closed_loop",
    "build_controller",
    "build_phi",
    "build_system",
    "certify",
    "check_box_invariance",
    "check_column_dominance",
    "check_input_matrix_dominance",
    "check_output_map_dominance",
    "check_row_dominance",
    "compare",
    "convergence_flags",
    "dini_series",
    "estimate_a",
    "eval_Vm",
    "eval_Vs",
    "extend_phi_periodic",
    "find_weights",
    "gain_rate",
    "generate_scale_free",
    "history_eval",
    "linear_test_network",
    "load_config",
    "load_graph",
    "make_sis_network",
    "monitor_decrease",
    "required_gain_bound",
    "required_gain_bound_dual",
    "run",
    "run_planted_case",
    "save_graph",
    "simulate",
    "sis_drift",
    "step_rk4",
    "summarize",
    "sweep",
    "with_seed",
    "__version__",
]
