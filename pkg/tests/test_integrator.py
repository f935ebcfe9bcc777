"""Integrator: RK4 stepping, the simulate loop, and delayed-lookup plumbing."""

import math

import numpy as np
import pytest

from delaynets import (
    Controller,
    DelayedNetwork,
    DelaySpec,
    HistoryBuffer,
    NumericBlowupError,
    ParameterError,
    SolverConfig,
    assemble_closed_loop,
    extend_phi_periodic,
    simulate,
    step_rk4,
)

from oracles import StepsOracle, benchmark_oracle


def _scalar_delay_network(c=-1.0, T=1.0):
    # x' = c x(t-T); the zero-gain input matrix keeps the controller inert
    return DelayedNetwork(
        n=1,
        delays=[DelaySpec.constant(T)],
        drift=lambda t, x, ys: c * ys[0],
        input_matrix=lambda t, x, ys: np.zeros((1, 1)),
    )


def _run_benchmark(h, horizon=2.0):
    net = _scalar_delay_network()
    ctl = Controller.fixed(np.zeros(1))
    phi = lambda theta: np.array([1.0])
    return simulate(net, ctl, phi, SolverConfig(h=h, horizon=horizon))


def test_oracle_matches_closed_forms():
    oracle = benchmark_oracle()
    # segment 1: 1 - t; segment 2: 1 - t + (t-1)^2 / 2
    for t in np.linspace(0.0, 1.0, 11):
        assert oracle(t) == pytest.approx(1.0 - t, abs=1e-15)
    for t in np.linspace(1.0, 2.0, 11):
        want = 1.0 - t + 0.5 * (t - 1.0) ** 2
        assert oracle(t) == pytest.approx(want, abs=1e-15)
    assert oracle(1.0) == 0.0
    assert oracle(2.0) == -0.5


def test_oracle_with_polynomial_history():
    # phi(theta) = 1 + theta on [-1, 0]; x'(t) = -x(t-1) gives
    # x(t) = 1 - t^2/2 on [0, 1] by direct integration
    oracle = StepsOracle(c=-1.0, T=1.0, phi_coeffs=[1.0, 1.0], n_segments=2)
    for t in np.linspace(0.0, 1.0, 13):
        assert oracle(t) == pytest.approx(1.0 - 0.5 * t * t, abs=1e-14)


def test_benchmark_against_oracle_on_grid():
    oracle = benchmark_oracle()
    traj = _run_benchmark(h=1e-2)
    want = np.array([oracle(t) for t in traj.times])
    assert np.max(np.abs(traj.states[:, 0] - want)) < 2e-7


def test_simulate_equals_manual_stepping():
    # simulate is a loop over the one-step update; reproduce it by hand and
    # compare every knot within 1e-12 (compensated vs plain accumulation)
    net = _scalar_delay_network()
    ctl = Controller.fixed(np.zeros(1))
    h = 1e-2
    traj = simulate(net, ctl, lambda th: np.array([1.0]),
                    SolverConfig(h=h, horizon=2.0))

    loop = assemble_closed_loop(net, ctl)
    n_seed = max(1, math.ceil(loop.window / h - 1e-9))
    thetas = (np.arange(n_seed + 1) - n_seed) * h
    knots = np.ones((n_seed + 1, 1))
    buf = HistoryBuffer(thetas, knots, loop.window, junction=0.0)
    states = [1.0]
    for j in range(int(round(2.0 / h))):
        z = step_rk4(loop.rhs, buf, j * h, h)
        buf.append((j + 1) * h, z)
        states.append(z[0])
    assert np.max(np.abs(traj.states[:, 0] - np.array(states))) < 1e-12


def test_ode_step_convergence_is_fourth_order():
    # no delayed argument: the interpolation layer is out of the loop and
    # classical RK4 order 4 must show directly
    rhs = lambda t, x, hist: -x
    errs = []
    for h in (0.02, 0.01):
        buf = HistoryBuffer([0.0], np.array([[1.0]]), window=0.0)
        t = 0.0
        for j in range(int(round(1.0 / h))):
            z = step_rk4(rhs, buf, t, h)
            t = (j + 1) * h
            buf.append(t, z)
        errs.append(abs(buf.last_state[0] - math.exp(-1.0)))
    assert errs[0] / errs[1] > 14.0


def test_step_rejects_nonfinite_result():
    rhs = lambda t, x, hist: x * 1e300
    buf = HistoryBuffer([0.0], np.array([[1.0]]), window=0.0)
    with pytest.raises(NumericBlowupError):
        step_rk4(rhs, buf, 0.0, 1.0)


def test_simulate_blowup_reports_time_and_state():
    # positive feedback x' = 40 x is far outside RK4's stability region at
    # h = 0.25 and overflows mid-run
    strong = DelayedNetwork(
        n=1,
        delays=[DelaySpec.constant(1.0)],
        drift=lambda t, x, ys: 0.0 * ys[0],
        input_matrix=lambda t, x, ys: np.eye(1),
    )
    ctl = Controller.fixed(np.array([40.0]))
    with pytest.raises(NumericBlowupError) as exc:
        simulate(strong, ctl, lambda th: np.array([1.0]),
                 SolverConfig(h=0.25, horizon=200.0))
    assert exc.value.t >= 0.0
    assert np.all(np.isfinite(exc.value.state))


def test_step_size_limited_by_smallest_delay():
    net = _scalar_delay_network(T=0.2)
    ctl = Controller.fixed(np.zeros(1))
    with pytest.raises(ParameterError):
        simulate(net, ctl, lambda th: np.array([1.0]),
                 SolverConfig(h=0.11, horizon=1.0))
    # exactly half the delay is allowed
    simulate(net, ctl, lambda th: np.array([1.0]),
             SolverConfig(h=0.1, horizon=1.0))


def test_record_stride_thins_output():
    traj_full = _run_benchmark(h=0.01, horizon=1.0)
    net = _scalar_delay_network()
    ctl = Controller.fixed(np.zeros(1))
    traj = simulate(net, ctl, lambda th: np.array([1.0]),
                    SolverConfig(h=0.01, horizon=1.0, record_stride=7))
    # sigma, every 7th step, and the final step
    n_steps = 100
    keep = [0] + [j for j in range(1, n_steps + 1) if j % 7 == 0 or j == n_steps]
    assert np.array_equal(traj.times, traj_full.times[keep])
    assert np.array_equal(traj.states, traj_full.states[keep])


def test_constant_and_degenerate_varying_delay_agree():
    ctl = Controller.fixed(np.zeros(1))
    phi = lambda th: np.array([1.0])
    cfg = SolverConfig(h=0.01, horizon=2.0)
    t_const = simulate(_scalar_delay_network(), ctl, phi, cfg)
    varying = DelayedNetwork(
        n=1,
        delays=[DelaySpec.varying(lambda t: 1.0, d=0.0, T_min=1.0, T_max=1.0)],
        drift=lambda t, x, ys: -ys[0],
        input_matrix=lambda t, x, ys: np.zeros((1, 1)),
    )
    t_var = simulate(varying, ctl, phi, cfg)
    assert np.array_equal(t_const.states, t_var.states)


def test_time_varying_delay_matches_smooth_oracle():
    # manufactured solution: x'(t) = -x(t) - exp(-2 T(t)) x(t - T(t)) with
    # phi(theta) = exp(-2 theta) gives x(t) = exp(-2t) exactly, and phi
    # matches every derivative at the junction, so the problem is C-inf and
    # the lookup path is exercised at non-knot times with a closed form
    T = lambda t: 0.6 + 0.2 * math.sin(t)

    def make():
        return DelayedNetwork(
            n=1,
            delays=[DelaySpec.varying(T, d=0.2, T_min=0.4, T_max=0.8)],
            drift=lambda t, x, ys: -x - math.exp(-2.0 * T(t)) * ys[0],
            input_matrix=lambda t, x, ys: np.zeros((1, 1)),
        )

    ctl = Controller.fixed(np.zeros(1))
    phi = lambda th: np.array([math.exp(-2.0 * th)])
    errs = []
    for h in (0.04, 0.02, 0.01):
        traj = simulate(make(), ctl, phi, SolverConfig(h=h, horizon=3.0))
        exact = np.exp(-2.0 * traj.times)
        errs.append(float(np.max(np.abs(traj.states[:, 0] - exact))))
    assert errs[-1] < 1e-8
    # smooth problem, so halving must buy well over the kink-limited rate;
    # measured ratios sit near 14 and 19
    assert errs[0] / errs[1] > 6.0
    assert errs[1] / errs[2] > 6.0


def test_time_varying_delay_kink_crossing_error_bounded():
    # x'(t) = -x(t - T(t)) from constant phi: x' jumps at the junction, and
    # the step that carries t - T(t) across it commits a local O(h^2) error
    # (Simpson across a slope kink; the kink sits at an arbitrary intra-step
    # position, so per-halving ratios oscillate and are not asserted).
    # Checked instead: the error stays inside a C h^2 envelope and shrinks
    # across an 8x step refinement.
    def make():
        return DelayedNetwork(
            n=1,
            delays=[DelaySpec.varying(lambda t: 0.6 + 0.2 * math.sin(t),
                                      d=0.2, T_min=0.4, T_max=0.8)],
            drift=lambda t, x, ys: -ys[0],
            input_matrix=lambda t, x, ys: np.zeros((1, 1)),
        )

    ctl = Controller.fixed(np.zeros(1))
    phi = lambda th: np.array([1.0])
    ref = simulate(make(), ctl, phi, SolverConfig(h=0.000625, horizon=3.0))
    errs = {}
    for h in (0.02, 0.01, 0.0025):
        traj = simulate(make(), ctl, phi, SolverConfig(h=h, horizon=3.0))
        stride = int(round(h / 0.000625))
        errs[h] = float(np.max(np.abs(traj.states[:, 0]
                                      - ref.states[::stride, 0])))
    # envelope with ~4x headroom over the measured worst case
    assert errs[0.01] < 5e-6
    assert errs[0.0025] < 5e-7
    assert errs[0.0025] < errs[0.02] / 4.0


def test_shift_invariance_in_start_time():
    base = _run_benchmark(h=0.01)
    net = _scalar_delay_network()
    ctl = Controller.fixed(np.zeros(1))
    shifted = simulate(net, ctl, lambda th: np.array([1.0]),
                       SolverConfig(h=0.01, horizon=2.0), sigma=2.5)
    assert np.allclose(shifted.states, base.states, atol=1e-9)
    assert shifted.times[0] == 2.5


def test_phi_dimension_mismatch_rejected():
    net = _scalar_delay_network()
    ctl = Controller.fixed(np.zeros(1))
    with pytest.raises(ParameterError):
        simulate(net, ctl, lambda th: np.array([1.0, 2.0]),
                 SolverConfig(h=0.01, horizon=1.0))


def test_solver_config_validation():
    with pytest.raises(ParameterError):
        SolverConfig(h=0.0, horizon=1.0)
    with pytest.raises(ParameterError):
        SolverConfig(h=0.1, horizon=0.05)
    with pytest.raises(ParameterError):
        SolverConfig(h=0.1, horizon=1.0, record_stride=0)
    cfg = SolverConfig(h=0.1, horizon=1.0, record_stride=2.0)
    assert cfg.record_stride == 2 and isinstance(cfg.record_stride, int)


def test_extend_phi_periodic():
    phi = lambda theta: np.array([theta])
    ext = extend_phi_periodic(phi, 2.0)
    assert ext(-0.5)[0] == -0.5  # inside the original domain
    assert ext(-2.0)[0] == -2.0
    assert ext(-2.5)[0] == -0.5  # wrapped by one period
    assert ext(-4.0)[0] == -2.0  # exact multiple maps to the domain edge
    with pytest.raises(ParameterError):
        extend_phi_periodic(phi, 0.0)


def test_gain_delay_beyond_system_delay_uses_extended_phi():
    # T_k = 3 > T_d = 1 needs the opt-in flag and a periodically continued phi
    from delaynets import GainState
    net = _scalar_delay_network()
    gains = GainState(1, k0=0.5, a=0.2, b=0.1, T_k=3.0)
    ctl = Controller.adaptive(gains)
    phi = extend_phi_periodic(lambda th: np.array([1.0]), 1.0)
    from delaynets import ConfigError
    with pytest.raises(ConfigError):
        simulate(net, ctl, phi, SolverConfig(h=0.01, horizon=1.0))
    traj = simulate(net, ctl, phi, SolverConfig(h=0.01, horizon=1.0),
                    allow_gain_delay_beyond_Td=True)
    assert traj.summary["mean_final_gain"] > 0.5  # gains actually moved
