"""Adaptive gain law, controller wrappers, and closed-loop assembly."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from delaynets import (
    ConfigError,
    Controller,
    DelayedNetwork,
    DelaySpec,
    GainState,
    ParameterError,
    assemble_closed_loop,
    gain_rate,
)


def test_gain_state_broadcast_and_validation():
    g = GainState(3, k0=1.0, a=0.5, b=[0.1, 0.2, 0.3], T_k=2.0)
    assert np.array_equal(g.k0, [1.0, 1.0, 1.0])
    assert np.array_equal(g.b, [0.1, 0.2, 0.3])
    with pytest.raises(ParameterError):
        GainState(3, k0=-1.0, a=0.5, b=0.1, T_k=2.0)
    with pytest.raises(ParameterError):
        GainState(3, k0=1.0, a=0.0, b=0.1, T_k=2.0)
    with pytest.raises(ParameterError):
        GainState(3, k0=1.0, a=0.5, b=-0.1, T_k=2.0)
    with pytest.raises(ParameterError):
        GainState(3, k0=1.0, a=0.5, b=0.1, T_k=-2.0)
    with pytest.raises(ParameterError):
        GainState(3, k0=[1.0, 2.0], a=0.5, b=0.1, T_k=2.0)


def test_gain_rate_hand_values():
    g = GainState(2, k0=0.0, a=[0.5, 2.0], b=[1.0, 4.0], T_k=1.0)
    assert gain_rate(0, 0.2, g) == 0.2     # b |x| below the cap
    assert gain_rate(0, -0.2, g) == 0.2    # magnitude, not sign
    assert gain_rate(0, 10.0, g) == 0.5    # cap a binds
    assert gain_rate(1, 0.1, g) == 0.4
    assert gain_rate(1, 0.0, g) == 0.0


@given(
    a=st.floats(min_value=1e-6, max_value=1e6),
    b=st.floats(min_value=0.0, max_value=1e6),
    x=st.floats(min_value=-1e9, max_value=1e9),
)
def test_gain_rate_always_in_zero_a_band(a, b, x):
    g = GainState(1, k0=0.0, a=a, b=b, T_k=0.0)
    rate = gain_rate(0, x, g)
    assert 0.0 <= rate <= a


def test_controller_modes():
    g = GainState(2, k0=1.0, a=0.5, b=0.1, T_k=1.0)
    ada = Controller.adaptive(g)
    assert ada.mode == "adaptive" and ada.dimension() == 2
    fix = Controller.fixed(np.array([3.0, 4.0]))
    assert fix.mode == "fixed" and fix.dimension() == 2
    with pytest.raises(ParameterError):
        Controller("adaptive", gains=None)
    with pytest.raises(ParameterError):
        Controller.fixed(np.array([np.inf, 1.0]))
    with pytest.raises(ParameterError):
        Controller("pid")


def _two_node_net():
    B = np.array([[-1.0, 0.0], [0.0, -2.0]])
    return DelayedNetwork(
        2,
        [DelaySpec.constant(1.0)],
        lambda t, x, ys: 0.25 * ys[0],
        input_matrix=lambda t, x, ys: B,
    ), B


def test_closed_loop_state_feedback_rhs():
    net, B = _two_node_net()
    g = GainState(2, k0=[1.0, 2.0], a=0.5, b=[1.0, 3.0], T_k=1.0)
    loop = assemble_closed_loop(net, Controller.adaptive(g))
    assert loop.dim == 4 and loop.mode == "adaptive"
    assert loop.window == 1.0

    x = np.array([0.3, -0.4])
    k = np.array([2.0, 5.0])
    past = np.array([0.1, 0.2, 0.0, 0.0])  # x then k slots
    hist = lambda tq: past
    dz = loop.rhs(0.0, np.concatenate([x, k]), hist)
    want_dx = 0.25 * past[:2] + B @ (k * x)
    want_dk = np.minimum(g.a, g.b * np.abs(past[:2]))
    assert np.allclose(dz[:2], want_dx, atol=1e-15)
    assert np.allclose(dz[2:], want_dk, atol=1e-15)


def test_closed_loop_fixed_rhs():
    net, B = _two_node_net()
    k = np.array([2.0, 5.0])
    loop = assemble_closed_loop(net, Controller.fixed(k))
    assert loop.dim == 2 and loop.mode == "fixed"
    x = np.array([0.3, -0.4])
    past = np.array([0.1, 0.2])
    dz = loop.rhs(0.0, x, lambda tq: past)
    assert np.allclose(dz, 0.25 * past + B @ (k * x), atol=1e-15)


def test_closed_loop_output_feedback_rhs():
    L = np.array([[-1.0, 0.25], [0.0, -1.0]])
    net = DelayedNetwork(
        2,
        [DelaySpec.constant(1.0)],
        lambda t, x, ys: 0.5 * np.tanh(ys[0]),
        output_map=lambda t, x, ys: L @ x,
    )
    g = GainState(2, k0=0.1, a=0.5, b=2.0, T_k=0.5)
    loop = assemble_closed_loop(net, Controller.adaptive(g))
    x = np.array([0.3, -0.4])
    k = np.array([1.0, 2.0])
    past = np.array([0.6, -0.2, 0.0, 0.0])
    dz = loop.rhs(0.0, np.concatenate([x, k]), lambda tq: past)
    assert np.allclose(dz[:2], 0.5 * np.tanh(past[:2]) + k * (L @ x),
                       atol=1e-15)


def test_delayed_gain_lookup_uses_T_k():
    # distinct T_k per node: each node's rate must read its own delay
    net, _ = _two_node_net()
    g = GainState(2, k0=0.0, a=10.0, b=1.0, T_k=[0.5, 1.0])
    loop = assemble_closed_loop(net, Controller.adaptive(g))
    seen = []

    def hist(tq):
        seen.append(tq)
        return np.array([1.0, 2.0, 0.0, 0.0])

    t = 5.0
    dz = loop.rhs(t, np.zeros(4), hist)
    assert dz[2] == 1.0 and dz[3] == 2.0
    assert {t - 1.0, t - 0.5} <= set(seen)


def test_zero_T_k_reads_current_state():
    net, _ = _two_node_net()
    g = GainState(2, k0=0.0, a=10.0, b=1.0, T_k=0.0)
    loop = assemble_closed_loop(net, Controller.adaptive(g))
    x = np.array([0.7, -0.9])
    past = np.array([0.0, 0.0, 0.0, 0.0])
    dz = loop.rhs(0.0, np.concatenate([x, np.zeros(2)]), lambda tq: past)
    assert np.array_equal(dz[2:], np.abs(x))


def test_gain_delay_beyond_system_delay_needs_flag():
    net, _ = _two_node_net()
    g = GainState(2, k0=0.0, a=1.0, b=1.0, T_k=4.0)
    with pytest.raises(ConfigError):
        assemble_closed_loop(net, Controller.adaptive(g))
    loop = assemble_closed_loop(net, Controller.adaptive(g),
                                allow_gain_delay_beyond_Td=True)
    assert loop.window == 4.0


def test_dimension_mismatch_rejected():
    net, _ = _two_node_net()
    g = GainState(3, k0=0.0, a=1.0, b=1.0, T_k=1.0)
    with pytest.raises(ParameterError):
        assemble_closed_loop(net, Controller.adaptive(g))


def test_recorded_gains_shapes():
    net, _ = _two_node_net()
    g = GainState(2, k0=[1.0, 2.0], a=0.5, b=0.1, T_k=1.0)
    loop = assemble_closed_loop(net, Controller.adaptive(g))
    zs = np.arange(12.0).reshape(3, 4)
    rec = loop.recorded_gains(zs)
    assert np.array_equal(rec, zs[:, 2:])

    fixed = assemble_closed_loop(net, Controller.fixed(np.array([3.0, 4.0])))
    rec = fixed.recorded_gains(np.zeros((3, 2)))
    assert rec.shape == (3, 2)
    assert np.all(rec == [3.0, 4.0])
    rec[0, 0] = -1.0  # must be writable (a copy, not a broadcast view)
