"""Convergence flags and summary statistics on recorded series."""

import numpy as np
import pytest

from delaynets import Trajectory
from delaynets.trajectory import (
    FINAL_FRAC,
    X_TOL,
    convergence_flags,
    final_window_mask,
    summarize,
)


def test_final_window_mask_covers_last_five_percent():
    times = np.linspace(0.0, 100.0, 1001)
    mask = final_window_mask(times, sigma=0.0, horizon=100.0)
    assert times[mask][0] == pytest.approx(95.0, abs=1e-9)
    assert mask.sum() == 51
    # sigma shifts the window with the run
    mask = final_window_mask(times + 7.0, sigma=7.0, horizon=100.0)
    assert (times + 7.0)[mask][0] == pytest.approx(102.0, abs=1e-9)


def test_convergence_flags_per_node():
    times = np.linspace(0.0, 10.0, 101)
    decays = np.exp(-2.0 * times)
    states = np.column_stack([decays, decays + 0.5])
    flags = convergence_flags(times, states, sigma=0.0, horizon=10.0)
    assert list(flags) == [True, False]


def test_convergence_flag_is_strict_at_tol():
    times = np.linspace(0.0, 10.0, 101)
    states = np.full((101, 1), X_TOL)  # exactly at the threshold
    assert not convergence_flags(times, states, 0.0, 10.0)[0]
    states = np.full((101, 1), 0.999 * X_TOL)
    assert convergence_flags(times, states, 0.0, 10.0)[0]


def test_summarize_hand_values():
    times = np.linspace(0.0, 10.0, 101)
    x = np.exp(-times)
    states = np.column_stack([x, 0.5 * x])
    gains = np.column_stack([np.full(101, 2.0), np.full(101, 4.0)])
    flags = convergence_flags(times, states, 0.0, 10.0)
    s = summarize(times, states, gains, flags, 0.0, 10.0)
    assert s["x_tol"] == X_TOL and s["final_window_fraction"] == FINAL_FRAC
    assert s["n_nodes"] == 2 and s["n_converged"] == 2
    assert s["all_converged"] is True
    assert s["max_final_x"] == pytest.approx(np.exp(-9.5), rel=1e-12)
    assert s["mean_final_gain"] == 3.0
    # sup |x| = exp(-t) drops below 1e-3 at t = ln(1000) ~ 6.9; first
    # recorded sample from which it stays below is t = 7.0
    assert s["t_convergence"] == times[70]


def test_summarize_no_convergence_and_no_gains():
    times = np.linspace(0.0, 10.0, 101)
    states = np.ones((101, 1))
    flags = convergence_flags(times, states, 0.0, 10.0)
    s = summarize(times, states, None, flags, 0.0, 10.0)
    assert s["mean_final_gain"] is None
    assert s["t_convergence"] is None
    assert s["n_converged"] == 0
    assert s["all_converged"] is False
    assert s["max_final_x"] == 1.0


def test_trajectory_accessors():
    times = np.linspace(0.0, 1.0, 5)
    states = np.arange(10.0).reshape(5, 2)
    gains = np.arange(10.0, 20.0).reshape(5, 2)
    traj = Trajectory(times, states, gains, np.array([True, True]))
    assert traj.n == 2
    assert np.array_equal(traj.final_state(), [8.0, 9.0])
    assert np.array_equal(traj.final_gains(), [18.0, 19.0])
    assert traj.summary == {}
    assert traj.vs is None and traj.vm is None
