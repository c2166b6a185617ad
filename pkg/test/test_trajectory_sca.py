#!/usr/bin/env python3
"""Tests for uavopt.trajectory_sca: tangent bounds and the SCA trajectory loop.

Run directly:

    python test/test_trajectory_sca.py

Or:

    pytest test/test_trajectory_sca.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, os.path.dirname(__file__))

import numpy as np  # noqa: E402

from scenario_test_helper import case1, make_scenario  # noqa: E402
from uavopt.channel import LN2, average_throughputs, gain_matrix, min_throughput  # noqa: E402
from uavopt.errors import InfeasibleScenarioError, InputError  # noqa: E402
from uavopt.power_alloc import PowerAllocation, uniform_power  # noqa: E402
from uavopt.scenario import Trajectory, check_trajectory  # noqa: E402
from uavopt.trajectory_sca import (  # noqa: E402
    SCAOptions,
    eval_lower_bound,
    linearize,
    motion_balls,
    optimize_trajectory,
    split_increments,
    trajectory_step,
)


def assert_close(actual, expected, rel_tol=1e-9, abs_tol=1e-12, label=""):
    assert math.isclose(actual, expected, rel_tol=rel_tol, abs_tol=abs_tol), (
        f"{label}: expected {expected!r}, got {actual!r}"
    )


def assert_raises(exc_type, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(
        f"Expected {exc_type.__name__} from {getattr(fn, '__name__', fn)}"
        f"({args}, {kwargs}), but no exception was raised."
    )


def _section(title):
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)


def _straight(sc):
    start, finish = np.array(sc.uav.start), np.array(sc.uav.finish)
    frac = np.arange(1, sc.num_slots + 1)[:, None] / sc.num_slots
    return Trajectory(start + frac * (finish - start))


def _rates(power, traj, sc):
    return average_throughputs(power.p, gain_matrix(traj, sc).g, sc)


# ---------------------------------------------------------------------------
# Tangent model
# ---------------------------------------------------------------------------

def test_zero_power_model():
    _section("Zero power gives c = 0 and a zero bound everywhere")
    sc = case1()
    model = linearize(_straight(sc), PowerAllocation(np.zeros((3, 50))), sc)
    assert np.all(model.c == 0) and np.all(model.r_k == 0)
    delta = np.random.default_rng(0).uniform(-50, 50, size=(50, 2))
    assert np.all(eval_lower_bound(model, delta, sc) == 0)
    print("  ok")


def test_slope_matches_derivative():
    _section("c is minus the derivative of log2(1 + gamma beta0 / d) at d_k")
    sc = make_scenario(nodes=[(120, -40)], start=(0, 0), finish=(0, 0), num_slots=3, horizon_s=3)
    traj = Trajectory([[10.0, 5.0], [60.0, -20.0], [0.0, 30.0]])
    power = PowerAllocation([[0.3, 1.2, 0.05]])
    model = linearize(traj, power, sc)

    beta0 = sc.radio.beta0
    for m in range(3):
        d, g = model.d_k[0, m], model.gamma[0, m]
        h = 1e-4 * d

        def rate(dd):
            return math.log2(1 + g * beta0 / dd)

        slope = -(rate(d + h) - rate(d - h)) / (2 * h)
        assert_close(model.c[0, m], slope, rel_tol=1e-6, label=f"slot {m}")
        assert_close(model.c[0, m], g * beta0 / (LN2 * d * (g * beta0 + d)), rel_tol=1e-14)
    assert_close(model.d_k[0, 0], 110.0 ** 2 + 45.0 ** 2 + 100.0 ** 2, label="d_k")
    assert_close(model.grad_x[0, 1], 2 * (60.0 - 120.0), label="grad_x")
    assert_close(model.grad_y[0, 1], 2 * (-20.0 + 40.0), label="grad_y")
    print("  ok")


def test_tangency():
    _section("The bound equals the true rate at zero increments")
    sc = case1()
    rng = np.random.default_rng(4)
    traj = _straight(sc)
    power = PowerAllocation(rng.uniform(0, 0.1, size=(3, 50)))
    model = linearize(traj, power, sc)
    bound = eval_lower_bound(model, np.zeros((50, 2)), sc)
    true = _rates(power, traj, sc)
    assert np.allclose(bound, true, rtol=1e-12, atol=0)
    print("  ok")


def test_bound_below_truth():
    _section("1000 random increments: the bound never exceeds the true rate")
    sc = case1()
    rng = np.random.default_rng(12)
    traj = _straight(sc)
    power = uniform_power(sc)
    model = linearize(traj, power, sc)
    for _ in range(1000):
        delta = rng.uniform(-300, 300, size=(50, 2))
        bound = eval_lower_bound(model, delta, sc)
        true = _rates(power, traj.moved(delta), sc)
        assert np.all(bound <= true + 1e-9 * np.abs(true)), (bound - true).max()
    print("  ok")


def test_increment_layouts():
    _section("Increments as M x 2 or stacked (dx, dy)")
    delta = np.arange(8.0).reshape(4, 2)
    dx, dy = split_increments(delta, 4)
    assert np.array_equal(dx, [0, 2, 4, 6]) and np.array_equal(dy, [1, 3, 5, 7])
    dx2, dy2 = split_increments(np.concatenate([dx, dy]), 4)
    assert np.array_equal(dx, dx2) and np.array_equal(dy, dy2)
    assert_raises(InputError, split_increments, np.zeros(7), 4)
    assert_raises(InputError, split_increments, np.zeros((4, 3)), 4)
    print("  ok")


def test_linearize_shape_errors():
    _section("linearize rejects mismatched trajectory or power")
    sc = case1()
    assert_raises(InputError, linearize, Trajectory.constant((0, 0), 10), uniform_power(sc), sc)
    assert_raises(InputError, linearize, _straight(sc), PowerAllocation(np.zeros((2, 50))), sc)
    print("  ok")


# ---------------------------------------------------------------------------
# Motion balls and one step
# ---------------------------------------------------------------------------

def test_motion_balls_at_zero():
    _section("At zero increments the balls measure the current legs")
    sc = make_scenario(start=(0, 0), finish=(150, 0), num_slots=3, horizon_s=3)
    traj = Trajectory([[50.0, 0.0], [50.0, 80.0], [120.0, 30.0]])
    maps, offsets, radii = motion_balls(traj, sc)
    assert maps.shape == (4, 2, 6) and offsets.shape == (4, 2)
    legs = np.linalg.norm(offsets, axis=1)
    assert np.allclose(legs, [50.0, 80.0, math.hypot(70, 50), math.hypot(30, 30)])
    assert np.all(radii > sc.step_limit_m) and np.all(radii ** 2 - sc.step_limit_m ** 2 < 1e-6)

    delta = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    moved = traj.moved(delta).points
    stacked = np.concatenate([delta[:, 0], delta[:, 1]])
    residuals = np.einsum("jkd,d->jk", maps, stacked) + offsets
    expected = np.diff(np.vstack([sc.uav.start, moved, sc.uav.finish]), axis=0)
    # The last leg is measured from the waypoint towards the finish.
    expected[-1] *= -1
    assert np.allclose(residuals, expected)
    print("  ok")


def test_hover_is_a_fixed_point():
    _section("Hovering above the only node: zero step, bound equals the rate")
    sc = make_scenario(nodes=[(0, 0)], start=(0, 0), finish=(0, 0), num_slots=4, horizon_s=4)
    traj = Trajectory.constant((0, 0), 4)
    power = uniform_power(sc)
    model = linearize(traj, power, sc)
    assert np.all(model.grad_x == 0) and np.all(model.grad_y == 0)
    delta, s_lb = trajectory_step(model, traj, sc)
    assert np.abs(delta).max() <= 1e-3
    rate = min_throughput(power, traj, sc)
    assert rate - 2e-6 <= s_lb <= rate + 1e-12

    out, trace = optimize_trajectory(traj, power, sc)
    assert trace.iterations == 1
    assert not trace.rejected
    assert np.abs(out.points).max() <= 1e-3
    assert trace.min_rates[-1] >= rate
    print("  ok")


def test_single_node_pulls_uav_over():
    _section("One node off to the side: SCA flies over it and back")
    sc = make_scenario(nodes=[(300, 0)], start=(0, 0), finish=(0, 0), num_slots=10, horizon_s=10)
    traj0 = Trajectory.constant((0, 0), 10)
    power = uniform_power(sc)
    traj, trace = optimize_trajectory(traj0, power, sc)
    assert check_trajectory(traj, sc) == []
    assert trace.min_rates[-1] > trace.min_rates[0]
    closest = np.hypot(traj.x - 300.0, traj.y).min()
    assert closest <= 5.0, f"closest approach {closest:.3g} m"
    print("  ok")


# ---------------------------------------------------------------------------
# The SCA loop
# ---------------------------------------------------------------------------

def test_infinite_epsilon_takes_one_step():
    _section("epsilon = inf stops after the first accepted step")
    sc = case1()
    opts = SCAOptions(epsilon=math.inf)
    traj, trace = optimize_trajectory(_straight(sc), uniform_power(sc), sc, opts)
    assert trace.iterations == 1
    assert len(trace.min_rates) in (1, 2)
    assert not trace.rejected or len(trace.min_rates) == 1
    print("  ok")


def test_case1_trace_is_monotone():
    _section("case1 from the straight line: monotone, feasible, bounds below truth")
    sc = case1()
    power = uniform_power(sc)
    opts = SCAOptions(max_iterations=5)
    traj, trace = optimize_trajectory(_straight(sc), power, sc, opts)
    rates = np.array(trace.min_rates)
    assert np.all(np.diff(rates) >= 0)
    assert len(rates) >= 2, "first step from the straight line should improve"
    assert rates[-1] == min_throughput(power, traj, sc)
    for k in range(len(rates) - 1):
        # Surrogate optimum: no worse than the incumbent, no better than the new iterate.
        assert trace.lower_bounds[k] >= rates[k] - 2 * opts.solver_tol
        assert trace.lower_bounds[k] <= rates[k + 1] + 1e-9
    assert check_trajectory(traj, sc) == []
    print("  ok")


def test_infeasible_start_rejected():
    _section("An infeasible initial trajectory is refused")
    sc = case1()
    pts = _straight(sc).points.copy()
    pts[10] += (500.0, 0.0)
    assert_raises(InfeasibleScenarioError, optimize_trajectory, Trajectory(pts), uniform_power(sc), sc)
    assert_raises(InputError, optimize_trajectory, _straight(sc), PowerAllocation(np.zeros((2, 50))), sc)
    print("  ok")


def test_options_validation():
    _section("SCAOptions rejects non-positive tolerances and caps")
    assert_raises(InputError, SCAOptions, epsilon=0.0)
    assert_raises(InputError, SCAOptions, epsilon=math.nan)
    assert_raises(InputError, SCAOptions, outer_epsilon=-1.0)
    assert_raises(InputError, SCAOptions, solver_tol=0.0)
    assert_raises(InputError, SCAOptions, max_iterations=0)
    assert_raises(InputError, SCAOptions, max_outer_iterations=0)
    assert SCAOptions().as_dict()["epsilon"] == 0.01
    assert SCAOptions(epsilon=0.5).outer_threshold == 0.5
    assert SCAOptions(epsilon=0.5, outer_epsilon=0.1).outer_threshold == 0.1
    assert SCAOptions(epsilon=0.5).as_dict() == SCAOptions(epsilon=0.5, outer_epsilon=0.5).as_dict()
    print("  ok")


ALL_TESTS = [
    test_zero_power_model,
    test_slope_matches_derivative,
    test_tangency,
    test_bound_below_truth,
    test_increment_layouts,
    test_linearize_shape_errors,
    test_motion_balls_at_zero,
    test_hover_is_a_fixed_point,
    test_single_node_pulls_uav_over,
    test_infinite_epsilon_takes_one_step,
    test_case1_trace_is_monotone,
    test_infeasible_start_rejected,
    test_options_validation,
]


def main():
    failures = []
    for t in ALL_TESTS:
        try:
            t()
        except AssertionError as e:
            failures.append((t.__name__, repr(e)))
            print(f"  FAIL: {t.__name__}: {e}")
        except Exception as e:  # noqa: BLE001
            failures.append((t.__name__, repr(e)))
            print(f"  ERROR: {t.__name__}: {type(e).__name__}: {e}")

    print("\n" + "=" * 70)
    if failures:
        print(f"FAILED: {len(failures)} / {len(ALL_TESTS)}")
        for name, msg in failures:
            print(f"  - {name}: {msg}")
        print("=" * 70)
        return 1
    print(f"PASSED: {len(ALL_TESTS)} / {len(ALL_TESTS)}")
    print("=" * 70)
    return 0


if __name__ == "__main__":
    sys.exit(main())
