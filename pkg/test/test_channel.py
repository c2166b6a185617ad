#!/usr/bin/env python3
"""Tests for uavopt.channel: LoS gains and average throughput.

Run directly:

    python test/test_channel.py

Or:

    pytest test/test_channel.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))
sys.path.insert(0, os.path.dirname(__file__))

import numpy as np  # noqa: E402

from scenario_test_helper import case1, make_scenario  # noqa: E402
from uavopt.channel import (  # noqa: E402
    GainMatrix,
    channel_gain,
    gain_matrix,
    min_throughput,
    slot_rate,
    slot_rates,
    throughput_report,
)
from uavopt.errors import InputError  # noqa: E402
from uavopt.scenario import GroundNode, RadioParams, Trajectory  # noqa: E402


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


def _radio(B=1.0, sigma2=1.0, beta0=1e-3, budget=1.0):
    return RadioParams(bandwidth_hz=B, noise_psd_w_per_hz=sigma2, beta0=beta0,
                       reference_distance_m=1.0, power_budget_w=budget)


# ---------------------------------------------------------------------------
# Gains
# ---------------------------------------------------------------------------

def test_channel_gain_values():
    _section("channel_gain hand values")
    assert_close(channel_gain((1000, 200), GroundNode(2, 1000, 200), 100, 1e-3), 1e-7, label="overhead")
    assert_close(channel_gain((0, 0), GroundNode(1, 200, 400), 100, 1e-3), 1e-3 / 210000, label="offset")
    assert_close(channel_gain((0, 0), GroundNode(1, 200, 400), 100, 1e-3), 4.7619e-9, rel_tol=1e-4)
    assert channel_gain((5, 5), GroundNode(1, 0, 0), 100, 0.0) == 0.0
    print("  ok")


def test_gain_decreases_with_distance():
    _section("channel_gain strictly decreasing in horizontal distance")
    node = GroundNode(1, 0, 0)
    gains = [channel_gain((r, 0), node, 100, 1e-3) for r in np.linspace(0, 3000, 50)]
    assert all(b < a for a, b in zip(gains, gains[1:]))
    print("  ok")


def test_hover_gives_constant_row():
    _section("Hovering overhead gives a constant row of beta0/H^2")
    sc = make_scenario(nodes=[(300, -20)], start=(300, -20), finish=(300, -20), num_slots=6, horizon_s=6)
    g = gain_matrix(Trajectory.constant((300, -20), 6), sc)
    assert g.shape == (1, 6)
    assert np.allclose(g.g, 1e-3 / 100 ** 2, rtol=1e-14, atol=0)
    print("  ok")


def test_straight_line_peak():
    _section("Straight flight in case1: node 2's gain peaks at the slot nearest x=1000")
    sc = case1()
    pts = np.column_stack([np.arange(1, 51) * 40.0, np.zeros(50)])
    g = gain_matrix(Trajectory(pts), sc).g
    best = int(np.argmax(g[1]))
    assert best == int(np.argmin(np.abs(pts[:, 0] - 1000.0))) == 24
    assert np.all(g <= sc.radio.beta0 / sc.uav.altitude_m ** 2)
    print("  ok")


def test_translation_leaves_gains_unchanged():
    _section("Shifting scenario and trajectory by (+500, +500)")
    rng = np.random.default_rng(3)
    sc = case1()
    traj = Trajectory(rng.uniform(-200, 2200, size=(50, 2)))
    a = gain_matrix(traj, sc).g
    b = gain_matrix(traj.shifted((500, 500)), sc.translated((500, 500))).g
    assert np.allclose(a, b, rtol=1e-9, atol=0)
    print("  ok")


def test_gain_matrix_length_mismatch():
    _section("gain_matrix rejects a trajectory of the wrong length")
    assert_raises(InputError, gain_matrix, Trajectory.constant((0, 0), 7), case1())
    print("  ok")


# ---------------------------------------------------------------------------
# Rates
# ---------------------------------------------------------------------------

def test_slot_rate_values():
    _section("slot_rate hand values")
    assert slot_rate(0.0, 1e-7, _radio(), 3) == 0.0
    assert_close(slot_rate(1.0, 1.0, _radio(B=1.0, sigma2=1.0), 1), 1.0, label="unit SNR")

    radio = _radio(B=1.0, sigma2=1.2589e-20)
    r = slot_rate(1.0, 1e-7, radio, 3)
    assert_close(r, math.log2(1 + 3e-7 / 1.2589e-20) / 3, rel_tol=1e-12, label="three nodes")
    assert_close(r, 14.813, rel_tol=1e-4, label="three nodes, rounded")

    assert_raises(InputError, slot_rate, -1e-3, 1e-7, radio, 3)
    print("  ok")


def test_slot_rate_small_snr_is_accurate():
    _section("log1p keeps tiny SNRs accurate")
    radio = _radio(B=1.0, sigma2=1.0)
    x = 1e-18
    assert_close(slot_rate(x, 1.0, radio, 1), x / math.log(2), rel_tol=1e-12, label="tiny SNR")
    print("  ok")


def test_slot_rate_monotone_and_concave():
    _section("slot_rate increasing in p and g, concave in p")
    rng = np.random.default_rng(11)
    radio = _radio(B=1.0, sigma2=1.2589e-20)
    ps = np.linspace(0, 5, 200)
    r = slot_rates(ps, 1e-8, radio, 3)
    assert np.all(np.diff(r) > 0)
    gs = np.logspace(-10, -6, 200)
    r = slot_rates(0.1, gs, radio, 3)
    assert np.all(np.diff(r) > 0)

    for _ in range(500):
        p1, p2 = rng.uniform(0, 10, size=2)
        lam = rng.uniform()
        g = 10 ** rng.uniform(-10, -6)
        mix = slot_rate(lam * p1 + (1 - lam) * p2, g, radio, 3)
        chord = lam * slot_rate(p1, g, radio, 3) + (1 - lam) * slot_rate(p2, g, radio, 3)
        assert mix >= chord - 1e-12
    print("  ok")


# ---------------------------------------------------------------------------
# Throughput reports
# ---------------------------------------------------------------------------

def _small(num_nodes=2, num_slots=3, horizon_s=None):
    nodes = [(100.0 * i, 50.0 * i) for i in range(num_nodes)]
    return make_scenario(nodes=nodes, start=(0, 0), finish=(0, 0), num_slots=num_slots,
                         horizon_s=horizon_s or num_slots)


def test_zero_power_report():
    _section("All-zero power gives zero throughput")
    sc = _small()
    g = gain_matrix(Trajectory.constant((0, 0), 3), sc)
    report = throughput_report(np.zeros((2, 3)), g, sc)
    assert np.all(report.per_node == 0)
    assert report.min_value == 0.0 and report.argmin_node == 0
    print("  ok")


def test_identical_slots():
    _section("N=1, M=2 with equal gains and powers")
    sc = _small(num_nodes=1, num_slots=2, horizon_s=4)
    g = GainMatrix(np.full((1, 2), 2e-8))
    report = throughput_report(np.full((1, 2), 0.25), g, sc)
    expected = 2 * slot_rate(0.25, 2e-8, sc.radio, 1) / 4
    assert_close(report.min_value, expected, rel_tol=1e-14)
    print("  ok")


def test_report_matches_direct_summation():
    _section("Random 2x3 instances against a loop over math.log2")
    rng = np.random.default_rng(5)
    sc = _small()
    w = sc.radio.bandwidth_hz * sc.radio.noise_psd_w_per_hz / 2
    for _ in range(20):
        p = rng.uniform(0, 2, size=(2, 3))
        g = 10 ** rng.uniform(-10, -6, size=(2, 3))
        report = throughput_report(p, GainMatrix(g), sc)
        for n in range(2):
            direct = sum((sc.radio.bandwidth_hz / 2) * math.log2(1 + p[n, m] * g[n, m] / w) for m in range(3))
            assert_close(report.per_node[n], direct / sc.grid.horizon_s, rel_tol=1e-12)
        assert report.min_value == report.per_node.min()
    print("  ok")


def test_ties_and_argmin():
    _section("argmin picks the lowest index on ties")
    sc = _small(num_nodes=3)
    g = GainMatrix(np.full((3, 3), 1e-8))
    report = throughput_report(np.ones((3, 3)), g, sc)
    assert report.argmin_node == 0
    p = np.ones((3, 3))
    p[2] *= 0.5
    assert throughput_report(p, g, sc).argmin_node == 2
    print("  ok")


def test_doubling_horizon_halves_rates():
    _section("Doubling T with the same powers halves every R_n")
    short, long = _small(horizon_s=3), _small(horizon_s=6)
    g = GainMatrix(np.full((2, 3), 3e-8))
    p = np.array([[0.1, 0.2, 0.3], [0.3, 0.0, 0.1]])
    a = throughput_report(p, g, short).per_node
    b = throughput_report(p, g, long).per_node
    assert np.allclose(b, a / 2, rtol=1e-14)
    print("  ok")


def test_report_shape_mismatch():
    _section("throughput_report rejects mismatched shapes")
    sc = _small()
    assert_raises(InputError, throughput_report, np.zeros((3, 2)), GainMatrix(np.ones((2, 3))), sc)
    assert_raises(InputError, throughput_report, np.zeros((2, 4)), GainMatrix(np.ones((2, 4))), sc)
    print("  ok")


def test_min_throughput_uses_trajectory():
    _section("min_throughput evaluates gains along the trajectory")
    sc = _small()
    traj = Trajectory.constant((0, 0), 3)
    p = np.full((2, 3), 0.2)
    assert_close(min_throughput(p, traj, sc), throughput_report(p, gain_matrix(traj, sc), sc).min_value)
    print("  ok")


ALL_TESTS = [
    test_channel_gain_values,
    test_gain_decreases_with_distance,
    test_hover_gives_constant_row,
    test_straight_line_peak,
    test_translation_leaves_gains_unchanged,
    test_gain_matrix_length_mismatch,
    test_slot_rate_values,
    test_slot_rate_small_snr_is_accurate,
    test_slot_rate_monotone_and_concave,
    test_zero_power_report,
    test_identical_slots,
    test_report_matches_direct_summation,
    test_ties_and_argmin,
    test_doubling_horizon_halves_rates,
    test_report_shape_mismatch,
    test_min_throughput_uses_trajectory,
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
