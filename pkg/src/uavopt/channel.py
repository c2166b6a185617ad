"""Line-of-sight channel gains and per-node average throughput."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .scenario import GroundNode, RadioParams, Scenario, Trajectory

LN2 = math.log(2.0)


@dataclass(frozen=True)
class GainMatrix:
    """g[n, m]: power gain from the UAV at waypoint m to node n."""
    g: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape


@dataclass(frozen=True)
class ThroughputReport:
    per_node: np.ndarray = field(repr=False)
    min_value: float
    # Row index into Scenario.nodes (node id is argmin_node + 1).
    argmin_node: int


def channel_gain(p, node: GroundNode, H: float, beta0: float) -> float:
    x, y = p
    return beta0 / ((x - node.x) ** 2 + (y - node.y) ** 2 + H ** 2)


def squared_distances(points: np.ndarray, sc: Scenario) -> np.ndarray:
    """d[n, m] = (x[m] - x_n)^2 + (y[m] - y_n)^2 + H^2."""
    diff = points[np.newaxis, :, :] - sc.node_xy[:, np.newaxis, :]
    return np.einsum("nmk,nmk->nm", diff, diff) + sc.uav.altitude_m ** 2


def gain_matrix(traj: Trajectory, sc: Scenario) -> GainMatrix:
    if traj.num_slots != sc.num_slots:
        raise InputError("gain_matrix", f"trajectory has {traj.num_slots} points, scenario has M={sc.num_slots}")
    return GainMatrix(sc.radio.beta0 / squared_distances(traj.points, sc))


def log2_1p(x):
    return np.log1p(x) / LN2


def slot_rates(p, g, radio: RadioParams, N: int) -> np.ndarray:
    """Elementwise (B/N) log2(1 + p g / ((B/N) sigma^2))."""
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InputError("slot_rate", "transmit power must be nonnegative")
    band = radio.bandwidth_hz / N
    return band * log2_1p(p * np.asarray(g, dtype=float) / (band * radio.noise_psd_w_per_hz))


def slot_rate(p: float, g: float, radio: RadioParams, N: int) -> float:
    return float(slot_rates(p, g, radio, N))


def average_throughputs(power: np.ndarray, gains: np.ndarray, sc: Scenario) -> np.ndarray:
    """R_n = (1/T) sum_m slot rate, for every node."""
    return slot_rates(power, gains, sc.radio, sc.num_nodes).sum(axis=1) / sc.grid.horizon_s


def throughput_report(power, gains: GainMatrix, sc: Scenario) -> ThroughputReport:
    p = getattr(power, "p", power)
    p = np.asarray(p, dtype=float)
    if p.shape != gains.shape or p.shape != (sc.num_nodes, sc.num_slots):
        raise InputError("throughput_report", f"power {p.shape} and gains {gains.shape} must both be N x M = {(sc.num_nodes, sc.num_slots)}")
    per_node = average_throughputs(p, gains.g, sc)
    n = int(np.argmin(per_node))
    return ThroughputReport(per_node=per_node, min_value=float(per_node[n]), argmin_node=n)


def min_throughput(power, traj: Trajectory, sc: Scenario) -> float:
    return throughput_report(power, gain_matrix(traj, sc), sc).min_value
