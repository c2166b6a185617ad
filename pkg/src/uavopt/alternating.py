"""Alternate between the power and trajectory subproblems until the min rate stalls."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .channel import ThroughputReport, gain_matrix, slot_rates, throughput_report
from .errors import InputError, add_trace
from .power_alloc import PowerAllocation, optimize_power, optimize_power_for_gains
from .scenario import Scenario, Trajectory, require_feasible
from .trajectory_sca import SCAOptions, SCATrace, optimize_trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Solution:
    trajectory: Trajectory
    power: PowerAllocation
    report: ThroughputReport
    s: float

    @classmethod
    def evaluate(cls, trajectory: Trajectory, power: PowerAllocation, sc: Scenario) -> "Solution":
        report = throughput_report(power, gain_matrix(trajectory, sc), sc)
        return cls(trajectory=trajectory, power=power, report=report, s=report.min_value)


@dataclass
class ConvergenceTrace:
    # s at the end of each outer iteration.
    outer_s: list[float] = field(default_factory=list)
    inner_iterations: list[int] = field(default_factory=list)
    wall_time_s: float = 0.0
    capped: bool = False
    inner_traces: list[SCATrace] = field(default_factory=list)

    @property
    def outer_iterations(self) -> int:
        return len(self.outer_s)


def throughput_ceiling(sc: Scenario) -> float:
    """
    Rate of a node served alone from directly overhead with the whole
    budget. The overhead gain is the same for every node, so this bounds
    every node's rate and hence the max-min value.
    """
    M = sc.num_slots
    g = sc.radio.beta0 / sc.uav.altitude_m ** 2
    per_slot = slot_rates(sc.radio.power_budget_w / M, g, sc.radio, sc.num_nodes)
    return float(M * per_slot / sc.grid.horizon_s)


@add_trace
def joint_optimize(sc: Scenario, traj_init: Trajectory, opts: SCAOptions | None = None) -> tuple[Solution, ConvergenceTrace]:
    opts = opts or SCAOptions()
    budget = sc.radio.power_budget_w
    if not np.isfinite(budget) or budget <= 0:
        raise InputError("joint_optimize", f"power budget must be positive, got {budget!r}")
    require_feasible(traj_init, sc, "initial trajectory")

    began = time.perf_counter()
    trace = ConvergenceTrace()
    traj = traj_init
    power, s = optimize_power_for_gains(gain_matrix(traj, sc).g, sc)
    s_prev = s
    logger.info("initial power step: s=%.9g", s)

    for l in range(opts.max_outer_iterations):
        if l > 0:
            new_power, s_power = optimize_power(traj, sc)
            if s_power >= s:
                power, s = new_power, s_power
            else:
                logger.debug("outer %d: power step would lower s by %.3g, kept incumbent", l + 1, s - s_power)

        traj, inner = optimize_trajectory(traj, power, sc, opts)
        s = inner.min_rates[-1]
        trace.outer_s.append(s)
        trace.inner_iterations.append(inner.iterations)
        trace.inner_traces.append(inner)
        logger.info("outer %d: s=%.9g after %d SCA steps", l + 1, s, inner.iterations)

        if s - s_prev <= opts.outer_threshold:
            break
        s_prev = s
    else:
        trace.capped = True
        logger.warning("alternating loop hit the cap of %d outer iterations", opts.max_outer_iterations)

    # One more power step so the reported power belongs to the final trajectory.
    final_power, s_final = optimize_power(traj, sc)
    if s_final >= s:
        power = final_power

    trace.wall_time_s = time.perf_counter() - began
    solution = Solution.evaluate(traj, power, sc)
    ceiling = throughput_ceiling(sc)
    if solution.s > ceiling * (1 + 1e-9):
        logger.warning("min rate %.9g exceeds the overhead ceiling %.9g", solution.s, ceiling)
    return solution, trace


def is_monotone(values, slack: float = 1e-9) -> bool:
    return all(b >= a - slack for a, b in zip(values, values[1:]))


def describe(trace: ConvergenceTrace) -> str:
    status = "capped" if trace.capped else "converged"
    last = trace.outer_s[-1] if trace.outer_s else math.nan
    return (f"{status} after {trace.outer_iterations} outer / {sum(trace.inner_iterations)} SCA iterations, "
            f"s={last:.6g} bps in {trace.wall_time_s:.2f} s")
