"""Benchmarks, budget sweeps and the CSV files the figures are drawn from."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass

import numpy as np
import pandas as pd

from .alternating import ConvergenceTrace, Solution, joint_optimize
from .channel import gain_matrix
from .errors import InfeasibleScenarioError, InputError, add_trace
from .power_alloc import PowerAllocation, optimize_power, optimize_power_for_gains, uniform_power
from .result_cache import ResultCache
from .scenario import MOTION_SLACK_M2, Scenario, Trajectory, leg_lengths_sq, require_feasible, serialize_scenario
from .trajectory_sca import SCAOptions, optimize_trajectory

logger = logging.getLogger(__name__)

SIGFIGS = 9
DOMINANCE_SLACK = 1e-9
FLOAT_FORMAT = f"%.{SIGFIGS}g"


#################################################
# BENCHMARKS
#################################################

def straight_line_trajectory(sc: Scenario) -> Trajectory:
    """Uniform-speed flight from start to finish, arriving at waypoint M."""
    M = sc.num_slots
    start = np.asarray(sc.uav.start, dtype=float)
    finish = np.asarray(sc.uav.finish, dtype=float)
    step = math.dist(sc.uav.start, sc.uav.finish) / M
    if step ** 2 > sc.step_limit_m ** 2 + MOTION_SLACK_M2:
        raise InfeasibleScenarioError(
            f"a straight flight needs {step:.6g} m per slot but the limit is {sc.step_limit_m:.6g} m"
        ).with_note(f"speed {step / sc.grid.slot_s:.6g} m/s exceeds v_max {sc.uav.v_max_mps:.6g} m/s")

    fractions = np.arange(1, M + 1, dtype=float)[:, np.newaxis] / M
    points = start + fractions * (finish - start)
    points[-1] = finish
    return Trajectory(points)


def straight_line_benchmark(sc: Scenario) -> Solution:
    """Straight-line flight with power optimized once for that path."""
    traj = straight_line_trajectory(sc)
    power, _ = optimize_power(traj, sc)
    return Solution.evaluate(traj, power, sc)


def static_center_benchmark(sc: Scenario) -> Solution:
    """A fixed access point above the mean node position; start and finish do not apply."""
    center = sc.node_xy.mean(axis=0)
    traj = Trajectory.constant(center, sc.num_slots)
    power, _ = optimize_power_for_gains(gain_matrix(traj, sc).g, sc)
    return Solution.evaluate(traj, power, sc)


def power_only(traj: Trajectory, sc: Scenario) -> Solution:
    require_feasible(traj, sc, "supplied trajectory")
    power, _ = optimize_power(traj, sc)
    return Solution.evaluate(traj, power, sc)


def trajectory_only(sc: Scenario, power: PowerAllocation | None = None, opts: SCAOptions | None = None,
                    traj_init: Trajectory | None = None) -> tuple[Solution, ConvergenceTrace]:
    """Trajectory optimized for fixed power (uniform unless given)."""
    power = power if power is not None else uniform_power(sc)
    if power.shape != (sc.num_nodes, sc.num_slots):
        raise InputError("trajectory_only", f"power must be N x M = {(sc.num_nodes, sc.num_slots)}, got {power.shape}")
    if not power.within_budget(sc.radio.power_budget_w):
        logger.warning("fixed power uses %.6g W of a %.6g W budget", power.total_w, sc.radio.power_budget_w)

    began = time.perf_counter()
    traj, inner = optimize_trajectory(traj_init or straight_line_trajectory(sc), power, sc, opts)
    trace = ConvergenceTrace(
        outer_s=[inner.min_rates[-1]],
        inner_iterations=[inner.iterations],
        wall_time_s=time.perf_counter() - began,
        inner_traces=[inner],
    )
    return Solution.evaluate(traj, power, sc), trace


#################################################
# TRAJECTORY DIAGNOSTICS
#################################################

def speed_profile(traj: Trajectory, sc: Scenario) -> np.ndarray:
    """Speed over each slot, |point m - point m-1| / delta with point 0 = start."""
    legs = leg_lengths_sq(traj, sc)[: traj.num_slots]
    return np.sqrt(legs) / sc.grid.slot_s


@dataclass(frozen=True)
class NodeVisit:
    node_id: int
    closest_slot: int
    min_distance_m: float
    hover_slots: int


def node_visits(traj: Trajectory, sc: Scenario) -> list[NodeVisit]:
    """Closest approach to each node and how many slots are spent within V*delta of it."""
    diff = traj.points[np.newaxis, :, :] - sc.node_xy[:, np.newaxis, :]
    dist = np.sqrt(np.einsum("nmk,nmk->nm", diff, diff))
    visits = []
    for n, node in enumerate(sc.nodes):
        m = int(np.argmin(dist[n]))
        visits.append(NodeVisit(
            node_id=node.id,
            closest_slot=m + 1,
            min_distance_m=float(dist[n, m]),
            hover_slots=int((dist[n] <= sc.step_limit_m).sum()),
        ))
    return visits


#################################################
# BUDGET SWEEP
#################################################

@dataclass(frozen=True)
class SweepRow:
    budget_w: float
    s_proposed: float
    s_benchmark: float
    s_static: float
    outer_iters: int

    def dominates(self, slack: float = DOMINANCE_SLACK) -> bool:
        return self.s_proposed >= max(self.s_benchmark, self.s_static) - slack


def _sweep_point(sc: Scenario, budget_w: float, opts: SCAOptions, warm: Trajectory | None = None):
    scb = sc.with_budget(budget_w)
    benchmark = straight_line_benchmark(scb)
    static = static_center_benchmark(scb)
    solution, trace = joint_optimize(scb, warm or benchmark.trajectory, opts)
    row = SweepRow(
        budget_w=float(budget_w),
        s_proposed=solution.s,
        s_benchmark=benchmark.s,
        s_static=static.s,
        outer_iters=trace.outer_iterations,
    )
    return row, solution.trajectory


def _cache_entry(row: SweepRow, traj: Trajectory) -> dict:
    return {
        "row": {
            "budget_w": row.budget_w,
            "s_proposed": row.s_proposed,
            "s_benchmark": row.s_benchmark,
            "s_static": row.s_static,
            "outer_iters": row.outer_iters,
        },
        "trajectory": traj.points.tolist(),
    }


def _from_cache_entry(entry: dict) -> tuple[SweepRow, Trajectory]:
    return SweepRow(**entry["row"]), Trajectory(entry["trajectory"])


@add_trace
def sweep_budget(sc: Scenario, budgets, opts: SCAOptions | None = None, jobs: int = 1,
                 cache: ResultCache | None = None) -> list[SweepRow]:
    """
    One row per budget with the proposed scheme and both benchmarks.

    Rows run independently (optionally on a thread pool). Afterwards any
    row whose proposed value falls below the previous row's is re-run
    from the previous row's trajectory and the better run kept.
    """
    opts = opts or SCAOptions()
    budgets = [float(b) for b in budgets]
    if any(not math.isfinite(b) or b <= 0 for b in budgets):
        raise InputError("sweep_budget", "budgets must be positive")
    if any(b2 < b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise InputError("sweep_budget", "budgets must be ascending")
    if not budgets:
        return []

    keys = [ResultCache.make_key(serialize_scenario(sc.with_budget(b)), b, opts.as_dict()) for b in budgets]
    results: list = [None] * len(budgets)
    if cache is not None:
        for i, key in enumerate(keys):
            hit, entry = cache.get(key)
            if hit:
                results[i] = _from_cache_entry(entry)

    todo = [i for i, r in enumerate(results) if r is None]
    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {i: pool.submit(_sweep_point, sc, budgets[i], opts) for i in todo}
            for i, future in futures.items():
                results[i] = future.result()
    else:
        for i in todo:
            results[i] = _sweep_point(sc, budgets[i], opts)
    for i in todo:
        logger.info("budget %.6g W: s=%.9g", budgets[i], results[i][0].s_proposed)

    for i in range(1, len(results)):
        (prev_row, prev_traj), (row, traj) = results[i - 1], results[i]
        if row.s_proposed >= prev_row.s_proposed:
            continue
        logger.debug("budget %.6g W fell below %.6g W, re-running warm", row.budget_w, prev_row.budget_w)
        warm_row, warm_traj = _sweep_point(sc, budgets[i], opts, warm=prev_traj)
        if warm_row.s_proposed > row.s_proposed:
            results[i] = (warm_row, warm_traj)

    rows = [row for row, _ in results]
    for row in rows:
        if not row.dominates():
            logger.warning("budget %.6g W: proposed %.9g does not dominate benchmark %.9g / static %.9g",
                           row.budget_w, row.s_proposed, row.s_benchmark, row.s_static)

    if cache is not None:
        for key, (row, traj) in zip(keys, results):
            cache.set(key, _cache_entry(row, traj))
        cache.save()
    return rows


#################################################
# CSV FILES
#################################################

@dataclass(frozen=True)
class SummaryRow:
    method: str
    s_bps: float
    outer_iters: int
    wall_time_s: float


def _write_frame(path: str, frame: pd.DataFrame):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_trajectory_csv(path: str, traj: Trajectory, sc: Scenario):
    slots = np.arange(1, traj.num_slots + 1)
    _write_frame(path, pd.DataFrame({
        "slot": slots,
        "t_s": slots * sc.grid.slot_s,
        "x_m": traj.x,
        "y_m": traj.y,
        "speed_mps": speed_profile(traj, sc),
    }))


def write_power_csv(path: str, solution: Solution, sc: Scenario):
    # Slot-major: all nodes of slot 1, then slot 2, ...
    gains = gain_matrix(solution.trajectory, sc).g
    N, M = sc.num_nodes, sc.num_slots
    _write_frame(path, pd.DataFrame({
        "slot": np.repeat(np.arange(1, M + 1), N),
        "node": np.tile([node.id for node in sc.nodes], M),
        "p_w": solution.power.p.T.ravel(),
        "gain": gains.T.ravel(),
    }))


def write_summary_csv(path: str, rows: list[SummaryRow]):
    columns = ["method", "s_bps", "outer_iters", "wall_time_s"]
    _write_frame(path, pd.DataFrame([astuple(r) for r in rows], columns=columns))


def write_trace_csv(path: str, trace: ConvergenceTrace):
    _write_frame(path, pd.DataFrame({
        "outer_iter": np.arange(1, len(trace.outer_s) + 1),
        "s_bps": np.asarray(trace.outer_s, dtype=float),
        "inner_iters": np.asarray(trace.inner_iterations, dtype=int),
    }))


def write_sweep_csv(path: str, rows: list[SweepRow]):
    columns = ["budget_w", "s_proposed", "s_benchmark", "s_static", "outer_iters"]
    _write_frame(path, pd.DataFrame([astuple(r) for r in rows], columns=columns))


def write_run_outputs(out_dir: str, sc: Scenario, solution: Solution, trace: ConvergenceTrace,
                      summary: list[SummaryRow]) -> list[str]:
    """Write trajectory.csv, power.csv, summary.csv and trace.csv; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [os.path.join(out_dir, name) for name in ("trajectory.csv", "power.csv", "summary.csv", "trace.csv")]
    write_trajectory_csv(paths[0], solution.trajectory, sc)
    write_power_csv(paths[1], solution, sc)
    write_summary_csv(paths[2], summary)
    write_trace_csv(paths[3], trace)
    return paths


def _read_frame(path: str, columns: list[str], operation: str) -> pd.DataFrame:
    """Read `columns` of a CSV file as floats."""
    try:
        frame = pd.read_csv(path)
    except OSError as e:
        raise InputError(operation, f"could not read {path}: {e.strerror or e}")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise InputError(operation, f"could not parse {path}: {e}")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise InputError(operation, f"{path} is missing columns {missing}")
    if frame.empty:
        raise InputError(operation, f"{path} has no rows")
    try:
        values = frame[columns].apply(pd.to_numeric).astype(float)
    except ValueError as e:
        raise InputError(operation, f"{path}: {e}")
    if not np.all(np.isfinite(values.to_numpy())):
        raise InputError(operation, f"{path} has empty or non-finite entries")
    return values


def read_trajectory_csv(path: str, sc: Scenario | None = None) -> Trajectory:
    frame = _read_frame(path, ["slot", "x_m", "y_m"], "read_trajectory_csv")
    frame = frame.sort_values("slot", kind="stable")
    traj = Trajectory(frame[["x_m", "y_m"]].to_numpy())
    if sc is not None and traj.num_slots != sc.num_slots:
        raise InputError("read_trajectory_csv", f"{path} has {traj.num_slots} slots, scenario has M={sc.num_slots}")
    return traj


def read_power_csv(path: str, sc: Scenario) -> PowerAllocation:
    frame = _read_frame(path, ["slot", "node", "p_w"], "read_power_csv")
    index = {node.id: n for n, node in enumerate(sc.nodes)}
    p = np.full((sc.num_nodes, sc.num_slots), np.nan)
    for slot, node, p_w in frame[["slot", "node", "p_w"]].itertuples(index=False):
        if slot != int(slot) or node != int(node):
            raise InputError("read_power_csv", f"{path}: slot and node must be integers, got ({slot}, {node})")
        slot, node = int(slot), int(node)
        if node not in index or not 1 <= slot <= sc.num_slots:
            raise InputError("read_power_csv", f"{path}: unknown slot/node ({slot}, {node})")
        p[index[node], slot - 1] = p_w
    if np.isnan(p).any():
        raise InputError("read_power_csv", f"{path} does not cover every (slot, node) pair")
    return PowerAllocation(p)
