import argparse
import sys
import time

import numpy as np

from . import bcolors
from . import console
from . import units
from .alternating import ConvergenceTrace, Solution, describe, joint_optimize, throughput_ceiling
from .channel import average_throughputs, gain_matrix, min_throughput, slot_rate, throughput_report
from .convex_core import MaximinProblem, MaximinSolution, solve_maximin
from .errors import ConfigError, SolverError, UavOptError
from .experiments import (
    SummaryRow,
    SweepRow,
    node_visits,
    power_only,
    read_power_csv,
    read_trajectory_csv,
    speed_profile,
    static_center_benchmark,
    straight_line_benchmark,
    straight_line_trajectory,
    sweep_budget,
    trajectory_only,
    write_run_outputs,
    write_sweep_csv,
)
from .power_alloc import PowerAllocation, optimize_power, uniform_power, waterfill_min_power
from .result_cache import ResultCache
from .scenario import Scenario, Trajectory, check_trajectory, load_scenario, load_scenario_file, serialize_scenario
from .trajectory_sca import SCAOptions, eval_lower_bound, linearize, optimize_trajectory, trajectory_step


#################################################
# COMMAND LINE
#################################################

def _budget_list(text):
    try:
        return [float(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated watts, got '{text}'")


def parse_args(args: list[str]) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON file or bundled name (case1, case2)")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--epsilon", type=float, default=0.01, help="stopping threshold in bits/s")
    solver.add_argument("--max-outer", type=int, default=50, help="outer iteration cap")

    parser = argparse.ArgumentParser(prog="uavopt", description="Max-min throughput UAV trajectory and power optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common, solver], help="joint optimization with benchmarks")
    run.add_argument("--out-dir", default="out")
    run.add_argument("--budget", type=float, help="override the power budget in W")

    sweep = sub.add_parser("sweep", parents=[common, solver], help="minimum throughput versus power budget")
    sweep.add_argument("--budgets", type=_budget_list, default=[1.0, 2.0, 3.0, 4.0, 5.0])
    sweep.add_argument("--out", default="sweep.csv")
    sweep.add_argument("--jobs", type=int, default=1, help="budgets solved in parallel")
    sweep.add_argument("--no-cache", action="store_true", help="ignore and do not write __uavcache__")

    bench = sub.add_parser("bench", parents=[common], help="benchmark methods only")
    bench.add_argument("--budget", type=float, help="override the power budget in W")

    power = sub.add_parser("power", parents=[common], help="optimize power for a given trajectory")
    power.add_argument("--trajectory", required=True, help="trajectory CSV (slot,x_m,y_m)")
    power.add_argument("--out-dir", default="out")

    fly = sub.add_parser("fly", parents=[common, solver], help="optimize the trajectory for fixed power")
    fly.add_argument("--power", default="uniform", help="'uniform' or a power CSV (slot,node,p_w)")
    fly.add_argument("--out-dir", default="out")

    sub.add_parser("units", help="list the units accepted in config quantities")

    return parser.parse_args(args)


def _options(ns) -> SCAOptions:
    return SCAOptions(epsilon=ns.epsilon, max_outer_iterations=ns.max_outer)


def _scenario(ns) -> Scenario:
    sc = load_scenario_file(ns.config)
    budget = getattr(ns, "budget", None)
    if budget is not None:
        try:
            sc = sc.with_budget(budget).validate()
        except ConfigError as e:
            e.source = sc.name
            raise
    return sc


def _print_solutions(rows: list[SummaryRow]):
    console.print_table(
        ["method", "min rate (bps)", "outer iters", "time (s)"],
        [[r.method, f"{r.s_bps:.6g}", r.outer_iters, f"{r.wall_time_s:.3f}"] for r in rows],
    )


def _print_visits(traj: Trajectory, sc: Scenario):
    console.print_table(
        ["node", "closest slot", "min distance (m)", "hover slots"],
        [[v.node_id, v.closest_slot, f"{v.min_distance_m:.1f}", v.hover_slots] for v in node_visits(traj, sc)],
    )


def _timed(label, fn, *args):
    t0 = time.perf_counter()
    solution = fn(*args)
    return solution, SummaryRow(label, solution.s, 0, time.perf_counter() - t0)


def _benchmarks(sc: Scenario) -> list[SummaryRow]:
    _, straight = _timed("straight_line", straight_line_benchmark, sc)
    _, static = _timed("static_center", static_center_benchmark, sc)
    return [straight, static]


def cmd_run(ns):
    sc = _scenario(ns)
    opts = _options(ns)
    solution, trace = joint_optimize(sc, straight_line_trajectory(sc), opts)
    summary = [SummaryRow("proposed", solution.s, trace.outer_iterations, trace.wall_time_s)] + _benchmarks(sc)

    paths = write_run_outputs(ns.out_dir, sc, solution, trace, summary)
    print(describe(trace))
    _print_solutions(summary)
    _print_visits(solution.trajectory, sc)
    print(f"ceiling (overhead, full budget): {throughput_ceiling(sc):.6g} bps")
    for path in paths:
        print(f"wrote {path}")


def cmd_sweep(ns):
    sc = _scenario(ns)
    cache = None
    if not ns.no_cache:
        cache = ResultCache()
        cache.set_cache_file(sc.name)
    rows = sweep_budget(sc, ns.budgets, _options(ns), jobs=max(1, ns.jobs), cache=cache)
    console.print_table(
        ["budget (W)", "proposed", "straight line", "static", "outer iters"],
        [[f"{r.budget_w:g}", f"{r.s_proposed:.6g}", f"{r.s_benchmark:.6g}", f"{r.s_static:.6g}", r.outer_iters] for r in rows],
    )
    write_sweep_csv(ns.out, rows)
    print(f"wrote {ns.out}")


def cmd_bench(ns):
    sc = _scenario(ns)
    _print_solutions(_benchmarks(sc))


def cmd_power(ns):
    sc = _scenario(ns)
    traj = read_trajectory_csv(ns.trajectory, sc)
    solution, row = _timed("power_only", power_only, traj, sc)
    trace = ConvergenceTrace(outer_s=[solution.s], inner_iterations=[0], wall_time_s=row.wall_time_s)
    paths = write_run_outputs(ns.out_dir, sc, solution, trace, [row])
    _print_solutions([row])
    for path in paths:
        print(f"wrote {path}")


def cmd_units(ns):
    units.print_all()


def cmd_fly(ns):
    sc = _scenario(ns)
    power = uniform_power(sc) if ns.power == "uniform" else read_power_csv(ns.power, sc)
    solution, trace = trajectory_only(sc, power, _options(ns))
    row = SummaryRow("trajectory_only", solution.s, 1, trace.wall_time_s)
    paths = write_run_outputs(ns.out_dir, sc, solution, trace, [row])
    _print_solutions([row])
    _print_visits(solution.trajectory, sc)
    for path in paths:
        print(f"wrote {path}")


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bench": cmd_bench, "power": cmd_power, "fly": cmd_fly, "units": cmd_units}


def main(args=sys.argv[1:]):
    ns = parse_args(args)
    console.configure_logging(getattr(ns, "verbose", False))
    np.seterr(all="raise", under="ignore")
    try:
        console.print_welcome_message(ns.command)
        COMMANDS[ns.command](ns)
    except UavOptError as e:
        console.print_error(e)
        sys.exit(e.exit_code)
    except FloatingPointError as e:
        error = SolverError(ns.command, f"floating point failure: {e}")
        console.print_error(error)
        sys.exit(error.exit_code)
    except KeyboardInterrupt:
        print(f"\n\n{bcolors.ITALIC}Quitting...{bcolors.ENDC}")
        sys.exit(0)
