"""
Successive convex approximation of the trajectory subproblem.

For fixed power, the slot rate log2(1 + gamma beta0 / d) is convex in the
squared distance d, so its tangent at the incumbent d_k is a global lower
bound:

    log2(1 + gamma beta0 / (d_k + f)) >= r_k - c f,
    c = gamma beta0 / (ln2 d_k (gamma beta0 + d_k)),

where f = dx^2 + dy^2 + grad_x dx + grad_y dy is the exact change in d
caused by the increments. Maximizing the worst node's bound over the
motion balls is a concave max-min program handed to convex_core.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import LN2, min_throughput, squared_distances
from .convex_core import DEFAULT_TOL, MaximinProblem, solve_maximin
from .errors import InputError, add_trace
from .power_alloc import PowerAllocation
from .scenario import MOTION_SLACK_M2, Scenario, Trajectory, check_trajectory, require_feasible

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SCAOptions:
    epsilon: float = 0.01
    max_iterations: int = 100
    # Outer-loop threshold; None uses epsilon for both loops.
    outer_epsilon: float | None = None
    max_outer_iterations: int = 50
    solver_tol: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("epsilon", "outer_epsilon", "solver_tol"):
            value = getattr(self, name)
            if value is None and name == "outer_epsilon":
                continue
            if math.isnan(value) or value <= 0:
                raise InputError("SCAOptions", f"{name} must be positive, got {value!r}")
        for name in ("max_iterations", "max_outer_iterations"):
            if getattr(self, name) < 1:
                raise InputError("SCAOptions", f"{name} must be at least 1")

    @property
    def outer_threshold(self) -> float:
        return self.epsilon if self.outer_epsilon is None else self.outer_epsilon

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "max_iterations": self.max_iterations,
            "outer_epsilon": self.outer_threshold,
            "max_outer_iterations": self.max_outer_iterations,
            "solver_tol": self.solver_tol,
        }


@dataclass(frozen=True)
class LinearizedModel:
    """Tangent lower-bound coefficients around one incumbent, all N x M."""
    d_k: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)
    r_k: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    grad_x: np.ndarray = field(repr=False)
    grad_y: np.ndarray = field(repr=False)
    # B / (N T): turns a sum of bits/Hz over slots into average bits/s.
    scale: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.d_k.shape


@dataclass(frozen=True)
class SCATrace:
    # True min average throughput of every accepted iterate, incumbent first.
    min_rates: tuple[float, ...]
    # Surrogate optimum of every solved subproblem.
    lower_bounds: tuple[float, ...]
    rejected: bool = False

    @property
    def iterations(self) -> int:
        return len(self.lower_bounds)


def linearize(traj_k: Trajectory, power: PowerAllocation, sc: Scenario) -> LinearizedModel:
    N, M = sc.num_nodes, sc.num_slots
    if traj_k.num_slots != M:
        raise InputError("linearize", f"trajectory has {traj_k.num_slots} points, scenario has M={M}")
    if power.shape != (N, M):
        raise InputError("linearize", f"power must be N x M = {(N, M)}, got {power.shape}")

    beta0 = sc.radio.beta0
    d_k = squared_distances(traj_k.points, sc)
    gamma = power.p / sc.noise_power_w
    snr = gamma * beta0 / d_k
    r_k = np.log1p(snr) / LN2
    c = gamma * beta0 / (LN2 * d_k * (gamma * beta0 + d_k))
    grad_x = 2 * (traj_k.x[np.newaxis, :] - sc.node_xy[:, 0:1])
    grad_y = 2 * (traj_k.y[np.newaxis, :] - sc.node_xy[:, 1:2])

    return LinearizedModel(
        d_k=d_k, gamma=gamma, r_k=r_k, c=c, grad_x=grad_x, grad_y=grad_y,
        scale=sc.radio.bandwidth_hz / (N * sc.grid.horizon_s),
    )


def split_increments(delta, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Accept (M, 2) increments or the stacked (dx[1..M], dy[1..M]) vector."""
    delta = np.asarray(delta, dtype=float)
    if delta.shape == (M, 2):
        return delta[:, 0], delta[:, 1]
    if delta.shape == (2 * M,):
        return delta[:M], delta[M:]
    raise InputError("increments", f"expected shape ({M}, 2) or ({2 * M},), got {delta.shape}")


def eval_lower_bound(model: LinearizedModel, delta, sc: Scenario) -> np.ndarray:
    """Lower-bound average throughput of every node after applying `delta`."""
    dx, dy = split_increments(delta, model.shape[1])
    f = (dx ** 2 + dy ** 2)[np.newaxis, :] + model.grad_x * dx + model.grad_y * dy
    return model.scale * (model.r_k - model.c * f).sum(axis=1)


def motion_balls(traj_k: Trajectory, sc: Scenario) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The M + 1 leg constraints as balls in the increments: start -> 1,
    m-1 -> m for m = 2..M, and M -> finish.
    """
    M = traj_k.num_slots
    dim = 2 * M
    pts = traj_k.points
    start = np.asarray(sc.uav.start, dtype=float)
    finish = np.asarray(sc.uav.finish, dtype=float)

    maps = np.zeros((M + 1, 2, dim))
    offsets = np.zeros((M + 1, 2))

    maps[0, 0, 0] = maps[0, 1, M] = 1.0
    offsets[0] = pts[0] - start
    for m in range(1, M):
        maps[m, 0, m], maps[m, 0, m - 1] = 1.0, -1.0
        maps[m, 1, M + m], maps[m, 1, M + m - 1] = 1.0, -1.0
        offsets[m] = pts[m] - pts[m - 1]
    maps[M, 0, M - 1] = maps[M, 1, dim - 1] = 1.0
    offsets[M] = pts[M - 1] - finish

    # Half the feasibility slack, so legs flown at exactly V*delta stay interior.
    radius = math.sqrt(sc.step_limit_m ** 2 + 0.5 * MOTION_SLACK_M2)
    return maps, offsets, np.full(M + 1, radius)


def trajectory_step(model: LinearizedModel, traj_k: Trajectory, sc: Scenario,
                    tol: float = DEFAULT_TOL) -> tuple[np.ndarray, float]:
    """Solve the surrogate max-min program; returns (increments as M x 2, surrogate optimum)."""
    M = traj_k.num_slots
    if model.shape != (sc.num_nodes, M):
        raise InputError("trajectory_step", f"model is {model.shape}, expected {(sc.num_nodes, M)}")

    qc = model.scale * model.c
    maps, offsets, radii = motion_balls(traj_k, sc)
    prob = MaximinProblem(
        const=model.scale * model.r_k.sum(axis=1),
        linear=-np.hstack([qc * model.grad_x, qc * model.grad_y]),
        curvature=qc,
        ball_maps=maps,
        ball_offsets=offsets,
        ball_radii=radii,
    )
    sol = solve_maximin(prob, tol=tol)
    delta = np.column_stack([sol.delta[:M], sol.delta[M:]])
    return delta, sol.s_value


@add_trace
def optimize_trajectory(traj0: Trajectory, power: PowerAllocation, sc: Scenario,
                        opts: SCAOptions | None = None) -> tuple[Trajectory, SCATrace]:
    """
    Iterate linearize -> trajectory_step -> move until the true minimum
    average throughput improves by at most epsilon.

    A step whose true value falls below the incumbent is not taken and
    the loop stops there, so the trace is monotone. Drops within the
    solver tolerance count as convergence; larger drops and steps that
    break the motion limits mark the trace as rejected.
    """
    opts = opts or SCAOptions()
    require_feasible(traj0, sc, "initial trajectory")
    if power.shape != (sc.num_nodes, sc.num_slots):
        raise InputError("optimize_trajectory", f"power must be N x M = {(sc.num_nodes, sc.num_slots)}, got {power.shape}")

    traj = traj0
    s = min_throughput(power, traj, sc)
    rates, bounds = [s], []
    rejected = False

    for k in range(opts.max_iterations):
        model = linearize(traj, power, sc)
        delta, s_lb = trajectory_step(model, traj, sc, tol=opts.solver_tol)
        bounds.append(s_lb)
        candidate = traj.moved(delta)

        s_new = min_throughput(power, candidate, sc)
        violations = check_trajectory(candidate, sc)
        if violations or s_new < s:
            rejected = bool(violations) or s - s_new > opts.solver_tol
            if violations:
                logger.warning("SCA step %d left the motion limits at %d legs; keeping the incumbent", k + 1, len(violations))
            elif s - s_new > opts.solver_tol:
                logger.warning("SCA step %d lowered the min rate by %.3g; keeping the incumbent", k + 1, s - s_new)
            else:
                logger.debug("SCA step %d converged (change %.3g)", k + 1, s_new - s)
            break

        gain = s_new - s
        traj, s = candidate, s_new
        rates.append(s)
        logger.debug("SCA step %d: s=%.9g (+%.3g), bound %.9g, |delta|max=%.3g m",
                     k + 1, s, gain, s_lb, float(np.abs(delta).max()))
        if gain <= opts.epsilon:
            break
    else:
        logger.debug("SCA stopped at %d iterations", opts.max_iterations)

    return traj, SCATrace(min_rates=tuple(rates), lower_bounds=tuple(bounds), rejected=rejected)
