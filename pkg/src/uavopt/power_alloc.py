"""Max-min power allocation for a fixed trajectory.

Nodes are separable once the common rate s is fixed: each node needs the
least total power that lifts its average throughput to s, which is a
water-filling profile p[m] = max(0, nu - w/g[m]) with w = B sigma^2 / N.
The optimal s is the largest one whose per-node powers fit in P_T, found
by bisection.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .channel import LN2, average_throughputs, gain_matrix
from .errors import InputError, SolverError, add_trace
from .scenario import RadioParams, Scenario, TimeGrid, Trajectory

logger = logging.getLogger(__name__)

WATERFILL_RTOL = 1e-10
# Relative margin over the requested rate; rates recomputed from the
# powers stay at or above the target.
RATE_MARGIN = 4e-12
BUDGET_RTOL = 1e-9
BUDGET_SLACK_W = 1e-9
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class PowerAllocation:
    """p[n, m] in W."""
    p: np.ndarray = field(repr=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float, copy=True)
        if p.ndim != 2:
            raise InputError("PowerAllocation", f"power must be an N x M matrix, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InputError("PowerAllocation", "power must be finite and nonnegative")
        p.flags.writeable = False
        object.__setattr__(self, "p", p)

    @property
    def total_w(self) -> float:
        return float(self.p.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.shape

    def within_budget(self, budget_w: float) -> bool:
        return self.total_w <= budget_w + BUDGET_SLACK_W


@dataclass(frozen=True)
class WaterfillResult:
    powers: np.ndarray = field(repr=False)
    total_w: float
    water_level: float
    active_slots: tuple[int, ...]


def _check_gains(gains_n, operation: str, expected: int | None = None) -> np.ndarray:
    g = np.asarray(gains_n, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise InputError(operation, f"gains must be a non-empty vector, got shape {g.shape}")
    if expected is not None and g.size != expected:
        raise InputError(operation, f"expected {expected} gains, got {g.size}")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise InputError(operation, "gains must be finite and strictly positive")
    return g


def _waterfill_result(log_floor: np.ndarray, log_level: float) -> WaterfillResult:
    active = log_floor < log_level
    # w/g * (exp(log nu - log(w/g)) - 1), stable when the level barely clears the floor
    powers = np.where(active, np.exp(log_floor) * np.expm1(np.where(active, log_level - log_floor, 0.0)), 0.0)
    return WaterfillResult(
        powers=powers,
        total_w=float(powers.sum()),
        water_level=float(np.exp(log_level)),
        active_slots=tuple(int(i) for i in np.flatnonzero(active)),
    )


def waterfill_min_power(gains_n, s_target: float, radio: RadioParams, grid: TimeGrid, N: int,
                        rtol: float = WATERFILL_RTOL) -> WaterfillResult:
    """
    Least total power giving one node an average throughput of s_target.

    The achieved rate (1/T) sum_m (B/N) log2(1 + p[m] g[m] / w) depends on
    the water level only through sum_m max(0, ln nu - ln(w/g[m])), so the
    bisection runs on ln nu and never exponentiates the bracket ends.
    """
    g = _check_gains(gains_n, "waterfill_min_power", grid.num_slots)
    if not np.isfinite(s_target) or s_target < 0:
        raise InputError("waterfill_min_power", f"target rate must be finite and nonnegative, got {s_target!r}")

    log_floor = np.log(radio.noise_power_w(N)) - np.log(g)
    if s_target == 0:
        return _waterfill_result(log_floor, float(log_floor.min()))

    # rate = scale * (sum of log excesses)
    scale = radio.bandwidth_hz / (N * grid.horizon_s * LN2)
    target = s_target * (1 + RATE_MARGIN)
    need = target / scale

    def excess(level):
        return np.maximum(level - log_floor, 0.0).sum()

    lo = float(log_floor.min())
    # One slot alone, or all slots together, already reach the target here.
    hi = min(lo + need, float(log_floor.max()) + need / g.size)

    for _ in range(MAX_BISECTIONS):
        if scale * (excess(hi) - excess(lo)) <= rtol * target:
            break
        mid = 0.5 * (lo + hi)
        if excess(mid) >= need:
            hi = mid
        else:
            lo = mid

    # Closed form once the active set is pinned down.
    active = log_floor < hi
    exact = (need + log_floor[active].sum()) / active.sum()
    if lo <= exact <= hi and exact > log_floor[active].max():
        hi = float(exact)

    return _waterfill_result(log_floor, hi)


def waterfill_budget(gains_n, budget_w: float, radio: RadioParams, N: int) -> WaterfillResult:
    """Classic water-filling of a fixed budget over one node's slots."""
    g = _check_gains(gains_n, "waterfill_budget")
    if not np.isfinite(budget_w) or budget_w < 0:
        raise InputError("waterfill_budget", f"budget must be finite and nonnegative, got {budget_w!r}")

    floors = radio.noise_power_w(N) / g
    log_floor = np.log(floors)
    if budget_w == 0:
        return _waterfill_result(log_floor, float(log_floor.min()))

    # Drop the worst slots until the level clears every remaining floor.
    order = np.argsort(floors)
    sorted_floors = floors[order]
    for k in range(g.size, 0, -1):
        level = (budget_w + sorted_floors[:k].sum()) / k
        if level > sorted_floors[k - 1]:
            break

    powers = np.maximum(level - floors, 0.0)
    return WaterfillResult(
        powers=powers,
        total_w=float(powers.sum()),
        water_level=float(level),
        active_slots=tuple(int(i) for i in np.flatnonzero(powers > 0)),
    )


def single_node_rate(gains_n, budget_w: float, sc: Scenario) -> float:
    """Average throughput of one node that receives the whole budget."""
    wf = waterfill_budget(gains_n, budget_w, sc.radio, sc.num_nodes)
    return float(average_throughputs(wf.powers[np.newaxis, :], np.asarray(gains_n, dtype=float)[np.newaxis, :], sc)[0])


@add_trace
def optimize_power_for_gains(gains: np.ndarray, sc: Scenario) -> tuple[PowerAllocation, float]:
    budget = sc.radio.power_budget_w
    if not np.isfinite(budget) or budget <= 0:
        raise InputError("optimize_power", f"power budget must be positive, got {budget!r}")
    gains = np.asarray(gains, dtype=float)
    if gains.shape != (sc.num_nodes, sc.num_slots):
        raise InputError("optimize_power", f"gains must be N x M = {(sc.num_nodes, sc.num_slots)}, got {gains.shape}")
    N = sc.num_nodes

    def allocate(s):
        rows = [waterfill_min_power(gains[n], s, sc.radio, sc.grid, N) for n in range(N)]
        return rows, sum(r.total_w for r in rows)

    # Any common rate is capped by each node's rate with the whole budget.
    upper = min(single_node_rate(gains[n], budget, sc) for n in range(N))
    lo, hi = 0.0, upper
    best_rows, best_total = allocate(0.0)

    for it in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        rows, total = allocate(mid)
        if total <= budget:
            lo, best_rows, best_total = mid, rows, total
        else:
            hi = mid
        if hi - lo <= BUDGET_RTOL * upper and budget - best_total <= BUDGET_RTOL * budget:
            break
    else:
        logger.warning("power bisection hit %d iterations with %.3g W unused", MAX_BISECTIONS, budget - best_total)

    if not np.isfinite(best_total):
        raise SolverError("optimize_power", "non-finite power total")

    power = PowerAllocation(np.vstack([r.powers for r in best_rows]))
    s = float(average_throughputs(power.p, gains, sc).min())
    logger.debug("power step: s=%.9g after %d bisections, %.3g W unused", s, it + 1, budget - best_total)
    return power, s


def optimize_power(traj: Trajectory, sc: Scenario) -> tuple[PowerAllocation, float]:
    """Optimal max-min power for a fixed trajectory; returns (allocation, min rate)."""
    return optimize_power_for_gains(gain_matrix(traj, sc).g, sc)


def uniform_power(sc: Scenario) -> PowerAllocation:
    N, M = sc.num_nodes, sc.num_slots
    return PowerAllocation(np.full((N, M), sc.radio.power_budget_w / (N * M)))


def water_levels(power: PowerAllocation, gains: np.ndarray, sc: Scenario) -> np.ndarray:
    """Per-node water level nu_n read back from an allocation (nan for a silent node)."""
    floors = sc.noise_power_w / np.asarray(gains, dtype=float)
    levels = np.full(power.shape[0], np.nan)
    for n in range(power.shape[0]):
        active = power.p[n] > 0
        if active.any():
            levels[n] = float((power.p[n, active] + floors[n, active]).max())
    return levels
