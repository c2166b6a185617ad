"""Problem instances: ground nodes, UAV limits, radio parameters and the time grid.

All quantities are stored in linear SI units. dBm only appears at the
config boundary, where `load_scenario` converts it.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from . import units as un
from .errors import ConfigError, InfeasibleScenarioError, InputError, add_trace

logger = logging.getLogger(__name__)

# Absolute slack (m^2) on squared-distance motion checks.
MOTION_SLACK_M2 = 1e-6

BUNDLED_CONFIGS = ("case1", "case2")


@dataclass(frozen=True)
class GroundNode:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class UavParams:
    altitude_m: float
    v_max_mps: float
    start: tuple[float, float]
    finish: tuple[float, float]


@dataclass(frozen=True)
class RadioParams:
    bandwidth_hz: float
    noise_psd_w_per_hz: float
    beta0: float
    # Documentation only: beta0 is already referred to this distance and
    # the distance never enters the channel gain.
    reference_distance_m: float
    power_budget_w: float

    def noise_power_w(self, num_nodes: int) -> float:
        """Noise power in one node's B/N sub-band."""
        return self.bandwidth_hz * self.noise_psd_w_per_hz / num_nodes


@dataclass(frozen=True)
class TimeGrid:
    horizon_s: float
    num_slots: int
    slot_s: float

    @classmethod
    def from_slots(cls, horizon_s: float, num_slots: int) -> "TimeGrid":
        return cls(horizon_s=horizon_s, num_slots=num_slots, slot_s=horizon_s / num_slots)


@dataclass(frozen=True)
class Trajectory:
    """Waypoints 1..M at the fixed altitude. The start point is not stored here."""
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
            raise InputError("Trajectory", f"points must have shape (M, 2), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InputError("Trajectory", "points must be finite")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def num_slots(self) -> int:
        return self.points.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    def moved(self, delta) -> "Trajectory":
        """Apply per-slot increments, x^{k+1}[m] = x^k[m] + dx[m]."""
        return Trajectory(self.points + np.asarray(delta, dtype=float).reshape(self.points.shape))

    def shifted(self, offset) -> "Trajectory":
        return Trajectory(self.points + np.asarray(offset, dtype=float).reshape(1, 2))

    @classmethod
    def constant(cls, point, num_slots: int) -> "Trajectory":
        return cls(np.tile(np.asarray(point, dtype=float).reshape(1, 2), (num_slots, 1)))

    def __eq__(self, other):
        return isinstance(other, Trajectory) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())


@dataclass(frozen=True)
class Scenario:
    nodes: tuple[GroundNode, ...]
    uav: UavParams
    radio: RadioParams
    grid: TimeGrid
    name: str = "scenario"

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_slots(self) -> int:
        return self.grid.num_slots

    @property
    def node_xy(self) -> np.ndarray:
        return np.array([[n.x, n.y] for n in self.nodes], dtype=float).reshape(-1, 2)

    @property
    def step_limit_m(self) -> float:
        """Largest horizontal displacement per slot, V*delta."""
        return self.uav.v_max_mps * self.grid.slot_s

    @property
    def noise_power_w(self) -> float:
        return self.radio.noise_power_w(self.num_nodes)

    def with_budget(self, power_budget_w: float) -> "Scenario":
        return replace(self, radio=replace(self.radio, power_budget_w=float(power_budget_w)))

    def translated(self, offset) -> "Scenario":
        dx, dy = (float(v) for v in offset)
        nodes = tuple(replace(n, x=n.x + dx, y=n.y + dy) for n in self.nodes)
        uav = replace(
            self.uav,
            start=(self.uav.start[0] + dx, self.uav.start[1] + dy),
            finish=(self.uav.finish[0] + dx, self.uav.finish[1] + dy),
        )
        return replace(self, nodes=nodes, uav=uav)

    def validate(self) -> "Scenario":
        if self.num_nodes < 1:
            raise ConfigError("A scenario needs at least one ground node.", field="nodes")
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ConfigError("Ground node ids must be unique.", field="nodes")
        for n in self.nodes:
            if not (math.isfinite(n.x) and math.isfinite(n.y)):
                raise ConfigError(f"Node {n.id} has non-finite coordinates.", field="nodes")

        _require_positive("uav.altitude_m", self.uav.altitude_m)
        _require_positive("uav.v_max_mps", self.uav.v_max_mps)
        for key in ("start", "finish"):
            point = getattr(self.uav, key)
            if len(point) != 2 or not all(math.isfinite(v) for v in point):
                raise ConfigError("Expected a finite [x, y] pair.", field=f"uav.{key}")

        for key in ("bandwidth_hz", "noise_psd_w_per_hz", "beta0", "reference_distance_m", "power_budget_w"):
            _require_positive(f"radio.{key}", getattr(self.radio, key))

        if self.grid.num_slots < 1:
            raise ConfigError("The time grid needs at least one slot.", field="grid.num_slots")
        _require_positive("grid.horizon_s", self.grid.horizon_s)
        _require_positive("grid.slot_s", self.grid.slot_s)
        if abs(self.grid.num_slots * self.grid.slot_s - self.grid.horizon_s) > 1e-12 * self.grid.horizon_s:
            raise ConfigError("horizon_s must equal num_slots * slot_s.", field="grid")

        # M waypoints give M + 1 legs between start and finish.
        gap = math.dist(self.uav.start, self.uav.finish)
        reach = (self.num_slots + 1) * self.step_limit_m
        if gap > reach * (1 + 1e-12):
            raise InfeasibleScenarioError(
                f"finish is {gap:.6g} m from start but at most {reach:.6g} m can be flown in {self.num_slots + 1} legs"
            )
        return self


def _require_positive(name, value):
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(f"Expected a strictly positive number, got {value!r}.", field=name)


def dbm_per_hz_to_w_per_hz(v: float) -> float:
    """-169 dBm/Hz -> 1.2589e-20 W/Hz."""
    return 10 ** ((v - 30) / 10)


#################################################
# CONFIG INGESTION
#################################################

def _get(section: dict, key: str, path: str):
    if not isinstance(section, dict):
        raise ConfigError("Expected an object.", field=path)
    if key not in section:
        raise ConfigError("Missing required field.", field=f"{path}.{key}" if path else key)
    return section[key]


def _point(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError("Expected an [x, y] pair.", field=path)
    return (un.quantity(value[0], "m", field=path), un.quantity(value[1], "m", field=path))


def _noise(radio: dict) -> float:
    given = [k for k in ("noise_dbm_per_hz", "noise_w_per_hz") if k in radio]
    if len(given) != 1:
        raise ConfigError("Give exactly one of noise_dbm_per_hz or noise_w_per_hz.", field="radio")
    if given[0] == "noise_w_per_hz":
        return un.quantity(radio["noise_w_per_hz"], "W/Hz", field="radio.noise_w_per_hz")

    value = radio["noise_dbm_per_hz"]
    if isinstance(value, str):
        # "-169 dBm/Hz" carries its own unit.
        return un.quantity(value, "W/Hz", field="radio.noise_dbm_per_hz")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"Expected a finite number, got {value!r}.", field="radio.noise_dbm_per_hz")
    return dbm_per_hz_to_w_per_hz(float(value))


def _grid(grid: dict) -> TimeGrid:
    horizon = un.quantity(_get(grid, "horizon_s", "grid"), "s", field="grid.horizon_s")
    if horizon <= 0 or not math.isfinite(horizon):
        raise ConfigError(f"Expected a strictly positive number, got {horizon!r}.", field="grid.horizon_s")

    num_slots = grid.get("num_slots")
    slot_s = grid.get("slot_s")
    if num_slots is None and slot_s is None:
        raise ConfigError("Missing required field (num_slots or slot_s).", field="grid")

    if num_slots is not None:
        if (isinstance(num_slots, bool) or not isinstance(num_slots, (int, float))
                or (isinstance(num_slots, float) and not math.isfinite(num_slots))
                or num_slots != int(num_slots)):
            raise ConfigError(f"Expected an integer, got {num_slots!r}.", field="grid.num_slots")
        num_slots = int(num_slots)
        if num_slots < 1:
            raise ConfigError("The time grid needs at least one slot.", field="grid.num_slots")

    if slot_s is not None:
        slot_s = un.quantity(slot_s, "s", field="grid.slot_s")
        if slot_s <= 0:
            raise ConfigError(f"Expected a strictly positive number, got {slot_s!r}.", field="grid.slot_s")
        implied = round(horizon / slot_s)
        if implied < 1 or abs(implied * slot_s - horizon) > 1e-9 * horizon:
            raise ConfigError("horizon_s must be an integer multiple of slot_s.", field="grid")
        if num_slots is not None and num_slots != implied:
            raise ConfigError(f"num_slots={num_slots} disagrees with horizon_s/slot_s={implied}.", field="grid")
        num_slots = implied

    return TimeGrid.from_slots(horizon, num_slots)


@add_trace
def scenario_from_dict(doc: dict, name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("The config document must be an object.")

    raw_nodes = _get(doc, "nodes", "")
    if not isinstance(raw_nodes, list):
        raise ConfigError("Expected a list of [x, y] pairs.", field="nodes")
    nodes = []
    for i, raw in enumerate(raw_nodes):
        x, y = _point(raw, f"nodes[{i}]")
        nodes.append(GroundNode(id=i + 1, x=x, y=y))
    nodes = tuple(nodes)

    uav_doc = _get(doc, "uav", "")
    uav = UavParams(
        altitude_m=un.quantity(_get(uav_doc, "altitude_m", "uav"), "m", field="uav.altitude_m"),
        v_max_mps=un.quantity(_get(uav_doc, "v_max_mps", "uav"), "m/s", field="uav.v_max_mps"),
        start=_point(_get(uav_doc, "start", "uav"), "uav.start"),
        finish=_point(_get(uav_doc, "finish", "uav"), "uav.finish"),
    )

    radio_doc = _get(doc, "radio", "")
    radio = RadioParams(
        bandwidth_hz=un.quantity(_get(radio_doc, "bandwidth_hz", "radio"), "Hz", field="radio.bandwidth_hz"),
        noise_psd_w_per_hz=_noise(radio_doc),
        beta0=un.quantity(_get(radio_doc, "beta0", "radio"), "", field="radio.beta0"),
        reference_distance_m=un.quantity(radio_doc.get("reference_distance_m", 1.0), "m", field="radio.reference_distance_m"),
        power_budget_w=un.quantity(_get(radio_doc, "power_budget_w", "radio"), "W", field="radio.power_budget_w"),
    )

    grid = _grid(_get(doc, "grid", ""))
    return Scenario(nodes=nodes, uav=uav, radio=radio, grid=grid, name=name).validate()


def load_scenario(config_text: str, name: str = "scenario") -> Scenario:
    """Parse a JSON config document into a validated Scenario."""
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Could not parse JSON: {e.msg} (line {e.lineno}, column {e.colno})", source=name)
    try:
        return scenario_from_dict(doc, name=name)
    except ConfigError as e:
        if e.source is None:
            e.source = name
        raise


def resolve_config_path(path_or_name: str) -> str:
    """Accept a file path, or the name of a bundled config such as 'case1'."""
    if os.path.exists(path_or_name):
        return path_or_name
    if not path_or_name.endswith(".json") and os.path.exists(path_or_name + ".json"):
        return path_or_name + ".json"
    stem = os.path.splitext(os.path.basename(path_or_name))[0]
    if stem in BUNDLED_CONFIGS:
        return str(resources.files("uavopt").joinpath("configs", stem + ".json"))
    raise ConfigError("Config file not found.", source=path_or_name)


def load_scenario_file(path_or_name: str) -> Scenario:
    path = resolve_config_path(path_or_name)
    try:
        with open(path, "r") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Could not read config: {e.strerror}", source=path)
    name = os.path.splitext(os.path.basename(path))[0]
    logger.debug("loading scenario %s from %s", name, path)
    return load_scenario(text, name=name)


def serialize_scenario(sc: Scenario) -> str:
    """Canonical JSON in linear SI units, the inverse of load_scenario."""
    doc = {
        "nodes": [[n.x, n.y] for n in sc.nodes],
        "uav": {
            "altitude_m": sc.uav.altitude_m,
            "v_max_mps": sc.uav.v_max_mps,
            "start": list(sc.uav.start),
            "finish": list(sc.uav.finish),
        },
        "radio": {
            "bandwidth_hz": sc.radio.bandwidth_hz,
            "noise_w_per_hz": sc.radio.noise_psd_w_per_hz,
            "beta0": sc.radio.beta0,
            "reference_distance_m": sc.radio.reference_distance_m,
            "power_budget_w": sc.radio.power_budget_w,
        },
        "grid": {"horizon_s": sc.grid.horizon_s, "num_slots": sc.grid.num_slots},
    }
    return json.dumps(doc, indent=2, sort_keys=True)


#################################################
# TRAJECTORY FEASIBILITY
#################################################

@dataclass(frozen=True)
class Violation:
    """
    A leg longer than V*delta. `slot` is the index of the waypoint the leg
    ends at, with M + 1 standing for the final leg into the finish point.
    """
    slot: int
    excess_m: float


def leg_lengths_sq(traj: Trajectory, sc: Scenario) -> np.ndarray:
    """Squared lengths of the M + 1 legs start -> 1 -> ... -> M -> finish."""
    path = np.vstack([np.asarray(sc.uav.start, dtype=float), traj.points, np.asarray(sc.uav.finish, dtype=float)])
    steps = np.diff(path, axis=0)
    return np.einsum("ij,ij->i", steps, steps)


def check_trajectory(traj: Trajectory, sc: Scenario) -> list[Violation]:
    if traj.num_slots != sc.num_slots:
        raise InputError("check_trajectory", f"trajectory has {traj.num_slots} points, scenario has M={sc.num_slots}")
    limit = sc.step_limit_m
    legs = leg_lengths_sq(traj, sc)
    bad = np.flatnonzero(legs > limit ** 2 + MOTION_SLACK_M2)
    return [Violation(slot=int(i) + 1, excess_m=float(np.sqrt(legs[i]) - limit)) for i in bad]


def require_feasible(traj: Trajectory, sc: Scenario, what: str = "trajectory"):
    violations = check_trajectory(traj, sc)
    if violations:
        worst = max(violations, key=lambda v: v.excess_m)
        err = InfeasibleScenarioError(
            f"{what} exceeds the per-slot step limit of {sc.step_limit_m:.6g} m by {worst.excess_m:.6g} m",
            slot=worst.slot,
        )
        if len(violations) > 1:
            err.with_note(f"{len(violations)} legs violate the step limit")
        raise err
