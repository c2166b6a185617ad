import math
import re

import numpy as np

from .errors import ConfigError


#################################################
# UNIT DEFINITIONS
#################################################

BASE_DETAILS = """
Base units are dicts of base units and their exponents.
For example, 1 m/s^2 is represented as {"m": 1, "s": -2}.

Collections of units follow the format:
{key: ({base units}, multiplier, {optional characteristics})}.
Optional characteristics include:
    "alt": alternate names for the unit
    "SI min": minimum of the range of prefixes commonly used with the unit
    "SI max": maximum of the range of prefixes commonly used with the unit
"""
BASE_UNITS = {
    "kg": ({"kg": 1}, 1, {"alt": ["kilogram"], "SI min": 1, "SI max": 1}),
    "m":  ({"m": 1}, 1, {"alt": ["meter", "metre"], "SI max": 1e3}),
    "s":  ({"s": 1}, 1, {"alt": ["second", "sec"], "SI max": 1}),
    "b":  ({"b": 1}, 1, {"alt": ["bit"], "SI min": 1, "SI max": 1}),
}

def invalid_units(unit_dict):
    for v in unit_dict.values():
        for u in v[0]:
            if u not in BASE_UNITS:
                return u
    return False

if any(v[0] != {k: 1} for k, v in BASE_UNITS.items()):
    raise ValueError("Invalid unit in BASE_UNITS.")

def alt(units):
    alt_units = {}
    for v in units.values():
        for name in v[2].get("alt", []):
            alt_units[name] = (v[0], v[1])
            alt_units[name + "s"] = (v[0], v[1])
    return alt_units


UNIT_OPERATORS = ["*", "/", "^"]

SI_PREFIXES = {
    "p": 1e-12,
    "n": 1e-9,
    "u": 1e-6,
    "m": 1e-3,
    "": 1,
    "k": 1e3,
    "M": 1e6,
    "G": 1e9,
    "T": 1e12,
}

def prefix_units(units):
    prefixed_units = {}
    for ku, vu in units.items():
        si_min = vu[2].get("SI min", -np.inf)
        si_max = vu[2].get("SI max", np.inf)
        for kp, vp in SI_PREFIXES.items():
            if si_min <= vp <= si_max:
                prefixed_units[kp + ku] = (vu[0], vp * vu[1], {"alt": []})
    return prefixed_units

# Hz is cycles per second here, so its multiplier is 1.
SI_UNITS = {
    "W":   ({"kg": 1, "m": 2, "s": -3}, 1, {"alt": ["Watt"]}),
    "J":   ({"kg": 1, "m": 2, "s": -2}, 1, {"alt": ["Joule"]}),
    "Hz":  ({"s": -1}, 1, {"alt": ["Hertz"], "SI min": 1}),
    "bps": ({"b": 1, "s": -1}, 1, {"alt": [], "SI min": 1}),
}

if invalid_units(SI_UNITS):
    raise ValueError("Invalid unit in SI_UNITS: " + invalid_units(SI_UNITS))

LEGACY_UNITS = {
    "min": ({"s": 1}, 60, {"alt": ["minute"]}),
    "hr":  ({"s": 1}, 3600, {"alt": ["hour"]}),
    "ft":  ({"m": 1}, 0.3048, {"alt": ["foot"]}),
    "mi":  ({"m": 1}, 1609.344, {"alt": ["mile"]}),
    "nmi": ({"m": 1}, 1852.0, {"alt": []}),
    "mph": ({"m": 1, "s": -1}, 0.44704, {"alt": []}),
    "kph": ({"m": 1, "s": -1}, 1 / 3.6, {"alt": []}),
    "kt":  ({"m": 1, "s": -1}, 0.514444, {"alt": ["knot"]}),
}

if invalid_units(LEGACY_UNITS):
    raise ValueError("Invalid unit in LEGACY_UNITS: " + invalid_units(LEGACY_UNITS))

DIMENSIONLESS_UNITS = {
    "": ({}, 1, {"alt": []}),
    "%": ({}, 0.01, {"alt": ["percent"]}),
}

STANDARD_UNITS = prefix_units(SI_UNITS) | prefix_units(BASE_UNITS) | LEGACY_UNITS

# Prefixed tables drop the "alt" names, so aliases come from the unprefixed ones.
LINEAR_UNITS = STANDARD_UNITS | alt(BASE_UNITS | SI_UNITS | LEGACY_UNITS) | DIMENSIONLESS_UNITS | alt(DIMENSIONLESS_UNITS)

# Radio engineers write dBm for decibels relative to a milliwatt.
DB_ALIASES = {"dBm": "dBmW"}


#################################################
# UNIT PARSING
#################################################

def parse(unit_str):
    """
    Parse a unit string into (base units, fx) where fx maps a value in
    the given unit to base units. Logarithmic units start with "dB".
    """
    unit_str = unit_str.strip()
    for alias, canonical in DB_ALIASES.items():
        if unit_str == alias or unit_str.startswith(alias + "/") or unit_str.startswith(alias + "*"):
            unit_str = canonical + unit_str[len(alias):]
            break

    if unit_str in BASE_UNITS:
        units = {unit_str: 1}
        unit_fx = lambda x: x
    elif unit_str in LINEAR_UNITS:
        units = LINEAR_UNITS[unit_str][0]
        multiplier = LINEAR_UNITS[unit_str][1]
        unit_fx = lambda x: x * multiplier
    elif unit_str.startswith("dB"):
        units, multiplier = _parse_linear_unit(unit_str[2:])
        unit_fx = lambda x: 10 ** (x / 10) * multiplier
    else:
        units, multiplier = _parse_compound_units(unit_str)
        unit_fx = lambda x: x * multiplier

    return units, unit_fx


def _parse_linear_unit(unit_str):
    if unit_str in LINEAR_UNITS:
        return LINEAR_UNITS[unit_str][0], LINEAR_UNITS[unit_str][1]
    return _parse_compound_units(unit_str)


def _validate_compound_unit_format(unit_str):
    if any(unit_str.startswith(op) for op in UNIT_OPERATORS):
        raise ValueError(f"Unit string cannot start with an operator: {unit_str}")
    if any(unit_str.endswith(op) for op in UNIT_OPERATORS):
        raise ValueError(f"Unit string cannot end with an operator: {unit_str}")
    for i in range(len(unit_str) - 1):
        if unit_str[i] in UNIT_OPERATORS and unit_str[i + 1] in UNIT_OPERATORS:
            raise ValueError(f"Unit string cannot have consecutive operators: {unit_str}")


def _parse_compound_units(unit_str):
    _validate_compound_unit_format(unit_str)

    tokens = list(re.finditer(r"[A-Za-z%]+", unit_str))
    if not tokens:
        raise ValueError(f"Invalid unit: {unit_str}")

    units = {unit: 0 for unit in BASE_UNITS}
    multiplier = 1.0

    for token in tokens:
        unit = token.group()
        if unit not in LINEAR_UNITS:
            raise ValueError("Invalid unit: " + unit)

        start, end = token.span()
        sign = -1 if start > 0 and unit_str[start - 1] == "/" else 1
        exponent = 1.0
        if end < len(unit_str) and unit_str[end] == "^":
            match = re.match(r"[0-9.]+", unit_str[end + 1:])
            if not match:
                raise ValueError(f"Missing exponent after ^ in unit string: {unit_str}")
            exponent = float(match.group())

        for key, value in LINEAR_UNITS[unit][0].items():
            units[key] += sign * value * exponent
        multiplier *= LINEAR_UNITS[unit][1] ** (sign * exponent)

    return {key: value for key, value in units.items() if value != 0}, multiplier


#################################################
# QUANTITIES AT THE CONFIG BOUNDARY
#################################################

def _convert(fx, number, value, field):
    try:
        result = float(fx(float(number)))
    except OverflowError:
        result = math.inf
    if not math.isfinite(result):
        raise ConfigError(f"Expected a finite quantity, got {value!r}.", field=field)
    return result


def quantity(value, expected_units, field=None):
    """
    Convert a config value to base units.

    Numbers are taken to already be in `expected_units`. Strings are of
    the form "<number> <unit>", e.g. "2 km" or "-169 dBm/Hz", and must
    match the dimensions of `expected_units`.
    """
    expected_base, expected_fx = parse(expected_units)

    if isinstance(value, bool):
        raise ConfigError(f"Expected a quantity in {expected_units}, got a boolean.", field=field)
    if isinstance(value, (int, float)):
        return _convert(expected_fx, value, value, field)
    if not isinstance(value, str):
        raise ConfigError(f"Expected a quantity in {expected_units}, got {type(value).__name__}.", field=field)

    match = re.match(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$", value)
    if not match:
        raise ConfigError(f"Could not read a quantity from '{value}'.", field=field)
    number, unit_str = float(match.group(1)), match.group(2)
    if not unit_str:
        return _convert(expected_fx, number, value, field)

    try:
        base, fx = parse(unit_str)
    except ValueError as e:
        raise ConfigError(str(e), field=field)
    if base != expected_base:
        raise ConfigError(f"Units '{unit_str}' do not match the expected units '{expected_units}'.", field=field)
    return _convert(fx, number, value, field)


#################################################
# UNIT DISPLAY
#################################################

def display(value, pref, sigfigs=4):
    """Render a base-unit value in the preferred unit, e.g. display(1.26e-20, "dBm/Hz")."""
    _, fx = parse(pref)
    if pref.startswith("dB"):
        reference = fx(0.0)
        with np.errstate(divide="ignore"):
            shown = 10 * np.log10(value / reference)
    else:
        shown = value / fx(1.0)
    return f"{float(shown):.{sigfigs}g} {pref}"


def print_all():
    print("\n\nSupported units.")
    print("-" * 30 + "\nBASE UNITS\n" + "-" * 30 + f"\n{BASE_DETAILS}\n" + "-" * 30)
    for k, v in BASE_UNITS.items():
        print(f"   - {k}, aka {v[2]['alt']}")
    print("-" * 30 + "\nSI UNITS\n" + "-" * 30)
    for k, v in SI_UNITS.items():
        print(f"   - {k}, aka {v[2]['alt']}")
    print("-" * 30 + "\nLEGACY UNITS\n" + "-" * 30)
    for k, v in LEGACY_UNITS.items():
        print(f"   - {k}, aka {v[2]['alt']}")
    print("Any linear unit can be prefixed with dB (dBm is dB relative to 1 mW).")


if __name__ == "__main__":
    print_all()
