"""TOML experiment configuration: schema, defaults and resolution."""
from __future__ import annotations

import copy
import difflib
import hashlib
import json
import math
import re
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, SynthLatError
from .evolution import DecoherenceParams
from .model import ModeLattice, QubitCoupler
from .protocols import (
    DoubleTone,
    ExperimentConfig,
    ReadoutGrid,
    Reversal,
    SingleSitePrep,
    SingleTone,
    WavePacketPrep,
)

SCHEMA: dict[str, dict] = {
    "lattice": {"n_left": 16, "n_right": 16, "omega0": 4320.0, "fsr": 7.33,
                "base_abs_index": 592},
    "coupler": {"omega_q": None, "kappa": 0.36, "scaling": "flat"},
    "prep": {"kind": "single_site", "m": 0, "ideal": False,
             "vacuum_superposition": False, "kappa": 4.0, "emission_cap": 3.0,
             "stop_p1": 0.01, "center_k": True},
    "drive": {"program": "single_tone", "order": 1, "detuning": 0.0, "freq": None,
              "strength": 0.5, "phase": "pi", "g1": 0.5, "phi1": "pi", "g2": 0.25,
              "phi2": "pi", "half_period": 2.5},
    "schedule": {"total_time": 10.0, "dt": 0.05, "modes": None, "frame": "rwa"},
    "decoherence": {"enabled": False, "t1_mode": 29.1, "t2_mode": 57.9, "t1_qubit": 10.0},
    "output": {"svg": False, "shots": 0},
    "sweep": {"command": "bloch", "parameter": "drive.detuning", "values": None,
              "start": None, "stop": None, "step": None},
}

INT_KEYS = {"n_left", "n_right", "base_abs_index", "m", "order", "shots"}
BOOL_KEYS = {"ideal", "vacuum_superposition", "center_k", "enabled", "svg"}
PHASE_KEYS = {"phase", "phi1", "phi2"}
CHOICES = {
    ("coupler", "scaling"): ("flat", "sqrt_omega"),
    ("prep", "kind"): ("single_site", "wave_packet"),
    ("drive", "program"): ("single_tone", "double_tone", "reversal"),
    ("schedule", "frame"): ("rwa", "lab"),
    ("sweep", "command"): ("walk", "bloch", "band", "flux", "unidir"),
}

#: Per-subcommand overrides of the schema defaults.
PRESETS: dict[str, dict] = {
    "rabi": {"schedule": {"total_time": 2.0, "dt": 0.01}},
    "walk": {"schedule": {"total_time": 5.0}},
    "bloch": {"drive": {"detuning": -0.2}, "schedule": {"total_time": 15.0}},
    "band": {"prep": {"vacuum_superposition": True},
             "schedule": {"total_time": 12.75, "dt": 0.05}},
    "flux": {"drive": {"program": "double_tone", "detuning": -0.2, "phi2": "0.5pi"}},
    "unidir": {"lattice": {"n_left": 50, "n_right": 50},
               "prep": {"kind": "wave_packet"},
               "drive": {"program": "reversal", "detuning": -0.2}},
    "sweep": {"drive": {"detuning": -0.2}, "schedule": {"total_time": 20.0},
              "sweep": {"start": -0.3, "stop": 0.3, "step": 0.1}},
}

_PHASE_RE = re.compile(r"^\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+)?)\s*\*?\s*pi\s*$")


def parse_phase(value, where: str = "phase") -> float:
    """Radians from a number or a string such as ``"pi"`` or ``"0.5pi"``."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number or 'x*pi', got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        match = _PHASE_RE.match(value)
        if match:
            coeff = match.group(1)
            if coeff in ("", "+"):
                factor = 1.0
            elif coeff == "-":
                factor = -1.0
            else:
                factor = float(coeff)
            return factor * math.pi
    raise ConfigError(f"{where}: expected a number or 'x*pi', got {value!r}")


def _nearest(name: str, options) -> str:
    close = difflib.get_close_matches(name, list(options), n=1, cutoff=0.0)
    return close[0] if close else ""


def _check_value(section: str, key: str, value):
    where = f"{section}.{key}"
    if value is None:
        return None
    if key in PHASE_KEYS:
        return parse_phase(value, where)
    if key in BOOL_KEYS:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if key in INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if (section, key) in CHOICES:
        if value not in CHOICES[section, key]:
            raise ConfigError(f"{where}: must be one of {CHOICES[section, key]}, got {value!r}")
        return value
    if key == "modes":
        if not isinstance(value, list) or not all(
                isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where}: expected a list of integers")
        return list(value)
    if key == "values":
        if not isinstance(value, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{where}: expected a list of numbers")
        return [float(v) for v in value]
    if key == "parameter":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected 'section.key'")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite")
    return value


def load_toml(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def resolve(raw: dict | None = None, command: str | None = None):
    """Merge user values over presets and schema defaults.

    Returns ``(resolved, defaults_applied)`` where ``defaults_applied`` lists
    every ``section.key`` not set by the user, with the source of its value.
    """
    raw = raw or {}
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigError(
                f"unknown section [{section}]; did you mean [{_nearest(section, SCHEMA)}]?")
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in body:
            if key not in SCHEMA[section]:
                raise ConfigError(
                    f"unknown key '{section}.{key}'; did you mean "
                    f"'{section}.{_nearest(key, SCHEMA[section])}'?")

    preset = PRESETS.get(command or "", {})
    resolved: dict[str, dict] = {}
    defaults: list[str] = []
    for section, keys in SCHEMA.items():
        resolved[section] = {}
        for key, default in keys.items():
            if key in raw.get(section, {}):
                value = raw[section][key]
            elif key in preset.get(section, {}):
                value = preset[section][key]
                defaults.append(f"{section}.{key} (preset {command})")
            else:
                value = default
                defaults.append(f"{section}.{key}")
            resolved[section][key] = _check_value(section, key, copy.deepcopy(value))

    lat = resolved["lattice"]
    if resolved["coupler"]["omega_q"] is None:
        resolved["coupler"]["omega_q"] = lat["omega0"]
    drive = resolved["drive"]
    if drive["freq"] is not None:
        if "detuning" in raw.get("drive", {}):
            raise ConfigError("set either drive.freq or drive.detuning, not both")
        order = drive["order"] if drive["program"] != "double_tone" else 1
        if order < 1:
            raise ConfigError("drive.order must be >= 1")
        drive["detuning"] = round(drive["freq"] / order - lat["fsr"], 9)
    return resolved, defaults


def build_experiment(resolved: dict, seed: int = 0, shots: int | None = None) -> ExperimentConfig:
    """Typed experiment configuration; physical invariants raise :class:`ConfigError`."""
    try:
        lat = ModeLattice(**resolved["lattice"])
        c = resolved["coupler"]
        coupler = QubitCoupler(c["omega_q"], c["kappa"], c["scaling"])
        p = resolved["prep"]
        if p["kind"] == "wave_packet":
            prep = WavePacketPrep(p["kappa"], p["emission_cap"], p["stop_p1"],
                                  p["vacuum_superposition"], p["center_k"])
        else:
            prep = SingleSitePrep(p["m"], p["ideal"], p["vacuum_superposition"])
        d = resolved["drive"]
        if d["program"] == "double_tone":
            drive = DoubleTone(d["detuning"], d["g1"], d["phi1"], d["g2"], d["phi2"])
        elif d["program"] == "reversal":
            drive = Reversal(d["order"], d["detuning"], d["strength"], d["phase"],
                             d["half_period"])
        else:
            drive = SingleTone(d["order"], d["detuning"], d["strength"], d["phase"])
        if d["program"] != "double_tone" and d["order"] < 1:
            raise ConfigError("drive.order must be >= 1")
        for name in ("strength", "g1", "g2"):
            if d[name] < 0:
                raise ConfigError(f"drive.{name} must be >= 0 (hopping strength)")
        s = resolved["schedule"]
        modes = tuple(s["modes"]) if s["modes"] is not None else None
        k = resolved["decoherence"]
        deco = DecoherenceParams(k["t1_mode"], k["t2_mode"], k["t1_qubit"], k["enabled"])
        return ExperimentConfig(
            lattice=lat, coupler=coupler, prep=prep, drive=drive,
            total_time=s["total_time"], readout=ReadoutGrid(s["dt"], modes), deco=deco,
            frame=s["frame"],
            shots=resolved["output"]["shots"] if shots is None else shots,
            seed=seed,
        )
    except ConfigError:
        raise
    except (SynthLatError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(path, command: str | None = None, seed: int = 0,
                 shots: int | None = None):
    """Read, validate and resolve a config file.

    Returns ``(ExperimentConfig, resolved_dict, defaults_applied)``.
    """
    raw = load_toml(path) if path is not None else {}
    resolved, defaults = resolve(raw, command)
    return build_experiment(resolved, seed, shots), resolved, defaults


def config_digest(resolved: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    text = json.dumps(resolved, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def with_override(resolved: dict, parameter: str, value) -> dict:
    section, _, key = parameter.partition(".")
    if section not in SCHEMA or key not in SCHEMA[section]:
        raise ConfigError(f"sweep parameter '{parameter}' is not a config key")
    out = copy.deepcopy(resolved)
    out[section][key] = _check_value(section, key, value)
    if parameter == "drive.detuning":
        out["drive"]["freq"] = None
    return out
