"""Flat ``key=value`` run configuration shared by the phase engine, gains, plant and scenarios."""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .control import DEFAULT_ANKLE_GAINS, DEFAULT_KNEE_GAINS, PdGains
from .phase import PhaseConfig
from .sim import PlantModel, Scenario


class ConfigError(ValueError):
    pass


PHASE_KEYS = tuple(f.name for f in fields(PhaseConfig))
GAIN_KEYS = ("knee_kp", "knee_kd", "ankle_kp", "ankle_kd", "tau_max_nm", "units")
PLANT_KEYS = ("plant_mode", "knee_time_constant_s", "ankle_time_constant_s")
SCENARIO_KEYS = ("kind", "cadence_hz", "n_strides", "seed", "noise_deg", "amplitude",
                 "stance_fraction", "hold_deg", "dropout_s", "obstacle_hip_deg", "rest_s",
                 "replay_path")
ALL_KEYS = PHASE_KEYS + GAIN_KEYS + PLANT_KEYS + SCENARIO_KEYS

_INT_KEYS = {"n_strides", "seed"}
_STR_KEYS = {"units", "plant_mode", "kind", "replay_path"}


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment. Unknown or repeated keys are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        if key not in ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _convert(key, value, f"{source}:{lineno}")
    return out


def _convert(key: str, value: str, where: str):
    if key in _STR_KEYS:
        return value
    try:
        return int(value) if key in _INT_KEYS else float(value)
    except ValueError:
        raise ConfigError(f"{where}: {key} expects a number, got {value!r}") from None


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def format_config(values: dict) -> str:
    unknown = [k for k in values if k not in ALL_KEYS]
    if unknown:
        raise ConfigError(f"unknown keys {unknown}")
    return "".join(f"{k}={values[k]}\n" for k in ALL_KEYS if k in values and values[k] is not None)


def write_config(values: dict, path) -> None:
    Path(path).write_text(format_config(values))


def _pick(values: dict, keys) -> dict:
    return {k: values[k] for k in keys if k in values and values[k] is not None}


def build_phase_config(values: dict) -> PhaseConfig:
    try:
        return PhaseConfig(**_pick(values, PHASE_KEYS))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_gains(values: dict) -> tuple[PdGains, PdGains]:
    v = _pick(values, GAIN_KEYS)
    units = v.get("units", "deg")
    tau_max = v.get("tau_max_nm", DEFAULT_KNEE_GAINS.tau_max)
    try:
        if units == "deg":
            knee_kp, knee_kd = DEFAULT_KNEE_GAINS.kp, DEFAULT_KNEE_GAINS.kd
            ankle_kp, ankle_kd = DEFAULT_ANKLE_GAINS.kp, DEFAULT_ANKLE_GAINS.kd
        elif units == "rad":
            missing = [k for k in GAIN_KEYS[:4] if k not in v]
            if missing:
                raise ConfigError(f"units=rad requires explicit gains; missing {missing}")
            knee_kp = knee_kd = ankle_kp = ankle_kd = None
        else:
            raise ConfigError(f"units must be deg or rad, got {units!r}")
        knee = PdGains.from_units(v.get("knee_kp", knee_kp), v.get("knee_kd", knee_kd), tau_max, units)
        ankle = PdGains.from_units(v.get("ankle_kp", ankle_kp), v.get("ankle_kd", ankle_kd),
                                   tau_max, units)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return knee, ankle


def build_plant(values: dict) -> PlantModel:
    v = _pick(values, PLANT_KEYS)
    if "plant_mode" in v:
        v["mode"] = v.pop("plant_mode")
    try:
        return PlantModel(**v)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_scenario(values: dict) -> Scenario:
    try:
        return Scenario(**_pick(values, SCENARIO_KEYS))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
