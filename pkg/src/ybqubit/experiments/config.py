"""Experiment configuration: YAML files layered over shipped defaults."""

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml

from ..atom import AtomSpecies, MagneticEnvironment, PhysicalConstants
from ..errors import ConfigError, ConstraintViolation
from ..fields import LaserBeam

SCENARIOS = ("detect", "rabi", "branching", "hyperfine", "ramsey")
# Benchmarks runnable from Python but not exposed as CLI scenarios.
BENCHMARKS = ("prep",)
SCHEMA_VERSION = 1


def load_defaults():
    text = resources.files("ybqubit").joinpath("data/defaults.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "order_fractions":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _canonical(obj):
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def config_hash(resolved):
    blob = json.dumps(_canonical(resolved), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def grid(desc):
    """A scan grid from a list or ``{start, stop, num}`` / ``{start, stop, step}``."""
    if isinstance(desc, dict):
        start, stop = float(desc["start"]), float(desc["stop"])
        if "num" in desc:
            return np.linspace(start, stop, int(desc["num"]))
        step = float(desc["step"])
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(n)
    return np.asarray(desc, dtype=float)


@dataclass
class ExperimentConfig:
    """A resolved, validated configuration for one scenario."""

    scenario: str
    seed: int
    output_dir: str
    params: dict
    constants: PhysicalConstants
    environment: MagneticEnvironment
    beams: dict
    resolved: dict

    @property
    def species(self):
        return AtomSpecies(self.params.get("species", "Yb171"))

    @property
    def sha256(self):
        return config_hash(self.resolved)

    def beam(self, name):
        try:
            return self.beams[name]
        except KeyError:
            raise ConfigError(f"beams.{name}: no such beam") from None

    def scenario_beams(self):
        return tuple(self.beam(n) for n in self.params.get("beams", ()))


# Zero here would divide by zero or produce an empty measurement.
STRICTLY_POSITIVE = {"window_s", "pi_time_s", "pump_time_s", "bin_width_s", "repump_interval_s",
                     "decay_interval_s", "stage2_window_s", "integration_time_s", "efficiency",
                     "p_sat_W", "probe_935_p_sat_W"}


def _validate_scenario(name, p, problems):
    def positive_int(key):
        v = p.get(key)
        if not isinstance(v, int) or v <= 0:
            problems.append(f"{name}.{key}: must be a positive integer")

    def sorted_grid(key):
        try:
            g = grid(p[key])
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"{name}.{key}: invalid grid ({exc})")
            return
        if len(g) == 0:
            problems.append(f"{name}.{key}: grid is empty")
        elif np.any(np.diff(g) <= 0):
            problems.append(f"{name}.{key}: grid must be strictly increasing")

    if name == "detect":
        positive_int("shots_dark")
        positive_int("shots_bright")
    elif name == "rabi":
        positive_int("shots_per_point")
        sorted_grid("durations_s")
        if p.get("detection_mode") not in ("full", "ideal"):
            problems.append("rabi.detection_mode: must be 'full' or 'ideal'")
    elif name == "branching":
        positive_int("repetitions")
        sorted_grid("powers_W")
        if len(p.get("powers_W", ())) < 3:
            problems.append("branching.powers_W: need at least 3 powers")
        if p.get("method") not in ("ode", "mc"):
            problems.append("branching.method: must be 'ode' or 'mc'")
    elif name == "hyperfine":
        sorted_grid("stage1_grid_Hz")
        sorted_grid("stage2_grid_Hz")
    elif name == "ramsey":
        positive_int("shots_per_point")
        sorted_grid("dt_grid_s")
        sorted_grid("T_s")
        if p.get("detection_mode") not in ("full", "ideal"):
            problems.append("ramsey.detection_mode: must be 'full' or 'ideal'")
    for key, v in p.items():
        if not isinstance(v, (int, float)):
            continue
        if key in STRICTLY_POSITIVE and not v > 0:
            problems.append(f"{name}.{key}: must be > 0")
        elif key.endswith("_s") and v < 0:
            problems.append(f"{name}.{key}: must be >= 0")


def resolve(user=None, scenario=None, seed=None, output_dir=None, shots=None):
    """Layer ``user`` (a dict) over the defaults and validate.

    ``scenario``, ``seed``, ``output_dir`` and ``shots`` override the file.
    All violations are collected and raised together as :class:`ConfigError`.
    """
    user = dict(user or {})
    defaults = load_defaults()
    file_scen = user.pop("scenario", None)
    scen = scenario or file_scen
    if scenario and file_scen and file_scen != scenario:
        raise ConfigError(f"scenario: config is for '{file_scen}', not '{scenario}'")
    if scen not in SCENARIOS + BENCHMARKS:
        raise ConfigError(f"scenario: '{scen}' is not one of {', '.join(SCENARIOS)}")
    unknown = set(user) - {"seed", "output_dir", "constants", "environment", "beams",
                           "params", "schema_version"}
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown top-level key")
    if user.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}")
    for key in ("params", "constants", "environment", "beams"):
        if not isinstance(user.get(key, {}), dict):
            raise ConfigError(f"{key}: must be a mapping")
    params = _merge(defaults["scenarios"][scen], user.get("params", {}))
    if shots is not None:
        for key in ("shots_per_point", "shots_dark", "shots_bright", "repetitions"):
            if key in params:
                params[key] = int(shots)
    resolved = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scen,
        "seed": int(seed if seed is not None else user.get("seed", defaults["seed"])),
        "constants": _merge(defaults["constants"], user.get("constants", {})),
        "environment": _merge(defaults["environment"], user.get("environment", {})),
        "beams": _merge(defaults["beams"], user.get("beams", {})),
        "params": params,
    }
    problems = [f"{scen}.{k}: unknown parameter"
                for k in sorted(set(user.get("params", {})) - set(defaults["scenarios"][scen]))]
    if resolved["seed"] < 0:
        problems.append("seed: must be >= 0")
    try:
        constants = PhysicalConstants.from_dict(resolved["constants"])
    except (ConstraintViolation, TypeError, ValueError) as exc:
        problems.append(f"constants.{exc}")
        constants = None
    try:
        env = MagneticEnvironment.from_dict(resolved["environment"])
    except (ConstraintViolation, TypeError, ValueError) as exc:
        problems.append(f"environment.{exc}")
        env = None
    beams = {}
    for name, b in resolved["beams"].items():
        try:
            beams[name] = LaserBeam.from_dict(b)
        except (ConstraintViolation, KeyError, TypeError, ValueError) as exc:
            problems.append(f"beams.{name}: {exc}")
    for name in params.get("beams", ()):
        if name not in resolved["beams"]:
            problems.append(f"{scen}.beams: no beam named '{name}'")
    try:
        AtomSpecies(params.get("species", "Yb171"))
    except ValueError:
        problems.append(f"{scen}.species: must be Yb171 or Yb174")
    _validate_scenario(scen, params, problems)
    if problems:
        raise ConfigError("; ".join(problems))
    out = output_dir or user.get("output_dir") or defaults.get("output_dir")
    return ExperimentConfig(scen, resolved["seed"], out, params, constants, env, beams, resolved)


def load_config(path=None, **overrides):
    """Read a YAML config file (or none, for pure defaults) and resolve it."""
    user = {}
    if path is not None:
        try:
            with open(path) as fh:
                user = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: not valid YAML: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config: top level must be a mapping")
    return resolve(user, **overrides)
