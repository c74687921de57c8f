"""
TOML experiment configuration for the lab.

Loads an experiment description from a TOML file (or a preset dict) into an
ExperimentConfig. Unknown sections and keys are rejected with the line they
appear on; missing keys fall back to defaults.
"""

import dataclasses
import os
import re
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Dict, List, Optional, Tuple

import toml

from evolution import EvolutionConfig, STABILITY_DELTAS, WELL_AMPLITUDES
from field import GridSpec
from groundstate import (DEFAULT_MAX_ITER, DEFAULT_MINIMIZER_MAX_ITER, DEFAULT_MINIMIZER_RESIDUAL_TOL,
                         DEFAULT_MINIMIZER_STEP, DEFAULT_MINIMIZER_TOL, DEFAULT_PAIRS, DEFAULT_STATIONARITY_TOL,
                         DEFAULT_TOL)
from params import InvalidParameterError, ModelParams

# Global debug flag from environment variable
DEBUG = os.getenv('DEBUG', 'false').lower() in ('true', '1', 'yes', 'on')

DEFAULT_OUTPUT_DIR = "runs"
SWEEP_COMMANDS = ("derive", "groundstate", "constant", "evolve", "stability", "wellcheck")
INITIAL_DATA_KINDS = ("gaussian", "groundstate")


def debug_print(message):
    """Print debug message only if DEBUG is enabled"""
    if DEBUG:
        print(f"DEBUG: {message}")


class ConfigError(ValueError):
    """Raised for unknown keys, wrong value types and TOML syntax errors"""
    pass


@dataclass(frozen=True)
class SolverConfig:
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    minimizer_tol: float = DEFAULT_MINIMIZER_TOL
    minimizer_residual_tol: float = DEFAULT_MINIMIZER_RESIDUAL_TOL
    minimizer_max_iter: int = DEFAULT_MINIMIZER_MAX_ITER
    minimizer_step: float = DEFAULT_MINIMIZER_STEP
    minimizer_stationarity_tol: float = DEFAULT_STATIONARITY_TOL
    pairs: Tuple[Tuple[float, float], ...] = DEFAULT_PAIRS


@dataclass(frozen=True)
class InitialDataConfig:
    """Initial data of evolve: a Gaussian or the ground state, optionally rescaled to a mass fraction"""
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 0.5
    # fraction of the critical mass threshold; None keeps the amplitude
    mass_fraction: Optional[float] = None
    deltas: Tuple[float, ...] = STABILITY_DELTAS
    well_amplitudes: Tuple[float, ...] = WELL_AMPLITUDES


@dataclass(frozen=True)
class SweepConfig:
    alpha: Tuple[float, ...] = ()
    gamma: Tuple[float, ...] = ()
    p: Tuple[float, ...] = ()
    command: str = "derive"
    threads: int = 1

    def points(self) -> List[Tuple[float, float, float]]:
        return [(a, g, p) for a in self.alpha for g in self.gamma for p in self.p]


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    grid: GridSpec
    solver: SolverConfig = dataclass_field(default_factory=SolverConfig)
    evolution: EvolutionConfig = dataclass_field(default_factory=EvolutionConfig)
    initial: InitialDataConfig = dataclass_field(default_factory=InitialDataConfig)
    sweep: SweepConfig = dataclass_field(default_factory=SweepConfig)
    seed: int = 0
    output_dir: str = DEFAULT_OUTPUT_DIR
    name: str = "experiment"

    def with_overrides(self, seed: Optional[int] = None, output_dir: Optional[str] = None,
                       threads: Optional[int] = None) -> 'ExperimentConfig':
        updated = self
        if seed is not None:
            updated = dataclasses.replace(updated, seed=int(seed))
        if output_dir is not None:
            updated = dataclasses.replace(updated, output_dir=output_dir)
        if threads is not None:
            updated = dataclasses.replace(updated, sweep=dataclasses.replace(updated.sweep, threads=int(threads)))
        return updated

    def with_point(self, alpha: float, gamma: float, p: float, output_dir: str) -> 'ExperimentConfig':
        """Same experiment at another (alpha, gamma, p); raises InvalidParameterError for inadmissible points"""
        params = dataclasses.replace(self.params, alpha=alpha, gamma=gamma, p=p)
        return dataclasses.replace(self, params=params, output_dir=output_dir)

    def echo(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "params": self.params.to_dict(),
            "grid": self.grid.to_dict(),
            "solver": _plain(dataclasses.asdict(self.solver)),
            "evolution": self.evolution.to_dict(),
            "initial": _plain(dataclasses.asdict(self.initial)),
            "sweep": _plain(dataclasses.asdict(self.sweep)),
        }


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


ALLOWED_KEYS = {
    "params": {"N", "alpha", "gamma", "p", "epsilon", "debug"},
    "grid": {"n", "L"},
    "solver": {f.name for f in dataclasses.fields(SolverConfig)},
    "evolution": {f.name for f in dataclasses.fields(EvolutionConfig)},
    "initial": {f.name for f in dataclasses.fields(InitialDataConfig)},
    "sweep": {f.name for f in dataclasses.fields(SweepConfig)},
}
TOP_LEVEL_KEYS = {"seed", "output_dir", "name"}


def _line_of(text: Optional[str], section: Optional[str], key: str) -> Optional[int]:
    """Line number (1-based) of `key = ...` inside `[section]`, or of the section header"""
    if not text:
        return None
    current = None
    key_pattern = re.compile(rf"^\s*{re.escape(key)}\s*=")
    header_pattern = re.compile(r"^\s*\[\s*([^\]]+?)\s*\]")
    for number, line in enumerate(text.splitlines(), start=1):
        header = header_pattern.match(line)
        if header:
            current = header.group(1)
            if section is None and current == key:
                return number
            continue
        if current == section and key_pattern.match(line):
            return number
    return None


def _where(text: Optional[str], section: Optional[str], key: str) -> str:
    line = _line_of(text, section, key)
    location = f"[{section}] {key}" if section else key
    return f"{location} (line {line})" if line else location


def _cast(value, caster, text, section, key):
    if caster is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{_where(text, section, key)}: expected true/false, got {value!r}")
        return value
    if caster is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ConfigError(f"{_where(text, section, key)}: expected an integer, got {value!r}")
    if caster is float and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{_where(text, section, key)}: expected a number, got {value!r}")
    if caster is str and not isinstance(value, str):
        raise ConfigError(f"{_where(text, section, key)}: expected a string, got {value!r}")
    return caster(value)


def _cast_list(value, caster, text, section, key) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{_where(text, section, key)}: expected a list, got {value!r}")
    return tuple(_cast(v, caster, text, section, key) for v in value)


def _cast_pairs(value, text, section, key) -> tuple:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(f"{_where(text, section, key)}: expected a list of [a, b] pairs")
    pairs = []
    for pair in value:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"{_where(text, section, key)}: expected [a, b], got {pair!r}")
        pairs.append(tuple(_cast(v, float, text, section, key) for v in pair))
    return tuple(pairs)


def _check_keys(data: Dict[str, Any], text: Optional[str]):
    for key, value in data.items():
        if key in TOP_LEVEL_KEYS:
            continue
        if key not in ALLOWED_KEYS:
            raise ConfigError(f"unknown section or key {_where(text, None, key)}")
        if not isinstance(value, dict):
            raise ConfigError(f"{_where(text, None, key)}: expected a table")
        for sub in value:
            if sub not in ALLOWED_KEYS[key]:
                raise ConfigError(f"unknown key {_where(text, key, sub)}")


_FIELD_CASTERS = {
    "solver": {"tol": float, "max_iter": int, "minimizer_tol": float, "minimizer_residual_tol": float,
               "minimizer_max_iter": int, "minimizer_step": float, "minimizer_stationarity_tol": float},
    "evolution": {"dt": float, "T": float, "record_every": int, "blowup_norm_factor": float,
                  "spectral_tail_limit": float, "snapshot_every": int},
    "initial": {"kind": str, "amplitude": float, "width": float, "mass_fraction": float},
    "sweep": {"command": str, "threads": int},
}


def _section_values(data, section, text) -> Dict[str, Any]:
    raw = data.get(section, {})
    values = {}
    for key, caster in _FIELD_CASTERS[section].items():
        if key in raw:
            values[key] = _cast(raw[key], caster, text, section, key)
    return values


def config_from_dict(data: Dict[str, Any], text: Optional[str] = None) -> ExperimentConfig:
    """Build an ExperimentConfig from parsed TOML (text only serves line numbers in errors)"""
    _check_keys(data, text)

    raw_params = data.get("params", {})
    if "N" not in raw_params:
        raise ConfigError("[params] N is required")
    for key in ("alpha", "gamma", "p"):
        if key not in raw_params:
            raise ConfigError(f"[params] {key} is required")
    try:
        params = ModelParams(
            N=_cast(raw_params["N"], int, text, "params", "N"),
            alpha=_cast(raw_params["alpha"], float, text, "params", "alpha"),
            gamma=_cast(raw_params["gamma"], float, text, "params", "gamma"),
            p=_cast(raw_params["p"], float, text, "params", "p"),
            epsilon=_cast(raw_params.get("epsilon", 1), int, text, "params", "epsilon"),
            debug=_cast(raw_params.get("debug", False), bool, text, "params", "debug"),
        )
    except InvalidParameterError as e:
        raise ConfigError(f"[params]: {e}") from e

    raw_grid = data.get("grid", {})
    default_grid = GridSpec.default_for(params.N)
    try:
        grid = GridSpec(
            params.N,
            _cast(raw_grid.get("n", default_grid.n), int, text, "grid", "n"),
            _cast(raw_grid.get("L", default_grid.L), float, text, "grid", "L"),
        )
    except InvalidParameterError as e:
        raise ConfigError(f"[grid]: {e}") from e

    solver_values = _section_values(data, "solver", text)
    if "pairs" in data.get("solver", {}):
        solver_values["pairs"] = _cast_pairs(data["solver"]["pairs"], text, "solver", "pairs")
    solver = SolverConfig(**solver_values)

    try:
        evolution = EvolutionConfig(**_section_values(data, "evolution", text))
    except InvalidParameterError as e:
        raise ConfigError(f"[evolution]: {e}") from e

    initial_values = _section_values(data, "initial", text)
    for key in ("deltas", "well_amplitudes"):
        if key in data.get("initial", {}):
            initial_values[key] = _cast_list(data["initial"][key], float, text, "initial", key)
    initial = InitialDataConfig(**initial_values)
    if initial.kind not in INITIAL_DATA_KINDS:
        raise ConfigError(f"{_where(text, 'initial', 'kind')}: expected one of {INITIAL_DATA_KINDS}")

    sweep_values = _section_values(data, "sweep", text)
    for key in ("alpha", "gamma", "p"):
        if key in data.get("sweep", {}):
            sweep_values[key] = _cast_list(data["sweep"][key], float, text, "sweep", key)
    sweep = SweepConfig(**sweep_values)
    if sweep.command not in SWEEP_COMMANDS:
        raise ConfigError(f"{_where(text, 'sweep', 'command')}: expected one of {SWEEP_COMMANDS}")
    if sweep.threads < 1:
        raise ConfigError(f"{_where(text, 'sweep', 'threads')}: must be at least 1")

    return ExperimentConfig(
        params=params,
        grid=grid,
        solver=solver,
        evolution=evolution,
        initial=initial,
        sweep=sweep,
        seed=_cast(data.get("seed", 0), int, text, None, "seed"),
        output_dir=_cast(data.get("output_dir", DEFAULT_OUTPUT_DIR), str, text, None, "output_dir"),
        name=_cast(data.get("name", "experiment"), str, text, None, "name"),
    )


def load_config(config_file: str) -> ExperimentConfig:
    """Load and validate an experiment configuration from a TOML file"""
    if not os.path.exists(config_file):
        print(f"⚠️  Configuration file not found: {config_file}")
        raise ConfigError(f"configuration file not found: {config_file}")
    with open(config_file, 'r', encoding='utf-8') as f:
        text = f.read()
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"{config_file}: TOML syntax error at line {e.lineno}: {e.msg}") from e
    config = config_from_dict(data, text)
    print(f"✓ Loaded experiment configuration from {config_file}")
    debug_print(f"  params = {config.params.to_dict()}")
    debug_print(f"  grid = {config.grid!r}")
    return config
