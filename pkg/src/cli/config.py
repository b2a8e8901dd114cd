"""
Prethermal - Experiment Configuration
Loads JSON experiment documents on top of the YAML defaults and turns them
into validated parameter objects. Unknown keys are rejected with their path.
"""

import copy
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from dotenv import load_dotenv

from src.dynamics.bloch import BlochState, IntegratorConfig
from src.environment.env_model import BathSpec, CompositeEnvSpec, SpectralParams, SystemSpec
from src.errors import ConfigError, DomainError
from src.rates.quadrature import QuadConfig

load_dotenv()

ROOT_DIR = Path(__file__).parent.parent.parent
DEFAULTS_FILE = ROOT_DIR / 'config' / 'defaults.yaml'
EXPERIMENTS_DIR = ROOT_DIR / 'config' / 'experiments'

EXPERIMENT_KINDS = ('rates', 'trajectory', 'ball', 'pretherm_scan', 'heatflux', 'oracle_check')

TOP_KEYS = ('name', 'reproduces', 'experiment', 'system', 'environments', 'simulation', 'options')
SIMULATION_KEYS = ('t_max', 'n_points', 'grid', 'method', 'rtol', 'atol', 'quad')
QUAD_KEYS = ('omega_max_factor', 'abs_tol', 'rel_tol', 'max_panels')
BATH_KEYS = ('g', 's', 'omega_c', 'beta')

OPTION_KEYS = {
    'rates': ('times', 'methods'),
    'trajectory': ('initial_states', 'lamb_shift', 'rate_source', 'detect', 'd_pr'),
    'ball': ('times', 'methods', 'initial_states'),
    'pretherm_scan': ('axis', 'values', 'd_pr'),
    'heatflux': ('initial_state', 'flip_quantity'),
    'oracle_check': ('N', 'M', 'pairs', 'lambda_index', 'ww_times', 'force'),
}

_THERMAL = re.compile(r'^thermal\(\s*([^)]+?)\s*\)$')
_PURE = re.compile(r'^pure\(\s*(\d+)\s*\)$')
_QUASI = re.compile(r'^qs\(\s*(I{1,2})\s*,\s*(I{1,2})\s*\)$')


@dataclass(frozen=True)
class SimulationConfig:
    t_max: Optional[float]
    n_points: int
    grid: str
    integrator: IntegratorConfig
    quad: QuadConfig

    def time_grid(self, horizon: float) -> np.ndarray:
        """Output times on [0, t_max or horizon]."""
        t_max = self.t_max if self.t_max is not None else horizon
        if self.grid == 'log':
            return np.concatenate([[0.0], np.geomspace(min(1e-2, t_max / 10.0), t_max, self.n_points)])
        return np.linspace(0.0, t_max, self.n_points)


@dataclass
class ExperimentConfig:
    name: str
    reproduces: str
    experiment: str
    system: SystemSpec
    environments: Dict[str, CompositeEnvSpec]
    simulation: SimulationConfig
    options: Dict[str, Any] = field(default_factory=dict)
    resolved: Dict[str, Any] = field(default_factory=dict)

    @property
    def single(self) -> CompositeEnvSpec:
        return self.environments['single']


def load_defaults(path: Union[str, Path] = DEFAULTS_FILE) -> Dict[str, Any]:
    with open(path, 'r') as f:
        return yaml.safe_load(f)


def runtime_settings(threads: Optional[int] = None, out_dir: Optional[str] = None) -> Tuple[int, Path]:
    """Command-line value, else environment variable, else YAML default."""
    runtime = load_defaults().get('runtime', {})
    if threads is None:
        threads = int(os.environ.get('PRETHERMAL_THREADS', runtime.get('threads', 4)))
    if out_dir is None:
        out_dir = os.environ.get('PRETHERMAL_OUT_DIR', runtime.get('out_dir', 'output'))
    return max(1, int(threads)), Path(out_dir)


def _check_keys(section: Any, allowed: Tuple[str, ...], path: str):
    if not isinstance(section, dict):
        raise ConfigError("expected an object", path)
    for key in section:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown key (allowed: {', '.join(allowed)})", where)


def _number(value: Any, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", path)
    if positive and not value > 0:
        raise ConfigError(f"must be > 0, got {value}", path)
    return float(value)


def _bath(section: Any, spectral_defaults: Dict, path: str) -> BathSpec:
    _check_keys(section, BATH_KEYS, path)
    for key in ('g', 'beta'):
        if key not in section:
            raise ConfigError("missing required key", f"{path}.{key}")
    try:
        spectral = SpectralParams(
            _number(section['g'], f"{path}.g"),
            _number(section.get('s', spectral_defaults['s']), f"{path}.s"),
            _number(section.get('omega_c', spectral_defaults['omega_c']), f"{path}.omega_c"),
        )
        return BathSpec(spectral, _number(section['beta'], f"{path}.beta"))
    except DomainError as e:
        raise ConfigError(str(e), path) from e


def _environments(entries: Any, spectral_defaults: Dict) -> Dict[str, CompositeEnvSpec]:
    if not isinstance(entries, list) or not entries:
        raise ConfigError("expected a non-empty list", 'environments')
    result = {}
    for i, entry in enumerate(entries):
        path = f"environments[{i}]"
        _check_keys(entry, ('side', 'r1', 'r2'), path)
        side = entry.get('side', 'single')
        if side not in ('single', 'left', 'right'):
            raise ConfigError(f"side must be single, left or right, got {side!r}", f"{path}.side")
        if side in result:
            raise ConfigError(f"duplicate side {side!r}", f"{path}.side")
        for key in ('r1', 'r2'):
            if key not in entry:
                raise ConfigError("missing required key", f"{path}.{key}")
        result[side] = CompositeEnvSpec(
            _bath(entry['r1'], spectral_defaults, f"{path}.r1"),
            _bath(entry['r2'], spectral_defaults, f"{path}.r2"),
        )
    return result


def _simulation(section: Dict) -> SimulationConfig:
    _check_keys(section, SIMULATION_KEYS, 'simulation')
    _check_keys(section['quad'], QUAD_KEYS, 'simulation.quad')
    t_max = section['t_max']
    if t_max is not None:
        t_max = _number(t_max, 'simulation.t_max', positive=True)
    n_points = section['n_points']
    if isinstance(n_points, bool) or not isinstance(n_points, int) or n_points < 2:
        raise ConfigError(f"expected an integer >= 2, got {n_points!r}", 'simulation.n_points')
    if section['grid'] not in ('linear', 'log'):
        raise ConfigError(f"grid must be linear or log, got {section['grid']!r}", 'simulation.grid')
    quad = section['quad']
    try:
        integrator = IntegratorConfig(
            section['method'],
            _number(section['rtol'], 'simulation.rtol', positive=True),
            _number(section['atol'], 'simulation.atol', positive=True),
        )
        quad_cfg = QuadConfig(
            omega_max_factor=_number(quad['omega_max_factor'], 'simulation.quad.omega_max_factor', True),
            abs_tol=_number(quad['abs_tol'], 'simulation.quad.abs_tol', True),
            rel_tol=_number(quad['rel_tol'], 'simulation.quad.rel_tol', True),
            max_panels=int(_number(quad['max_panels'], 'simulation.quad.max_panels', True)),
        )
    except DomainError as e:
        raise ConfigError(str(e), 'simulation') from e
    return SimulationConfig(t_max, n_points, section['grid'], integrator, quad_cfg)


def _merge(base: Dict, override: Dict) -> Dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_config(document: Dict[str, Any], defaults: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Validate a decoded experiment document.

    Args:
        document: Decoded JSON object
        defaults: Defaults (config/defaults.yaml when omitted)

    Returns:
        ExperimentConfig with every default resolved
    """
    defaults = defaults or load_defaults()
    _check_keys(document, TOP_KEYS, '')
    for key in ('name', 'experiment', 'environments'):
        if key not in document:
            raise ConfigError("missing required key", key)

    name = document['name']
    if not isinstance(name, str) or not re.fullmatch(r'[A-Za-z0-9_.-]+', name):
        raise ConfigError("name must be a non-empty file-safe string", 'name')
    experiment = document['experiment']
    if experiment not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment {experiment!r} (allowed: {', '.join(EXPERIMENT_KINDS)})",
                          'experiment')

    system_section = _merge(defaults['system'], document.get('system', {}))
    _check_keys(system_section, ('omega0',), 'system')
    try:
        system = SystemSpec(_number(system_section['omega0'], 'system.omega0'))
    except DomainError as e:
        raise ConfigError(str(e), 'system.omega0') from e

    environments = _environments(document['environments'], defaults['spectral'])
    expected = ('left', 'right') if experiment == 'heatflux' else ('single',)
    if sorted(environments) != sorted(expected):
        raise ConfigError(f"experiment {experiment!r} needs sides {list(expected)}, got {sorted(environments)}",
                          'environments')

    simulation_section = _merge(defaults['simulation'], document.get('simulation', {}))
    simulation = _simulation(simulation_section)

    options = document.get('options', {})
    _check_keys(options, OPTION_KEYS[experiment], 'options')

    resolved = {
        'name': name,
        'reproduces': document.get('reproduces', ''),
        'experiment': experiment,
        'system': system_section,
        'environments': document['environments'],
        'simulation': simulation_section,
        'options': options,
    }
    return ExperimentConfig(name, resolved['reproduces'], experiment, system, environments,
                            simulation, options, resolved)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read and validate one JSON experiment file."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            document = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return parse_config(document)


def parse_initial_states(value: Any, omega0: float, path: str = 'options.initial_states') -> List[Tuple[str, BlochState]]:
    """
    Expand an initial-state entry into labelled Bloch states.

    Accepted forms: [px, py, pz], "thermal(beta)", "pure(N)" (N pure states
    from |+z> to |-z> in the x-z plane), or a list mixing these.
    """
    if isinstance(value, str):
        thermal = _THERMAL.match(value)
        if thermal:
            try:
                beta = float(thermal.group(1))
                return [(value, BlochState.thermal(beta, omega0))]
            except (ValueError, DomainError) as e:
                raise ConfigError(f"bad thermal state {value!r}: {e}", path) from e
        pure = _PURE.match(value)
        if pure:
            count = int(pure.group(1))
            if count < 2:
                raise ConfigError("pure(N) needs N >= 2", path)
            angles = np.arange(count) * np.pi / (count - 1)
            return [(f"pure_{k}", BlochState((np.sin(a), 0.0, np.cos(a)))) for k, a in enumerate(angles)]
        raise ConfigError(f"unknown state {value!r}", path)

    if isinstance(value, list) and len(value) == 3 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        try:
            return [(f"bloch({value[0]:g},{value[1]:g},{value[2]:g})", BlochState(tuple(value)))]
        except DomainError as e:
            raise ConfigError(str(e), path) from e

    if isinstance(value, list) and value:
        states = []
        for i, item in enumerate(value):
            states.extend(parse_initial_states(item, omega0, f"{path}[{i}]"))
        return states
    raise ConfigError(f"unrecognized initial state {value!r}", path)


def parse_population(value: Any, omega0: float, path: str = 'options.initial_state') -> Union[float, Tuple[str, str]]:
    """
    Initial population for heat-flux runs: a number, "thermal(beta)", or
    "qs(S,S)" naming the quasi-stationary state of the given stages.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        if not 0 <= value <= 1:
            raise ConfigError(f"population must lie in [0, 1], got {value}", path)
        return float(value)
    if isinstance(value, str):
        quasi = _QUASI.match(value)
        if quasi:
            return quasi.group(1), quasi.group(2)
        if _THERMAL.match(value):
            return parse_initial_states(value, omega0, path)[0][1].rho_pp
    raise ConfigError(f"unrecognized initial population {value!r}", path)
