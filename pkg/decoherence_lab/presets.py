'''Experiment configuration schemas and the catalog of figure recipes.

A configuration is a JSON object with `schema_version`, `experiment`,
`output_dir` and `time_unit` plus the experiment's own keys. Defaults are
merged before validation; unknown keys are rejected at every level.
'''
import json
from copy import deepcopy
from logging import getLogger
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .core import ConfigurationError
from .master_equation import COUPLING_RATIOS
from .morse import MOLECULES

logger = getLogger(__name__)

SCHEMA_VERSION = 1

TIME_UNITS = {
    'morse-free': 't0',
    'morse-decoherence': 't0',
    'dicke-cat': '1/gamma',
    'cat4-wigner': '1/gamma',
    'subradiant-prep': '1/g',
    'toy-dephasing': '1/gamma',
    'oscillator-damping': '1/gamma',
}

_MORSE_GRID = dict(x_min=-2.0, x_max=12.0, n_points=2048)
_PLANAR_GRID = dict(x_min=-1.5, x_max=2.5, p_min=-40.0, p_max=40.0, n_x=256,
                    n_p=256)
_SPHERICAL_GRID = dict(n_theta=64, n_phi=128)
_TIMES = dict(start=0.0, stop=100.0, step=0.05)

SCHEMAS = {
    'morse-free': dict(
        molecule='NO', s=None, grid=_MORSE_GRID, n_basis=150,
        convention='centroid', points=[[0.5, 0.0]], times=_TIMES,
        spectrum=False, revival=False, wigner_times=[],
        wigner_grid=_PLANAR_GRID, nonclassicality_times=None),
    'morse-decoherence': dict(
        molecule='NO', s=None, grid=_MORSE_GRID, n_basis=150,
        convention='centroid', coupling='lambda1', temperature=10.0,
        equation='full', tol=1e-8, points=[[0.5, 0.0]], eigenstates=[],
        times=dict(start=0.0, stop=200.0, step=0.5),
        knee_field='linear_entropy', wigner_times=[],
        wigner_grid=_PLANAR_GRID),
    'dicke-cat': dict(
        n_atoms=500, gamma=1.0, n_bar=1.0, tol=1e-8,
        cats=[dict(beta1=np.pi / 2, phi1=0.0, beta2=0.0, phi2=0.0)],
        time_segments=[[0.0, 3e-4, 61], [3e-4, 0.1, 41]],
        knee_window=[0.0, 3e-4], evolved_reference=False, n_jobs=1),
    'cat4-wigner': dict(
        n_atoms=50, gamma=1.0, n_bar=0.0, tol=1e-8,
        snapshot_times=[0.0, 0.005, 0.05], spherical_grid=_SPHERICAL_GRID,
        hill_threshold=0.3),
    'subradiant-prep': dict(
        N_values=list(range(2, 21)), delta_over_g=30.0, n_max=3,
        photon_index=0, photon_weights=None, n_jobs=-1),
    'toy-dephasing': dict(
        coeffs=[0.6, 0.48, 0.64], rate=1.0,
        times=dict(start=0.0, stop=10.0, step=0.1)),
    'oscillator-damping': dict(
        dim=40, alpha=2.0, gamma=1.0, n_bar=0.0, tol=1e-8,
        snapshot_times=[0.0, 0.05, 0.5],
        wigner_grid=dict(x_min=-6.0, x_max=6.0, p_min=-6.0, p_max=6.0,
                         n_x=201, n_p=201)),
}

_COMMON = ('schema_version', 'experiment', 'output_dir', 'time_unit')

# smallest allowed value and whether it is excluded
_RANGES = {
    'n_atoms': (1, False),
    'n_basis': (1, False),
    'dim': (2, False),
    'n_points': (2, False),
    'n_x': (2, False),
    'n_p': (2, False),
    'n_theta': (2, False),
    'n_phi': (2, False),
    'n_max': (2, False),
    'photon_index': (0, False),
    'gamma': (0.0, False),
    'n_bar': (0.0, False),
    'temperature': (0.0, False),
    'rate': (0.0, False),
    'start': (0.0, False),
    's': (0.0, True),
    'tol': (0.0, True),
    'step': (0.0, True),
    'delta_over_g': (0.0, True),
    'hill_threshold': (0.0, True),
}

_CHOICES = {
    'molecule': sorted(MOLECULES),
    'convention': ['centroid', 'nominal'],
    'coupling': sorted(COUPLING_RATIOS),
    'equation': ['full', 'secular'],
    'knee_field': ['entropy', 'linear_entropy'],
}

# prototypes for keys whose default is None
_OPTIONAL = {
    's': 1.0,
    'nonclassicality_times': _TIMES,
    'photon_weights': [],
}

_CAT_KEYS = ('beta1', 'phi1', 'beta2', 'phi2')


def _check_number(key, value, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f'{key}: expected a number, got {value!r}')
    if integer and not isinstance(value, int):
        raise ConfigurationError(f'{key}: expected an integer, got '
                                 f'{value!r}')
    if not np.isfinite(value):
        raise ConfigurationError(f'{key}: expected a finite number')
    minimum, strict = _RANGES.get(key.split('.')[-1].split('[')[0],
                                  (None, False))
    if minimum is not None and (value < minimum
                                or (strict and value == minimum)):
        bound = '>' if strict else '>='
        raise ConfigurationError(f'{key}: must be {bound} {minimum}, got '
                                 f'{value!r}')
    return value


def _check_interval(key, value):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigurationError(f'{key}: expected [start, stop]')
    start, stop = (_check_number(f'{key}[{ind}]', item)
                   for ind, item in enumerate(value))
    if stop <= start:
        raise ConfigurationError(f'{key}: stop must exceed start')
    return value


def _check_segment(key, value):
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigurationError(f'{key}: expected [start, stop, n_times]')
    _check_interval(key, value[:2])
    if value[0] < 0:
        raise ConfigurationError(f'{key}: times must be nonnegative')
    n_times = _check_number(f'{key}[2]', value[2], integer=True)
    if n_times < 2:
        raise ConfigurationError(f'{key}: needs at least two times')
    return value


def _check_point(key, value):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigurationError(f'{key}: expected [x0, p0]')
    for ind, item in enumerate(value):
        _check_number(f'{key}[{ind}]', item)
    return value


def _check_cat(key, value):
    if not isinstance(value, dict) or set(value) != set(_CAT_KEYS):
        raise ConfigurationError(
            f'{key}: expected an object with keys {list(_CAT_KEYS)}, got '
            f'{value!r}')
    for name in _CAT_KEYS:
        _check_number(f'{key}.{name}', value[name])
    return value


def _nonnegative(integer=False):
    def check(key, value):
        _check_number(key, value, integer)
        if value < 0:
            raise ConfigurationError(f'{key}: must be >= 0, got {value!r}')
        return value
    return check


def _at_least_two(key, value):
    if _check_number(key, value, integer=True) < 2:
        raise ConfigurationError(f'{key}: must be >= 2, got {value!r}')
    return value


# validators of single list items, and whether the list may be empty
_ITEMS = {
    'points': (_check_point, True),
    'cats': (_check_cat, False),
    'time_segments': (_check_segment, False),
    'wigner_times': (_nonnegative(), True),
    'snapshot_times': (_nonnegative(), False),
    'eigenstates': (_nonnegative(integer=True), True),
    'N_values': (_at_least_two, False),
    'coeffs': (_check_number, False),
    'photon_weights': (_nonnegative(), True),
}


def _check_list(key, value):
    if not isinstance(value, list):
        raise ConfigurationError(f'{key}: expected a list, got {value!r}')
    name = key.split('.')[-1]
    if name == 'knee_window':
        return _check_interval(key, value)
    check, may_be_empty = _ITEMS.get(name, (None, True))
    if not value and not may_be_empty:
        raise ConfigurationError(f'{key}: must not be empty')
    if check is not None:
        for ind, item in enumerate(value):
            check(f'{key}[{ind}]', item)
    return value


def _check_value(key, value, default):
    if value is None:
        return value
    name = key.split('.')[-1]
    if default is None:
        default = _OPTIONAL.get(name)
        if default is None:
            return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f'{key}: expected a boolean, got '
                                     f'{value!r}')
    elif isinstance(default, (int, float)):
        _check_number(key, value, integer=isinstance(default, int))
    elif isinstance(default, str):
        if not isinstance(value, (str, int, float)) or isinstance(
                value, bool):
            raise ConfigurationError(f'{key}: expected a string, got '
                                     f'{value!r}')
        if isinstance(value, str) and value not in _CHOICES.get(name,
                                                                [value]):
            raise ConfigurationError(f'{key}: expected one of '
                                     f'{_CHOICES[name]}, got {value!r}')
    elif isinstance(default, list):
        return _check_list(key, value)
    elif isinstance(default, dict):
        return _merge(value, default, key)
    return value


def _merge(config, defaults, prefix=''):
    if not isinstance(config, dict):
        raise ConfigurationError(f'{prefix}: expected an object')
    unknown = sorted(set(config) - set(defaults))
    if unknown:
        raise ConfigurationError(
            f'Unknown keys {unknown}' + (f' in {prefix}' if prefix else ''))
    resolved = deepcopy(defaults)
    for key, value in config.items():
        name = f'{prefix}.{key}' if prefix else key
        resolved[key] = _check_value(name, value, defaults[key])
    for low, high in (('start', 'stop'), ('x_min', 'x_max'),
                      ('p_min', 'p_max')):
        if {low, high} <= set(resolved) and resolved[high] < resolved[low]:
            raise ConfigurationError(
                f'{prefix}: {high} must not precede {low}')
    return resolved


def resolve_config(raw):
    '''Merges defaults into a raw configuration and validates it.

    Parameters
    ----------
    raw : dict

    Returns
    -------
    config : dict

    Raises
    ------
    ConfigurationError

    '''
    if not isinstance(raw, dict):
        raise ConfigurationError('Configuration must be a JSON object')
    version = raw.get('schema_version')
    if version != SCHEMA_VERSION:
        raise ConfigurationError(
            f'Unsupported schema_version {version!r}, expected '
            f'{SCHEMA_VERSION}')
    experiment = raw.get('experiment')
    if experiment not in SCHEMAS:
        raise ConfigurationError(f'Unknown experiment {experiment!r}. '
                                 f'Available: {sorted(SCHEMAS)}')
    time_unit = raw.get('time_unit', TIME_UNITS[experiment])
    if time_unit != TIME_UNITS[experiment]:
        raise ConfigurationError(
            f'{experiment} runs in units of {TIME_UNITS[experiment]}, '
            f'got time_unit={time_unit!r}')
    output_dir = raw.get('output_dir', experiment)
    if not isinstance(output_dir, str):
        raise ConfigurationError('output_dir must be a string')

    body = {key: value for key, value in raw.items() if key not in _COMMON}
    config = _merge(body, SCHEMAS[experiment])
    config.update(schema_version=SCHEMA_VERSION, experiment=experiment,
                  output_dir=output_dir, time_unit=time_unit)
    return config


class Preset(NamedTuple):
    figure: str
    description: str
    budget_minutes: float
    config: dict


def _dectimes_cats(n_betas=6):
    betas = np.linspace(np.pi / 12, 11 * np.pi / 12, n_betas)
    return [dict(beta1=float(beta1), phi1=0.0, beta2=float(beta2), phi2=0.0)
            for beta1 in betas for beta2 in betas if beta2 < beta1]


def _preset_config(experiment, output_dir, **kwargs):
    return dict(schema_version=SCHEMA_VERSION, experiment=experiment,
                output_dir=output_dir, time_unit=TIME_UNITS[experiment],
                **kwargs)


PRESETS = {
    'fig-xexp': Preset(
        'xexp', '<X>(t) of Morse wave packets at x0 = 1.0, 0.5, 0.06', 2,
        _preset_config('morse-free', 'fig-xexp',
                       points=[[1.0, 0.0], [0.5, 0.0], [0.06, 0.0]])),
    'fig-freqs': Preset(
        'freqs', 'Bohr-frequency spectrum and revivals of (0.5, 0)', 5,
        _preset_config('morse-free', 'fig-freqs', spectrum=True,
                       revival=True,
                       times=dict(start=0.0, stop=140.0, step=0.05))),
    'fig-wigs': Preset(
        'wigs', 'Morse cat Wigner function at t/t0 = 0 and 30', 5,
        _preset_config('morse-free', 'fig-wigs', wigner_times=[0.0, 30.0])),
    'fig-noncl': Preset(
        'noncl', 'Nonclassicality M_nc(t) for x0 = 0.06 and 0.5', 20,
        _preset_config('morse-free', 'fig-noncl',
                       points=[[0.06, 0.0], [0.5, 0.0]],
                       times=dict(start=0.0, stop=60.0, step=0.05),
                       nonclassicality_times=dict(start=0.0, stop=60.0,
                                                  step=0.5))),
    'fig-portrait': Preset(
        'portrait', 'Damped phase-space portrait, lambda2, T = 0.3', 20,
        _preset_config('morse-decoherence', 'fig-portrait',
                       coupling='lambda2', temperature=0.3,
                       times=dict(start=0.0, stop=200.0, step=0.25))),
    'fig-dtdef': Preset(
        'dtdef', 'Entropy and energy defining t_d, lambda1, T = 10, '
        'x0 = 2.0', 20,
        _preset_config('morse-decoherence', 'fig-dtdef', points=[[2.0, 0.0]],
                       times=dict(start=0.0, stop=150.0, step=0.5))),
    'fig-tdlaw': Preset(
        'tdlaw', 'Decoherence time against x0, lambda1, T = 10', 90,
        _preset_config('morse-decoherence', 'fig-tdlaw',
                       points=[[0.5, 0.0], [1.0, 0.0], [1.5, 0.0],
                               [2.0, 0.0]],
                       times=dict(start=0.0, stop=200.0, step=0.5))),
    'fig-wig1': Preset(
        'wig1', 'Wigner function under damping, lambda2, T = 0.3, '
        't/t0 = 0, 27.5, 137.5', 30,
        _preset_config('morse-decoherence', 'fig-wig1', coupling='lambda2',
                       temperature=0.3,
                       times=dict(start=0.0, stop=140.0, step=0.5),
                       wigner_times=[0.0, 27.5, 137.5])),
    'fig-wig2': Preset(
        'wig2', 'Eigenstate n = 5 against the (0.5, 0) coherent state, '
        'lambda2, T = 0.3', 30,
        _preset_config('morse-decoherence', 'fig-wig2', coupling='lambda2',
                       temperature=0.3, eigenstates=[5],
                       times=dict(start=0.0, stop=140.0, step=0.5),
                       wigner_times=[137.5])),
    'fig-scales': Preset(
        'scales', 'Dicke cat N = 500, n_bar = 1: decoherence against '
        'dissipation', 30,
        _preset_config('dicke-cat', 'fig-scales')),
    'fig-fastdec': Preset(
        'fastdec', 'Distance to the classical mixture, N = 500, n_bar = 1',
        30,
        _preset_config('dicke-cat', 'fig-fastdec', evolved_reference=True)),
    'fig-dectimes': Preset(
        'dectimes', 'Decoherence times over cat geometries, N = 50, '
        'n_bar = 3', 20,
        _preset_config('dicke-cat', 'fig-dectimes', n_atoms=50, n_bar=3.0,
                       cats=_dectimes_cats(),
                       time_segments=[[0.0, 0.02, 101], [0.02, 0.5, 49]],
                       knee_window=[0.0, 0.02], evolved_reference=True,
                       n_jobs=-1)),
    'fig-wigfig': Preset(
        'wigfig', 'Spherical Wigner function of the tetrahedral cat, N = 50',
        5, _preset_config('cat4-wigner', 'fig-wigfig')),
    'fig-tmodfig': Preset(
        'tmodfig', 'Subradiant preparation time against N, delta/g = 30', 5,
        _preset_config('subradiant-prep', 'fig-tmodfig')),
    'fig-eid': Preset(
        'eid', 'Environment-induced dephasing of a three-level system', 1,
        _preset_config('toy-dephasing', 'fig-eid')),
    'fig-osccatwig': Preset(
        'osccatwig', 'Harmonic cat |2> + |-2> under amplitude damping', 5,
        _preset_config('oscillator-damping', 'fig-osccatwig')),
}


def load_config(name_or_path):
    '''Resolved configuration of a preset name or a JSON file.'''
    if name_or_path in PRESETS:
        raw = deepcopy(PRESETS[name_or_path].config)
    else:
        path = Path(name_or_path)
        if not path.exists():
            raise ConfigurationError(
                f'{name_or_path!r} is neither a preset nor a file')
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as error:
            raise ConfigurationError(f'{path}: invalid JSON ({error})')
    return resolve_config(raw)


def list_presets():
    '''Catalog of figure recipes, one row per preset.'''
    return [dict(name=name, figure=preset.figure,
                 experiment=preset.config['experiment'],
                 budget_minutes=preset.budget_minutes,
                 description=preset.description)
            for name, preset in PRESETS.items()]
