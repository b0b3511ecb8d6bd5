import json

import pytest

from decoherence_lab.core import ConfigurationError
from decoherence_lab.presets import (PRESETS, SCHEMAS, TIME_UNITS,
                                     list_presets, load_config,
                                     resolve_config)


def _raw(experiment='toy-dephasing', **kwargs):
    return dict(schema_version=1, experiment=experiment,
                time_unit=TIME_UNITS[experiment], **kwargs)


def test_defaults_are_filled_in():
    config = resolve_config(_raw(rate=2.0))
    assert config['rate'] == 2.0
    assert config['times'] == SCHEMAS['toy-dephasing']['times']
    assert config['output_dir'] == 'toy-dephasing'


def test_nested_values_merge():
    config = resolve_config(_raw(times=dict(stop=5.0)))
    assert config['times'] == dict(start=0.0, stop=5.0, step=0.1)


@pytest.mark.parametrize('raw', [
    _raw(speed=1.0),
    _raw(times=dict(stop=5.0, extra=1)),
    _raw(rate='fast'),
    _raw(rate=True),
    _raw('dicke-cat', n_atoms=50.5),
    _raw('dicke-cat', cats='all'),
    _raw('dicke-cat', cats=[dict(beta1=1.0, phi1=0.0, beta2=0.0, phi2=0.0,
                                 foo=2)]),
    _raw('dicke-cat', cats=[dict(beta1=1.0)]),
    _raw('dicke-cat', cats=[]),
    _raw('dicke-cat', time_segments=[['a', 1, 2]]),
    _raw('dicke-cat', time_segments=[[0.0, 1.0, 1]]),
    _raw('dicke-cat', time_segments=[[1.0, 0.5, 10]]),
    _raw('dicke-cat', knee_window=[0.1]),
    _raw('dicke-cat', n_atoms=-5),
    _raw('dicke-cat', gamma=-1.0),
    _raw('dicke-cat', tol=0.0),
    _raw('morse-free', points=[[0.5]]),
    _raw('morse-free', points=[['x', 0.0]]),
    _raw('morse-free', convention='other'),
    _raw('morse-free', s=-3.0),
    _raw('morse-free', grid=dict(n_points=1)),
    _raw('morse-decoherence', coupling='lambda3'),
    _raw('morse-decoherence', eigenstates=[1.5]),
    _raw('subradiant-prep', N_values=[1, 2]),
    _raw('subradiant-prep', photon_weights=[-0.5, 1.0]),
    _raw('cat4-wigner', snapshot_times=[-1.0]),
    _raw(times=dict(start=5.0, stop=1.0)),
    _raw('morse-free', spectrum=1),
    _raw(output_dir=3),
    dict(_raw(), time_unit='t0'),
    dict(_raw(), schema_version=2),
    dict(_raw(), experiment='other'),
    [1, 2],
])
def test_invalid_configs(raw):
    with pytest.raises(ConfigurationError):
        resolve_config(raw)


def test_every_preset_resolves():
    for name, preset in PRESETS.items():
        config = load_config(name)
        assert config['experiment'] == preset.config['experiment']
        assert config['output_dir'] == name


def test_catalog():
    catalog = {row['name']: row for row in list_presets()}
    assert {'fig-wigs', 'fig-dectimes', 'fig-wig1', 'fig-tmodfig',
            'fig-scales', 'fig-eid'} <= set(catalog)
    assert catalog['fig-dectimes']['experiment'] == 'dicke-cat'
    assert catalog['fig-wig1']['experiment'] == 'morse-decoherence'


def test_figure_parameters():
    wig1 = load_config('fig-wig1')
    assert wig1['coupling'] == 'lambda2'
    assert wig1['temperature'] == 0.3
    assert wig1['wigner_times'] == [0.0, 27.5, 137.5]
    dectimes = load_config('fig-dectimes')
    assert dectimes['n_atoms'] == 50
    assert dectimes['n_bar'] == 3.0
    assert load_config('fig-tmodfig')['delta_over_g'] == 30.0


def test_load_from_file(tmp_path):
    path = tmp_path / 'config.json'
    path.write_text(json.dumps(_raw(rate=0.5, output_dir='eid')))
    config = load_config(str(path))
    assert config['rate'] == 0.5
    assert config['output_dir'] == 'eid'

    path.write_text('{not json')
    with pytest.raises(ConfigurationError):
        load_config(str(path))
    with pytest.raises(ConfigurationError):
        load_config(str(tmp_path / 'missing.json'))


def test_optional_values_are_checked():
    config = resolve_config(_raw('morse-decoherence', coupling=2e4, s=20.0))
    assert config['coupling'] == 2e4
    assert config['s'] == 20.0
    config = resolve_config(_raw('subradiant-prep',
                                 photon_weights=[0.6, 0.8]))
    assert config['photon_weights'] == [0.6, 0.8]
