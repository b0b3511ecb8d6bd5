'''Runners that turn a resolved configuration into output files.

Each runner takes `(config, output_dir)` and returns the paths it wrote.
Outputs are CSV tables, Wigner grid files and JSON reports.
'''
import json
from itertools import combinations
from logging import getLogger
from pathlib import Path

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .cavity import (build_system, field_independence_test, protocol_report,
                     protocol_sweep, to_physical_time)
from .core import projector
from .diagnostics import (detect_knee, diagnostics, dissipation_time,
                          exponential_overlaps, pointer_scheme_distance,
                          toy_dephasing)
from .master_equation import (expectation, integrate,
                              oscillator_cat, oscillator_coherent_state,
                              preset, write_trajectory_csv)
from .models import DickeCat, MorseDecoherence, MorseWavePacket
from .morse import (GridSpec, bohr_spectrum, bin_spectrum,
                    find_fractional_revival, find_revival_time,
                    spectrum_families)
from .spin import (CoherentLabel, distance, evolved_classical_reference,
                   slin_rate_t0, tetrahedron_labels)
from .wigner import (PlanarGridSpec, SphericalGridSpec, alpha_to_phase_point,
                     edge_fringe_contrast, find_hills, nonclassicality,
                     oscillator_functions, planar_fringe_contrast,
                     wigner_planar_basis, wigner_spherical,
                     write_wigner_grid)

logger = getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def _time_grid(spec):
    n_steps = int(round((spec['stop'] - spec['start']) / spec['step']))
    return np.linspace(spec['start'], spec['start'] + n_steps * spec['step'],
                       n_steps + 1)


def _with_origin(times):
    '''Evolution times starting from zero, ascending and unique.'''
    return np.unique(np.concatenate(([0.0], np.asarray(times, dtype=float))))


def _to_builtin(value):
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(key): _to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_to_builtin(item) for item in value]
    return value


def write_json(obj, path):
    with open(path, 'w') as f:
        json.dump(_to_builtin(obj), f, indent=2, sort_keys=True)
        f.write('\n')
    return path


def write_table(table, path, index=True):
    table.to_csv(path, index=index, float_format=FLOAT_FORMAT)
    return path


def _series_table(results):
    '''Time-indexed columns of a results Dataset, without rho.'''
    return results.drop_vars(['rho', 'row', 'column']).to_dataframe()


def _point_label(x0, p0):
    return f'x{x0:g}_p{p0:g}'


def _time_label(t):
    return f't{t:g}'


def run_morse_free(config, output_dir):
    model = MorseWavePacket(
        molecule=config['molecule'], s=config['s'],
        grid=GridSpec(**config['grid']), n_basis=config['n_basis'],
        convention=config['convention']).fit()
    spec = PlanarGridSpec(**config['wigner_grid'])
    times = _time_grid(config['times'])
    written = []

    columns = {}
    for x0, p0 in config['points']:
        label = _point_label(x0, p0)
        results = model.predict(x0, p0, times)
        columns[f'x_{label}'] = results.x_expectation.values
        columns[f'p_{label}'] = results.p_expectation.values
        columns[f'autocorrelation_{label}'] = results.autocorrelation.values
        state = model.initial_state(x0, p0)

        if config['spectrum'] or config['revival']:
            spectrum = bohr_spectrum(state, model.position_, model.basis_)
        if config['spectrum']:
            written.append(write_table(
                spectrum, output_dir / f'spectrum_{label}.csv', index=False))
            written.append(write_table(
                bin_spectrum(spectrum),
                output_dir / f'spectrum_binned_{label}.csv', index=False))
            written.append(write_table(
                spectrum_families(spectrum),
                output_dir / f'spectrum_families_{label}.csv'))
        if config['revival']:
            revival_time, return_probability = find_revival_time(
                state, model.basis_)
            base_frequency = spectrum_families(spectrum).centroid.loc[1]
            epoch, _, _ = find_fractional_revival(
                times, results.x_expectation.values, base_frequency)
            written.append(write_json(
                dict(revival_time=revival_time,
                     return_probability=return_probability,
                     quarter_revival=epoch, base_frequency=base_frequency,
                     time_unit=config['time_unit']),
                output_dir / f'revival_{label}.json'))

        for t in config['wigner_times']:
            W = model.wigner(x0, p0, t, spec)
            written.append(write_wigner_grid(
                W, output_dir / f'wigner_{label}_{_time_label(t)}.csv'))

    table = pd.DataFrame(columns, index=pd.Index(times, name='time'))
    written.insert(0, write_table(table, output_dir / 'expectations.csv'))

    if config['nonclassicality_times'] is not None:
        nc_times = _time_grid(config['nonclassicality_times'])
        logger.info(f'Computing nonclassicality at {nc_times.size} times...')
        nc = pd.DataFrame(
            {_point_label(x0, p0): [
                nonclassicality(model.wigner(x0, p0, t, spec))
                for t in nc_times]
             for x0, p0 in config['points']},
            index=pd.Index(nc_times, name='time'))
        written.append(write_table(nc, output_dir / 'nonclassicality.csv'))
    return written


def _knee_summary(table, field, knee_window=None):
    window = table
    if knee_window is not None:
        window = table.loc[(table.index >= knee_window[0])
                           & (table.index <= knee_window[1])]
    knee = detect_knee(window, field)
    try:
        t_diss = dissipation_time(table, knee)
    except (ValueError, RuntimeError) as error:
        logger.warning(f'No dissipation time: {error}')
        t_diss = None
    summary = knee.to_dict()
    summary.update(field=field, t_diss=t_diss,
                   ratio=None if t_diss is None else t_diss / knee.t_d)
    return knee, summary


def run_morse_decoherence(config, output_dir):
    model = MorseDecoherence(
        molecule=config['molecule'], s=config['s'],
        grid=GridSpec(**config['grid']), n_basis=config['n_basis'],
        convention=config['convention'], coupling=config['coupling'],
        temperature=config['temperature'], equation=config['equation'],
        tol=config['tol']).fit()
    spec = PlanarGridSpec(**config['wigner_grid'])
    times = _with_origin(_time_grid(config['times']))
    n_bound = model.basis_.n_bound
    operators = dict(x_expectation=model.X_,
                     p_expectation=model.momentum_[:n_bound, :n_bound])
    written = []

    runs = [(_point_label(x0, p0), dict(x0=x0, p0=p0))
            for x0, p0 in config['points']]
    runs += [(f'n{n}', dict(n=n)) for n in config['eigenstates']]
    knees = {}
    for label, initial in runs:
        results = model.predict(times=times, **initial)
        table = _series_table(results)
        for name, operator in operators.items():
            table[name] = expectation(results.rho, operator).real
        written.append(write_table(table,
                                   output_dir / f'diagnostics_{label}.csv'))

        knee, summary = _knee_summary(table, config['knee_field'])
        summary.update(initial, coupling=model.lambda_,
                       temperature=config['temperature'],
                       time_unit=config['time_unit'])
        knees[label] = summary
        written.append(write_json(summary, output_dir / f'knee_{label}.json'))

        for t in config['wigner_times']:
            rho = results.rho.sel(time=t, method='nearest')
            W = model.wigner_density(rho.values, spec)
            written.append(write_wigner_grid(
                W, output_dir / f'wigner_{label}_{_time_label(t)}.csv'))

    on_axis = [(summary['x0'], summary['t_d']) for summary in knees.values()
               if 'x0' in summary and summary['p0'] == 0.0]
    if len(on_axis) >= 2:
        x0, t_d = np.array(on_axis).T
        slope, intercept = np.polyfit(x0, np.log(t_d), 1)
        written.append(write_json(
            dict(amplitude=np.exp(intercept), decay=-slope,
                 x0=x0, t_d=t_d, time_unit=config['time_unit']),
            output_dir / 'td_law.json'))
    return written


def _concatenate_segments(segments):
    return np.unique(np.concatenate(
        [np.linspace(start, stop, int(n)) for start, stop, n in segments]))


def _cat_labels(cat):
    return [CoherentLabel.from_angles(cat['beta1'], cat['phi1']),
            CoherentLabel.from_angles(cat['beta2'], cat['phi2'])]


def _run_cat(model, cat, times, knee_window, evolved_reference):
    labels = _cat_labels(cat)
    results = model.predict(labels, times)
    table = _series_table(results)
    if evolved_reference:
        reference = evolved_classical_reference(
            labels[0], labels[1], model.generator_, times, model.tol)
        table['distance_classical'] = pointer_scheme_distance(
            results.rho, reference).values
    knee, summary = _knee_summary(table, 'linear_entropy', knee_window)

    near = table.loc[(table.index >= 0.5 * knee.t_d)
                     & (table.index <= 1.5 * knee.t_d), 'distance_classical']
    initial_distance = table.distance_classical.iloc[0]
    summary.update(
        cat,
        slin_rate_t0=slin_rate_t0(model.initial_state(labels), model.gamma,
                                  model.n_bar, model.basis_),
        relative_distance_near_td=(near.min() / initial_distance
                                   if near.size and initial_distance > 0
                                   else None))
    return table, summary


def run_dicke_cat(config, output_dir):
    model = DickeCat(n_atoms=config['n_atoms'], gamma=config['gamma'],
                     n_bar=config['n_bar'], tol=config['tol']).fit()
    times = _with_origin(_concatenate_segments(config['time_segments']))
    logger.info(f'Running {len(config["cats"])} cats...')
    outcomes = Parallel(n_jobs=config['n_jobs'])(
        delayed(_run_cat)(model, cat, times, config['knee_window'],
                          config['evolved_reference'])
        for cat in config['cats'])

    written = []
    for ind, (table, summary) in enumerate(outcomes):
        written.append(write_table(
            table, output_dir / f'diagnostics_{ind:03d}.csv'))
        summary.update(n_atoms=config['n_atoms'], n_bar=config['n_bar'],
                       time_unit=config['time_unit'])
        written.append(write_json(summary,
                                  output_dir / f'knee_{ind:03d}.json'))
    summaries = pd.DataFrame([summary for _, summary in outcomes])
    summaries.index.name = 'cat'
    written.append(write_table(
        summaries.drop(columns=['slopes']), output_dir
        / 'decoherence_times.csv'))
    return written


def run_cat4_wigner(config, output_dir):
    model = DickeCat(n_atoms=config['n_atoms'], gamma=config['gamma'],
                     n_bar=config['n_bar'], tol=config['tol']).fit()
    spec = SphericalGridSpec(**config['spherical_grid'])
    labels = tetrahedron_labels()
    times = _with_origin(config['snapshot_times'])
    results = model.predict(labels, times)
    written = [write_table(_series_table(results),
                           output_dir / 'diagnostics.csv')]

    contrasts, hills = [], []
    for t in config['snapshot_times']:
        rho = results.rho.sel(time=t, method='nearest').values
        W = wigner_spherical(rho, model.basis_.j, spec)
        written.append(write_wigner_grid(
            W, output_dir / f'wigner_{_time_label(t)}.csv'))
        found = find_hills(W, config['hill_threshold'])
        found.insert(0, 'time', t)
        hills.append(found)
        for first, second in combinations(range(len(labels)), 2):
            contrasts.append(dict(
                time=t, edge=f'{first}-{second}',
                contrast=edge_fringe_contrast(rho, model.basis_.j,
                                              labels[first], labels[second])))
    written.append(write_table(pd.concat(hills, ignore_index=True),
                               output_dir / 'hills.csv', index=False))
    written.append(write_table(pd.DataFrame(contrasts),
                               output_dir / 'edge_contrasts.csv', index=False))
    return written


def run_subradiant_prep(config, output_dir):
    sweep = protocol_sweep(config['N_values'], config['delta_over_g'],
                           n_max=config['n_max'],
                           photon_index=config['photon_index'],
                           n_jobs=config['n_jobs'])
    sweep['t_m_seconds'] = to_physical_time(sweep.t_m_exact)
    written = [write_table(sweep, output_dir / 'sweep.csv')]

    system = build_system(config['N_values'][0], config['delta_over_g'],
                          n_max=config['n_max'])
    written.append(write_json(protocol_report(system, config['photon_index']),
                              output_dir / 'report.json'))
    if config['photon_weights'] is not None:
        weights = np.asarray(config['photon_weights'], dtype=float)
        sectors, spread = field_independence_test(
            system, weights / np.linalg.norm(weights))
        written.append(write_table(
            sectors, output_dir / 'field_independence.csv'))
        written.append(write_json(dict(spread=spread, N=system.N),
                                  output_dir / 'field_independence.json'))
    return written


def run_toy_dephasing(config, output_dir):
    times = _time_grid(config['times'])
    trajectory = toy_dephasing(np.asarray(config['coeffs'], dtype=complex),
                               exponential_overlaps(config['rate']), times)
    table = diagnostics(trajectory)
    states = np.asarray(trajectory)
    for first, second in combinations(range(states.shape[1]), 2):
        table[f'coherence_{first}{second}'] = np.abs(
            states[:, first, second])
    path = output_dir / 'trajectory.csv'
    write_trajectory_csv(trajectory, path)
    return [write_table(table, output_dir / 'diagnostics.csv'), path]


def _oscillator_grid(spec):
    '''Uniform grid wide enough to hold every shift of the Wigner centers.'''
    step = (spec.x_max - spec.x_min) / (spec.n_x - 1)
    half_width = 2.0 * max(abs(spec.x_min), abs(spec.x_max))
    return np.arange(-half_width, half_width + step / 2, step)


def run_oscillator_damping(config, output_dir):
    dim, alpha = config['dim'], config['alpha']
    generator = preset('amplitude_damping', dim, config['gamma'],
                       config['n_bar'])
    times = _with_origin(config['snapshot_times'])
    cat = integrate(generator, projector(oscillator_cat(alpha, dim)), times,
                    tol=config['tol'], basis_id=f'fock(dim={dim})')
    mixture = 0.5 * (projector(oscillator_coherent_state(alpha, dim))
                     + projector(oscillator_coherent_state(-alpha, dim)))
    mixed = integrate(generator, mixture, times, tol=config['tol'],
                      basis_id=f'fock(dim={dim})')

    spec = PlanarGridSpec(**config['wigner_grid'])
    x_grid = _oscillator_grid(spec)
    functions = oscillator_functions(dim, x_grid)
    lobes = alpha_to_phase_point(alpha), alpha_to_phase_point(-alpha)

    table = diagnostics(cat, generator.a.T @ generator.a)
    table['distance_mixture'] = [distance(rho, sigma) for rho, sigma
                                 in zip(cat.values, mixed.values)]
    rows, written = [], []
    for t in config['snapshot_times']:
        rho = cat.sel(time=t, method='nearest').values
        W = wigner_planar_basis(rho, functions, x_grid, spec)
        written.append(write_wigner_grid(
            W, output_dir / f'wigner_{_time_label(t)}.csv'))
        rows.append(dict(time=t, nonclassicality=nonclassicality(W),
                         fringe_contrast=planar_fringe_contrast(
                             W, *lobes)))
    written.insert(0, write_table(table, output_dir / 'diagnostics.csv'))
    written.append(write_table(pd.DataFrame(rows),
                               output_dir / 'snapshots.csv', index=False))
    return written


EXPERIMENTS = {
    'morse-free': run_morse_free,
    'morse-decoherence': run_morse_decoherence,
    'dicke-cat': run_dicke_cat,
    'cat4-wigner': run_cat4_wigner,
    'subradiant-prep': run_subradiant_prep,
    'toy-dephasing': run_toy_dephasing,
    'oscillator-damping': run_oscillator_damping,
}


def run_experiment(config, output_dir):
    '''Runs a resolved configuration and returns the written paths.'''
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f'Running {config["experiment"]} into {output_dir}...')
    return [Path(path) for path in
            EXPERIMENTS[config['experiment']](config, output_dir)]
