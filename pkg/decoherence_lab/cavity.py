'''Preparation of a subradiant state of N atoms in a detuned cavity: exact
evolution on the two angular-momentum ladders the initial state occupies,
the second-order predictions, and the single-atom phase kick.

States are stored per ladder as amplitude arrays indexed by
(m + j, photon number). The upper ladder has j = N/2, the lower one
j = N/2 - 1. All times are in units of 1/g.
'''
from logging import getLogger
from typing import NamedTuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.linalg import eigh
from scipy.optimize import minimize_scalar

from .master_equation import ladder_operators, spin_operators

logger = getLogger(__name__)

WEAK_COUPLING_LIMIT = 0.2
NORM_TOLERANCE = 1e-10
N_SCAN_POINTS = 2000

PHYSICAL_PRESET = dict(g=2.0 * np.pi * 24e3, delta=2.0 * np.pi * 720e3)


class CavitySystem(NamedTuple):
    '''Tavis-Cummings Hamiltonian H = delta a^dag a + g (a^dag J- + a J+)
    in the frame rotating at the atomic frequency, split into the two
    ladders.'''
    N: int
    delta: float
    g: float
    n_max: int
    hamiltonians: tuple
    eigensystems: tuple

    @property
    def j(self):
        return (self.N / 2, self.N / 2 - 1)

    @property
    def shapes(self):
        return tuple((int(round(2 * j)) + 1, self.n_max + 1) for j in self.j)

    @property
    def delta_over_g(self):
        return self.delta / self.g if self.g != 0 else np.inf


class ProtocolState(NamedTuple):
    upper: np.ndarray
    lower: np.ndarray
    leaked_norm: float = 0.0

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.upper) ** 2)
                             + np.sum(np.abs(self.lower) ** 2)))


def _dense_ladder(j):
    if j == 0:
        return np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((1,))
    Jp, Jm, m = spin_operators(j)
    return Jp.toarray(), Jm.toarray(), m


def _block_hamiltonian(j, delta, g, n_max):
    Jp, Jm, _ = _dense_ladder(j)
    a = ladder_operators(n_max + 1)
    number = a.T @ a
    return (delta * np.kron(np.eye(Jp.shape[0]), number)
            + g * (np.kron(Jm, a.T) + np.kron(Jp, a)))


def excitation_number(system):
    '''Atomic plus photonic excitations of every basis state, per ladder.'''
    numbers = []
    for (n_m, n_photons), offset in zip(system.shapes, (0, 1)):
        numbers.append(np.add.outer(np.arange(n_m) + offset,
                                    np.arange(n_photons)))
    return tuple(numbers)


def build_system(N, delta_over_g, n_max=3, g=1.0):
    '''Block Hamiltonians and their eigendecompositions.

    Parameters
    ----------
    N : int
        Number of atoms, at least 2.
    delta_over_g : float
        Cavity-atom detuning in units of the coupling.
    n_max : int, optional
        Highest photon number kept.
    g : float, optional
        Coupling; g = 0 switches the interaction off.

    Returns
    -------
    system : CavitySystem

    '''
    if N < 2 or int(N) != N:
        raise ValueError(f'Need an integer number of atoms N >= 2, got {N}')
    if n_max < 2:
        raise ValueError(f'n_max must be at least 2, got {n_max}')
    N = int(N)
    delta = delta_over_g * g
    if g != 0 and abs(g * np.sqrt(N) / delta) > WEAK_COUPLING_LIMIT:
        logger.warning(f'g sqrt(N) / delta = {g * np.sqrt(N) / delta:.3f} '
                       'is outside the perturbative regime')
    logger.info(f'Building cavity blocks for N={N}...')
    hamiltonians = tuple(_block_hamiltonian(j, delta, g, n_max)
                         for j in (N / 2, N / 2 - 1))
    eigensystems = tuple(eigh(H) for H in hamiltonians)
    return CavitySystem(N, delta, g, n_max, hamiltonians, eigensystems)


def _empty_state(system):
    return ProtocolState(*(np.zeros(shape, dtype=complex)
                           for shape in system.shapes))


def _check_photon_index(system, photon_index):
    if not 0 <= photon_index < system.n_max - 1:
        raise ValueError(f'Photon number {photon_index} needs n_max >= '
                         f'{photon_index + 2}, got {system.n_max}')


def control_atom_amplitudes(N):
    '''Components of the first atom being excited, |10...0>, on the
    symmetric and on the subradiant single-excitation state.'''
    return np.array([1.0 / np.sqrt(N), np.sqrt((N - 1.0) / N)])


def initial_state(system, photon_index=0):
    '''|10...0> with `photon_index` photons in the cavity.'''
    _check_photon_index(system, photon_index)
    state = _empty_state(system)
    symmetric, subradiant = control_atom_amplitudes(system.N)
    state.upper[1, photon_index] = symmetric
    state.lower[0, photon_index] = subradiant
    return state


def field_state(system, photon_amplitudes):
    '''|10...0> times a superposition of photon numbers.'''
    photon_amplitudes = np.asarray(photon_amplitudes, dtype=complex)
    norm = np.linalg.norm(photon_amplitudes)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise ValueError(f'Photon amplitudes have norm {norm}, not 1')
    if np.any(photon_amplitudes[system.n_max - 1:] != 0):
        raise ValueError('Photon distribution exceeds the truncation')
    photon_amplitudes = photon_amplitudes[:system.n_max - 1]
    state = _empty_state(system)
    symmetric, subradiant = control_atom_amplitudes(system.N)
    n_photons = photon_amplitudes.size
    state.upper[1, :n_photons] = symmetric * photon_amplitudes
    state.lower[0, :n_photons] = subradiant * photon_amplitudes
    return state


def subradiant_state(system, photon_index=0):
    _check_photon_index(system, photon_index)
    state = _empty_state(system)
    state.lower[0, photon_index] = 1.0
    return state


def excitation_sector(system, state, photon_index):
    '''Part of `state` with photon_index + 1 excitations, renormalized.'''
    upper_number, lower_number = excitation_number(system)
    upper = np.where(upper_number == photon_index + 1, state.upper, 0.0)
    lower = np.where(lower_number == photon_index + 1, state.lower, 0.0)
    sector = ProtocolState(upper, lower, state.leaked_norm)
    return ProtocolState(upper / sector.norm, lower / sector.norm, 0.0)


def perturbative_prediction(N, delta_over_g):
    '''Second-order frequency alpha, the time t_m at which the kick
    completes the preparation, and the kick phase magnitude.

    Returns
    -------
    alpha : float
        N g^2 / (2 delta), in units of g.
    t_m : float
        Smallest positive solution of sin(alpha t) = sqrt(N / (4N - 4)).
    phi : float
        arccos((N - 2) / (2N - 2)).

    '''
    if N < 2:
        raise ValueError(f'Need N >= 2, got {N}')
    alpha = N / (2.0 * delta_over_g)
    t_m = np.arcsin(np.sqrt(N / (4.0 * N - 4.0))) / alpha
    phi = np.arccos((N - 2.0) / (2.0 * N - 2.0))
    return alpha, t_m, phi


def energy_corrections(N, delta_over_g, n_photons):
    '''Second-order shifts of |10...0>-like symmetric and subradiant levels
    when the cavity holds n_photons - 1 photons.

    Returns
    -------
    shift_symmetric, shift_subradiant : float
        In units of g.

    '''
    n = n_photons
    shift_symmetric = (N * n - 2 * N - 2 * n + 2) / delta_over_g
    return shift_symmetric, shift_symmetric + N / delta_over_g


def evolve_series(system, state, times):
    '''Exact evolution sampled at many times.

    Returns
    -------
    upper : ndarray, shape (n_time, 2j + 1, n_max + 1)
    lower : ndarray, shape (n_time, 2j - 1, n_max + 1)

    '''
    times = np.atleast_1d(np.asarray(times, dtype=float))
    evolved = []
    for block, (energies, vectors), shape in zip(
            (state.upper, state.lower), system.eigensystems, system.shapes):
        coefficients = vectors.conj().T @ block.ravel()
        phases = np.exp(-1j * np.outer(times, energies))
        evolved.append(((phases * coefficients) @ vectors.T).reshape(
            (times.size,) + shape))
    return tuple(evolved)


def evolve_exact(system, state, t):
    upper, lower = evolve_series(system, state, t)
    return ProtocolState(upper[0], lower[0], state.leaked_norm)


def energy(system, state):
    return float(sum(
        np.real(np.vdot(block.ravel(), H @ block.ravel()))
        for block, H in zip((state.upper, state.lower),
                            system.hamiltonians)))


def perturbative_state(system, t, photon_index=0):
    '''Two-level evolution with the second-order shifts only.'''
    state = initial_state(system, photon_index)
    shift_symmetric, shift_subradiant = energy_corrections(
        system.N, system.delta_over_g, photon_index + 1)
    state.upper[1, photon_index] *= np.exp(
        -1j * system.g * shift_symmetric * t)
    state.lower[0, photon_index] *= np.exp(
        -1j * system.g * shift_subradiant * t)
    return state


def _target_projections(N, symmetric, subradiant):
    '''<u|psi> and <v|psi> for the target family u + exp(-i phi) v.'''
    root = np.sqrt(N - 1.0)
    u_overlap = -root / N * symmetric + subradiant / N
    v_overlap = root / N * symmetric + (N - 1.0) / N * subradiant
    return u_overlap, v_overlap


def _distance(u_overlap, v_overlap):
    return np.sqrt(np.clip(
        2.0 - 2.0 * (np.abs(u_overlap) + np.abs(v_overlap)), 0.0, None))


def _dominant_photon_index(state):
    rung = np.abs(state.upper[1]) ** 2 + np.abs(state.lower[0]) ** 2
    return int(np.argmax(rung))


def target_distance(system, state, photon_index=None):
    '''Smallest distance from `state` to a state that one phase kick on the
    first atom turns into the subradiant state.

    Returns
    -------
    distance : float
    phi : float
        Kick phase that completes the preparation.

    '''
    if photon_index is None:
        photon_index = _dominant_photon_index(state)
    u_overlap, v_overlap = _target_projections(
        system.N, state.upper[1, photon_index], state.lower[0, photon_index])
    return (float(_distance(u_overlap, v_overlap)),
            float(np.angle(u_overlap * np.conj(v_overlap))))


def find_tm_exact(system, state, window=None, xtol=1e-6):
    '''Time of closest approach to the target family.

    A coarse scan over `window` (default [0, 2 t_m] with the perturbative
    t_m) is refined by a bounded golden-section search.

    Returns
    -------
    t_m : float
    min_distance : float

    '''
    _, t_m_pert, _ = perturbative_prediction(system.N, system.delta_over_g)
    t_m_pert /= system.g
    if window is None:
        window = (0.0, 2.0 * t_m_pert)
    if window[1] - window[0] < 1.5 * t_m_pert:
        raise ValueError('Scan window must cover at least 1.5 times the '
                         'perturbative t_m')
    photon_index = _dominant_photon_index(state)

    def distance(times):
        upper, lower = evolve_series(system, state, times)
        return _distance(*_target_projections(
            system.N, upper[:, 1, photon_index], lower[:, 0, photon_index]))

    times = np.linspace(window[0], window[1], N_SCAN_POINTS)
    ind = int(np.argmin(distance(times)))
    bounds = (times[max(ind - 1, 0)], times[min(ind + 1, times.size - 1)])
    result = minimize_scalar(
        lambda t: distance(t)[0], bounds=bounds, method='bounded',
        options=dict(xatol=xtol * t_m_pert))
    return float(result.x), float(result.fun)


def phase_kick(state, phi, N):
    '''Instantaneous phase exp(i phi) on the first atom being excited.

    Acts exactly on the single-excitation rung of both ladders and leaves
    the atomic ground state alone. Amplitudes with two or more atomic
    excitations leave the simulated ladders and are moved into
    `leaked_norm`.
    '''
    upper, lower = state.upper.copy(), state.lower.copy()
    leaked_norm = state.leaked_norm
    if not np.isclose(np.exp(1j * phi), 1.0):
        control = control_atom_amplitudes(N)
        rung = np.stack((upper[1], lower[0]))
        overlap = control @ rung
        rung += (np.exp(1j * phi) - 1.0) * np.outer(control, overlap)
        upper[1], lower[0] = rung
        leaked = (np.sum(np.abs(upper[2:]) ** 2)
                  + np.sum(np.abs(lower[1:]) ** 2))
        if leaked > 0:
            logger.info(f'Phase kick leaks norm {leaked:.3e}')
        upper[2:] = 0.0
        lower[1:] = 0.0
        leaked_norm += leaked
    return ProtocolState(upper, lower, leaked_norm)


def subradiant_fidelity(state):
    '''Weight on the subradiant single-excitation state, any photon
    number.'''
    return float(np.sum(np.abs(state.lower[0]) ** 2))


def subradiance_check(system, state, horizon, n_times=201):
    '''Fidelity to the subradiant state over [0, horizon].

    Returns
    -------
    fidelity : pandas.Series, indexed by time

    '''
    times = np.linspace(0.0, horizon, n_times)
    _, lower = evolve_series(system, state, times)
    return pd.Series(np.sum(np.abs(lower[:, 0]) ** 2, axis=-1),
                     index=pd.Index(times, name='time'), name='fidelity')


def subradiance_bound(system):
    return 1.0 - 10.0 * system.N / system.delta_over_g ** 2


def field_independence_test(system, photon_weights):
    '''Runs the protocol separately in each photon-number sector of
    |10...0> times sum_n c_n |n>.

    Parameters
    ----------
    system : CavitySystem
    photon_weights : ndarray, shape (n_photons,)
        Amplitudes c_n.

    Returns
    -------
    sectors : pandas.DataFrame
        weight, t_m_exact, min_distance and the norm carried at t_m per
        photon number.
    spread : float
        (max - min) / mean of t_m over the occupied sectors.

    '''
    state = field_state(system, photon_weights)
    weights = np.abs(np.asarray(photon_weights)) ** 2
    upper_number, lower_number = excitation_number(system)
    rows = []
    for photon_index in np.nonzero(weights > 0)[0]:
        sector = excitation_sector(system, state, photon_index)
        t_m, min_distance = find_tm_exact(system, sector)
        evolved = evolve_exact(system, state, t_m)
        sector_norm = (
            np.sum(np.abs(evolved.upper[upper_number == photon_index + 1])
                   ** 2)
            + np.sum(np.abs(evolved.lower[lower_number == photon_index + 1])
                     ** 2))
        rows.append(dict(photon_index=photon_index,
                         weight=weights[photon_index], t_m_exact=t_m,
                         min_distance=min_distance, sector_norm=sector_norm))
    sectors = pd.DataFrame(rows).set_index('photon_index')
    spread = float((sectors.t_m_exact.max() - sectors.t_m_exact.min())
                   / sectors.t_m_exact.mean())
    return sectors, spread


def dressed_gap(system, photon_index=0):
    '''Exact splitting between the dressed symmetric and subradiant
    single-excitation levels.'''
    _check_photon_index(system, photon_index)
    levels = []
    for (energies, vectors), shape, m_index in zip(
            system.eigensystems, system.shapes, (1, 0)):
        bare = np.ravel_multi_index((m_index, photon_index), shape)
        levels.append(energies[np.argmax(np.abs(vectors[bare]))])
    return float(levels[1] - levels[0])


def protocol_report(system, photon_index=0):
    '''Runs the preparation once and collects its figures of merit.'''
    alpha, t_m_pert, phi_pert = perturbative_prediction(
        system.N, system.delta_over_g)
    state = initial_state(system, photon_index)
    t_m, min_distance = find_tm_exact(system, state)
    at_t_m = evolve_exact(system, state, t_m)
    _, phi = target_distance(system, at_t_m, photon_index)
    kicked = phase_kick(at_t_m, phi, system.N)
    predicted = phase_kick(at_t_m, -np.sign(system.delta) * phi_pert,
                           system.N)
    logger.info(f'N={system.N}: t_m={t_m:.4f}, distance={min_distance:.4f}')
    return dict(
        N=system.N, delta_over_g=system.delta_over_g, alpha=alpha,
        t_m_pert=t_m_pert / system.g, t_m_exact=t_m,
        min_distance=min_distance, phi_pert=phi_pert, phi_kick=phi,
        fidelity_post_kick=subradiant_fidelity(kicked),
        fidelity_predicted_phase=subradiant_fidelity(predicted),
        leaked_norm=kicked.leaked_norm)


def _sweep_row(N, delta_over_g, n_max, photon_index):
    system = build_system(N, delta_over_g, n_max=n_max)
    return protocol_report(system, photon_index)


def protocol_sweep(N_values, delta_over_g, n_max=3, photon_index=0,
                   n_jobs=-1):
    '''Protocol reports over atom numbers, in parallel.

    Returns
    -------
    sweep : pandas.DataFrame, indexed by N

    '''
    logger.info(f'Sweeping {len(N_values)} atom numbers...')
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_sweep_row)(N, delta_over_g, n_max, photon_index)
        for N in N_values)
    sweep = pd.DataFrame(rows).set_index('N')
    sweep['relative_error'] = (np.abs(sweep.t_m_exact - sweep.t_m_pert)
                               / sweep.t_m_pert)
    return sweep


def to_physical_time(t, preset=PHYSICAL_PRESET):
    '''Converts a time in units of 1/g into seconds.'''
    return t / preset['g']
