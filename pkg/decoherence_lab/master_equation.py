'''Markovian master equations for a system coupled to a thermal bath and
the integrator that propagates density-operator trajectories.'''
from functools import partial
from logging import getLogger
from typing import NamedTuple

import numpy as np
import pandas as pd
import scipy.sparse as sp
import xarray as xr
from scipy.integrate import solve_ivp
from scipy.linalg import null_space
from scipy.sparse.linalg import expm_multiply
from scipy.special import gammaln

from .core import (NumericalValidationError, check_square, hermitian_part,
                   normalize_to_probability, validate_density_operator)

logger = getLogger(__name__)

SNAPSHOT_HERMITIAN_TOLERANCE = 1e-8
SNAPSHOT_TRACE_TOLERANCE = 1e-8
SNAPSHOT_EIGENVALUE_FLOOR = -1e-7

# omega_01 / gamma_01 at zero temperature
COUPLING_RATIOS = {
    'lambda1': 1e5,
    'lambda2': 4e3,
}


class BathSpec(NamedTuple):
    '''Thermal bath with spectral density g^2(omega) D(omega) ~ omega^3.

    temperature is kT in units of the first Bohr quantum of the system and
    coupling is the frequency independent constant lambda.
    '''
    temperature: float = 0.0
    coupling: float = 1.0
    spectral_exponent: int = 3


class AnharmonicGenerator(NamedTuple):
    energies: np.ndarray
    X: np.ndarray
    lowering: np.ndarray
    X_e: np.ndarray
    X_a: np.ndarray
    gamma_ik: np.ndarray
    frequency_scale: float
    bath: BathSpec


class DickeGenerator(NamedTuple):
    j: float
    gamma: float
    n_bar: float
    Jp: sp.csr_matrix
    Jm: sp.csr_matrix
    JpJm: np.ndarray
    JmJp: np.ndarray

    @property
    def dim(self):
        return int(round(2 * self.j + 1))


class HarmonicGenerator(NamedTuple):
    name: str
    gamma: float
    n_bar: float
    frequency: float
    a: np.ndarray

    @property
    def dim(self):
        return self.a.shape[0]


def mean_photon_number(omega, temperature, reference_frequency=1.0):
    '''Bose-Einstein occupation 1 / (exp(|omega| / (omega_ref T)) - 1).

    Parameters
    ----------
    omega : float or ndarray
    temperature : float
        kT in units of hbar * `reference_frequency`.
    reference_frequency : float, optional

    Returns
    -------
    n_bar : ndarray

    '''
    omega = np.abs(np.asarray(omega, dtype=float))
    if temperature < 0:
        raise ValueError(f'Temperature must be nonnegative, got {temperature}')
    if temperature == 0:
        return np.zeros_like(omega)
    with np.errstate(divide='ignore', over='ignore'):
        n_bar = np.asarray(1.0 / np.expm1(omega / (reference_frequency * temperature)))
    n_bar[omega == 0] = 0.0
    return n_bar


def thermal_populations(energies, temperature, reference_frequency=None):
    '''Boltzmann populations of `energies` at `temperature`.'''
    energies = np.asarray(energies, dtype=float)
    if reference_frequency is None:
        reference_frequency = energies[1] - energies[0]
    if temperature == 0:
        populations = np.zeros_like(energies)
        populations[np.argmin(energies)] = 1.0
        return populations
    log_weight = -(energies - energies.min()) / (
        reference_frequency * temperature)
    return normalize_to_probability(np.exp(log_weight))


def calibrate_coupling(energies, X, target_ratio, frequency_scale=1.0):
    '''Coupling constant lambda giving omega_01 / gamma_01 = `target_ratio`
    at zero temperature.

    omega_01 is the angular frequency of the 0-1 transition in the time
    unit of the master equation, gamma_01 the 1 -> 0 emission rate.
    '''
    omega = energies[1] - energies[0]
    return (frequency_scale * omega
            / (target_ratio * 2.0 * omega ** 3 * np.abs(X[0, 1]) ** 2))


def build_anharmonic_generator(energies, X, bath, frequency_scale=1.0):
    '''Operators of the master equation for a system with a nonequidistant
    spectrum coupled through X to a bath with cubic spectral density.

    The lowering part of X (elements <m|X|n> with m < n) carries the
    emission weights lambda omega^3 (n_bar + 1) in X_e; the raising part
    carries the absorption weights lambda omega^3 n_bar in X_a.

    Parameters
    ----------
    energies : ndarray, shape (n_states,)
        Ascending dimensionless energies.
    X : ndarray, shape (n_states, n_states)
        Hermitian coupling operator in the energy eigenbasis.
    bath : BathSpec
    frequency_scale : float, optional
        Multiplies energies in the commutator term.

    Returns
    -------
    generator : AnharmonicGenerator

    '''
    energies = np.asarray(energies, dtype=float)
    X = check_square(X, energies.size, 'build_anharmonic_generator')
    if np.any(np.diff(energies) <= 0):
        raise ValueError('Energies must be strictly ascending')
    if np.max(np.abs(X - X.conj().T)) > 1e-12:
        raise ValueError('Coupling operator X is not Hermitian')
    if bath.temperature < 0:
        raise ValueError(
            f'Temperature must be nonnegative, got {bath.temperature}')
    if bath.coupling <= 0:
        raise ValueError(f'Coupling must be positive, got {bath.coupling}')

    logger.info('Building anharmonic generator...')
    omega = energies[np.newaxis, :] - energies[:, np.newaxis]
    n_bar = mean_photon_number(omega, bath.temperature,
                               energies[1] - energies[0])
    spectral = bath.coupling * np.abs(omega) ** bath.spectral_exponent

    lowering = np.triu(X, k=1)
    X_e = lowering * spectral * (n_bar + 1.0)
    X_a = np.tril(X, k=-1) * spectral * n_bar

    gamma_ik = 2.0 * spectral * np.abs(X) ** 2 * np.where(
        omega > 0, n_bar + 1.0, n_bar)
    np.fill_diagonal(gamma_ik, 0.0)

    return AnharmonicGenerator(energies, X, lowering, X_e, X_a, gamma_ik,
                               frequency_scale, bath)


def _commutator_term(gen, rho):
    omega = gen.energies[:, np.newaxis] - gen.energies[np.newaxis, :]
    return -1j * gen.frequency_scale * omega * rho


def rhs_full(gen, rho):
    '''Time derivative of rho under the full (non-secular) master equation.

    Parameters
    ----------
    gen : AnharmonicGenerator
    rho : ndarray, shape (n_states, n_states)

    Returns
    -------
    derivative : ndarray, shape (n_states, n_states)

    '''
    rho = check_square(rho, gen.energies.size, 'rhs_full')
    L, E, A = gen.lowering, gen.X_e, gen.X_a
    L_dag = L.conj().T
    emission = (-(L_dag @ E) @ rho - rho @ (E.conj().T @ L)
                + E @ rho @ L_dag + L @ rho @ E.conj().T)
    absorption = (-(L @ A) @ rho - rho @ (A.conj().T @ L_dag)
                  + A @ rho @ L + L_dag @ rho @ A.conj().T)
    return _commutator_term(gen, rho) + emission + absorption


def secular_rates(gamma_ik):
    '''Coherence damping rates 1/2 (sum_k gamma_ki + sum_k gamma_kj).'''
    outflow = gamma_ik.sum(axis=0)
    return 0.5 * (outflow[:, np.newaxis] + outflow[np.newaxis, :])


def rhs_secular(gen, rho):
    '''Time derivative of rho under the secular approximation: populations
    follow the Pauli equation and each coherence decays independently.'''
    rho = check_square(rho, gen.energies.size, 'rhs_secular')
    derivative = (_commutator_term(gen, rho)
                  - secular_rates(gen.gamma_ik) * rho)
    derivative[np.diag_indices_from(derivative)] += (
        gen.gamma_ik @ np.diag(rho))
    return derivative


def pauli_rhs(gamma_ik, populations):
    '''dP_n/dt = sum_k (gamma_nk P_k - gamma_kn P_n).'''
    populations = np.asarray(populations)
    if np.any(populations.real < -1e-12):
        raise ValueError('Populations must be nonnegative')
    return gamma_ik @ populations - gamma_ik.sum(axis=0) * populations


def pauli_steady_state(gamma_ik):
    rate_matrix = gamma_ik - np.diag(gamma_ik.sum(axis=0))
    stationary = null_space(rate_matrix)[:, 0]
    return stationary / stationary.sum()


def ladder_operators(dim):
    '''Truncated annihilation operator with <n-1|a|n> = sqrt(n).'''
    if dim < 2:
        raise ValueError(f'Fock space dimension must be at least 2, got {dim}')
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)


def _amplitude_damping(gen, rho):
    a, a_dag = gen.a, gen.a.T
    number = a_dag @ a
    anti_number = a @ a_dag
    return (0.5 * gen.gamma * (gen.n_bar + 1.0)
            * (2.0 * a @ rho @ a_dag - number @ rho - rho @ number)
            + 0.5 * gen.gamma * gen.n_bar
            * (2.0 * a_dag @ rho @ a - anti_number @ rho
               - rho @ anti_number))


def _phase_relaxation(gen, rho):
    number = gen.a.T @ gen.a
    number_squared = number @ number
    return 0.5 * gen.gamma * (2.0 * number @ rho @ number
                              - number_squared @ rho - rho @ number_squared)


GENERATOR_PRESETS = {
    'amplitude_damping': _amplitude_damping,
    'phase_relaxation': _phase_relaxation,
}


def preset(name, dim, gamma, n_bar=0.0, frequency=0.0):
    '''Harmonic-oscillator master equation in a truncated Fock space.

    Parameters
    ----------
    name : ('amplitude_damping' | 'phase_relaxation')
    dim : int
    gamma : float
    n_bar : float, optional
    frequency : float, optional
        Oscillator frequency; zero gives the interaction picture.

    Returns
    -------
    generator : HarmonicGenerator

    '''
    if name not in GENERATOR_PRESETS:
        raise KeyError(f'Unknown preset {name!r}. '
                       f'Available: {sorted(GENERATOR_PRESETS)}')
    return HarmonicGenerator(name, gamma, n_bar, frequency,
                             ladder_operators(dim))


def harmonic_rhs(gen, rho):
    rho = check_square(rho, gen.dim, 'harmonic_rhs')
    energies = gen.frequency * np.arange(gen.dim)
    derivative = -1j * (energies[:, np.newaxis]
                        - energies[np.newaxis, :]) * rho
    return derivative + GENERATOR_PRESETS[gen.name](gen, rho)


def spin_operators(j):
    '''Sparse collective ladder operators and the diagonal of Jz.

    States are ordered m = -j ... j.

    Returns
    -------
    Jp, Jm : scipy.sparse.csr_matrix, shape (2j + 1, 2j + 1)
    m : ndarray, shape (2j + 1,)

    '''
    if j < 0 or not np.isclose(2 * j, round(2 * j)):
        raise ValueError(f'2j must be a nonnegative integer, got j={j}')
    m = np.arange(-j, j + 1)
    raising = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    Jp = sp.diags(raising, offsets=-1, format='csr', dtype=float)
    return Jp, Jp.T.tocsr(), m


def build_dicke_generator(j, gamma, n_bar=0.0):
    '''Collective emission and absorption of 2j two-level atoms in the
    symmetric subspace.'''
    if gamma < 0 or n_bar < 0:
        raise ValueError('gamma and n_bar must be nonnegative')
    Jp, Jm, m = spin_operators(j)
    JpJm = j * (j + 1) - m * (m - 1)
    JmJp = j * (j + 1) - m * (m + 1)
    return DickeGenerator(j, gamma, n_bar, Jp, Jm, JpJm, JmJp)


def _sandwich(ladder, rho):
    '''L rho L^T for a real sparse ladder operator L.'''
    return (ladder @ (ladder @ rho).T).T


def dicke_rhs(gen, rho):
    '''Time derivative of rho under collective damping.

    Parameters
    ----------
    gen : DickeGenerator
    rho : ndarray, shape (2j + 1, 2j + 1)

    Returns
    -------
    derivative : ndarray, shape (2j + 1, 2j + 1)

    '''
    rho = check_square(rho, gen.dim, 'dicke_rhs')
    emission = (gen.JpJm[:, np.newaxis] * rho + rho * gen.JpJm[np.newaxis, :]
                - 2.0 * _sandwich(gen.Jm, rho))
    absorption = (gen.JmJp[:, np.newaxis] * rho
                  + rho * gen.JmJp[np.newaxis, :]
                  - 2.0 * _sandwich(gen.Jp, rho))
    return (-0.5 * gen.gamma * (gen.n_bar + 1.0) * emission
            - 0.5 * gen.gamma * gen.n_bar * absorption)


RIGHT_HAND_SIDES = {
    'full': rhs_full,
    'secular': rhs_secular,
    'dicke': dicke_rhs,
    'harmonic': harmonic_rhs,
}


def right_hand_side(generator, equation=None):
    '''Binds a generator to its derivative function.

    Parameters
    ----------
    generator : AnharmonicGenerator or DickeGenerator or HarmonicGenerator
    equation : ('full' | 'secular'), optional
        Only used for anharmonic generators; defaults to 'full'.

    Returns
    -------
    rhs : callable
        rhs(rho) -> derivative

    '''
    if isinstance(generator, AnharmonicGenerator):
        equation = equation or 'full'
    elif isinstance(generator, DickeGenerator):
        equation = 'dicke'
    elif isinstance(generator, HarmonicGenerator):
        equation = 'harmonic'
    else:
        raise NotImplementedError(
            f'No right-hand side for {type(generator).__name__}')
    return partial(RIGHT_HAND_SIDES[equation], generator)


def liouvillian_matrix(rhs, dim):
    '''Dense superoperator of a linear `rhs` acting on row-major ravelled
    matrices, built column by column.'''
    superoperator = np.zeros((dim ** 2, dim ** 2), dtype=complex)
    for column in range(dim ** 2):
        unit = np.zeros((dim ** 2,), dtype=complex)
        unit[column] = 1.0
        superoperator[:, column] = rhs(unit.reshape(dim, dim)).ravel()
    return superoperator


def dicke_band_generator(gen, offset):
    '''Tridiagonal generator of the band rho[i, i + offset] under
    collective damping.

    Collective emission and absorption only couple rho[i, k] to
    rho[i +- 1, k +- 1], so every band evolves on its own.

    Parameters
    ----------
    gen : DickeGenerator
    offset : int
        Nonnegative distance of the band from the diagonal.

    Returns
    -------
    band_generator : scipy.sparse.csr_matrix, shape (dim - offset,
                                                     dim - offset)

    '''
    dim = gen.dim
    if not 0 <= offset < dim:
        raise ValueError(f'offset must lie in [0, {dim - 1}], got {offset}')
    rows = np.arange(dim - offset)
    cols = rows + offset
    decay = -0.5 * gen.gamma * (
        (gen.n_bar + 1.0) * (gen.JpJm[rows] + gen.JpJm[cols])
        + gen.n_bar * (gen.JmJp[rows] + gen.JmJp[cols]))
    if rows.size == 1:
        return sp.csr_matrix(decay[:, np.newaxis])
    raising = gen.Jp.diagonal(-1)
    ladder = raising[rows[:-1]] * raising[cols[:-1]]
    return sp.diags(
        [gen.gamma * gen.n_bar * ladder, decay,
         gen.gamma * (gen.n_bar + 1.0) * ladder],
        offsets=[-1, 0, 1], format='csr')


def _uniform_runs(times):
    '''Splits ascending times into maximal runs of equal spacing, returned
    as inclusive (first, last) index pairs that share their end points.'''
    steps = np.diff(times)
    runs, first = [], 0
    for ind in range(1, steps.size):
        if not np.isclose(steps[ind], steps[first], rtol=1e-9, atol=0.0):
            runs.append((first, ind))
            first = ind
    runs.append((first, steps.size))
    return runs


def propagate_dicke(gen, rho0, times, cutoff=1e-15):
    '''Exact propagation under collective damping, one band at a time.

    Each band is exponentiated with `scipy.sparse.linalg.expm_multiply` on
    every run of equally spaced output times, so the result is accurate to
    machine precision however stiff the generator is.

    Parameters
    ----------
    gen : DickeGenerator
    rho0 : ndarray, shape (dim, dim)
    times : ndarray, shape (n_time,)
        Ascending output times; rho0 is the state at times[0].
    cutoff : float, optional
        Bands whose largest entry falls below this are dropped.

    Returns
    -------
    states : ndarray, shape (n_time, dim, dim)

    '''
    dim = gen.dim
    rho0 = check_square(rho0, dim, 'propagate_dicke')
    states = np.zeros((times.size, dim, dim), dtype=complex)
    states[0] = rho0
    runs = _uniform_runs(times) if times.size > 1 else []
    n_dropped = 0
    for offset in range(dim):
        rows = np.arange(dim - offset)
        cols = rows + offset
        band = rho0[rows, cols]
        band = np.stack((band.real, band.imag), axis=1)
        if np.abs(band).max() <= cutoff:
            n_dropped += 1
            continue
        band_generator = dicke_band_generator(gen, offset)
        for first, last in runs:
            values = expm_multiply(
                band_generator, band, start=0.0,
                stop=times[last] - times[first], num=last - first + 1,
                endpoint=True)
            states[first + 1:last + 1, rows, cols] = (
                values[1:, :, 0] + 1j * values[1:, :, 1])
            band = values[-1]
            # the trace norm of a band never grows
            if np.abs(band).max() <= cutoff:
                break
        if offset > 0:
            states[:, cols, rows] = states[:, rows, cols].conj()
    logger.debug(f'{n_dropped} of {dim} bands start below {cutoff:g}')
    return states


def steady_state(rhs, dim):
    '''Unit-trace null vector of the superoperator of `rhs`.'''
    stationary = null_space(liouvillian_matrix(rhs, dim))[:, 0]
    rho = stationary.reshape(dim, dim)
    return hermitian_part(rho / np.trace(rho))


def integrate(generator, rho0, times, tol=1e-8, equation=None,
              method=None, basis_id='', validate=True):
    '''Propagates rho0 under `generator` and samples it at `times`.

    Parameters
    ----------
    generator : AnharmonicGenerator or DickeGenerator or HarmonicGenerator
    rho0 : ndarray, shape (n_states, n_states)
    times : ndarray, shape (n_time,)
        Ascending output times.
    tol : float, optional
        Relative local error target of the embedded Runge-Kutta pair.
        Unused by 'expm'.
    equation : ('full' | 'secular'), optional
    method : ('expm' | 'DOP853' | 'RK45'), optional
        'expm' is exact band-wise propagation and only applies to
        collective damping, where it is the default. Otherwise defaults
        to 'DOP853'.
    basis_id : str, optional
    validate : bool, optional
        Re-validate every snapshot.

    Returns
    -------
    trajectory : xarray.DataArray, shape (n_time, n_states, n_states)

    Raises
    ------
    NumericalValidationError

    '''
    rhs = right_hand_side(generator, equation)
    rho0 = check_square(rho0, context='integrate')
    validate_density_operator(rho0, context='integrate: initial state')
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError('Output times must be strictly ascending')
    dim = rho0.shape[0]
    if method is None:
        method = 'expm' if isinstance(generator, DickeGenerator) else 'DOP853'
    if method == 'expm' and not isinstance(generator, DickeGenerator):
        raise NotImplementedError(
            f'expm propagation needs a DickeGenerator, got '
            f'{type(generator).__name__}')

    def derivative(t, y):
        return hermitian_part(rhs(y.reshape(dim, dim))).ravel()

    logger.info(f'Integrating {dim}x{dim} density operator over '
                f'[{times[0]:g}, {times[-1]:g}]...')
    if method == 'expm':
        states = propagate_dicke(generator, rho0, times)
    elif times.size == 1:
        states = rho0[np.newaxis].astype(complex)
    else:
        solution = solve_ivp(
            derivative, (times[0], times[-1]), rho0.astype(complex).ravel(),
            method=method, t_eval=times, rtol=tol, atol=1e-3 * tol)
        if not solution.success:
            raise NumericalValidationError(solution.message, 'integrate')
        states = solution.y.T.reshape(-1, dim, dim)
    states = 0.5 * (states + states.conj().transpose(0, 2, 1))

    if validate:
        for time, rho in zip(times, states):
            validate_density_operator(
                rho, SNAPSHOT_HERMITIAN_TOLERANCE, SNAPSHOT_TRACE_TOLERANCE,
                SNAPSHOT_EIGENVALUE_FLOOR, context=f'integrate: t={time:g}')

    return xr.DataArray(
        states, dims=['time', 'row', 'column'],
        coords=dict(time=times, row=np.arange(dim), column=np.arange(dim)),
        attrs=dict(basis_id=basis_id), name='rho')


def expectation(trajectory, operator):
    '''Tr(rho(t) A) along a trajectory.'''
    return np.einsum('ij,tji->t', np.asarray(operator),
                     np.asarray(trajectory))


def observables_table(trajectory, operators):
    '''Real parts of expectation values, one column per named operator.

    Parameters
    ----------
    trajectory : xarray.DataArray
    operators : dict of str -> ndarray

    Returns
    -------
    table : pandas.DataFrame, indexed by time

    '''
    return pd.DataFrame(
        {name: expectation(trajectory, operator).real
         for name, operator in operators.items()},
        index=pd.Index(trajectory.time.values, name='t'))


def oscillator_coherent_state(alpha, dim):
    '''Fock-space coefficients of the harmonic coherent state |alpha>,
    renormalized after truncation.'''
    n = np.arange(dim)
    with np.errstate(divide='ignore'):
        log_modulus = (n * np.log(np.abs(alpha)) - 0.5 * gammaln(n + 1)
                       - 0.5 * np.abs(alpha) ** 2)
    coeffs = np.exp(log_modulus + 1j * n * np.angle(alpha))
    if alpha == 0:
        coeffs = (n == 0).astype(complex)
    return coeffs / np.linalg.norm(coeffs)


def oscillator_cat(alpha, dim):
    '''Even cat |alpha> + |-alpha>, normalized.'''
    coeffs = (oscillator_coherent_state(alpha, dim)
              + oscillator_coherent_state(-alpha, dim))
    return coeffs / np.linalg.norm(coeffs)


def trajectory_to_dataset(trajectory, operators=None):
    '''Bundles a trajectory with its populations and the expectation values
    of named operators.

    Parameters
    ----------
    trajectory : xarray.DataArray, shape (n_time, n_states, n_states)
    operators : dict of str -> ndarray, optional

    Returns
    -------
    dataset : xarray.Dataset

    '''
    states = np.asarray(trajectory)
    data_vars = {
        'rho': trajectory,
        'populations': (('time', 'row'),
                        np.real(np.diagonal(states, axis1=1, axis2=2))),
    }
    for name, operator in (operators or {}).items():
        data_vars[name] = ('time', expectation(trajectory, operator).real)
    return xr.Dataset(data_vars, attrs=trajectory.attrs)


def write_trajectory_csv(trajectory, path):
    '''One row per stored matrix element: time, row, column, real, imag.'''
    table = trajectory.to_dataframe(name='rho').reset_index()
    table['real'] = np.real(table['rho'].values)
    table['imag'] = np.imag(table['rho'].values)
    table[['time', 'row', 'column', 'real', 'imag']].to_csv(
        path, index=False, float_format='%.12g')
