'''Morse oscillator eigenbasis, coherent states and closed-system dynamics.

Energies are dimensionless, H = P^2 + (s + 1/2)^2 (exp(-2X) - 2 exp(-X)),
and time is measured in units of t0 = 2 pi / omega0 so that a state evolves
with the phase factor exp(-i 2 pi / (2s + 1) E_n t).
'''
import json
from logging import getLogger
from typing import NamedTuple

import mpmath
import numpy as np
import pandas as pd
from scipy.linalg import eigh, toeplitz
from scipy.optimize import minimize_scalar
from scipy.signal import stft
from scipy.special import digamma, eval_genlaguerre, gammaln

from .core import NumericalValidationError, StateVector, check_basis

logger = getLogger(__name__)

MOLECULES = {
    'NO': 54.54,
}

EDGE_TOLERANCE = 1e-12
DISSOCIATION_THRESHOLD = 0.01
BOUND_ENERGY_TOLERANCE = 1e-6


class MorseParams(NamedTuple):
    s: float
    label: str = ''

    @classmethod
    def from_molecule(cls, name):
        try:
            return cls(MOLECULES[name], name)
        except KeyError:
            raise KeyError(f'Unknown molecule {name!r}. '
                           f'Available: {sorted(MOLECULES)}')

    @property
    def n_bound(self):
        return int(np.floor(self.s)) + 1

    @property
    def frequency_scale(self):
        '''Converts dimensionless energies to angular frequency in 1/t0.'''
        return 2.0 * np.pi / (2.0 * self.s + 1.0)


def _check_params(params):
    if params.s <= 1.0:
        raise ValueError(f'Shape parameter must exceed 1, got {params.s}')


class GridSpec(NamedTuple):
    x_min: float = -2.0
    x_max: float = 12.0
    n_points: int = 2048

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)


class MorseBasis(NamedTuple):
    '''Grid-sampled eigenfunctions of the Morse Hamiltonian.

    `eigenvectors` holds psi_n(x_i) in its columns, normalized so that
    sum_i psi_m(x_i) psi_n(x_i) dx = delta_mn.
    '''
    params: MorseParams
    grid: GridSpec
    eigenvectors: np.ndarray
    energies: np.ndarray
    n_bound: int

    @property
    def n_basis(self):
        return self.energies.size

    @property
    def basis_id(self):
        return (f'morse(s={self.params.s:g}, x=[{self.grid.x_min:g}, '
                f'{self.grid.x_max:g}], M={self.grid.n_points}, '
                f'N={self.n_basis})')


class PhasePoint(NamedTuple):
    x0: float
    p0: float = 0.0

    def to_beta(self, s, convention='centroid'):
        '''Coherent-state label beta for this phase-space point.

        Parameters
        ----------
        s : float
        convention : ('centroid' | 'nominal'), optional
            'centroid' inverts the exact <X>, <P> of the coherent state so
            that the state is centered on (x0, p0). 'nominal' uses
            <X> = ln Re z, which maps (0, 0) onto the ground state.

        Returns
        -------
        beta : complex

        '''
        if convention == 'centroid':
            a = np.exp(self.x0 - np.log(2.0 * s + 1.0) + digamma(2.0 * s))
        elif convention == 'nominal':
            a = np.exp(self.x0)
        else:
            raise NotImplementedError(
                f'Unknown phase point convention {convention!r}')
        z = a + 1j * self.p0 * a / s
        beta = (z - 1.0) / (z + 1.0)
        if np.abs(beta) >= 1.0:
            raise ValueError(f'|beta| = {np.abs(beta)} is not inside the '
                             'unit disk')
        return complex(beta)


def potential(x, s):
    return (s + 0.5) ** 2 * (np.exp(-2.0 * x) - 2.0 * np.exp(-x))


def classical_energy(x, p, s):
    return p ** 2 + potential(x, s)


def kinetic_matrix(grid):
    '''Sinc-DVR matrix of -d^2/dx^2 on a uniform grid.

    Parameters
    ----------
    grid : GridSpec

    Returns
    -------
    kinetic : ndarray, shape (n_points, n_points)

    '''
    offset = np.arange(grid.n_points)
    column = np.empty((grid.n_points,))
    column[0] = np.pi ** 2 / 3.0
    column[1:] = 2.0 * (-1.0) ** offset[1:] / offset[1:] ** 2
    return toeplitz(column) / grid.dx ** 2


def bound_wavefunction(n, params, x):
    '''Analytic bound eigenfunction psi_n(x), normalized in dx.

    Parameters
    ----------
    n : int
    params : MorseParams
    x : ndarray, shape (n_points,)

    Returns
    -------
    psi : ndarray, shape (n_points,)

    '''
    s = params.s
    if not 0 <= n < params.n_bound or n != int(n):
        raise ValueError(f'Bound state index must lie in '
                         f'[0, {params.n_bound - 1}], got {n}')
    y = (2.0 * s + 1.0) * np.exp(-np.asarray(x, dtype=float))
    alpha = 2.0 * s - 2.0 * n
    log_norm = 0.5 * (gammaln(n + 1) + np.log(alpha) - gammaln(2 * s - n + 1))
    laguerre = eval_genlaguerre(n, alpha, y)
    with np.errstate(divide='ignore'):
        log_abs = (log_norm + (s - n) * np.log(y) - 0.5 * y
                   + np.log(np.abs(laguerre)))
    return np.sign(laguerre) * np.exp(log_abs)


def build_basis(params, grid=GridSpec(), n_basis=150,
                tolerance=BOUND_ENERGY_TOLERANCE):
    '''Diagonalizes the grid-discretized Morse Hamiltonian.

    The lowest `n_basis` eigenpairs are kept. Eigenvectors below the
    dissociation threshold are aligned in sign with the analytic bound
    states; quasi-continuum states have their largest entry positive.

    Parameters
    ----------
    params : MorseParams
    grid : GridSpec, optional
    n_basis : int, optional
    tolerance : float, optional
        Largest accepted bound-spectrum error, see `check_bound_spectrum`.

    Returns
    -------
    basis : MorseBasis

    Raises
    ------
    NumericalValidationError
        If the grid bound energies miss the analytic ones.

    '''
    _check_params(params)
    if n_basis > grid.n_points:
        raise ValueError(f'n_basis={n_basis} exceeds the grid size '
                         f'{grid.n_points}')
    if n_basis < params.n_bound:
        raise ValueError(f'n_basis={n_basis} cannot hold the '
                         f'{params.n_bound} bound states')
    x = grid.x
    ground = bound_wavefunction(0, params, np.array([x[0], x[-1]]))
    if np.any(np.abs(ground) >= EDGE_TOLERANCE):
        raise ValueError(
            f'Grid [{grid.x_min}, {grid.x_max}] is too small: ground state '
            f'amplitude at the edges is {np.abs(ground).max():.2e}')

    logger.info('Building Morse basis...')
    hamiltonian = kinetic_matrix(grid) + np.diag(potential(x, params.s))
    energies, eigenvectors = eigh(hamiltonian,
                                  subset_by_index=[0, n_basis - 1])
    eigenvectors /= np.sqrt(grid.dx)

    n_bound = int(np.sum(energies < 0.0))
    for state_ind in range(n_basis):
        if state_ind < min(n_bound, params.n_bound):
            reference = bound_wavefunction(state_ind, params, x)
            sign = np.sign(np.sum(reference * eigenvectors[:, state_ind]))
        else:
            sign = np.sign(eigenvectors[
                np.argmax(np.abs(eigenvectors[:, state_ind])), state_ind])
        eigenvectors[:, state_ind] *= sign

    basis = MorseBasis(params, grid, eigenvectors, energies, n_bound)
    check_bound_spectrum(basis, tolerance)
    return basis


def check_bound_spectrum(basis, tolerance=BOUND_ENERGY_TOLERANCE):
    '''Largest deviation of the grid bound energies from -(s - n)^2 in
    units of (s + 1/2)^2.'''
    s = basis.params.s
    n = np.arange(basis.n_bound)
    analytic = -(s - n) ** 2
    error = np.max(np.abs(basis.energies[:basis.n_bound] - analytic))
    error /= (s + 0.5) ** 2
    if error > tolerance:
        raise NumericalValidationError(
            f'bound spectrum deviates by {error:.2e} (tolerance '
            f'{tolerance:.0e}); refine the grid', 'morse.build_basis', error)
    return error


def coherent_wavefunction(beta, params, x):
    '''Analytic coherent state <x|beta>, normalized in dx.

    Parameters
    ----------
    beta : complex
    params : MorseParams
    x : ndarray, shape (n_points,)

    Returns
    -------
    psi : ndarray, shape (n_points,)

    '''
    s = params.s
    y = (2.0 * s + 1.0) * np.exp(-np.asarray(x, dtype=float))
    z = (1.0 + beta) / (1.0 - beta)
    log_amplitude = (s * np.log(1.0 - np.abs(beta) ** 2)
                     - 0.5 * gammaln(2.0 * s)
                     - 2.0 * s * np.log(np.abs(1.0 - beta))
                     + s * np.log(y) - 0.5 * y * z.real)
    phase = -2.0 * s * np.angle(1.0 - beta) - 0.5 * y * z.imag
    return np.exp(log_amplitude + 1j * phase)


def closed_form_coefficients(beta, params, n_states=None, precision=50):
    '''Bound-state expansion coefficients of |beta> from the terminating
    hypergeometric series.

    Parameters
    ----------
    beta : complex
    params : MorseParams
    n_states : int, optional
        Defaults to the number of bound states.
    precision : int, optional
        Working decimal digits.

    Returns
    -------
    coeffs : ndarray, shape (n_states,)

    '''
    if n_states is None:
        n_states = params.n_bound
    coeffs = np.zeros((n_states,), dtype=complex)
    with mpmath.workdps(precision):
        s = mpmath.mpf(params.s)
        b = mpmath.mpc(beta)
        envelope = (1 - abs(b) ** 2) ** s
        for n in range(n_states):
            prefactor = mpmath.sqrt(
                (2 * s - 2 * n) * mpmath.gamma(2 * s - n + 1)
                / (mpmath.factorial(n) * mpmath.gamma(2 * s)))
            prefactor *= (mpmath.gamma(2 * s - n)
                          / mpmath.gamma(2 * s - 2 * n + 1))
            series = mpmath.hyp2f1(-n, 2 * s - n, 2 * s - 2 * n + 1, 1 - b)
            coeffs[n] = complex(prefactor * envelope / (1 - b) ** n * series)
    return coeffs


def coherent_state(point, basis, convention='centroid',
                   dissociation_threshold=DISSOCIATION_THRESHOLD):
    '''Expands the coherent state at `point` in the Morse basis.

    Parameters
    ----------
    point : PhasePoint
    basis : MorseBasis
    convention : ('centroid' | 'nominal'), optional
    dissociation_threshold : float, optional
        Weight above the dissociation limit that triggers a warning.

    Returns
    -------
    state : StateVector

    '''
    beta = point.to_beta(basis.params.s, convention)
    psi = coherent_wavefunction(beta, basis.params, basis.grid.x)
    coeffs = basis.grid.dx * (basis.eigenvectors.T @ psi)
    captured = np.sum(np.abs(coeffs) ** 2)
    logger.debug(f'Basis captures {captured:.12f} of the coherent state')
    coeffs /= np.sqrt(captured)

    dissociation_weight = np.sum(np.abs(coeffs[basis.n_bound:]) ** 2)
    if dissociation_weight > dissociation_threshold:
        logger.warning(
            f'Coherent state at {tuple(point)} has dissociation weight '
            f'{dissociation_weight:.3e}')
    return StateVector(basis.basis_id, coeffs)


def eigenstate(n, basis):
    coeffs = np.zeros((basis.n_basis,), dtype=complex)
    coeffs[n] = 1.0
    return StateVector(basis.basis_id, coeffs)


def dissociation_weight(state, basis):
    return np.sum(np.abs(state.coeffs[basis.n_bound:]) ** 2)


def bound_projection(state, basis):
    '''Truncates a state to the bound subspace and renormalizes it.

    Returns
    -------
    coeffs : ndarray, shape (n_bound,)
    discarded_weight : float

    '''
    check_basis(state, basis.basis_id)
    coeffs = state.coeffs[:basis.n_bound]
    weight = np.sum(np.abs(coeffs) ** 2)
    return coeffs / np.sqrt(weight), 1.0 - weight


def position_matrix(basis):
    '''Matrix elements <psi_m|X|psi_n> by grid quadrature.

    Returns
    -------
    position : ndarray, shape (n_basis, n_basis)

    '''
    psi = basis.eigenvectors
    position = basis.grid.dx * (psi.T @ (basis.grid.x[:, np.newaxis] * psi))
    return 0.5 * (position + position.T)


def momentum_matrix(basis):
    '''Matrix elements <psi_m|P|psi_n> with P = -i d/dx, differentiating
    spectrally on the periodic grid.

    Returns
    -------
    momentum : ndarray, shape (n_basis, n_basis)

    '''
    psi = basis.eigenvectors
    wavenumber = 2.0 * np.pi * np.fft.fftfreq(
        basis.grid.n_points, d=basis.grid.dx)
    derivative = np.fft.ifft(
        1j * wavenumber[:, np.newaxis] * np.fft.fft(psi, axis=0),
        axis=0).real
    derivative = basis.grid.dx * (psi.T @ derivative)
    derivative = 0.5 * (derivative - derivative.T)
    return -1j * derivative


def evolve_free(state, basis, t):
    '''Free evolution over time `t` (units of t0).'''
    check_basis(state, basis.basis_id)
    phase = basis.params.frequency_scale * basis.energies * t
    return StateVector(state.basis_id, state.coeffs * np.exp(-1j * phase))


def evolve_free_series(state, basis, times):
    '''Coefficients c_n(t) for every time in `times`.

    Returns
    -------
    coeffs : ndarray, shape (n_time, n_basis)

    '''
    check_basis(state, basis.basis_id)
    times = np.asarray(times, dtype=float)
    phase = basis.params.frequency_scale * np.outer(times, basis.energies)
    return state.coeffs[np.newaxis] * np.exp(-1j * phase)


def expectation_xp(state, basis, position=None, momentum=None):
    '''Expectation values <X> and <P> of `state`.

    Returns
    -------
    x_expectation, p_expectation : float

    '''
    check_basis(state, basis.basis_id)
    if position is None:
        position = position_matrix(basis)
    if momentum is None:
        momentum = momentum_matrix(basis)
    coeffs = state.coeffs
    return (float(np.real(coeffs.conj() @ position @ coeffs)),
            float(np.real(coeffs.conj() @ momentum @ coeffs)))


def expectation_series(coeffs, operator):
    '''<A>(t) for coefficient rows of shape (n_time, n_basis).'''
    return np.real(np.einsum('tm,mn,tn->t', coeffs.conj(), operator, coeffs))


def bohr_spectrum(state, position, basis, weight_cutoff=1e-14):
    '''Frequencies and weights of the terms building <X>(t).

    Each pair k > n contributes oscillations at (E_k - E_n) / (2s + 1) in
    units of omega0 with weight 2 |c_n c_k^* X_kn|; the static part is
    collected into a single zero-frequency row.

    Parameters
    ----------
    state : StateVector
    position : ndarray, shape (n_basis, n_basis)
    basis : MorseBasis
    weight_cutoff : float, optional

    Returns
    -------
    spectrum : pandas.DataFrame
        Columns frequency, weight, lower, upper sorted by frequency.

    '''
    check_basis(state, basis.basis_id)
    coeffs = state.coeffs
    lower, upper = np.triu_indices(coeffs.size, k=1)
    weight = 2.0 * np.abs(coeffs[lower] * coeffs[upper].conj()
                          * position[upper, lower])
    frequency = ((basis.energies[upper] - basis.energies[lower])
                 / (2.0 * basis.params.s + 1.0))
    static = np.abs(np.sum(np.abs(coeffs) ** 2 * np.diag(position)))
    spectrum = pd.DataFrame(dict(
        frequency=np.concatenate(([0.0], frequency)),
        weight=np.concatenate(([static], weight)),
        lower=np.concatenate(([-1], lower)),
        upper=np.concatenate(([-1], upper)),
    ))
    spectrum = spectrum.loc[spectrum.weight > weight_cutoff]
    return spectrum.sort_values('frequency').reset_index(drop=True)


def bin_spectrum(spectrum, bin_width=0.01):
    '''Weighted frequency histogram of a Bohr spectrum.'''
    edges = np.arange(0.0, spectrum.frequency.max() + 2 * bin_width,
                      bin_width)
    weight, edges = np.histogram(spectrum.frequency, bins=edges,
                                 weights=spectrum.weight)
    return pd.DataFrame(dict(frequency=edges[:-1] + bin_width / 2,
                             weight=weight))


def spectrum_families(spectrum, max_order=2):
    '''Weighted centroid and total weight of each transition family
    |k - n| = order.

    Returns
    -------
    families : pandas.DataFrame, indexed by order

    '''
    is_transition = spectrum.lower >= 0
    order = (spectrum.upper - spectrum.lower)[is_transition]
    rows = []
    for family in range(1, max_order + 1):
        members = spectrum[is_transition][order == family]
        total = members.weight.sum()
        centroid = (np.sum(members.frequency * members.weight) / total
                    if total > 0 else np.nan)
        rows.append(dict(
            order=family,
            centroid=centroid,
            weight=total))
    return pd.DataFrame(rows).set_index('order')


def autocorrelation(state, basis, times):
    '''Return probability |<phi(0)|phi(t)>|^2.'''
    populations = np.abs(state.coeffs) ** 2
    phase = basis.params.frequency_scale * np.outer(times, basis.energies)
    return np.abs(np.exp(-1j * phase) @ populations) ** 2


def find_revival_time(state, basis, window=(80.0, 140.0), n_points=6001):
    '''Time of maximal return probability within `window` (units of t0).

    Returns
    -------
    revival_time : float
    return_probability : float

    '''
    times = np.linspace(*window, n_points)
    probability = autocorrelation(state, basis, times)
    best = np.argmax(probability)
    step = times[1] - times[0]
    result = minimize_scalar(
        lambda t: -autocorrelation(state, basis, np.atleast_1d(t))[0],
        bounds=(times[best] - step, times[best] + step), method='bounded',
        options=dict(xatol=1e-8))
    return float(result.x), float(-result.fun)


def find_fractional_revival(times, signal, base_frequency, order=2,
                            window=(15.0, 45.0), segment_length=5.0,
                            bandwidth=0.15):
    '''Epoch at which the `order`-th harmonic of the initial oscillation
    dominates a signal such as <X>(t).

    A fractional revival of order 2 (the quarter revival) splits the wave
    packet into two copies half a classical period apart, so the
    fundamental cancels in <X>(t) and the second harmonic survives.

    Parameters
    ----------
    times : ndarray, shape (n_time,)
        Uniformly spaced.
    signal : ndarray, shape (n_time,)
    base_frequency : float
        Initial oscillation frequency in cycles per time unit.
    order : int, optional
    window : tuple of float, optional
        Search range for the epoch.
    segment_length : float, optional
        Length of the short-time spectral segments.
    bandwidth : float, optional
        Relative half width of each harmonic band.

    Returns
    -------
    epoch : float
    band_fraction : ndarray, shape (n_segments,)
    segment_times : ndarray, shape (n_segments,)

    '''
    sampling_frequency = 1.0 / (times[1] - times[0])
    n_per_segment = int(round(segment_length * sampling_frequency))
    frequency, segment_times, transform = stft(
        signal - np.mean(signal), fs=sampling_frequency,
        nperseg=n_per_segment, noverlap=n_per_segment - 1,
        detrend='constant', boundary=None, padded=False)
    segment_times = segment_times + times[0]
    power = np.abs(transform) ** 2

    def band_power(harmonic):
        center = harmonic * base_frequency
        is_band = np.abs(frequency - center) <= bandwidth * center
        return power[is_band].sum(axis=0)

    harmonics = np.stack([band_power(h) for h in range(1, order + 2)])
    total = harmonics.sum(axis=0)
    band_fraction = harmonics[order - 1] / np.where(total > 0, total, 1.0)

    in_window = ((segment_times >= window[0]) & (segment_times <= window[1])
                 & (total > 1e-3 * total.max()))
    candidates = np.nonzero(in_window)[0]
    if candidates.size == 0:
        raise ValueError(f'No spectrogram segment with signal inside '
                         f'window {tuple(window)}')
    epoch = segment_times[candidates[np.argmax(band_fraction[candidates])]]
    return float(epoch), band_fraction, segment_times


def position_representation(coeffs, basis):
    '''Wavefunction psi(x) on the basis grid for a coefficient vector.'''
    coeffs = np.asarray(coeffs)
    return basis.eigenvectors[:, :coeffs.shape[0]] @ coeffs


def density_position_representation(rho, basis):
    '''rho(x, x') on the basis grid.'''
    psi = basis.eigenvectors[:, :rho.shape[0]]
    return psi @ rho @ psi.T


def save_basis(basis, path):
    '''Writes `path`.json (parameters, grid, energies) and `path`.csv
    (eigenvectors, one column per state).'''
    header = dict(
        params=basis.params._asdict(),
        grid=basis.grid._asdict(),
        energies=basis.energies.tolist(),
        n_bound=basis.n_bound,
    )
    with open(f'{path}.json', 'w') as f:
        json.dump(header, f, indent=2)
    pd.DataFrame(basis.eigenvectors, index=basis.grid.x).to_csv(
        f'{path}.csv', index_label='x', float_format='%.17g')


def load_basis(path):
    with open(f'{path}.json') as f:
        header = json.load(f)
    eigenvectors = pd.read_csv(f'{path}.csv', index_col='x').to_numpy()
    return MorseBasis(
        MorseParams(**header['params']), GridSpec(**header['grid']),
        eigenvectors, np.asarray(header['energies']), header['n_bound'])
