'''Entropy, purity and participation along trajectories, the knee that
separates decoherence from dissipation, and bipartite-state tools.'''
from logging import getLogger
from typing import NamedTuple

import numpy as np
import pandas as pd
import xarray as xr
from scipy.optimize import curve_fit
from scipy.signal import savgol_filter

from .core import NumericalValidationError, check_square
from .master_equation import SNAPSHOT_EIGENVALUE_FLOOR

logger = getLogger(__name__)

SEPARATION_RATIO = 3.0
ORTHONORMALITY_TOLERANCE = 1e-10
NORM_TOLERANCE = 1e-10


def _eigenvalues(rho, eigenvalue_floor=SNAPSHOT_EIGENVALUE_FLOOR):
    '''Eigenvalues with small negative values set to zero.'''
    eigenvalues = np.linalg.eigvalsh(check_square(rho, context='entropy'))
    if eigenvalues[0] < eigenvalue_floor:
        raise NumericalValidationError(
            f'negative eigenvalue {eigenvalues[0]:.3e}', 'diagnostics',
            -eigenvalues[0])
    return np.clip(eigenvalues, 0.0, None)


def von_neumann_entropy(rho):
    '''S = -Tr(rho ln rho) with 0 ln 0 = 0.'''
    eigenvalues = _eigenvalues(rho)
    eigenvalues = eigenvalues[eigenvalues > 0]
    return float(-np.sum(eigenvalues * np.log(eigenvalues)))


def purity(rho):
    rho = np.asarray(rho)
    return float(np.real(np.sum(rho * rho.T)))


def linear_entropy(rho):
    return 1.0 - purity(rho)


def participation_ratio(rho):
    return 1.0 / purity(rho)


def diagnostics(trajectory, hamiltonian=None):
    '''Entropy, purity and energy at every stored time.

    Parameters
    ----------
    trajectory : xarray.DataArray, shape (n_time, n_states, n_states)
    hamiltonian : ndarray, shape (n_states, n_states), optional
        Energy is NaN when not given.

    Returns
    -------
    series : pandas.DataFrame
        Columns entropy, linear_entropy, purity, participation, energy,
        indexed by time.

    '''
    logger.info('Computing trajectory diagnostics...')
    states = np.asarray(trajectory)
    entropy = np.array([von_neumann_entropy(rho) for rho in states])
    purities = np.real(np.einsum('tij,tji->t', states, states))
    if hamiltonian is None:
        energy = np.full_like(purities, np.nan)
    else:
        energy = np.real(np.einsum('ij,tji->t', np.asarray(hamiltonian),
                                   states))
    return pd.DataFrame(
        dict(entropy=entropy, linear_entropy=1.0 - purities,
             purity=purities, participation=1.0 / purities, energy=energy),
        index=pd.Index(np.asarray(trajectory.time), name='time'))


class KneeReport(NamedTuple):
    '''Decoherence time and the slopes on either side of it.'''
    t_d: float
    slopes: tuple
    residual: float
    method: str
    separated: bool

    def to_dict(self):
        return dict(t_d=self.t_d, slopes=list(self.slopes),
                    residual=self.residual, method=self.method,
                    separated=self.separated)


def _hinge_design(times, breakpoint):
    return np.stack((np.ones_like(times), times,
                     np.maximum(times - breakpoint, 0.0)), axis=1)


def _piecewise_linear_knee(times, values):
    '''Continuous two-segment least-squares fit with the breakpoint on a
    sample time.'''
    best = (np.inf, None, None)
    for breakpoint in times[2:-2]:
        design = _hinge_design(times, breakpoint)
        coefficients, _, _, _ = np.linalg.lstsq(design, values, rcond=None)
        residual = np.sum((design @ coefficients - values) ** 2)
        if residual < best[0]:
            best = (residual, breakpoint, coefficients)
    residual, breakpoint, coefficients = best
    early = coefficients[1]
    late = coefficients[1] + coefficients[2]
    return breakpoint, (early, late), residual


def _line_slope(times, values):
    if times.size < 2:
        return np.nan
    return np.polyfit(times, values, 1)[0]


def _second_derivative_knee(times, values, window_length=None):
    '''Breakpoint at the most negative curvature of the smoothed series.'''
    if window_length is None:
        window_length = max(5, (times.size // 20) | 1)
    curvature = savgol_filter(values, window_length, polyorder=3, deriv=2,
                              delta=np.mean(np.diff(times)))
    ind = int(np.clip(np.argmin(curvature[2:-2]) + 2, 2, times.size - 3))
    early = _line_slope(times[:ind + 1], values[:ind + 1])
    late = _line_slope(times[ind:], values[ind:])
    residual = float(np.sum(
        (values[:ind + 1] - np.polyval(np.polyfit(
            times[:ind + 1], values[:ind + 1], 1), times[:ind + 1])) ** 2)
        + np.sum((values[ind:] - np.polyval(np.polyfit(
            times[ind:], values[ind:], 1), times[ind:])) ** 2))
    return times[ind], (early, late), residual


_KNEE_METHODS = {
    'piecewise_linear': _piecewise_linear_knee,
    'second_derivative': _second_derivative_knee,
}


def detect_knee(series, field='linear_entropy', method='piecewise_linear',
                ratio=SEPARATION_RATIO):
    '''Finds the decoherence time where the growth of an entropy slows.

    Parameters
    ----------
    series : pandas.DataFrame or pandas.Series
        Indexed by time.
    field : ('linear_entropy' | 'entropy'), optional
    method : ('piecewise_linear' | 'second_derivative'), optional
    ratio : float, optional
        Minimal |early slope| / |late slope| for the regimes to count as
        separated.

    Returns
    -------
    report : KneeReport

    '''
    if isinstance(series, pd.DataFrame):
        series = series[field]
    times = np.asarray(series.index, dtype=float)
    values = np.asarray(series, dtype=float)
    if times.size < 6:
        raise ValueError('Need at least six samples to locate a knee')
    try:
        find_knee = _KNEE_METHODS[method]
    except KeyError:
        raise NotImplementedError(f'Unknown knee method {method!r}')

    t_d, (early, late), residual = find_knee(times, values)
    separated = bool(np.abs(early) >= ratio * np.abs(late))
    if not separated:
        logger.warning(f'No separation of time scales: slopes {early:.3g} '
                       f'and {late:.3g}')
    return KneeReport(float(t_d), (float(early), float(late)),
                      float(residual), method, separated)


def _exponential(t, amplitude, rate, offset):
    return amplitude * np.exp(-rate * t) + offset


def dissipation_time(series, knee, field='energy'):
    '''Relaxation time of `field` from an exponential fit after the knee.'''
    after = series[series.index >= knee.t_d][field]
    times = np.asarray(after.index, dtype=float) - knee.t_d
    values = np.asarray(after, dtype=float)
    if times.size < 4:
        raise ValueError('Too few samples after the knee to fit a decay')
    amplitude = values[0] - values[-1]
    initial_rate = 3.0 / times[-1]
    (amplitude, rate, offset), _ = curve_fit(
        _exponential, times, values, p0=(amplitude, initial_rate, values[-1]),
        maxfev=10000)
    if rate <= 0:
        raise NumericalValidationError(
            f'energy does not decay after the knee (rate {rate:.3e})',
            'dissipation_time', rate)
    return 1.0 / rate


def _check_normalized(state, context):
    state = np.asarray(state, dtype=complex).ravel()
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise ValueError(f'{context}: state norm is {norm}, not 1')
    return state


def schmidt(state, dims):
    '''Schmidt decomposition of a pure bipartite state.

    Parameters
    ----------
    state : ndarray, shape (dA * dB,)
        Coefficients with the first factor varying slowest.
    dims : tuple of int

    Returns
    -------
    weights : ndarray, shape (min(dA, dB),)
        p_k in descending order.
    basis_a : ndarray, shape (dA, min(dA, dB))
    basis_b : ndarray, shape (dB, min(dA, dB))

    '''
    state = _check_normalized(state, 'schmidt')
    dim_a, dim_b = dims
    if state.size != dim_a * dim_b:
        raise ValueError(f'State of length {state.size} does not match '
                         f'dims {dims}')
    u, singular_values, vh = np.linalg.svd(state.reshape(dim_a, dim_b),
                                           full_matrices=False)
    return singular_values ** 2, u, vh.T


def reduced_density_operator(state, dims, keep=0):
    '''Partial trace of |psi><psi| over the factor not in `keep`.'''
    state = np.asarray(state, dtype=complex).reshape(dims)
    if keep == 0:
        return state @ state.conj().T
    elif keep == 1:
        return state.T @ state.conj()
    raise ValueError(f'keep must be 0 or 1, got {keep}')


def _check_orthonormal(basis, name):
    basis = np.asarray(basis)
    error = np.max(np.abs(basis.conj().T @ basis - np.eye(basis.shape[1])))
    if error > ORTHONORMALITY_TOLERANCE:
        raise ValueError(f'{name} basis is not orthonormal (error '
                         f'{error:.3e})')
    return basis


def entanglement_rate_generic(V, system_basis, environment_basis):
    '''A = sum_{k, l != 0} |<k, l|V|0, 0>|^2, the initial rate at which an
    interaction entangles a product state.

    Parameters
    ----------
    V : ndarray, shape (dA * dB, dA * dB)
        Interaction on the system-first product space.
    system_basis : ndarray, shape (dA, dA)
        Orthonormal columns; column 0 is the initial system state.
    environment_basis : ndarray, shape (dB, dB)
        Orthonormal columns; column 0 is the initial environment state.

    Returns
    -------
    rate : float

    '''
    system_basis = _check_orthonormal(system_basis, 'System')
    environment_basis = _check_orthonormal(environment_basis, 'Environment')
    dim_a, dim_b = system_basis.shape[0], environment_basis.shape[0]
    V = check_square(V, dim_a * dim_b, 'entanglement_rate_generic')
    transferred = (V @ np.kron(system_basis[:, 0], environment_basis[:, 0])
                   ).reshape(dim_a, dim_b)
    amplitudes = (system_basis.conj().T @ transferred
                  @ environment_basis.conj())
    return float(np.sum(np.abs(amplitudes[1:, 1:]) ** 2))


def _check_overlaps(overlaps, n_states):
    overlaps = check_square(overlaps, n_states, 'toy_dephasing')
    if (np.max(np.abs(np.diag(overlaps) - 1.0)) > 1e-12
            or np.max(np.abs(overlaps - overlaps.conj().T)) > 1e-12
            or np.max(np.abs(overlaps)) > 1.0 + 1e-12):
        raise ValueError('Environment overlaps must be Hermitian with unit '
                         'diagonal and modulus at most one')
    return overlaps


def exponential_overlaps(rate):
    '''Overlap schedule <Phi_m|Phi_n>(t) = exp(-rate t) for n != m.'''
    def overlaps(t, n_states):
        off_diagonal = np.exp(-rate * t)
        return (np.full((n_states, n_states), off_diagonal)
                + (1.0 - off_diagonal) * np.eye(n_states))
    return overlaps


def toy_dephasing(coeffs, overlaps, times):
    '''Reduced state of a system whose basis states |n> imprint
    environment states |Phi^n(t)>: rho_nm(t) = c_n c_m* f_nm(t) with
    f_nm = <Phi^m|Phi^n>.

    Parameters
    ----------
    coeffs : ndarray, shape (n_states,)
    overlaps : callable or ndarray, shape (n_time, n_states, n_states)
        overlaps(t, n_states) returning f, or the matrices at `times`.
    times : ndarray, shape (n_time,)

    Returns
    -------
    trajectory : xarray.DataArray, shape (n_time, n_states, n_states)

    '''
    coeffs = _check_normalized(coeffs, 'toy_dephasing')
    times = np.asarray(times, dtype=float)
    n_states = coeffs.size
    if callable(overlaps):
        overlaps = np.stack([overlaps(t, n_states) for t in times])
    overlaps = np.asarray(overlaps)
    if overlaps.shape[0] != times.size:
        raise ValueError('Need one overlap matrix per time')
    overlaps = np.stack([_check_overlaps(f, n_states) for f in overlaps])
    rho0 = np.outer(coeffs, coeffs.conj())
    return xr.DataArray(
        rho0[np.newaxis] * overlaps,
        dims=['time', 'row', 'column'],
        coords=dict(time=times, row=np.arange(n_states),
                    column=np.arange(n_states)),
        name='rho')


def pointer_scheme_distance(trajectory, reference):
    '''D(t) = Tr[(rho(t) - sigma(t))^2] against a fixed or time-dependent
    reference.'''
    states = np.asarray(trajectory)
    reference = np.asarray(reference)
    difference = states - reference
    distance = np.real(np.einsum('tij,tji->t', difference, difference))
    return pd.Series(distance, index=pd.Index(
        np.asarray(trajectory.time), name='time'), name='distance')
