from typing import NamedTuple

import numpy as np
from numba import njit

HERMITIAN_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-10
EIGENVALUE_FLOOR = -1e-9


class NumericalValidationError(ValueError):
    '''A density operator, trajectory or grid failed a numerical check.

    Attributes
    ----------
    context : str
        Module and step where the violation happened.
    magnitude : float
        Size of the violation.

    '''

    def __init__(self, message, context='', magnitude=np.nan):
        super().__init__(f'{context}: {message}' if context else message)
        self.context = context
        self.magnitude = magnitude


class ConfigurationError(ValueError):
    '''An experiment configuration does not match its schema.'''


class StateVector(NamedTuple):
    '''Complex coefficients over a named basis.'''
    basis_id: str
    coeffs: np.ndarray

    @property
    def norm(self):
        return np.sqrt(np.sum(np.abs(self.coeffs) ** 2))

    def normalized(self):
        return StateVector(self.basis_id, self.coeffs / self.norm)


def check_basis(state, basis_id):
    if state.basis_id != basis_id:
        raise ValueError(
            f'State lives on basis {state.basis_id!r}, not {basis_id!r}')


@njit(parallel=True)
def normalize_to_probability(distribution):
    '''Ensure the distribution sums to 1 so that it is a probability
    distribution
    '''
    return distribution / np.nansum(distribution)


def hermitian_part(matrix):
    return 0.5 * (matrix + matrix.conj().T)


def projector(coeffs):
    '''Rank-1 density operator |c><c| of a coefficient vector.

    Parameters
    ----------
    coeffs : ndarray, shape (n_states,)

    Returns
    -------
    rho : ndarray, shape (n_states, n_states)

    '''
    coeffs = np.asarray(coeffs, dtype=complex)
    return np.outer(coeffs, coeffs.conj())


def check_square(rho, dim=None, context=''):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f'{context}: expected a square matrix, '
                         f'got shape {rho.shape}')
    if dim is not None and rho.shape[0] != dim:
        raise ValueError(f'{context}: expected dimension {dim}, '
                         f'got {rho.shape[0]}')
    return rho


def validate_density_operator(rho, hermitian_tol=HERMITIAN_TOLERANCE,
                              trace_tol=TRACE_TOLERANCE,
                              eigenvalue_floor=EIGENVALUE_FLOOR,
                              context='density operator'):
    '''Checks Hermiticity, unit trace and positivity of `rho`.

    Parameters
    ----------
    rho : ndarray, shape (n_states, n_states)
    hermitian_tol : float, optional
    trace_tol : float, optional
    eigenvalue_floor : float, optional
    context : str, optional
        Prefix used in error messages.

    Returns
    -------
    eigenvalues : ndarray, shape (n_states,)

    Raises
    ------
    NumericalValidationError

    '''
    rho = check_square(rho, context=context)
    hermitian_error = np.max(np.abs(rho - rho.conj().T))
    if hermitian_error > hermitian_tol:
        raise NumericalValidationError(
            f'not Hermitian (max |rho - rho^H| = {hermitian_error:.3e})',
            context, hermitian_error)
    trace_error = np.abs(np.trace(rho) - 1.0)
    if trace_error > trace_tol:
        raise NumericalValidationError(
            f'trace differs from one by {trace_error:.3e}', context,
            trace_error)
    eigenvalues = np.linalg.eigvalsh(hermitian_part(rho))
    if eigenvalues[0] < eigenvalue_floor:
        raise NumericalValidationError(
            f'negative eigenvalue {eigenvalues[0]:.3e}', context,
            -eigenvalues[0])
    return eigenvalues
