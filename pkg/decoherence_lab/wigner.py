'''Planar and spherical Wigner functions, multipole operators and the
measures read off them (nonclassicality, hills, interference fringes).'''
from functools import lru_cache
from logging import getLogger
from typing import NamedTuple

import numpy as np
import pandas as pd
import xarray as xr
from numba import njit, prange
from scipy import ndimage
from scipy.linalg import eigh_tridiagonal
from scipy.special import eval_hermite, gammaln
from sympy import Rational
from sympy.physics.quantum.cg import CG

from .core import NumericalValidationError, check_square
from .spin import make_spin_basis

try:
    from scipy.special import sph_harm_y

    def spherical_harmonic(K, Q, theta, phi):
        return sph_harm_y(K, Q, theta, phi)
except ImportError:
    from scipy.special import sph_harm

    def spherical_harmonic(K, Q, theta, phi):
        return sph_harm(Q, K, phi, theta)

logger = getLogger(__name__)

PLANAR_NORMALIZATION_TOLERANCE = 2e-3
SPHERICAL_NORMALIZATION_TOLERANCE = 1e-6
IMAGINARY_TOLERANCE = 1e-10
NEGATIVITY_FLOOR = -1e-9


class PlanarGridSpec(NamedTuple):
    x_min: float = -1.5
    x_max: float = 2.5
    p_min: float = -40.0
    p_max: float = 40.0
    n_x: int = 256
    n_p: int = 256

    @property
    def x(self):
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def p(self):
        return np.linspace(self.p_min, self.p_max, self.n_p)


class SphericalGridSpec(NamedTuple):
    n_theta: int = 64
    n_phi: int = 128

    @property
    def nodes(self):
        '''Gauss-Legendre polar nodes, uniform azimuthal nodes and the
        solid-angle weight of each node.

        Returns
        -------
        theta : ndarray, shape (n_theta,)
        phi : ndarray, shape (n_phi,)
        weights : ndarray, shape (n_theta, n_phi)

        '''
        cos_theta, polar_weights = np.polynomial.legendre.leggauss(
            self.n_theta)
        order = np.argsort(-cos_theta)
        theta = np.arccos(cos_theta[order])
        phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        weights = np.outer(polar_weights[order],
                           np.full((self.n_phi,), 2.0 * np.pi / self.n_phi))
        return theta, phi, weights


def _to_grid(values, weights, geometry):
    '''Wraps node values and quadrature weights into a Dataset.'''
    imaginary = np.max(np.abs(np.imag(values.values)), initial=0.0)
    scale = max(1.0, np.max(np.abs(np.real(values.values)), initial=0.0))
    if imaginary > IMAGINARY_TOLERANCE * scale:
        raise NumericalValidationError(
            f'imaginary residue {imaginary:.3e}', 'wigner', imaginary)
    return xr.Dataset(
        {'wigner': (values.dims, np.real(values.values)),
         'weight': (values.dims, weights)},
        coords=values.coords, attrs=dict(geometry=geometry))


def integrate_grid(W):
    return float((W.wigner * W.weight).sum())


def check_normalization(W, tolerance=None):
    if tolerance is None:
        tolerance = (PLANAR_NORMALIZATION_TOLERANCE
                     if W.attrs['geometry'] == 'planar'
                     else SPHERICAL_NORMALIZATION_TOLERANCE)
    total = integrate_grid(W)
    if abs(total - 1.0) > tolerance:
        raise ValueError(f'Wigner grid integrates to {total:.6f}, not 1')
    return total


def _grid_centers(x_grid, spec):
    dx = x_grid[1] - x_grid[0]
    centers = np.round((spec.x - x_grid[0]) / dx).astype(np.int64)
    if np.any(centers < 0) or np.any(centers >= x_grid.size):
        raise ValueError('Wigner x-range exceeds the wavefunction grid')
    return centers


def _shift_indices(x_grid, centers, max_shift):
    shifts = np.arange(-max_shift, max_shift + 1)
    lower = centers[:, np.newaxis] - shifts[np.newaxis, :]
    upper = centers[:, np.newaxis] + shifts[np.newaxis, :]
    inside = (lower >= 0) & (upper >= 0) & (lower < x_grid.size) & (
        upper < x_grid.size)
    return (np.clip(lower, 0, x_grid.size - 1),
            np.clip(upper, 0, x_grid.size - 1), inside, shifts)


def _planar_transform(correlation, x_grid, centers, spec):
    '''Fourier transform of rho(x - u/2, x + u/2) over u = 2 k dx.

    Parameters
    ----------
    correlation : ndarray, shape (n_x, 2 * max_shift + 1)
    x_grid : ndarray, shape (n_points,)
    centers : ndarray, shape (n_x,)
    spec : PlanarGridSpec

    Returns
    -------
    W : xarray.Dataset

    '''
    dx = x_grid[1] - x_grid[0]
    max_shift = (correlation.shape[1] - 1) // 2
    u = 2.0 * dx * np.arange(-max_shift, max_shift + 1)
    p = spec.p
    kernel = np.exp(1j * np.outer(u, p)) * (2.0 * dx / (2.0 * np.pi))
    x = x_grid[centers]
    values = xr.DataArray(correlation @ kernel, dims=['x', 'p'],
                          coords=dict(x=x, p=p))
    cell = np.outer(np.gradient(x), np.gradient(p))
    return _to_grid(values, cell, 'planar')


def _default_max_shift(x_grid, centers):
    return int(np.max(np.minimum(centers, x_grid.size - 1 - centers)))


def wigner_planar_pure(psi, x_grid, spec=PlanarGridSpec(), max_shift=None,
                       norm_tolerance=1e-6):
    '''W(x, p) = 1/2pi int phi*(x + u/2) phi(x - u/2) exp(iup) du.

    Parameters
    ----------
    psi : ndarray, shape (n_points,)
        Wavefunction sampled on the uniform `x_grid`.
    x_grid : ndarray, shape (n_points,)
    spec : PlanarGridSpec, optional
        Requested x values are snapped to the nearest grid point.
    max_shift : int, optional
        Largest |u| / (2 dx) used.
    norm_tolerance : float, optional

    Returns
    -------
    W : xarray.Dataset

    '''
    psi = np.asarray(psi, dtype=complex)
    dx = x_grid[1] - x_grid[0]
    norm = np.sum(np.abs(psi) ** 2) * dx
    if abs(norm - 1.0) > norm_tolerance:
        raise ValueError(f'Wavefunction norm is {norm}, not 1')
    centers = _grid_centers(x_grid, spec)
    if max_shift is None:
        max_shift = _default_max_shift(x_grid, centers)
    lower, upper, inside, _ = _shift_indices(x_grid, centers, max_shift)
    correlation = np.where(inside, psi[lower] * psi[upper].conj(), 0.0)
    return _planar_transform(correlation, x_grid, centers, spec)


def wigner_planar_mixed(rho_x, x_grid, spec=PlanarGridSpec(),
                        max_shift=None):
    '''Wigner function of a density operator given as rho(x, x') on the
    uniform `x_grid`.'''
    rho_x = check_square(rho_x, x_grid.size, 'wigner_planar_mixed')
    centers = _grid_centers(x_grid, spec)
    if max_shift is None:
        max_shift = _default_max_shift(x_grid, centers)
    lower, upper, inside, _ = _shift_indices(x_grid, centers, max_shift)
    correlation = np.where(inside, rho_x[lower, upper], 0.0)
    return _planar_transform(correlation, x_grid, centers, spec)


@njit(nogil=True, parallel=True, cache=True)
def _basis_correlation(left, functions, centers, max_shift):
    '''rho(x_c - k dx, x_c + k dx) for rho given in a basis.

    Parameters
    ----------
    left : ndarray, shape (n_points, n_states)
        Basis functions multiplied by rho from the right.
    functions : ndarray, shape (n_points, n_states)
        Basis functions sampled on the grid.
    centers : ndarray, shape (n_centers,)
    max_shift : int

    Returns
    -------
    correlation : ndarray, shape (n_centers, 2 * max_shift + 1)

    '''
    n_points, n_states = functions.shape
    n_centers = centers.shape[0]
    correlation = np.zeros((n_centers, 2 * max_shift + 1),
                           dtype=np.complex128)
    for center_ind in prange(n_centers):
        center = centers[center_ind]
        for shift in range(-max_shift, max_shift + 1):
            lower = center - shift
            upper = center + shift
            if (lower < 0 or upper < 0 or lower >= n_points
                    or upper >= n_points):
                continue
            total = 0.0j
            for state_ind in range(n_states):
                total += (left[lower, state_ind]
                          * np.conj(functions[upper, state_ind]))
            correlation[center_ind, shift + max_shift] = total
    return correlation


def wigner_planar_basis(rho, functions, x_grid, spec=PlanarGridSpec(),
                        max_shift=None):
    '''Wigner function of rho given in a basis whose functions are sampled
    on `x_grid`, without forming rho(x, x').

    Parameters
    ----------
    rho : ndarray, shape (n_states, n_states)
    functions : ndarray, shape (n_points, n_states)
    x_grid : ndarray, shape (n_points,)
    spec : PlanarGridSpec, optional
    max_shift : int, optional

    Returns
    -------
    W : xarray.Dataset

    '''
    rho = check_square(rho, functions.shape[1], 'wigner_planar_basis')
    centers = _grid_centers(x_grid, spec)
    if max_shift is None:
        max_shift = _default_max_shift(x_grid, centers)
    functions = np.ascontiguousarray(functions, dtype=np.complex128)
    left = np.ascontiguousarray(functions @ rho)
    correlation = _basis_correlation(left, functions, centers, max_shift)
    return _planar_transform(correlation, x_grid, centers, spec)


def oscillator_functions(n_states, x):
    '''Harmonic-oscillator eigenfunctions for [x, p] = i.

    Returns
    -------
    functions : ndarray, shape (n_points, n_states)

    '''
    n = np.arange(n_states)
    log_norm = -0.5 * (n * np.log(2.0) + gammaln(n + 1) + 0.5 * np.log(np.pi))
    hermite = eval_hermite(n[np.newaxis, :], x[:, np.newaxis])
    return (hermite * np.exp(log_norm[np.newaxis, :])
            * np.exp(-0.5 * x[:, np.newaxis] ** 2))


def oscillator_wavefunction(coeffs, x):
    '''psi(x) of a state given by its Fock-basis coefficients.'''
    coeffs = np.asarray(coeffs, dtype=complex)
    return oscillator_functions(coeffs.size, x) @ coeffs


def alpha_to_phase_point(alpha):
    '''(x, p) of the coherent-state label alpha = (x + ip) / sqrt(2).'''
    return np.sqrt(2.0) * np.real(alpha), np.sqrt(2.0) * np.imag(alpha)


def marginals(W):
    '''Position and momentum distributions of a planar grid.

    Returns
    -------
    position, momentum : xarray.DataArray

    '''
    dp = np.gradient(W.p.values)
    dx = np.gradient(W.x.values)
    position = (W.wigner * xr.DataArray(dp, dims=['p'])).sum('p')
    momentum = (W.wigner * xr.DataArray(dx, dims=['x'])).sum('x')
    return position, momentum


def clebsch_gordan(j1, m1, j2, m2, J, M):
    '''Exact angular-momentum coupling coefficient <j1 m1; j2 m2|J M>.'''
    def half(value):
        return Rational(int(round(2 * value)), 2)
    return float(CG(half(j1), half(m1), half(j2), half(m2), half(J),
                    half(M)).doit())


def _check_multipole_range(K, Q, j):
    if not (0 <= K <= 2 * j and abs(Q) <= K and K == int(K)
            and Q == int(Q)):
        raise ValueError(f'Need 0 <= K <= 2j and |Q| <= K, got K={K}, '
                         f'Q={Q}, j={j}')


def multipole_operator(K, Q, j):
    '''Spherical tensor T_KQ with
    <j m'|T_KQ|j m> = sqrt((2K + 1) / (2j + 1)) <j m; K Q|j m'>.

    Returns
    -------
    T : ndarray, shape (2j + 1, 2j + 1)

    '''
    _check_multipole_range(K, Q, j)
    basis = make_spin_basis(j)
    T = np.zeros((basis.dim, basis.dim))
    scale = np.sqrt((2 * K + 1) / (2 * basis.j + 1))
    for column, m in enumerate(basis.m):
        row = column + Q
        if 0 <= row < basis.dim:
            T[row, column] = scale * clebsch_gordan(
                basis.j, m, K, Q, basis.j, m + Q)
    return T


def _band_indices(Q, dim):
    '''Rows and columns of the entries T[c + Q, c] of a band.'''
    columns = np.arange(max(0, -Q), dim - max(0, Q))
    return columns + Q, columns


def _lower_band(vectors, raising, Q):
    '''Band Q of [J-, X] for every column X given on band Q + 1.'''
    n = vectors.shape[0]
    ind = np.arange(n)
    lowered = np.zeros((n + 1, vectors.shape[1]))
    lowered[:-1] += raising[ind + Q, np.newaxis] * vectors
    lowered[1:] -= raising[ind, np.newaxis] * vectors
    return lowered


@lru_cache(maxsize=8)
def multipole_bands(j):
    '''Entries of every T_KQ with Q >= 0, one band at a time.

    T_KQ is nonzero only on the band T[c + Q, c]. On that band the Casimir
    superoperator sum_i [J_i, [J_i, .]] is a symmetric tridiagonal matrix
    with the nondegenerate eigenvalues K(K + 1), K = Q ... 2j, so its
    eigenvectors are the T_KQ up to sign. Signs follow
    T_KK ~ (-1)^K J+^K and T_K,Q-1 ~ [J-, T_KQ].

    Returns
    -------
    bands : tuple of ndarray
        bands[Q] has shape (2j + 1 - Q, 2j + 1 - Q); column k holds
        T_{Q + k, Q}.

    '''
    basis = make_spin_basis(j)
    dim, m = basis.dim, basis.m
    casimir = basis.j * (basis.j + 1)
    raising = np.sqrt(casimir - m[:-1] * (m[:-1] + 1))
    bands = [None] * dim
    for Q in range(dim - 1, -1, -1):
        ind = np.arange(dim - Q)
        if ind.size == 1:
            vectors = np.ones((1, 1))
        else:
            _, vectors = eigh_tridiagonal(
                2.0 * (casimir - m[ind + Q] * m[ind]),
                -raising[ind[:-1]] * raising[ind[:-1] + Q])
        # J+^Q has a positive band
        vectors[:, 0] *= (-1) ** Q * np.sign(vectors[:, 0].sum())
        if Q < dim - 1:
            overlap = np.sum(vectors[:, 1:]
                             * _lower_band(bands[Q + 1], raising, Q), axis=0)
            vectors[:, 1:] *= np.sign(overlap)
        bands[Q] = vectors
    return tuple(bands)


def _signed_band(bands, Q):
    '''Band vectors of T_KQ, K = |Q| ... 2j, using
    T_K,-Q = (-1)^Q T_KQ^dagger.'''
    if Q < 0:
        return (-1) ** Q * bands[-Q]
    return bands[Q]


def multipole_operators(j):
    '''All T_KQ for K = 0 ... 2j.

    Yields
    ------
    K, Q : int
    T : ndarray, shape (2j + 1, 2j + 1)

    '''
    bands = multipole_bands(j)
    dim = len(bands)
    for K in range(dim):
        for Q in range(K, -K - 1, -1):
            T = np.zeros((dim, dim))
            rows, columns = _band_indices(Q, dim)
            T[rows, columns] = _signed_band(bands, Q)[:, K - abs(Q)]
            yield K, Q, T


def _coefficient_index(K, Q, j):
    return K, Q + int(round(2 * j))


def multipole_coefficients(rho, j):
    '''rho_KQ = Tr(rho T_KQ^dagger) stored at [K, Q + 2j].

    Returns
    -------
    coefficients : ndarray, shape (2j + 1, 4j + 1)

    '''
    dim = int(round(2 * j)) + 1
    rho = check_square(rho, dim, 'multipole_coefficients')
    bands = multipole_bands(j)
    coefficients = np.zeros((dim, 2 * dim - 1), dtype=complex)
    for Q in range(-(dim - 1), dim):
        rows, columns = _band_indices(Q, dim)
        coefficients[abs(Q):, Q + dim - 1] = (
            _signed_band(bands, Q).T @ rho[rows, columns])
    return coefficients


def density_from_multipoles(coefficients, j):
    '''Inverse of `multipole_coefficients`.'''
    dim = int(round(2 * j)) + 1
    bands = multipole_bands(j)
    rho = np.zeros((dim, dim), dtype=complex)
    for Q in range(-(dim - 1), dim):
        rows, columns = _band_indices(Q, dim)
        rho[rows, columns] = (_signed_band(bands, Q)
                              @ coefficients[abs(Q):, Q + dim - 1])
    return rho


@lru_cache(maxsize=32)
def _polar_harmonics(j, theta_key):
    theta = np.asarray(theta_key)
    dim = int(round(2 * j)) + 1
    harmonics = np.zeros((dim, 2 * dim - 1, theta.size), dtype=complex)
    for K in range(dim):
        for Q in range(-K, K + 1):
            harmonics[_coefficient_index(K, Q, j)] = spherical_harmonic(
                K, Q, theta, 0.0)
    return harmonics


def wigner_spherical(rho, j, spec=SphericalGridSpec()):
    '''W(theta, phi) = Tr(rho Delta(theta, phi)) with the kernel
    sqrt((2j + 1) / 4pi) sum_KQ T_KQ^dagger Y_KQ(theta, phi), so that W
    integrates to one over the sphere.

    Parameters
    ----------
    rho : ndarray, shape (2j + 1, 2j + 1)
    j : float
    spec : SphericalGridSpec, optional

    Returns
    -------
    W : xarray.Dataset

    '''
    basis = make_spin_basis(j)
    if spec.n_theta < basis.dim or spec.n_phi < 2 * basis.dim - 1:
        logger.warning(f'Spherical grid {spec.n_theta}x{spec.n_phi} is too '
                       f'coarse for exact quadrature at j={j}')
    theta, phi, weights = spec.nodes
    coefficients = multipole_coefficients(rho, basis.j)
    harmonics = _polar_harmonics(basis.j, tuple(theta))
    # sum over K for each Q, then over Q with exp(iQphi)
    polar = np.einsum('kq,kqt->qt', coefficients, harmonics)
    Q = np.arange(-(basis.dim - 1), basis.dim)
    azimuthal = np.exp(1j * np.outer(Q, phi))
    values = np.sqrt(basis.dim / (4.0 * np.pi)) * (polar.T @ azimuthal)
    values = xr.DataArray(values, dims=['theta', 'phi'],
                          coords=dict(theta=theta, phi=phi))
    return _to_grid(values, weights, 'spherical')


def wigner_spherical_at(rho, j, theta, phi):
    '''Spherical Wigner function at arbitrary points.'''
    basis = make_spin_basis(j)
    theta, phi = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                     np.asarray(phi, dtype=float))
    coefficients = multipole_coefficients(rho, basis.j)
    values = np.zeros(theta.shape, dtype=complex)
    for K in range(basis.dim):
        for Q in range(-K, K + 1):
            values += (coefficients[_coefficient_index(K, Q, basis.j)]
                       * spherical_harmonic(K, Q, theta, phi))
    return np.real(np.sqrt(basis.dim / (4.0 * np.pi)) * values)


def multipole_purity(rho, j):
    '''Tr(rho^2) as the sum of |rho_KQ|^2.'''
    return float(np.sum(np.abs(multipole_coefficients(rho, j)) ** 2))


def nonclassicality(W, tolerance=None):
    '''M_nc = 1 - (I+ - I-) / (I+ + I-) from the positive and negative
    integrals of a normalized Wigner grid.'''
    check_normalization(W, tolerance)
    values = W.wigner.values
    weights = W.weight.values
    is_negative = values < NEGATIVITY_FLOOR
    positive = np.sum((values * weights)[values > 0])
    negative = -np.sum((values * weights)[is_negative])
    return float(2.0 * negative / (positive + negative))


def _great_circle_distance(theta1, phi1, theta2, phi2):
    cos_angle = (np.cos(theta1) * np.cos(theta2) + np.sin(theta1)
                 * np.sin(theta2) * np.cos(phi1 - phi2))
    return np.arccos(np.clip(cos_angle, -1.0, 1.0))


def find_hills(W, threshold=0.3, merge_distance=None):
    '''Local maxima above `threshold` times the global maximum.

    Maxima closer than `merge_distance` to a higher one are dropped
    (planar: in units of grid cells, default 2; spherical: radians,
    default two polar spacings).

    Returns
    -------
    hills : pandas.DataFrame
        Coordinates and height, highest first.

    '''
    values = W.wigner.values
    dims = W.wigner.dims
    if W.attrs['geometry'] == 'spherical':
        mode = ['nearest', 'wrap']
    else:
        mode = 'nearest'
    is_peak = (ndimage.maximum_filter(values, size=3, mode=mode) == values)
    is_peak &= values >= threshold * values.max()
    rows, columns = np.nonzero(is_peak)
    first = W[dims[0]].values[rows]
    second = W[dims[1]].values[columns]
    order = np.argsort(-values[rows, columns])

    kept = []
    for ind in order:
        if W.attrs['geometry'] == 'spherical':
            spacing = (merge_distance if merge_distance is not None
                       else 2.0 * np.max(np.diff(W.theta.values)))
            is_close = [
                _great_circle_distance(first[ind], second[ind],
                                       first[k], second[k]) <= spacing
                for k in kept]
        else:
            cells = merge_distance if merge_distance is not None else 2
            is_close = [
                abs(rows[ind] - rows[k]) <= cells
                and abs(columns[ind] - columns[k]) <= cells for k in kept]
        if not any(is_close):
            kept.append(ind)

    return pd.DataFrame({
        dims[0]: first[kept],
        dims[1]: second[kept],
        'height': values[rows[kept], columns[kept]],
    })


def fringe_contrast(values, core=0.5):
    '''Peak-to-peak variation of `values` over the central `core` fraction
    of a path, relative to the largest value on the path.'''
    values = np.asarray(values)
    n_values = values.size
    start = int(round(0.5 * (1.0 - core) * n_values))
    middle = values[start:n_values - start]
    return float((middle.max() - middle.min()) / np.abs(values).max())


def planar_fringe_contrast(W, point1, point2, n_points=201, core=0.5):
    '''Fringe contrast along the segment joining two phase-space points.'''
    fraction = np.linspace(0.0, 1.0, n_points)
    x = point1[0] + fraction * (point2[0] - point1[0])
    p = point1[1] + fraction * (point2[1] - point1[1])
    values = W.wigner.sel(x=xr.DataArray(x), p=xr.DataArray(p),
                          method='nearest')
    return fringe_contrast(values.values, core)


def great_circle_arc(vector1, vector2, n_points=201):
    '''Polar and azimuthal angles along the shorter great-circle arc.'''
    vector1 = np.asarray(vector1) / np.linalg.norm(vector1)
    vector2 = np.asarray(vector2) / np.linalg.norm(vector2)
    angle = np.arccos(np.clip(vector1 @ vector2, -1.0, 1.0))
    fraction = np.linspace(0.0, 1.0, n_points)[:, np.newaxis]
    points = (np.sin((1.0 - fraction) * angle) * vector1
              + np.sin(fraction * angle) * vector2) / np.sin(angle)
    theta = np.arccos(np.clip(points[:, 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(points[:, 1], points[:, 0]), 2.0 * np.pi)
    return theta, phi


def edge_fringe_contrast(rho, j, label1, label2, n_points=201, core=0.5):
    '''Interference contrast of the spherical Wigner function along the
    arc joining the lobes of two coherent states.'''
    theta, phi = great_circle_arc(label1.bloch_vector, label2.bloch_vector,
                                  n_points)
    return fringe_contrast(wigner_spherical_at(rho, j, theta, phi), core)


def write_wigner_grid(W, path):
    '''Writes a header block followed by one node per row.'''
    dims = list(W.wigner.dims)
    with open(path, 'w') as f:
        f.write(f'# geometry: {W.attrs["geometry"]}\n')
        for dim in dims:
            coord = W[dim].values
            f.write(f'# {dim}: min={coord.min():.10g} max={coord.max():.10g}'
                    f' count={coord.size}\n')
        table = W.wigner.to_dataframe().reset_index()[dims + ['wigner']]
        table.columns = dims + ['W']
        table.to_csv(f, index=False, float_format='%.12g')
    return path
