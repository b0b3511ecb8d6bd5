from copy import deepcopy
from logging import getLogger

import joblib
import numpy as np
import xarray as xr
from sklearn.base import BaseEstimator

from .core import projector
from .diagnostics import detect_knee, diagnostics
from .master_equation import (COUPLING_RATIOS, BathSpec,
                              build_anharmonic_generator,
                              build_dicke_generator, calibrate_coupling,
                              integrate)
from .morse import (GridSpec, MorseParams, PhasePoint, autocorrelation,
                    bound_projection, build_basis, check_bound_spectrum,
                    coherent_state, eigenstate, evolve_free_series,
                    expectation_series, momentum_matrix, position_matrix,
                    position_representation)
from .spin import (SpinBasis, cat2, cat4, classical_mixture, distance,
                   j_operators)
from .wigner import (PlanarGridSpec, wigner_planar_basis,
                     wigner_planar_pure)

logger = getLogger(__name__)


def _with_diagnostics(trajectory, hamiltonian):
    series = diagnostics(trajectory, hamiltonian)
    results = xr.Dataset({'rho': trajectory}, attrs=trajectory.attrs)
    for name, values in series.items():
        results[name] = ('time', values.to_numpy())
    return results


class _ModelBase(BaseEstimator):
    def fit(self):
        raise NotImplementedError

    def predict(self):
        raise NotImplementedError

    def save_model(self, filename='model.pkl'):
        joblib.dump(self, filename)

    @staticmethod
    def load_model(filename='model.pkl'):
        return joblib.load(filename)

    def copy(self):
        return deepcopy(self)


class MorseWavePacket(_ModelBase):
    def __init__(self, molecule='NO', s=None, grid=GridSpec(), n_basis=150,
                 convention='centroid'):
        '''Closed-system wave packets of a Morse oscillator.

        Attributes
        ----------
        molecule : str, optional
            Key of MOLECULES used when `s` is None.
        s : float, optional
            Shape parameter.
        grid : GridSpec, optional
        n_basis : int, optional
        convention : ('centroid' | 'nominal'), optional
            How phase-space points map onto coherent-state labels.

        '''
        self.molecule = molecule
        self.s = s
        self.grid = grid
        self.n_basis = n_basis
        self.convention = convention

    def _params(self):
        if self.s is None:
            return MorseParams.from_molecule(self.molecule)
        return MorseParams(self.s, self.molecule or '')

    def fit(self):
        self.basis_ = build_basis(self._params(), self.grid, self.n_basis)
        self.spectrum_error_ = check_bound_spectrum(self.basis_)
        logger.info('Fitting position and momentum matrices...')
        self.position_ = position_matrix(self.basis_)
        self.momentum_ = momentum_matrix(self.basis_)
        return self

    def initial_state(self, x0, p0=0.0):
        return coherent_state(PhasePoint(x0, p0), self.basis_,
                              self.convention)

    def predict(self, x0, p0=0.0, times=None):
        '''

        Parameters
        ----------
        x0, p0 : float
            Center of the initial coherent state.
        times : ndarray, shape (n_time,), optional
            Units of t0. Defaults to [0, 200] in steps of 0.05.

        Returns
        -------
        results : xarray.Dataset
            <X>, <P> and the return probability against time.

        '''
        if times is None:
            times = np.arange(0.0, 200.0, 0.05)
        state = self.initial_state(x0, p0)
        coeffs = evolve_free_series(state, self.basis_, times)
        return xr.Dataset(
            {'x_expectation': ('time', expectation_series(
                coeffs, self.position_)),
             'p_expectation': ('time', expectation_series(
                 coeffs, self.momentum_)),
             'autocorrelation': ('time', autocorrelation(
                 state, self.basis_, times))},
            coords={'time': times},
            attrs=dict(x0=x0, p0=p0, basis_id=self.basis_.basis_id))

    def wigner(self, x0, p0=0.0, t=0.0, spec=PlanarGridSpec()):
        state = self.initial_state(x0, p0)
        coeffs = evolve_free_series(state, self.basis_, [t])[0]
        psi = position_representation(coeffs, self.basis_)
        return wigner_planar_pure(psi, self.basis_.grid.x, spec,
                                  norm_tolerance=1e-4)


class MorseDecoherence(MorseWavePacket):
    def __init__(self, molecule='NO', s=None, grid=GridSpec(), n_basis=150,
                 convention='centroid', coupling='lambda1', temperature=10.0,
                 equation='full', tol=1e-8):
        '''Morse oscillator damped by a thermal bath, restricted to its
        bound states.

        Attributes
        ----------
        coupling : ('lambda1' | 'lambda2') or float, optional
            Named or explicit omega_01 / gamma_01 ratio at zero
            temperature.
        temperature : float, optional
            kT in units of the 0-1 Bohr quantum.
        equation : ('full' | 'secular'), optional
        tol : float, optional
            Integrator tolerance.

        '''
        super().__init__(molecule, s, grid, n_basis, convention)
        self.coupling = coupling
        self.temperature = temperature
        self.equation = equation
        self.tol = tol

    def fit(self):
        super().fit()
        n_bound = self.basis_.n_bound
        self.energies_ = self.basis_.energies[:n_bound]
        self.X_ = self.position_[:n_bound, :n_bound]
        target_ratio = COUPLING_RATIOS.get(self.coupling, self.coupling)
        frequency_scale = self.basis_.params.frequency_scale
        self.lambda_ = calibrate_coupling(self.energies_, self.X_,
                                          float(target_ratio),
                                          frequency_scale)
        logger.info('Fitting master equation generator...')
        self.generator_ = build_anharmonic_generator(
            self.energies_, self.X_,
            BathSpec(self.temperature, self.lambda_), frequency_scale)
        return self

    def initial_density(self, x0=None, p0=0.0, n=None):
        '''Bound-state density operator of a coherent state or of the
        eigenstate `n`.'''
        if n is not None:
            state = eigenstate(n, self.basis_)
        else:
            state = self.initial_state(x0, p0)
        coeffs, discarded = bound_projection(state, self.basis_)
        if discarded > 0.01:
            logger.warning(f'Discarding weight {discarded:.3e} above the '
                           'dissociation limit')
        return projector(coeffs)

    def predict(self, x0=None, p0=0.0, times=None, n=None):
        '''

        Parameters
        ----------
        x0, p0 : float, optional
            Center of the initial coherent state.
        times : ndarray, shape (n_time,), optional
            Units of t0. Defaults to [0, 200] in steps of 0.5.
        n : int, optional
            Start from this eigenstate instead.

        Returns
        -------
        results : xarray.Dataset
            Density-operator trajectory with entropy, purity and energy.

        '''
        if times is None:
            times = np.arange(0.0, 200.0, 0.5)
        rho0 = self.initial_density(x0, p0, n)
        trajectory = integrate(
            self.generator_, rho0, times, tol=self.tol,
            equation=self.equation, basis_id=self.basis_.basis_id)
        results = _with_diagnostics(trajectory, np.diag(self.energies_))
        results.attrs.update(coupling=self.lambda_,
                             temperature=self.temperature)
        return results

    def decoherence_time(self, results, field='linear_entropy'):
        return detect_knee(results[field].to_series(), field)

    def wigner_density(self, rho, spec=PlanarGridSpec()):
        functions = self.basis_.eigenvectors[:, :self.basis_.n_bound]
        return wigner_planar_basis(np.asarray(rho), functions,
                                   self.basis_.grid.x, spec)


class DickeCat(_ModelBase):
    def __init__(self, n_atoms=500, gamma=1.0, n_bar=1.0, tol=1e-8):
        '''Superpositions of atomic coherent states under collective
        damping.

        Attributes
        ----------
        n_atoms : int, optional
        gamma : float, optional
            Single-atom damping rate; times are in units of 1/gamma.
        n_bar : float, optional
            Mean photon number of the bath at the atomic frequency.
        tol : float, optional

        '''
        self.n_atoms = n_atoms
        self.gamma = gamma
        self.n_bar = n_bar
        self.tol = tol

    def fit(self):
        logger.info('Fitting collective operators...')
        self.basis_ = SpinBasis.from_atoms(self.n_atoms)
        self.generator_ = build_dicke_generator(self.basis_.j, self.gamma,
                                                self.n_bar)
        _, _, self.Jz_ = j_operators(self.basis_.j)
        return self

    def initial_state(self, labels):
        if len(labels) == 2:
            return cat2(labels[0], labels[1], self.basis_)
        elif len(labels) == 4:
            return cat4(labels, self.basis_)
        raise ValueError(f'Expected two or four labels, got {len(labels)}')

    def predict(self, labels, times):
        '''

        Parameters
        ----------
        labels : list of CoherentLabel
            Two labels for a cat, four for the tetrahedral cat.
        times : ndarray, shape (n_time,)
            Units of 1/gamma.

        Returns
        -------
        results : xarray.Dataset
            Density-operator trajectory with entropy, purity, energy and,
            for two labels, the distance to the classical mixture.

        '''
        state = self.initial_state(labels)
        trajectory = integrate(self.generator_, projector(state.coeffs),
                               times, tol=self.tol,
                               basis_id=self.basis_.basis_id)
        results = _with_diagnostics(trajectory, self.Jz_)
        if len(labels) == 2:
            mixture = classical_mixture(labels[0], labels[1], self.basis_)
            results['distance_classical'] = ('time', np.array(
                [distance(rho, mixture) for rho in trajectory.values]))
        return results
