'''Collective states of two-level atoms in the totally symmetric subspace:
Dicke states, atomic coherent states, their superpositions and the
correlation functions that set the initial decoherence rate.

All matrices use the ordering m = -j, ..., j.
'''
from logging import getLogger
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .core import (NumericalValidationError, StateVector, check_basis,
                   check_square, projector)
from .master_equation import integrate, spin_operators

logger = getLogger(__name__)

NEGATIVE_RATE_TOLERANCE = 1e-10
DEGENERATE_NORM = 1e-12


class SpinBasis(NamedTuple):
    j: float

    @classmethod
    def from_atoms(cls, n_atoms):
        return make_spin_basis(n_atoms / 2)

    @property
    def dim(self):
        return int(round(2 * self.j)) + 1

    @property
    def m(self):
        return np.arange(-self.j, self.j + 1)

    @property
    def basis_id(self):
        return f'dicke(j={self.j:g})'


def make_spin_basis(j):
    if j < 0.5 or not np.isclose(2 * j, round(2 * j)):
        raise ValueError(f'j must be a positive multiple of 1/2, got {j}')
    return SpinBasis(round(2 * j) / 2)


class CoherentLabel(NamedTuple):
    '''Atomic coherent state label tau = tan(beta / 2) exp(-i phi).

    beta is measured from the m = -j pole, so tau = 0 is |j, -j>.
    '''
    tau: complex

    @classmethod
    def from_angles(cls, beta, phi=0.0):
        return cls(complex(np.tan(beta / 2.0) * np.exp(-1j * phi)))

    @classmethod
    def from_bloch_vector(cls, vector):
        x, y, z = np.asarray(vector) / np.linalg.norm(vector)
        return cls.from_angles(np.arccos(-z), np.arctan2(y, x))

    @property
    def angles(self):
        '''Return (beta, phi).'''
        beta = 2.0 * np.arctan(np.abs(self.tau))
        phi = np.mod(-np.angle(self.tau), 2.0 * np.pi)
        return beta, phi

    @property
    def bloch_vector(self):
        beta, phi = self.angles
        return np.array([np.sin(beta) * np.cos(phi),
                         np.sin(beta) * np.sin(phi),
                         -np.cos(beta)])


def j_operators(j):
    '''Dense Jp, Jm and Jz.

    Returns
    -------
    Jp, Jm, Jz : ndarray, shape (2j + 1, 2j + 1)

    '''
    Jp, Jm, m = spin_operators(j)
    return Jp.toarray(), Jm.toarray(), np.diag(m)


def dicke_state(m, basis):
    coeffs = np.zeros((basis.dim,), dtype=complex)
    coeffs[int(round(m + basis.j))] = 1.0
    return StateVector(basis.basis_id, coeffs)


def coherent_state(label, basis):
    '''Atomic coherent state |tau> with binomial amplitudes.

    Parameters
    ----------
    label : CoherentLabel
    basis : SpinBasis

    Returns
    -------
    state : StateVector

    '''
    tau = complex(label.tau)
    if not np.isfinite(tau):
        raise ValueError('tau must be finite')
    if tau == 0:
        return dicke_state(-basis.j, basis)
    n_up = np.arange(basis.dim)
    two_j = basis.dim - 1
    log_binomial = (gammaln(two_j + 1) - gammaln(n_up + 1)
                    - gammaln(two_j - n_up + 1))
    log_modulus = (0.5 * log_binomial + n_up * np.log(np.abs(tau))
                   - basis.j * np.log1p(np.abs(tau) ** 2))
    coeffs = np.exp(log_modulus + 1j * n_up * np.angle(tau))
    return StateVector(basis.basis_id, coeffs / np.linalg.norm(coeffs))


def coherent_overlap(label1, label2, j):
    '''<tau1|tau2> in closed form.'''
    tau1, tau2 = complex(label1.tau), complex(label2.tau)
    ratio = (1.0 + tau1.conjugate() * tau2) / np.sqrt(
        (1.0 + abs(tau1) ** 2) * (1.0 + abs(tau2) ** 2))
    return ratio ** int(round(2 * j))


def superposition(labels, basis):
    '''Normalized sum of the coherent states named by `labels`.'''
    coeffs = sum(coherent_state(label, basis).coeffs for label in labels)
    norm_squared = np.sum(np.abs(coeffs) ** 2)
    if norm_squared < DEGENERATE_NORM:
        raise ValueError('Coherent states cancel: the superposition has '
                         'vanishing norm')
    return StateVector(basis.basis_id, coeffs / np.sqrt(norm_squared))


def cat2(label1, label2, basis):
    '''(|tau1> + |tau2>) / sqrt(2 (1 + Re <tau1|tau2>)).'''
    overlap = coherent_overlap(label1, label2, basis.j)
    if 1.0 + overlap.real <= DEGENERATE_NORM:
        raise ValueError('Antipodal coherent states: cat normalization '
                         'vanishes')
    return superposition([label1, label2], basis)


def cat4(labels, basis):
    '''Equal-weight superposition of four coherent states.'''
    if len(labels) != 4:
        raise ValueError(f'Expected four labels, got {len(labels)}')
    cross = sum(coherent_overlap(labels[i], labels[k], basis.j).real
                for i in range(4) for k in range(i))
    if 2.0 * (2.0 + cross) <= DEGENERATE_NORM:
        raise ValueError('Four-component cat normalization vanishes')
    return superposition(labels, basis)


def tetrahedron_vertices():
    '''Unit vectors of a regular tetrahedron with one edge parallel to z
    and the opposite edge parallel to y. The z-edge pair comes first.'''
    c, h = 1.0 / np.sqrt(3.0), np.sqrt(2.0 / 3.0)
    return np.array([[c, 0.0, h],
                     [c, 0.0, -h],
                     [-c, h, 0.0],
                     [-c, -h, 0.0]])


def tetrahedron_labels():
    return [CoherentLabel.from_bloch_vector(vertex)
            for vertex in tetrahedron_vertices()]


def _as_density(state, basis):
    if isinstance(state, StateVector):
        check_basis(state, basis.basis_id)
        return projector(state.coeffs)
    return check_square(state, basis.dim, 'spin state')


def correlation(A, B, state, basis):
    '''C(A, B) = <AB> - <A><B>.'''
    rho = _as_density(state, basis)
    return (np.trace(A @ B @ rho)
            - np.trace(A @ rho) * np.trace(B @ rho))


def entanglement_rate(state, basis):
    '''A = C(J+, J-), the initial rate at which a state entangles with the
    vacuum of a resonant field.'''
    Jp, Jm, _ = j_operators(basis.j)
    rate = correlation(Jp, Jm, state, basis).real
    if rate < -NEGATIVE_RATE_TOLERANCE:
        raise NumericalValidationError(
            f'negative entanglement rate {rate:.3e}', 'entanglement_rate',
            -rate)
    return max(rate, 0.0)


def coherent_alignment(state, basis):
    '''Squared cosine of the angle between |psi> and J-|psi>.

    Equals one for eigenvectors of J-, the states that stay unentangled
    under collective emission.
    '''
    Jp, Jm, _ = j_operators(basis.j)
    rho = _as_density(state, basis)
    norm_squared = np.trace(Jp @ Jm @ rho).real
    if norm_squared == 0:
        return 1.0
    return np.abs(np.trace(Jm @ rho)) ** 2 / norm_squared


def slin_rate_t0(state, gamma, n_bar, basis, purity_tolerance=1e-10):
    '''Initial growth rate of the linear entropy of a pure state under
    collective damping, 2 gamma (n_bar C(J-, J+) + (n_bar + 1) C(J+, J-)).

    Raises
    ------
    ValueError
        If `state` is mixed.

    '''
    rho = _as_density(state, basis)
    purity = np.trace(rho @ rho).real
    if abs(purity - 1.0) > purity_tolerance:
        raise ValueError(f'Expected a pure state, purity is {purity}')
    Jp, Jm, _ = j_operators(basis.j)
    return 2.0 * gamma * (n_bar * correlation(Jm, Jp, rho, basis).real
                          + (n_bar + 1.0)
                          * correlation(Jp, Jm, rho, basis).real)


def classical_mixture(label1, label2, basis):
    '''Equal mixture of two coherent-state projectors.'''
    return 0.5 * (projector(coherent_state(label1, basis).coeffs)
                  + projector(coherent_state(label2, basis).coeffs))


def distance(rho, sigma):
    '''D = Tr[(rho - sigma)^2].'''
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f'Shape mismatch {rho.shape} != {sigma.shape}')
    difference = rho - sigma
    return float(np.real(np.trace(difference @ difference)))


def evolved_classical_reference(label1, label2, gen, times, tol=1e-8):
    '''Trajectory of the classical mixture under the same master equation
    as the cat.'''
    basis = make_spin_basis(gen.j)
    return integrate(gen, classical_mixture(label1, label2, basis), times,
                     tol=tol, basis_id=basis.basis_id)


def rotate_about_z(rho, angle, basis):
    '''exp(-i angle Jz) rho exp(i angle Jz).'''
    phase = np.exp(-1j * angle * basis.m)
    return phase[:, np.newaxis] * rho * phase.conj()[np.newaxis, :]
