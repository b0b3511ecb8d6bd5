import numpy as np
import pandas as pd
import pytest

from decoherence_lab.core import NumericalValidationError, projector
from decoherence_lab.master_equation import (
    BathSpec, build_anharmonic_generator, build_dicke_generator,
    calibrate_coupling, dicke_band_generator, dicke_rhs, expectation,
    integrate, ladder_operators,
    mean_photon_number, oscillator_coherent_state, pauli_rhs,
    pauli_steady_state, preset, right_hand_side, rhs_full, rhs_secular,
    secular_rates, spin_operators, steady_state, thermal_populations,
    trajectory_to_dataset, write_trajectory_csv)


def _random_density(dim, rng):
    matrix = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = matrix @ matrix.conj().T
    return rho / np.trace(rho)


@pytest.fixture(scope='module')
def anharmonic():
    s = 5.3
    energies = -(s - np.arange(6)) ** 2
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 6))
    X = X + X.T
    return energies, X


def test_full_rhs_preserves_trace_and_hermiticity(anharmonic):
    energies, X = anharmonic
    generator = build_anharmonic_generator(energies, X, BathSpec(0.7, 0.01))
    rng = np.random.default_rng(1)
    for _ in range(100):
        derivative = rhs_full(generator, _random_density(6, rng))
        assert abs(np.trace(derivative)) < 1e-12
        assert np.allclose(derivative, derivative.conj().T, atol=1e-12)


def test_ground_state_is_stationary_at_zero_temperature(anharmonic):
    energies, X = anharmonic
    generator = build_anharmonic_generator(energies, X, BathSpec(0.0, 0.01))
    rho = np.zeros((6, 6), dtype=complex)
    rho[0, 0] = 1.0
    assert np.allclose(rhs_full(generator, rho), 0.0, atol=1e-12)


def test_rates_detailed_balance(anharmonic):
    energies, X = anharmonic
    temperature = 0.7
    generator = build_anharmonic_generator(energies, X,
                                           BathSpec(temperature, 0.01))
    gamma = generator.gamma_ik
    assert np.all(gamma >= 0)
    assert np.all(np.diag(gamma) == 0)
    reference = energies[1] - energies[0]
    for i in range(6):
        for k in range(i + 1, 6):
            omega = energies[k] - energies[i]
            assert np.isclose(gamma[i, k] / gamma[k, i],
                              np.exp(omega / (reference * temperature)),
                              rtol=1e-8)


def test_pauli_steady_state_is_thermal(anharmonic):
    energies, X = anharmonic
    generator = build_anharmonic_generator(energies, X, BathSpec(0.7, 0.01))
    populations = pauli_steady_state(generator.gamma_ik)
    assert np.allclose(populations, thermal_populations(energies, 0.7),
                       atol=1e-10)
    assert np.allclose(pauli_rhs(generator.gamma_ik, populations), 0.0,
                       atol=1e-12)
    derivative = rhs_full(generator, np.diag(populations))
    assert np.allclose(np.diag(derivative), 0.0, atol=1e-10)


def test_secular_populations_follow_pauli(anharmonic):
    energies, X = anharmonic
    generator = build_anharmonic_generator(energies, X, BathSpec(0.7, 0.01))
    populations = np.linspace(1.0, 2.0, 6)
    populations /= populations.sum()
    derivative = rhs_secular(generator, np.diag(populations))
    assert np.allclose(np.diag(derivative),
                       pauli_rhs(generator.gamma_ik, populations),
                       atol=1e-14)
    assert abs(pauli_rhs(generator.gamma_ik, populations).sum()) < 1e-14


def test_secular_coherence_decay(anharmonic):
    energies, X = anharmonic
    generator = build_anharmonic_generator(energies, X, BathSpec(0.7, 0.01),
                                           frequency_scale=0.3)
    rho = np.zeros((6, 6), dtype=complex)
    rho[1, 3] = 1.0
    derivative = rhs_secular(generator, rho)
    expected = (-0.3j * (energies[1] - energies[3])
                - secular_rates(generator.gamma_ik)[1, 3])
    assert np.isclose(derivative[1, 3], expected)


def test_calibrated_coupling_ratio(anharmonic):
    energies, X = anharmonic
    frequency_scale = 2 * np.pi / 11.6
    coupling = calibrate_coupling(energies, X, 1e5, frequency_scale)
    generator = build_anharmonic_generator(
        energies, X, BathSpec(0.0, coupling), frequency_scale)
    omega_01 = frequency_scale * (energies[1] - energies[0])
    assert np.isclose(omega_01 / generator.gamma_ik[0, 1], 1e5, rtol=1e-3)


def test_harmonic_limit_matches_amplitude_damping():
    dim, coupling, temperature = 20, 0.02, 0.9
    a = ladder_operators(dim)
    generator = build_anharmonic_generator(
        np.arange(dim, dtype=float), a + a.T,
        BathSpec(temperature, coupling))
    n_bar = float(mean_photon_number(1.0, temperature))
    damping = preset('amplitude_damping', dim, 2 * coupling, n_bar,
                     frequency=1.0)
    harmonic = right_hand_side(damping)
    rng = np.random.default_rng(2)
    for _ in range(100):
        rho = _random_density(dim, rng)
        assert np.allclose(rhs_full(generator, rho), harmonic(rho),
                           atol=1e-10)


def test_invalid_generator_inputs(anharmonic):
    energies, X = anharmonic
    with pytest.raises(ValueError):
        build_anharmonic_generator(energies[::-1], X, BathSpec())
    with pytest.raises(ValueError):
        build_anharmonic_generator(energies, X + 1j * np.triu(X),
                                   BathSpec())
    with pytest.raises(ValueError):
        build_anharmonic_generator(energies, X, BathSpec(-1.0))


def test_amplitude_damping_of_coherent_state():
    dim, alpha, gamma = 30, 1.5, 0.8
    generator = preset('amplitude_damping', dim, gamma)
    times = np.linspace(0.0, 2.0, 11)
    trajectory = integrate(
        generator, projector(oscillator_coherent_state(alpha, dim)), times,
        tol=1e-10)
    amplitude = expectation(trajectory, ladder_operators(dim))
    assert np.allclose(amplitude, alpha * np.exp(-0.5 * gamma * times),
                       atol=1e-6)


def test_phase_relaxation_keeps_populations():
    dim = 12
    generator = preset('phase_relaxation', dim, 0.5)
    rho0 = projector(oscillator_coherent_state(1.2, dim))
    trajectory = integrate(generator, rho0, np.linspace(0.0, 3.0, 7))
    populations = np.real(np.diagonal(trajectory.values, axis1=1, axis2=2))
    assert np.allclose(populations, np.real(np.diag(rho0)), atol=1e-10)


def test_preset_stationary_states():
    dim = 10
    vacuum = np.zeros((dim, dim), dtype=complex)
    vacuum[0, 0] = 1.0
    damping = right_hand_side(preset('amplitude_damping', dim, 1.0))
    assert np.allclose(damping(vacuum), 0.0)
    fock = np.zeros((dim, dim), dtype=complex)
    fock[4, 4] = 1.0
    dephasing = right_hand_side(preset('phase_relaxation', dim, 1.0))
    assert np.allclose(dephasing(fock), 0.0)
    with pytest.raises(KeyError):
        preset('other', dim, 1.0)


def test_thermal_steady_state_of_amplitude_damping():
    dim, n_bar = 30, 0.5
    rho = steady_state(right_hand_side(
        preset('amplitude_damping', dim, 1.0, n_bar)), dim)
    geometric = (n_bar / (n_bar + 1)) ** np.arange(dim)
    assert np.allclose(np.real(np.diag(rho)), geometric / geometric.sum(),
                       atol=1e-6)


def test_spin_operators_ordering():
    Jp, Jm, m = spin_operators(1)
    assert np.allclose(m, [-1, 0, 1])
    assert np.isclose(Jm.toarray()[0, 1], np.sqrt(2))
    assert np.allclose(Jp.toarray(), Jm.toarray().T)


def test_dicke_ground_state_is_dark():
    generator = build_dicke_generator(3.0, 1.0)
    rho = np.zeros((7, 7), dtype=complex)
    rho[0, 0] = 1.0
    assert np.allclose(dicke_rhs(generator, rho), 0.0)


def test_single_atom_decay_rate():
    generator = build_dicke_generator(0.5, 0.7)
    excited = np.diag([0.0, 1.0]).astype(complex)
    assert np.isclose(dicke_rhs(generator, excited)[1, 1], -0.7)


def test_dicke_energy_decreases():
    generator = build_dicke_generator(5.0, 1.0)
    rho = np.zeros((11, 11), dtype=complex)
    rho[-1, -1] = 1.0
    trajectory = integrate(generator, rho, np.linspace(0.0, 1.0, 51))
    energy = expectation(trajectory, np.diag(np.arange(-5.0, 6.0))).real
    assert np.all(np.diff(energy) < 1e-12)


def test_dicke_thermal_steady_state():
    n_bar = 1.0
    generator = build_dicke_generator(1.0, 1.0, n_bar)
    rho = steady_state(right_hand_side(generator), 3)
    geometric = (n_bar / (n_bar + 1)) ** np.arange(3)
    assert np.allclose(rho, np.diag(geometric / geometric.sum()), atol=1e-8)


def test_zero_generator_is_identity():
    generator = build_dicke_generator(2.0, 0.0)
    rho0 = _random_density(5, np.random.default_rng(3))
    trajectory = integrate(generator, rho0, np.linspace(0.0, 1.0, 5))
    assert np.allclose(trajectory.values, rho0[np.newaxis], atol=1e-12)


def test_integrate_rejects_bad_input():
    generator = build_dicke_generator(0.5, 1.0)
    with pytest.raises(NumericalValidationError):
        integrate(generator, np.diag([0.6, 0.6]), [0.0, 1.0])
    with pytest.raises(ValueError):
        integrate(generator, np.diag([0.5, 0.5]), [1.0, 0.0])


def test_trajectory_outputs(tmp_path):
    generator = build_dicke_generator(0.5, 1.0)
    trajectory = integrate(generator, np.diag([0.0, 1.0]),
                           np.linspace(0.0, 1.0, 3))
    dataset = trajectory_to_dataset(trajectory, dict(jz=np.diag([-0.5, 0.5])))
    assert np.allclose(dataset.populations.sel(row=1),
                       np.exp(-trajectory.time.values), atol=1e-6)
    assert np.allclose(dataset.jz, np.exp(-trajectory.time.values) - 0.5,
                       atol=1e-6)
    write_trajectory_csv(trajectory, tmp_path / 'rho.csv')
    table = pd.read_csv(tmp_path / 'rho.csv')
    assert list(table.columns) == ['time', 'row', 'column', 'real', 'imag']
    assert len(table) == 3 * 2 * 2


@pytest.mark.parametrize('offset', [0, 1, 4, 6])
def test_band_generator_matches_dicke_rhs(offset):
    generator = build_dicke_generator(3.0, 0.8, 0.5)
    rho = _random_density(7, np.random.default_rng(4))
    rows = np.arange(7 - offset)
    derivative = dicke_band_generator(generator, offset) @ rho[rows,
                                                               rows + offset]
    assert np.allclose(derivative,
                       dicke_rhs(generator, rho)[rows, rows + offset])
    with pytest.raises(ValueError):
        dicke_band_generator(generator, 7)


def test_band_propagation_matches_runge_kutta():
    generator = build_dicke_generator(3.0, 1.0, 0.5)
    rho0 = _random_density(7, np.random.default_rng(5))
    times = np.unique(np.concatenate([np.linspace(0.0, 0.05, 6),
                                      np.linspace(0.05, 0.5, 4)]))
    exact = integrate(generator, rho0, times)
    reference = integrate(generator, rho0, times, tol=1e-11,
                          method='DOP853')
    assert np.allclose(exact.values, reference.values, atol=1e-8)
    assert np.allclose(np.trace(exact.values, axis1=1, axis2=2), 1.0)


def test_large_cat_stays_positive():
    j = 100
    generator = build_dicke_generator(j, 1.0, 1.0)
    coeffs = np.zeros(2 * j + 1, dtype=complex)
    coeffs[[0, j]] = 1.0 / np.sqrt(2)
    times = np.unique(np.concatenate([np.linspace(0.0, 1e-3, 21),
                                      np.linspace(1e-3, 0.02, 11)]))
    trajectory = integrate(generator, projector(coeffs), times)
    smallest = min(np.linalg.eigvalsh(rho).min() for rho in trajectory.values)
    assert smallest > -1e-10
    assert abs(trajectory.values[-1, 0, j]) < abs(trajectory.values[0, 0, j])


def test_expm_needs_collective_damping():
    with pytest.raises(NotImplementedError):
        integrate(preset('amplitude_damping', 4, 1.0), np.eye(4) / 4,
                  [0.0, 1.0], method='expm')
