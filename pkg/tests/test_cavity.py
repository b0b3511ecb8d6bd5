import numpy as np
import pytest

from decoherence_lab.cavity import (PHYSICAL_PRESET, build_system,
                                    control_atom_amplitudes, dressed_gap,
                                    energy, evolve_exact, evolve_series,
                                    excitation_number, field_state,
                                    field_independence_test, find_tm_exact,
                                    initial_state, perturbative_prediction,
                                    perturbative_state, phase_kick,
                                    protocol_report, protocol_sweep,
                                    subradiance_bound, subradiance_check,
                                    subradiant_fidelity, subradiant_state,
                                    target_distance, to_physical_time)

DELTA_OVER_G = 30.0


@pytest.fixture(scope='module')
def sweep():
    return protocol_sweep(range(2, 21), DELTA_OVER_G, n_jobs=1)


def test_block_shapes():
    system = build_system(2, DELTA_OVER_G)
    assert system.j == (1.0, 0.0)
    assert system.shapes == ((3, 4), (1, 4))
    system = build_system(4, DELTA_OVER_G, n_max=2)
    assert system.shapes == ((5, 3), (3, 3))
    assert [H.shape for H in system.hamiltonians] == [(15, 15), (9, 9)]


def test_invalid_system():
    with pytest.raises(ValueError):
        build_system(1, DELTA_OVER_G)
    with pytest.raises(ValueError):
        build_system(4, DELTA_OVER_G, n_max=1)


def test_hamiltonian_conserves_excitations():
    system = build_system(4, DELTA_OVER_G)
    for H, number in zip(system.hamiltonians, excitation_number(system)):
        N_exc = np.diag(number.ravel().astype(float))
        assert np.allclose(H @ N_exc - N_exc @ H, 0.0)
        assert np.allclose(H, H.conj().T)


def test_initial_state_weights():
    assert np.allclose(control_atom_amplitudes(2), [1 / np.sqrt(2)] * 2)
    assert np.isclose(control_atom_amplitudes(100)[0], 0.1)
    system = build_system(3, DELTA_OVER_G)
    state = initial_state(system, photon_index=1)
    assert np.isclose(state.norm, 1.0)
    assert np.isclose(state.upper[1, 1], 1 / np.sqrt(3))
    assert np.isclose(state.lower[0, 1], np.sqrt(2 / 3))
    with pytest.raises(ValueError):
        initial_state(system, photon_index=2)


def test_perturbative_prediction():
    alpha, t_m, phi = perturbative_prediction(2, DELTA_OVER_G)
    assert np.isclose(alpha, 1.0 / DELTA_OVER_G)
    assert np.isclose(alpha * t_m, np.pi / 4)
    assert np.isclose(phi, np.pi / 2)
    alpha, t_m, _ = perturbative_prediction(10 ** 6, DELTA_OVER_G)
    assert np.isclose(alpha * t_m, np.pi / 6, atol=1e-6)
    t_m = [perturbative_prediction(N, DELTA_OVER_G)[1]
           for N in range(2, 101)]
    assert np.all(np.diff(t_m) < 0)
    with pytest.raises(ValueError):
        perturbative_prediction(1, DELTA_OVER_G)


def test_singlet_is_decoupled():
    system = build_system(2, DELTA_OVER_G)
    state = subradiant_state(system)
    upper, lower = evolve_series(system, state, np.linspace(0.0, 50.0, 11))
    assert np.allclose(np.abs(lower[:, 0, 0]), 1.0)
    assert np.allclose(upper, 0.0)


def test_no_coupling_keeps_populations():
    system = build_system(6, DELTA_OVER_G, g=0.0)
    state = initial_state(system)
    evolved = evolve_exact(system, state, 17.0)
    assert np.allclose(np.abs(evolved.upper), np.abs(state.upper))
    assert np.allclose(np.abs(evolved.lower), np.abs(state.lower))
    fidelity = subradiance_check(system, subradiant_state(system), 100.0)
    assert np.allclose(fidelity, 1.0)


def test_exact_evolution_is_unitary():
    system = build_system(5, DELTA_OVER_G)
    state = field_state(system, [0.6, 0.8])
    evolved = evolve_exact(system, state, 123.4)
    assert np.isclose(evolved.norm, 1.0)
    assert np.isclose(energy(system, evolved), energy(system, state))


def test_field_state_checks():
    system = build_system(3, DELTA_OVER_G)
    with pytest.raises(ValueError):
        field_state(system, [1.0, 1.0])
    with pytest.raises(ValueError):
        field_state(system, [0.0, 0.0, 1.0])


def test_perturbative_state_tracks_exact_evolution():
    system = build_system(4, DELTA_OVER_G)
    _, t_m, _ = perturbative_prediction(4, DELTA_OVER_G)
    exact = evolve_exact(system, initial_state(system), t_m)
    approximate = perturbative_state(system, t_m)
    overlap = (np.vdot(approximate.upper, exact.upper)
               + np.vdot(approximate.lower, exact.lower))
    assert abs(overlap) > 0.95


def test_tm_window_too_small():
    system = build_system(4, DELTA_OVER_G)
    _, t_m, _ = perturbative_prediction(4, DELTA_OVER_G)
    with pytest.raises(ValueError):
        find_tm_exact(system, initial_state(system), window=(0.0, t_m))


def test_sweep_matches_perturbation_theory(sweep):
    assert list(sweep.index) == list(range(2, 21))
    assert (sweep.min_distance < 0.04).all()
    assert (sweep.relative_error < 0.05).all()
    assert np.all(np.diff(sweep.t_m_exact) < 0)
    assert (sweep.fidelity_predicted_phase > 0.96).all()
    assert (sweep.fidelity_post_kick > 0.96).all()


def test_error_shrinks_with_detuning():
    errors = []
    for delta_over_g in (10.0, 30.0, 100.0):
        report = protocol_report(build_system(6, delta_over_g))
        errors.append(abs(report['t_m_exact'] - report['t_m_pert'])
                      / report['t_m_pert'])
    assert errors[0] > errors[1] > errors[2]


def test_phase_kick():
    system = build_system(4, DELTA_OVER_G)
    state = initial_state(system)
    unchanged = phase_kick(state, 0.0, 4)
    assert np.allclose(unchanged.upper, state.upper)
    assert np.allclose(unchanged.lower, state.lower)
    rotated = phase_kick(state, 0.7, 4)
    assert np.allclose(rotated.upper, np.exp(0.7j) * state.upper)
    assert np.allclose(rotated.lower, np.exp(0.7j) * state.lower)

    evolved = evolve_exact(system, state, 40.0)
    restored = phase_kick(phase_kick(evolved, 1.1, 4), -1.1, 4)
    assert np.allclose(restored.upper, evolved.upper)
    assert np.allclose(restored.lower, evolved.lower)
    assert restored.leaked_norm < 1e-20


def test_kick_reaches_subradiant_state():
    system = build_system(8, DELTA_OVER_G)
    state = initial_state(system)
    t_m, min_distance = find_tm_exact(system, state)
    at_t_m = evolve_exact(system, state, t_m)
    distance, phi = target_distance(system, at_t_m)
    assert np.isclose(distance, min_distance, atol=1e-8)
    kicked = phase_kick(at_t_m, phi, system.N)
    assert subradiant_fidelity(kicked) > 0.96
    assert subradiant_fidelity(kicked) + kicked.leaked_norm <= 1.0 + 1e-12


def test_subradiant_state_persists():
    system = build_system(10, DELTA_OVER_G)
    _, t_m, _ = perturbative_prediction(10, DELTA_OVER_G)
    fidelity = subradiance_check(system, subradiant_state(system),
                                 10.0 * t_m)
    assert fidelity.index.name == 'time'
    assert fidelity.min() > 0.99
    assert fidelity.min() >= subradiance_bound(system)


def test_field_independence():
    system = build_system(4, DELTA_OVER_G, n_max=4)
    sectors, spread = field_independence_test(system,
                                              np.ones(3) / np.sqrt(3))
    assert list(sectors.index) == [0, 1, 2]
    assert np.allclose(sectors.weight, 1 / 3)
    assert spread < 0.02
    assert (sectors.min_distance < 0.04).all()


def test_dressed_gap():
    system = build_system(4, DELTA_OVER_G)
    assert np.isclose(dressed_gap(system), 4 / DELTA_OVER_G, rtol=0.02)


def test_physical_time():
    assert np.isclose(to_physical_time(1.0), 1 / PHYSICAL_PRESET['g'])
    assert np.isclose(PHYSICAL_PRESET['delta'] / PHYSICAL_PRESET['g'],
                      DELTA_OVER_G)
