import numpy as np
import pytest

from decoherence_lab.core import projector
from decoherence_lab.master_equation import (oscillator_cat,
                                             oscillator_coherent_state)
from decoherence_lab.models import MorseWavePacket
from decoherence_lab.spin import (CoherentLabel, cat2, cat4,
                                  classical_mixture,
                                  coherent_state, make_spin_basis,
                                  tetrahedron_labels)
from decoherence_lab.wigner import (PlanarGridSpec, SphericalGridSpec,
                                    alpha_to_phase_point, check_normalization,
                                    density_from_multipoles,
                                    edge_fringe_contrast, find_hills,
                                    integrate_grid, marginals,
                                    multipole_coefficients,
                                    multipole_operator, multipole_operators,
                                    multipole_purity, nonclassicality,
                                    oscillator_functions,
                                    oscillator_wavefunction,
                                    planar_fringe_contrast,
                                    wigner_planar_basis, wigner_planar_pure,
                                    wigner_spherical, wigner_spherical_at,
                                    write_wigner_grid)

X_GRID = np.linspace(-12.0, 12.0, 2401)
SMALL_SPEC = PlanarGridSpec(-4.0, 4.0, -4.0, 4.0, 81, 81)
CAT_SPEC = PlanarGridSpec(-7.0, 7.0, -4.0, 4.0, 141, 161)


def _random_density(dim, rng):
    matrix = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = matrix @ matrix.conj().T
    return rho / np.trace(rho)


def test_lowest_multipoles_spin_one():
    assert np.allclose(multipole_operator(0, 0, 1), np.eye(3) / np.sqrt(3))
    assert np.allclose(multipole_operator(1, 0, 1),
                       np.diag([-1.0, 0.0, 1.0]) / np.sqrt(2))


@pytest.mark.parametrize('j', [0.5, 1.5, 3])
def test_band_construction_matches_coupling_coefficients(j):
    for K, Q, T in multipole_operators(j):
        assert np.allclose(T, multipole_operator(K, Q, j), atol=1e-12)


def test_multipoles_at_large_spin_match_coupling_coefficients():
    operators = {(K, Q): T for K, Q, T in multipole_operators(25)}
    for K, Q in [(1, 1), (10, 0), (30, -7), (49, -3), (50, 50)]:
        assert np.allclose(operators[K, Q], multipole_operator(K, Q, 25),
                           atol=1e-10)


def test_multipoles_stay_finite_at_large_spin():
    j = 100
    dim = 2 * j + 1
    coefficients = multipole_coefficients(np.eye(dim) / dim, j)
    assert np.isfinite(coefficients).all()
    assert np.isclose(coefficients[0, 2 * j], 1.0 / np.sqrt(dim))
    assert np.allclose(np.delete(coefficients.ravel(), 2 * j), 0.0,
                       atol=1e-10)

    basis = make_spin_basis(j)
    label = CoherentLabel.from_angles(1.1, 0.4)
    rho = projector(coherent_state(label, basis).coeffs)
    coefficients = multipole_coefficients(rho, j)
    assert np.isclose(np.sum(np.abs(coefficients) ** 2), 1.0)
    assert np.allclose(density_from_multipoles(coefficients, j), rho,
                       atol=1e-10)


def test_multipole_conjugation_and_orthonormality():
    j = 2
    operators = {(K, Q): T for K, Q, T in multipole_operators(j)}
    assert len(operators) == 25
    for (K, Q), T in operators.items():
        assert np.allclose(T.conj().T, (-1) ** Q * operators[K, -Q])
    keys = list(operators)
    gram = np.array([[np.sum(operators[a].conj() * operators[b])
                      for b in keys] for a in keys])
    assert np.allclose(gram, np.eye(len(keys)), atol=1e-12)


def test_multipole_range():
    with pytest.raises(ValueError):
        multipole_operator(3, 0, 1)
    with pytest.raises(ValueError):
        multipole_operator(1, 2, 1)


def test_multipole_round_trip():
    j = 1.5
    rho = _random_density(4, np.random.default_rng(0))
    coefficients = multipole_coefficients(rho, j)
    assert np.allclose(density_from_multipoles(coefficients, j), rho)
    assert np.isclose(multipole_purity(rho, j),
                      np.real(np.trace(rho @ rho)))


def test_maximally_mixed_spherical():
    j = 2
    W = wigner_spherical(np.eye(5) / 5, j, SphericalGridSpec(8, 16))
    assert np.allclose(W.wigner, 1.0 / (4.0 * np.pi))
    assert np.isclose(integrate_grid(W), 1.0)


def test_spherical_normalization():
    basis = make_spin_basis(10)
    label = CoherentLabel.from_angles(1.2, 0.7)
    rho = projector(coherent_state(label, basis).coeffs)
    W = wigner_spherical(rho, 10, SphericalGridSpec(32, 64))
    assert np.isclose(check_normalization(W), 1.0, atol=1e-9)


def test_spherical_peak_follows_bloch_vector():
    basis = make_spin_basis(10)
    bottom = projector(coherent_state(CoherentLabel(0), basis).coeffs)
    W = wigner_spherical(bottom, 10, SphericalGridSpec(32, 64))
    theta_index, _ = np.unravel_index(np.argmax(W.wigner.values),
                                      W.wigner.shape)
    assert W.theta.values[theta_index] > np.pi - 0.2

    label = CoherentLabel.from_angles(1.0, 2.0)
    rho = projector(coherent_state(label, basis).coeffs)
    x, y, z = label.bloch_vector
    at_peak = wigner_spherical_at(rho, 10, np.arccos(z), np.arctan2(y, x))
    W = wigner_spherical(rho, 10, SphericalGridSpec(32, 64))
    assert at_peak >= W.wigner.max() - 1e-9


def test_single_coherent_state_has_one_hill():
    basis = make_spin_basis(25)
    rho = projector(coherent_state(CoherentLabel(0.7 - 0.2j),
                                   basis).coeffs)
    hills = find_hills(wigner_spherical(rho, 25, SphericalGridSpec(64, 128)))
    assert len(hills) == 1


def test_cat4_lobes_and_fringes():
    j = 25
    basis = make_spin_basis(j)
    labels = tetrahedron_labels()
    rho = projector(cat4(labels, basis).coeffs)
    W = wigner_spherical(rho, j, SphericalGridSpec(64, 128))
    check_normalization(W)
    assert nonclassicality(W) > 0.1
    for label in labels:
        x, y, z = label.bloch_vector
        lobe = wigner_spherical_at(rho, j, np.arccos(z), np.arctan2(y, x))
        assert lobe > 0.2 * W.wigner.max()


def test_spin_cat_versus_mixture():
    j = 25
    basis = make_spin_basis(j)
    first, second = tetrahedron_labels()[:2]
    cat = projector(cat2(first, second, basis).coeffs)
    assert edge_fringe_contrast(cat, j, first, second) > 0.2
    mixture = classical_mixture(first, second, basis)
    assert edge_fringe_contrast(mixture, j, first, second) < 0.05


def test_oscillator_functions_orthonormal():
    functions = oscillator_functions(30, X_GRID)
    dx = X_GRID[1] - X_GRID[0]
    assert np.allclose(dx * functions.T @ functions, np.eye(30), atol=1e-10)


def test_ground_state_wigner():
    psi = oscillator_wavefunction([1.0], X_GRID)
    W = wigner_planar_pure(psi, X_GRID, SMALL_SPEC)
    check_normalization(W)
    assert W.wigner.min() > -1e-8
    assert np.isclose(W.wigner.sel(x=0.0, p=0.0, method='nearest'),
                      1.0 / np.pi, atol=1e-6)
    assert nonclassicality(W) < 0.01
    position, momentum = marginals(W)
    assert np.allclose(position, np.exp(-position.x ** 2) / np.sqrt(np.pi),
                       atol=1e-3)
    assert np.allclose(momentum, np.exp(-momentum.p ** 2) / np.sqrt(np.pi),
                       atol=1e-3)


def test_basis_transform_matches_pure_transform():
    coeffs = np.array([0.0, 1.0, 0.5j])
    coeffs /= np.linalg.norm(coeffs)
    functions = oscillator_functions(3, X_GRID)
    from_basis = wigner_planar_basis(projector(coeffs), functions, X_GRID,
                                     SMALL_SPEC)
    pure = wigner_planar_pure(functions @ coeffs, X_GRID, SMALL_SPEC)
    assert np.allclose(from_basis.wigner, pure.wigner, atol=1e-10)


def test_planar_marginals_match_densities():
    dim = 6
    rho = _random_density(dim, np.random.default_rng(3))
    spec = PlanarGridSpec(-7.0, 7.0, -7.0, 7.0, 141, 141)
    W = wigner_planar_basis(rho, oscillator_functions(dim, X_GRID), X_GRID,
                            spec)
    position, momentum = marginals(W)

    at_x = oscillator_functions(dim, position.x.values)
    expected_position = np.real(np.einsum('xm,mn,xn->x', at_x, rho, at_x))
    # Hermite functions are eigenfunctions of the Fourier transform
    phases = (-1j) ** np.arange(dim)
    at_p = oscillator_functions(dim, momentum.p.values) * phases
    expected_momentum = np.real(np.einsum('pm,mn,pn->p', at_p, rho,
                                          at_p.conj()))
    assert np.allclose(position, expected_position, atol=1e-4)
    assert np.allclose(momentum, expected_momentum, atol=1e-4)


def test_wigner_is_linear_in_rho():
    rng = np.random.default_rng(4)
    first, second = _random_density(6, rng), _random_density(6, rng)
    mixed = 0.3 * first + 0.7 * second
    functions = oscillator_functions(6, X_GRID)
    planar = [wigner_planar_basis(rho, functions, X_GRID, SMALL_SPEC).wigner
              for rho in (first, second, mixed)]
    assert np.allclose(planar[2], 0.3 * planar[0] + 0.7 * planar[1],
                       rtol=0.0, atol=1e-12)

    j = 3
    first, second = _random_density(7, rng), _random_density(7, rng)
    mixed = 0.3 * first + 0.7 * second
    spherical = [wigner_spherical(rho, j, SphericalGridSpec(16, 32)).wigner
                 for rho in (first, second, mixed)]
    assert np.allclose(spherical[2], 0.3 * spherical[0] + 0.7 * spherical[1],
                       rtol=0.0, atol=1e-12)


def test_fock_state_is_negative_at_origin():
    functions = oscillator_functions(2, X_GRID)
    W = wigner_planar_pure(functions[:, 1], X_GRID, SMALL_SPEC)
    assert np.isclose(W.wigner.sel(x=0.0, p=0.0, method='nearest'),
                      -1.0 / np.pi, atol=1e-6)
    assert nonclassicality(W) > 0.1


def test_wavefunction_norm_is_checked():
    with pytest.raises(ValueError):
        wigner_planar_pure(2.0 * oscillator_wavefunction([1.0], X_GRID),
                           X_GRID, SMALL_SPEC)
    with pytest.raises(ValueError):
        wigner_planar_pure(oscillator_wavefunction([1.0], X_GRID), X_GRID,
                           PlanarGridSpec(-20.0, 0.0, -1.0, 1.0, 11, 11))


def test_cat_versus_mixture():
    alpha, dim = 3.0, 40
    functions = oscillator_functions(dim, X_GRID)
    cat = projector(oscillator_cat(alpha, dim))
    mixture = 0.5 * (projector(oscillator_coherent_state(alpha, dim))
                     + projector(oscillator_coherent_state(-alpha, dim)))
    W_cat = wigner_planar_basis(cat, functions, X_GRID, CAT_SPEC)
    W_mixture = wigner_planar_basis(mixture, functions, X_GRID, CAT_SPEC)
    assert nonclassicality(W_cat) > 0.2
    assert nonclassicality(W_mixture) < 0.01
    point1 = alpha_to_phase_point(alpha)
    point2 = alpha_to_phase_point(-alpha)
    assert planar_fringe_contrast(W_cat, point1, point2) > 0.5
    assert planar_fringe_contrast(W_mixture, point1, point2) < 0.05
    hills = find_hills(W_mixture)
    assert len(hills) == 2
    assert np.allclose(np.sort(hills.x), [-point1[0], point1[0]], atol=0.1)


def test_write_wigner_grid(tmp_path):
    W = wigner_spherical(np.eye(2) / 2, 0.5, SphericalGridSpec(4, 8))
    path = write_wigner_grid(W, tmp_path / 'wigner.csv')
    lines = path.read_text().splitlines()
    assert lines[0] == '# geometry: spherical'
    assert lines[1].startswith('# theta:')
    assert sum(not line.startswith('#') for line in lines) == 4 * 8 + 1


@pytest.mark.slow
def test_morse_cat_hills():
    model = MorseWavePacket().fit()
    W = model.wigner(0.5, 0.0, 30.0)
    hills = find_hills(W).iloc[:2].sort_values('p')
    assert np.allclose(hills.x, [-0.1, 0.3], atol=0.1)
    assert np.allclose(hills.p, [-18.0, 12.0], atol=2.0)
