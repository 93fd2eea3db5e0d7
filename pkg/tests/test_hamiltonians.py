import numpy as np
import pytest

from common.wqed.errors import InvalidLatticeError, NearSingularMomentumError, SingularPhaseError
from common.wqed.hamiltonians import (Boundary, PhaseMode, build_h1d, build_heff_2d, build_heff_ribbon,
                                      build_inverse_h1d, build_inverse_h2d, coupling_block,
                                      inverse_chain_coefficients, ribbon_momenta)
from common.wqed.model import LatticeParams


def test_coupling_block_entries():
    block = coupling_block(4, 0.5, 0.3)
    assert np.allclose(np.diag(block), -0.5j)
    assert block[0, 3] == pytest.approx(-0.5j * np.exp(0.9j))
    assert np.allclose(block, block.T)


def test_build_h1d_adds_onsite_term():
    H = build_h1d(3, 0.01, np.pi / 4, omega0_term=100.0)
    assert H.phase_mode is PhaseMode.MARKOV
    assert np.allclose(np.diag(H.matrix), 100.0 - 0.01j)
    with pytest.raises(InvalidLatticeError):
        build_h1d(0, 0.01, 0.1)


def test_15x5_hamiltonian_is_complex_symmetric(sweep_lattice):
    H = build_heff_2d(sweep_lattice, phase_mode=PhaseMode.MARKOV)
    matrix = H.matrix
    assert matrix.shape == (75, 75)
    assert np.allclose(matrix, matrix.T)
    assert not np.allclose(matrix, matrix.conj().T)


def test_heff_2d_is_a_kronecker_sum(small_lattice):
    omega = 100.2
    H = build_heff_2d(small_lattice, omega)
    phi = small_lattice.phase(omega)
    i, k = small_lattice.flat_index(1, 2), small_lattice.flat_index(3, 2)
    assert H.matrix[i, k] == pytest.approx(-1j * small_lattice.gamma_x * np.exp(2j * phi))
    i, k = small_lattice.flat_index(2, 1), small_lattice.flat_index(2, 4)
    assert H.matrix[i, k] == pytest.approx(-1j * small_lattice.gamma_y * np.exp(3j * phi))
    assert H.matrix[small_lattice.flat_index(1, 1), small_lattice.flat_index(2, 2)] == 0
    diagonal = small_lattice.omega0 - 1j * (small_lattice.gamma_x + small_lattice.gamma_y)
    assert np.allclose(np.diag(H.matrix), diagonal)


def test_shifted_matches_matrix(small_lattice):
    H = build_heff_2d(small_lattice, 100.1)
    assert np.allclose(H.shifted(100.1), 100.1 * np.eye(12) - H.matrix)


def test_exact_phase_at_resonance_equals_markov(small_lattice):
    exact = build_heff_2d(small_lattice, small_lattice.omega0, PhaseMode.EXACT)
    markov = build_heff_2d(small_lattice, phase_mode=PhaseMode.MARKOV)
    assert np.allclose(exact.matrix, markov.matrix)


def test_exact_phases_need_a_frequency(small_lattice):
    with pytest.raises(InvalidLatticeError):
        build_heff_2d(small_lattice, None, PhaseMode.EXACT)


def test_ribbon_momenta_first_zone():
    assert np.allclose(ribbon_momenta(5, 1.0), 2 * np.pi * np.array([-2, -1, 0, 1, 2]) / 5)
    assert np.allclose(ribbon_momenta(4, 1.0), 2 * np.pi * np.array([-1, 0, 1, 2]) / 4)


def test_ribbon_hamiltonian_is_complex_symmetric(ribbon_lattice):
    lattice = ribbon_lattice.with_size(n_x=4)
    H = build_heff_ribbon(lattice, lattice.omega_at(-1.0))
    assert H.boundary is Boundary.OPEN_X_PERIODIC_Y
    assert np.allclose(H.matrix, H.matrix.T)


def test_ribbon_rejects_momentum_on_the_photon_shell():
    lattice = LatticeParams(n_x=2, n_y=5, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=1.0)
    omega = 100.0 * 2 * np.pi / 5
    with pytest.raises(NearSingularMomentumError):
        build_heff_ribbon(lattice, omega)


@pytest.mark.parametrize("phi", [np.pi / 6, np.pi / 4, np.pi / 2])
@pytest.mark.parametrize("n", range(2, 21))
def test_inverse_chain_inverts_the_coupling_block(n, phi):
    gamma = 0.01
    coeffs = inverse_chain_coefficients(gamma, phi)
    product = build_inverse_h1d(n, coeffs) @ coupling_block(n, gamma, phi)
    assert np.allclose(product, np.eye(n), rtol=0, atol=1e-9)


def test_inverse_square_corners():
    coeffs = inverse_chain_coefficients(0.01, np.pi / 2)
    square = build_inverse_h2d(5, coeffs)
    assert square.shape == (25, 25)
    assert square[0, 0] == pytest.approx(2 * coeffs.A)
    assert square[24, 24] == pytest.approx(2 * coeffs.A)
    assert square[12, 12] == pytest.approx(2 * coeffs.B)


def test_inverse_coefficients_reject_singular_phase():
    with pytest.raises(SingularPhaseError):
        inverse_chain_coefficients(0.01, np.pi)
    with pytest.raises(InvalidLatticeError):
        build_inverse_h1d(1, inverse_chain_coefficients(0.01, 0.5))


@pytest.mark.parametrize("phi", [0.5, np.pi / 6, 2.0])
def test_coupling_block_is_symmetric_not_hermitian(phi):
    block = coupling_block(5, 0.01, phi)
    assert np.allclose(block, block.T)
    assert not np.allclose(block, block.conj().T)
    assert block[3, 0] == pytest.approx(-0.01j * np.exp(3j * phi))
