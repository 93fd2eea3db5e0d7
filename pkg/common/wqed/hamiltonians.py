"""Effective non-Hermitian excitation Hamiltonians.

Coupling blocks are stored without omega0; EffectiveHamiltonian adds omega0 on
the global identity so that (omega - omega0) can be formed without cancellation.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
import scipy.linalg as la

from common.wqed.errors import InvalidLatticeError, NearSingularMomentumError, SingularPhaseError
from common.wqed.model import LatticeParams

logger = logging.getLogger(__name__)

RIBBON_EPSILON_SCALE = 1e-8


class PhaseMode(Enum):
    EXACT = "exact"
    MARKOV = "markov"


class Boundary(Enum):
    OPEN_OPEN = "open_open"
    OPEN_X_PERIODIC_Y = "open_x_periodic_y"


@dataclass(frozen=True)
class EffectiveHamiltonian:
    coupling: np.ndarray
    omega0: float
    phase_mode: PhaseMode
    boundary: Boundary = Boundary.OPEN_OPEN
    omega: Optional[float] = None

    def __post_init__(self):
        self.coupling.setflags(write=False)

    @property
    def size(self) -> int:
        return self.coupling.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self.omega0 * np.eye(self.size) + self.coupling

    def shifted(self, omega: float) -> np.ndarray:
        """(omega*I - H) with the omega0 subtraction done on scalars."""
        return (omega - self.omega0) * np.eye(self.size) - self.coupling


@dataclass(frozen=True)
class InverseChainCoefficients:
    A: complex
    B: complex
    C: complex
    phi: float
    gamma: float


def coupling_block(n: int, gamma: float, phi: float) -> np.ndarray:
    """K(j, j') = -i gamma exp(i phi |j - j'|), diagonal included."""
    column = -1j * gamma * np.exp(1j * phi * np.arange(n))
    return la.toeplitz(column, column)


def build_h1d(n: int, gamma: float, phi: float, omega0_term: float = 0.0) -> EffectiveHamiltonian:
    if n < 1:
        raise InvalidLatticeError(f"chain length must be positive, got {n}", field="n")
    if gamma < 0:
        raise InvalidLatticeError(f"decay rate must be non-negative, got {gamma}", field="gamma")
    return EffectiveHamiltonian(coupling=coupling_block(n, gamma, phi), omega0=omega0_term,
                                phase_mode=PhaseMode.MARKOV)


def _phase_for(lattice: LatticeParams, omega: Optional[float], phase_mode: PhaseMode) -> float:
    if phase_mode is PhaseMode.MARKOV:
        return lattice.phi0
    if omega is None or not omega > 0:
        raise InvalidLatticeError(f"exact phases need a positive frequency, got {omega!r}", field="omega")
    return lattice.phase(omega)


def build_heff_2d(lattice: LatticeParams, omega: float = None,
                  phase_mode: PhaseMode = PhaseMode.EXACT) -> EffectiveHamiltonian:
    phi = _phase_for(lattice, omega, phase_mode)
    k_x = coupling_block(lattice.n_x, lattice.gamma_x, phi)
    k_y = coupling_block(lattice.n_y, lattice.gamma_y, phi)
    coupling = np.kron(k_x, np.eye(lattice.n_y)) + np.kron(np.eye(lattice.n_x), k_y)
    return EffectiveHamiltonian(coupling=coupling, omega0=lattice.omega0, phase_mode=phase_mode,
                                omega=omega if phase_mode is PhaseMode.EXACT else None)


def ribbon_momenta(n_y: int, d: float) -> np.ndarray:
    """Quantized y momenta 2 pi n / (n_y d), with n taken in the first Brillouin zone."""
    n = np.arange(n_y) - (n_y - 1) // 2
    return 2 * np.pi * n / (n_y * d)


def build_heff_ribbon(lattice: LatticeParams, omega: float, epsilon: float = None) -> EffectiveHamiltonian:
    """Open along x, periodic along y.

    The y coupling is (gamma_y / L_y) sum_n exp(i k_n (y_l - y_l')) / (|kappa| - |k_n| + i epsilon).
    epsilon is a momentum; it defaults to 1e-8 omega0/c.
    """
    if epsilon is None:
        epsilon = RIBBON_EPSILON_SCALE * lattice.omega0 / lattice.c
    if not epsilon > 0:
        raise InvalidLatticeError(f"ribbon regularizer must be positive, got {epsilon!r}", field="epsilon")
    if not omega > 0:
        raise InvalidLatticeError(f"ribbon injection needs positive frequency, got {omega!r}", field="omega")
    kappa = omega / lattice.c
    momenta = ribbon_momenta(lattice.n_y, lattice.d)
    gaps = kappa - np.abs(momenta)
    worst = int(np.argmin(np.abs(gaps)))
    if abs(gaps[worst]) < epsilon / 10:
        raise NearSingularMomentumError(omega, float(momenta[worst]), float(abs(gaps[worst])))

    separation = lattice.y_positions()[:, None] - lattice.y_positions()[None, :]
    weights = 1.0 / (gaps + 1j * epsilon)
    k_y = (lattice.gamma_y / (lattice.n_y * lattice.d)) * np.einsum(
        "n,lmn->lm", weights, np.exp(1j * momenta[None, None, :] * separation[:, :, None]))
    k_x = coupling_block(lattice.n_x, lattice.gamma_x, lattice.phase(omega))
    coupling = np.kron(k_x, np.eye(lattice.n_y)) + np.kron(np.eye(lattice.n_x), k_y)
    logger.debug("ribbon Hamiltonian at omega=%r, closest momentum gap %.3e", omega, abs(gaps[worst]))
    return EffectiveHamiltonian(coupling=coupling, omega0=lattice.omega0, phase_mode=PhaseMode.EXACT,
                                boundary=Boundary.OPEN_X_PERIODIC_Y, omega=omega)


def inverse_chain_coefficients(gamma: float, phi: float) -> InverseChainCoefficients:
    if not gamma > 0:
        raise InvalidLatticeError(f"decay rate must be positive, got {gamma!r}", field="gamma")
    sin_phi = np.sin(phi)
    if abs(sin_phi) < 1e-12:
        raise SingularPhaseError(phi)
    cot_phi = np.cos(phi) / sin_phi
    return InverseChainCoefficients(
        A=complex(-(cot_phi - 1j) / (2 * gamma)),
        B=complex(-cot_phi / gamma),
        C=complex(1 / (2 * gamma * sin_phi)),
        phi=float(phi),
        gamma=float(gamma),
    )


def build_inverse_h1d(n: int, coeffs: InverseChainCoefficients) -> np.ndarray:
    """Tridiagonal inverse of the 1D coupling block: hopping C, bulk onsite B, end onsite A."""
    if n < 2:
        raise InvalidLatticeError(f"inverse chain needs at least two sites, got {n}", field="n")
    onsite = np.full(n, coeffs.B, dtype=complex)
    onsite[0] = onsite[-1] = coeffs.A
    hopping = np.full(n - 1, coeffs.C, dtype=complex)
    return np.diag(onsite) + np.diag(hopping, 1) + np.diag(hopping, -1)


def build_inverse_h2d(n: int, coeffs: InverseChainCoefficients) -> np.ndarray:
    """Kronecker sum of two inverse chains on an n x n square: corners carry 2A."""
    chain = build_inverse_h1d(n, coeffs)
    identity = np.eye(n)
    return np.kron(chain, identity) + np.kron(identity, chain)
