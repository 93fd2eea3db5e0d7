"""Resolvent solves and four-port output amplitudes.

One dense LU factorization of (omega*I - H) per (omega, input); the four port
amplitude vectors are phase-weighted contractions of the same solution.
"""
import dataclasses
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg as la

from common.wqed.errors import PoleError
from common.wqed.hamiltonians import EffectiveHamiltonian, PhaseMode, build_heff_2d, build_heff_ribbon
from common.wqed.model import Direction, LatticeParams, PhotonInput, PortLabel

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e14
CONSERVATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ScatteringAmplitudes:
    chi_x: np.ndarray
    chi_xbar: np.ndarray
    chi_y: np.ndarray
    chi_ybar: np.ndarray
    omega: float
    conservation_error: float = 0.0

    @property
    def conserved(self) -> bool:
        """|S_x + S_xbar + S_y + S_ybar - 1| within CONSERVATION_TOLERANCE."""
        return bool(self.conservation_error <= CONSERVATION_TOLERANCE)

    def vector(self, direction: Direction) -> np.ndarray:
        return {
            Direction.FORWARD_X: self.chi_x,
            Direction.BACKWARD_X: self.chi_xbar,
            Direction.UPWARD_Y: self.chi_y,
            Direction.DOWNWARD_Y: self.chi_ybar,
        }[direction]

    def probability(self, port: PortLabel) -> float:
        return float(abs(self.vector(port.direction)[port.index - 1]) ** 2)

    def probabilities(self) -> Dict[PortLabel, float]:
        """Probability per output port, keyed by label."""
        return {
            PortLabel(direction, index + 1): float(abs(value) ** 2)
            for direction in Direction
            for index, value in enumerate(self.vector(direction))
        }


@dataclass(frozen=True)
class ExcitationField:
    Q: np.ndarray


class PortTotals(NamedTuple):
    s_x: float
    s_xbar: float
    s_y: float
    s_ybar: float

    @property
    def total(self) -> float:
        return self.s_x + self.s_xbar + self.s_y + self.s_ybar


def checked_solve(system: np.ndarray, rhs: np.ndarray) -> Tuple[Optional[np.ndarray], float]:
    """LU solve returning the solution and a LAPACK 1-norm condition estimate."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        lu, piv = la.lu_factor(system, check_finite=False)
    rcond, info = la.lapack.zgecon(lu, np.linalg.norm(system, 1))
    condition = np.inf if rcond == 0 or info != 0 else 1.0 / rcond
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        return None, float(condition)
    return la.lu_solve((lu, piv), np.asarray(rhs, dtype=complex), check_finite=False), float(condition)


def green_apply(H: EffectiveHamiltonian, omega: float, source: np.ndarray) -> np.ndarray:
    """Solve (omega*I - H) x = source; no inverse is formed."""
    solution, condition = checked_solve(H.shifted(omega), source)
    if solution is None:
        raise PoleError(omega, condition)
    logger.debug("resolvent at omega=%r: condition estimate %.3e", omega, condition)
    return solution


def plane_wave_source(lattice: LatticeParams, photon: PhotonInput) -> np.ndarray:
    """s_{j,l} = exp(i kappa x_j) f_l, flattened with l fastest."""
    return np.kron(np.exp(1j * photon.kappa * lattice.x_positions()), photon.f)


def _horizontal(lattice: LatticeParams, photon: PhotonInput, field: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    phase_x = np.exp(1j * photon.kappa * lattice.x_positions())
    chi_x = photon.f - 1j * lattice.gamma_x * (phase_x.conj() @ field)
    chi_xbar = -1j * lattice.gamma_x * (phase_x @ field)
    return chi_x, chi_xbar


def scatter(lattice: LatticeParams, photon: PhotonInput,
            phase_mode: PhaseMode = PhaseMode.EXACT) -> Tuple[ScatteringAmplitudes, ExcitationField]:
    """Output amplitudes of all four port families for one injected photon.

    Production scattering uses exact phases; the Markov mode exists for
    comparisons against Markov spectral sums.
    """
    H = build_heff_2d(lattice, photon.omega, phase_mode)
    solution = green_apply(H, photon.omega, plane_wave_source(lattice, photon))
    field = solution.reshape(lattice.n_x, lattice.n_y)

    chi_x, chi_xbar = _horizontal(lattice, photon, field)
    phase_y = np.exp(1j * photon.kappa * lattice.y_positions())
    vertical = -1j * lattice.g_x * lattice.g_y / lattice.c
    chi_y = vertical * (field @ phase_y.conj())
    chi_ybar = vertical * (field @ phase_y)

    amps = ScatteringAmplitudes(chi_x=chi_x, chi_xbar=chi_xbar, chi_y=chi_y, chi_ybar=chi_ybar,
                                omega=photon.omega)
    total = port_totals(amps).total
    amps = dataclasses.replace(amps, conservation_error=float(abs(total - 1.0)))
    if phase_mode is PhaseMode.EXACT and not amps.conserved:
        logger.warning("photon number not conserved at omega=%r: total %.15f", photon.omega, total)
    excitation = ExcitationField(Q=lattice.g_x / np.sqrt(2 * np.pi) * solution)
    return amps, excitation


def scatter_ribbon(lattice: LatticeParams, photon: PhotonInput,
                   epsilon: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Forward and backward horizontal amplitudes with periodic boundaries along y."""
    H = build_heff_ribbon(lattice, photon.omega, epsilon)
    solution = green_apply(H, photon.omega, plane_wave_source(lattice, photon))
    return _horizontal(lattice, photon, solution.reshape(lattice.n_x, lattice.n_y))


def port_totals(amps: ScatteringAmplitudes) -> PortTotals:
    return PortTotals(
        s_x=float(np.sum(np.abs(amps.chi_x) ** 2)),
        s_xbar=float(np.sum(np.abs(amps.chi_xbar) ** 2)),
        s_y=float(np.sum(np.abs(amps.chi_y) ** 2)),
        s_ybar=float(np.sum(np.abs(amps.chi_ybar) ** 2)),
    )


def excitation_profile(excitation: ExcitationField, lattice: LatticeParams) -> np.ndarray:
    """|Q_{j,l}| laid out as an n_x by n_y map."""
    return np.abs(excitation.Q).reshape(lattice.n_x, lattice.n_y)
