"""Transfer-matrix description of the lattice, used to cross-check the resolvent path.

Each atom links the four waveguide segments that meet at it: horizontal
coefficients t^h, r^h of the rows and vertical coefficients t^v, r^v of the
columns. Segment s of a row lies between atoms s and s+1; segment 0 is the
input side and segment n_x the output side.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from numpy.lib import scimath

from common.wqed.errors import (InvalidInputError, InvalidLatticeError, PoleError, ResonanceSingularityError,
                                SingularNetworkError, SingularPhaseError)
from common.wqed.green_scattering import checked_solve, scatter
from common.wqed.model import Direction, LatticeParams, PortLabel, single_port_input

logger = logging.getLogger(__name__)

UNIMODULAR_TOLERANCE = 1e-10
ORACLE_TOLERANCE = 1e-8
FLUX_TOLERANCE = 1e-9

SIGNS = np.diag([-1.0, 1.0, -1.0, 1.0])


class Regime(Enum):
    BAND = "band"
    GAP = "gap"


@dataclass(frozen=True)
class ChainClassification:
    regime: Regime
    k_or_gamma: float
    gap_range: Tuple[float, float]
    eigenvalues: Tuple[complex, complex] = (0j, 0j)


@dataclass(frozen=True)
class TransferSolution:
    """Coefficients on every segment plus the atomic amplitudes.

    t_h, r_h have shape (n_x + 1, n_y); t_v, r_v have shape (n_y + 1, n_x).
    amplitude[j, l] is the atomic excitation amplitude; it equals g_x times the
    resolvent solution at the same site.
    """
    t_h: np.ndarray
    r_h: np.ndarray
    t_v: np.ndarray
    r_v: np.ndarray
    amplitude: np.ndarray
    omega: float

    def vector(self, direction: Direction) -> np.ndarray:
        return {
            Direction.FORWARD_X: self.t_h[-1],
            Direction.BACKWARD_X: self.r_h[0],
            Direction.UPWARD_Y: self.t_v[-1],
            Direction.DOWNWARD_Y: self.r_v[0],
        }[direction]

    def probabilities(self) -> Dict[PortLabel, float]:
        return {
            PortLabel(direction, index + 1): float(abs(value) ** 2)
            for direction in Direction
            for index, value in enumerate(self.vector(direction))
        }

    @property
    def total(self) -> float:
        return float(sum(self.probabilities().values()))


@dataclass
class OracleReport:
    max_discrepancy: Dict[PortLabel, float]
    omegas: np.ndarray
    tolerance: float = ORACLE_TOLERANCE
    failures: Dict[float, str] = field(default_factory=dict)

    @property
    def worst_port(self) -> PortLabel:
        return max(self.max_discrepancy, key=self.max_discrepancy.get)

    @property
    def worst(self) -> float:
        return self.max_discrepancy[self.worst_port]

    @property
    def passed(self) -> bool:
        return not self.failures and self.worst <= self.tolerance


def _phases(lattice: LatticeParams, omega: float, j: int, l: int) -> Tuple[np.ndarray, np.ndarray]:
    """Coupling-weighted phase vectors (u, u_hat) of atom (j, l)."""
    kappa = omega / lattice.c
    x, y = j * lattice.d, l * lattice.d
    u = np.array([lattice.g_x * np.exp(1j * kappa * x), lattice.g_x * np.exp(-1j * kappa * x),
                  lattice.g_y * np.exp(1j * kappa * y), lattice.g_y * np.exp(-1j * kappa * y)])
    return u, u.conj()


def atom_transfer_matrix(lattice: LatticeParams, omega: float, j: int, l: int) -> np.ndarray:
    """M = (D + fC)^-1 (D - fC) mapping (t^h, r^h, t^v, r^v) on the input side to the output side."""
    if not (1 <= j <= lattice.n_x and 1 <= l <= lattice.n_y):
        raise InvalidLatticeError(f"atom ({j}, {l}) is outside the {lattice.n_x}x{lattice.n_y} lattice", field="j")
    if omega == lattice.omega0:
        raise ResonanceSingularityError(omega)
    u, u_hat = _phases(lattice, omega, j, l)
    # f C with f = i gamma_x / (2 (omega0 - omega)) and C = w_hat w^T, w = u / g_x
    scaled = 1j / (2 * lattice.c * (lattice.omega0 - omega)) * np.outer(u_hat, u)
    return la.solve(SIGNS + scaled, SIGNS - scaled)


class _NetworkIndex:
    """Column layout of the global system: t^h, r^h, t^v, r^v unknowns, then atomic amplitudes."""

    def __init__(self, lattice: LatticeParams):
        self.n_x, self.n_y = lattice.n_x, lattice.n_y
        self.block = lattice.size
        self.size = 5 * self.block

    def t_h(self, s: int, l: int):
        return None if s == 0 else (s - 1) * self.n_y + (l - 1)

    def r_h(self, s: int, l: int):
        return None if s == self.n_x else self.block + s * self.n_y + (l - 1)

    def t_v(self, s: int, j: int):
        return None if s == 0 else 2 * self.block + (s - 1) * self.n_x + (j - 1)

    def r_v(self, s: int, j: int):
        return None if s == self.n_y else 3 * self.block + s * self.n_x + (j - 1)

    def amplitude(self, j: int, l: int):
        return 4 * self.block + (j - 1) * self.n_y + (l - 1)


def _assemble(lattice: LatticeParams, omega: float, f: np.ndarray) -> Tuple[np.ndarray, np.ndarray, _NetworkIndex]:
    """Jump relations across each atom plus the atom's own equation of motion.

    Keeping the atomic amplitude as an unknown leaves the system regular at
    omega == omega0, where the eliminated 4x4 form loses rank.
    Amplitudes are stored divided by c to keep the rows balanced.
    """
    index = _NetworkIndex(lattice)
    system = np.zeros((index.size, index.size), dtype=complex)
    rhs = np.zeros(index.size, dtype=complex)

    def put(row: int, column, coefficient: complex, known: complex = 0.0):
        if column is None:
            rhs[row] -= coefficient * known
        else:
            system[row, column] += coefficient

    row = 0
    for j in range(1, lattice.n_x + 1):
        for l in range(1, lattice.n_y + 1):
            u, u_hat = _phases(lattice, omega, j, l)
            segments = [
                (index.t_h(j, l), index.t_h(j - 1, l), f[l - 1] if j == 1 else 0.0),
                (index.r_h(j, l), index.r_h(j - 1, l), 0.0),
                (index.t_v(l, j), index.t_v(l - 1, j), 0.0),
                (index.r_v(l, j), index.r_v(l - 1, j), 0.0),
            ]
            atom = index.amplitude(j, l)
            for k, (out, inp, known_in) in enumerate(segments):
                # out - in = i * sign_k * u_hat_k * (amplitude / c)
                put(row, out, 1.0)
                put(row, inp, -1.0, known_in)
                system[row, atom] += -1j * SIGNS[k, k] * u_hat[k]
                row += 1
            system[row, atom] += lattice.c * (omega - lattice.omega0)
            for k, (out, inp, known_in) in enumerate(segments):
                put(row, out, -u[k] / 2)
                put(row, inp, -u[k] / 2, known_in)
            row += 1
    return system, rhs, index


def solve_network(lattice: LatticeParams, omega: float, l_in: int) -> TransferSolution:
    """Scattering coefficients of the whole network for unit injection into row l_in."""
    if not 1 <= l_in <= lattice.n_y:
        raise InvalidInputError(f"injection port {l_in} outside 1..{lattice.n_y}", field="l_in")
    f = np.zeros(lattice.n_y, dtype=complex)
    f[l_in - 1] = 1.0
    system, rhs, _ = _assemble(lattice, omega, f)
    solution, condition = checked_solve(system, rhs)
    if solution is None:
        raise SingularNetworkError(omega)
    logger.debug("transfer network %dx%d at omega=%r: condition estimate %.3e",
                 lattice.n_x, lattice.n_y, omega, condition)

    n_x, n_y, block = lattice.n_x, lattice.n_y, lattice.size
    t_h = np.vstack([f, solution[:block].reshape(n_x, n_y)])
    r_h = np.vstack([solution[block:2 * block].reshape(n_x, n_y), np.zeros(n_y)])
    t_v = np.vstack([np.zeros(n_x), solution[2 * block:3 * block].reshape(n_y, n_x)])
    r_v = np.vstack([solution[3 * block:4 * block].reshape(n_y, n_x), np.zeros(n_x)])
    amplitude = lattice.c * solution[4 * block:].reshape(n_x, n_y)

    result = TransferSolution(t_h=t_h, r_h=r_h, t_v=t_v, r_v=r_v, amplitude=amplitude, omega=omega)
    if abs(result.total - 1.0) > FLUX_TOLERANCE:
        logger.warning("transfer network flux off by %.3e at omega=%r", result.total - 1.0, omega)
    return result


def chain_transfer_matrix(gamma: float, phi: float, omega: float, omega0: float = 0.0) -> np.ndarray:
    if omega == omega0:
        raise ResonanceSingularityError(omega)
    f = 1j * gamma / (2 * (omega0 - omega))
    return np.array([
        [-(1 + 2 * f) * np.exp(1j * phi), -2 * f * np.exp(1j * phi)],
        [2 * f * np.exp(-1j * phi), (2 * f - 1) * np.exp(-1j * phi)],
    ])


def chain_transfer_1d(gamma: float, phi: float, omega: float, n: int,
                      omega0: float = 0.0) -> Tuple[complex, complex]:
    """Transmission t_N and reflection r_0 of an n-atom chain.

    With omega0 left at zero, omega is read as the detuning omega - omega0.
    """
    if n < 1:
        raise InvalidLatticeError(f"chain length must be positive, got {n}", field="n")
    power = np.linalg.matrix_power(chain_transfer_matrix(gamma, phi, omega, omega0), n)
    r_0 = -power[1, 0] / power[1, 1]
    # det P = 1, so t_N = det(P^N) / (P^N)_22 without the cancellation in P11 + P12 r_0
    t_n = 1.0 / power[1, 1]
    return complex(t_n), complex(r_0)


def gap_range(phi: float) -> Tuple[float, float]:
    """Detuning interval, in units of gamma, without propagating 1D modes."""
    return float(-np.tan(phi / 2)), float(1 / np.tan(phi / 2))


def chain_eigen_analysis(gamma: float, phi: float, omega: float, omega0: float = 0.0) -> ChainClassification:
    if abs(np.sin(phi)) < 1e-12:
        raise SingularPhaseError(phi)
    if omega == omega0:
        raise ResonanceSingularityError(omega)
    half_trace = gamma * np.sin(phi) / (omega0 - omega) - np.cos(phi)
    root = scimath.sqrt(half_trace ** 2 - 1)
    eigenvalues = (complex(half_trace + root), complex(half_trace - root))
    bounds = gap_range(phi)
    if all(abs(abs(value) - 1) <= UNIMODULAR_TOLERANCE for value in eigenvalues):
        # P carries an overall sign relative to propagation
        k_x = float(np.arccos(np.clip(-half_trace, -1.0, 1.0)))
        return ChainClassification(Regime.BAND, k_x, bounds, eigenvalues)
    inner = min(eigenvalues, key=abs)
    return ChainClassification(Regime.GAP, float(abs(np.log(abs(inner)))), bounds, eigenvalues)


def dispersion_1d(gamma: float, phi: float, k):
    """Detuning omega - omega0 of the 1D Bloch mode with quasi-momentum k."""
    denominator = np.cos(k) - np.cos(phi)
    if np.any(np.abs(denominator) < 1e-14):
        raise InvalidInputError(f"quasi-momentum {k!r} sits on the band-edge pole cos k = cos phi", field="k")
    return gamma * np.sin(phi) / denominator


def resonant_kx(lattice: LatticeParams, omega: float) -> float:
    """k_x in (0, pi) with omega = omega_x(k_x) + Re omega_y of the most subradiant y-state."""
    from common.wqed.spectral import most_subradiant_y

    shift = most_subradiant_y(lattice).real
    detuning = omega - lattice.omega0 - shift
    if detuning == 0:
        raise InvalidInputError("shifted detuning is zero; no Bloch mode", field="omega")
    cos_k = np.cos(lattice.phi0) + lattice.gamma_x * np.sin(lattice.phi0) / detuning
    if abs(cos_k) > 1:
        raise InvalidInputError(
            f"shifted detuning {detuning / lattice.gamma_x:.6g} gamma_x lies in the band gap", field="omega")
    return float(np.arccos(cos_k))


def oracle_check(lattice: LatticeParams, omega_grid: Sequence[float], l_in: int,
                 network_solver: Callable[[LatticeParams, float, int], TransferSolution] = solve_network,
                 progress: Callable[[int, float, Optional[Exception]], None] = None) -> OracleReport:
    """Largest port-probability difference between the resolvent and network solvers.

    progress receives (grid index, omega, error or None) once per grid point.
    """
    omegas = np.asarray(omega_grid, dtype=float)
    discrepancy: Dict[PortLabel, float] = {}
    failures: Dict[float, str] = {}
    for index, omega in enumerate(omegas):
        try:
            amps, _ = scatter(lattice, single_port_input(lattice, omega, l_in))
            network = network_solver(lattice, omega, l_in).probabilities()
        except (PoleError, SingularNetworkError) as e:
            logger.warning("oracle point omega=%r failed: %s", omega, e)
            failures[float(omega)] = type(e).__name__
            if progress is not None:
                progress(index, float(omega), e)
            continue
        if progress is not None:
            progress(index, float(omega), None)
        for port, value in amps.probabilities().items():
            difference = abs(value - network[port])
            discrepancy[port] = max(discrepancy.get(port, 0.0), difference)
    if not discrepancy:
        discrepancy = {PortLabel(Direction.FORWARD_X, l_in): float("inf")}
    report = OracleReport(max_discrepancy=discrepancy, omegas=omegas, failures=failures)
    logger.info("oracle check on %dx%d: worst port %s differs by %.3e",
                lattice.n_x, lattice.n_y, report.worst_port, report.worst)
    return report
