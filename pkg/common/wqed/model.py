"""Lattice geometry, port conventions and injected single-photon states.

Atoms sit at x_j = j*d (j = 1..n_x) and y_l = l*d (l = 1..n_y). The excitation
vector of the whole array is flattened row-major with the y index fastest:
flat index (j-1)*n_y + (l-1).
"""
import dataclasses
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from common.wqed.errors import InvalidInputError, InvalidLatticeError

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class LatticeParams:
    n_x: int
    n_y: int
    d: float
    c: float
    omega0: float
    g_x: float
    g_y: float

    def __post_init__(self):
        for name in ("n_x", "n_y"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidLatticeError(f"{name} must be a positive integer, got {value!r}", field=name)
        for name in ("d", "c", "omega0"):
            if not getattr(self, name) > 0:
                raise InvalidLatticeError(f"{name} must be positive, got {getattr(self, name)!r}", field=name)
        for name in ("g_x", "g_y"):
            if getattr(self, name) < 0:
                raise InvalidLatticeError(f"{name} must be non-negative, got {getattr(self, name)!r}", field=name)
        if self.g_x == 0 and self.g_y == 0:
            raise InvalidLatticeError("g_x and g_y cannot both be zero", field="g_x")

    @classmethod
    def from_decay_rates(cls, n_x: int, n_y: int, gamma_x: float, gamma_y: float, phi0: float,
                         c: float = 100.0, d: float = 1.0) -> "LatticeParams":
        """Build a lattice from decay rates and the Markov phase instead of raw couplings."""
        return cls(n_x=n_x, n_y=n_y, d=d, c=c, omega0=phi0 * c / d,
                   g_x=float(np.sqrt(gamma_x * c)), g_y=float(np.sqrt(gamma_y * c)))

    @property
    def gamma_x(self) -> float:
        return self.g_x ** 2 / self.c

    @property
    def gamma_y(self) -> float:
        return self.g_y ** 2 / self.c

    @property
    def phi0(self) -> float:
        return self.omega0 * self.d / self.c

    @property
    def size(self) -> int:
        return self.n_x * self.n_y

    @property
    def center(self) -> float:
        """Center coordinate y_c of the horizontal ports, half-integer for even n_y."""
        return (self.n_y + 1) / 2

    @property
    def coupling_ratio(self) -> float:
        """lambda = g_y / g_x used by the transfer matrices."""
        if self.g_x == 0:
            raise InvalidLatticeError("coupling ratio needs g_x > 0", field="g_x")
        return self.g_y / self.g_x

    def phase(self, omega: float) -> float:
        """Propagation phase per spacing at frequency omega."""
        return omega * self.d / self.c

    def x_positions(self) -> np.ndarray:
        return self.d * np.arange(1, self.n_x + 1)

    def y_positions(self) -> np.ndarray:
        return self.d * np.arange(1, self.n_y + 1)

    def flat_index(self, j: int, l: int) -> int:
        return (j - 1) * self.n_y + (l - 1)

    def mirror(self, l: int) -> int:
        return self.n_y + 1 - l

    def detuning(self, omega: float) -> float:
        return (omega - self.omega0) / self.gamma_x

    def omega_at(self, detuning: float) -> float:
        return self.omega0 + detuning * self.gamma_x

    def with_size(self, n_x: int = None, n_y: int = None) -> "LatticeParams":
        return dataclasses.replace(self, n_x=self.n_x if n_x is None else n_x,
                                   n_y=self.n_y if n_y is None else n_y)

    def with_couplings(self, g_x: float = None, g_y: float = None) -> "LatticeParams":
        return dataclasses.replace(self, g_x=self.g_x if g_x is None else g_x,
                                   g_y=self.g_y if g_y is None else g_y)

    def transposed(self) -> "LatticeParams":
        """Swap the roles of the two waveguide families.

        A photon injected into vertical waveguide j of this lattice is the same
        problem as horizontal injection into row j of the transposed lattice.
        """
        return dataclasses.replace(self, n_x=self.n_y, n_y=self.n_x, g_x=self.g_y, g_y=self.g_x)


class Direction(Enum):
    FORWARD_X = "forward_x"
    BACKWARD_X = "backward_x"
    UPWARD_Y = "upward_y"
    DOWNWARD_Y = "downward_y"

    @property
    def horizontal(self) -> bool:
        return self in (Direction.FORWARD_X, Direction.BACKWARD_X)


@dataclass(frozen=True)
class PortLabel:
    direction: Direction
    index: int

    def validate(self, lattice: LatticeParams) -> "PortLabel":
        upper = lattice.n_y if self.direction.horizontal else lattice.n_x
        if not 1 <= self.index <= upper:
            raise InvalidInputError(
                f"port index {self.index} outside 1..{upper} for {self.direction.value}", field="index")
        return self

    def mirrored(self, lattice: LatticeParams) -> "PortLabel":
        if not self.direction.horizontal:
            return self
        return PortLabel(self.direction, lattice.mirror(self.index))

    def __str__(self):
        return f"{self.direction.value}[{self.index}]"


@dataclass(frozen=True)
class PhotonInput:
    omega: float
    kappa: float
    f: np.ndarray
    centroid: float

    def __post_init__(self):
        norm = float(np.sum(np.abs(self.f) ** 2))
        if abs(norm - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidInputError(f"input amplitudes are not normalized (sum |f|^2 = {norm!r})", field="f")
        self.f.setflags(write=False)

    @property
    def n_ports(self) -> int:
        return self.f.shape[0]

    @classmethod
    def from_amplitudes(cls, lattice: LatticeParams, omega: float, amplitudes) -> "PhotonInput":
        if not omega > 0:
            raise InvalidInputError(f"frequency must be positive, got {omega!r}", field="omega")
        f = np.asarray(amplitudes, dtype=complex).copy()
        if f.shape != (lattice.n_y,):
            raise InvalidInputError(f"expected {lattice.n_y} port amplitudes, got shape {f.shape}", field="f")
        weights = np.abs(f) ** 2
        total = weights.sum()
        if total == 0:
            raise InvalidInputError("input amplitudes are all zero", field="f")
        f /= np.sqrt(total)
        weights = weights / total
        centroid = float(np.dot(weights, np.arange(1, lattice.n_y + 1)))
        return cls(omega=float(omega), kappa=float(omega) / lattice.c, f=f, centroid=centroid)

    def with_omega(self, lattice: LatticeParams, omega: float) -> "PhotonInput":
        return PhotonInput.from_amplitudes(lattice, omega, self.f)


def single_port_input(lattice: LatticeParams, omega: float, l_in: int) -> PhotonInput:
    if not 1 <= l_in <= lattice.n_y:
        raise InvalidInputError(f"injection port {l_in} outside 1..{lattice.n_y}", field="l_in")
    f = np.zeros(lattice.n_y, dtype=complex)
    f[l_in - 1] = 1.0
    return PhotonInput.from_amplitudes(lattice, omega, f)


def gaussian_input(lattice: LatticeParams, omega: float, sigma: float, k_y: float,
                   center: float = None) -> PhotonInput:
    """Gaussian wavepacket over the horizontal ports.

    f_l ~ exp(-(l - center)^2 / (4 sigma^2) + i k_y (l - center)), renormalized on
    the discrete port set. k_y is in radians per port spacing.
    """
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma!r}", field="sigma")
    if center is None:
        center = lattice.center
    offset = np.arange(1, lattice.n_y + 1) - center
    # log-domain normalization keeps very narrow packets finite
    exponent = -offset ** 2 / (4 * sigma ** 2)
    amplitudes = np.exp(exponent - exponent.max() + 1j * k_y * offset)
    return PhotonInput.from_amplitudes(lattice, omega, amplitudes)
