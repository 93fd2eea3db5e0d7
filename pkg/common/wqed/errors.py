from dataclasses import dataclass
from typing import Generic, Optional, TypeVar

T = TypeVar("T")


@dataclass
class Result(Generic[T]):
    ok: bool
    value: Optional[T] = None
    error: Optional[Exception] = None

    @classmethod
    def success(cls, value: T) -> "Result[T]":
        return cls(ok=True, value=value)

    @classmethod
    def failure(cls, error: Exception) -> "Result[T]":
        return cls(ok=False, error=error)


class WaveguideError(Exception):
    """Base class of every error raised by the simulator."""


class InvalidLatticeError(WaveguideError, ValueError):
    """Raised when lattice geometry or physical constants are out of range."""
    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field


class InvalidInputError(WaveguideError, ValueError):
    """Raised when an injected photon state cannot be built."""
    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field


class SingularPhaseError(WaveguideError, ValueError):
    """Raised when sin(phi) vanishes and the inverse-chain closed forms blow up."""
    def __init__(self, phi: float):
        super().__init__(f"phase {phi!r} is a multiple of pi")
        self.phi = phi


class ResonanceSingularityError(WaveguideError):
    """Raised when a per-atom transfer matrix is requested at omega == omega0."""
    def __init__(self, omega: float):
        super().__init__(f"transfer matrix is singular at exact resonance omega={omega!r}")
        self.omega = omega


class PoleError(WaveguideError):
    """Raised when (omega*I - H) is singular or too badly conditioned to trust."""
    def __init__(self, omega: float, condition: float):
        super().__init__(
            f"resolvent is singular at omega={omega!r} (condition estimate {condition:.3e}); "
            "nudge the frequency or use the ribbon regularizer"
        )
        self.omega = omega
        self.condition = condition


class NearSingularMomentumError(WaveguideError):
    """Raised when a quantized ribbon momentum sits on the photon shell."""
    def __init__(self, omega: float, momentum: float, gap: float):
        super().__init__(
            f"quantized momentum {momentum!r} is within {gap:.3e} of |kappa| at omega={omega!r}"
        )
        self.omega = omega
        self.momentum = momentum
        self.gap = gap


class SingularNetworkError(WaveguideError):
    """Raised when the assembled transfer-matrix network has no unique solution."""
    def __init__(self, omega: float):
        super().__init__(f"transfer network is singular at omega={omega!r}")
        self.omega = omega


class UnreliableReconstructionError(WaveguideError):
    """Raised when flagged (self-orthogonal) eigenstates carry too much weight."""
    def __init__(self, excluded_weight: float):
        super().__init__(f"flagged eigenstates carry excluded weight {excluded_weight:.3e}")
        self.excluded_weight = excluded_weight


class ConfigError(WaveguideError):
    """Raised when a configuration document or override is invalid."""
    def __init__(self, message: str, field: str = None):
        super().__init__(message)
        self.field = field


class OutputError(WaveguideError):
    """Raised when a configuration file cannot be read or a result table cannot be written."""
    def __init__(self, path: str, original: Exception):
        super().__init__(f"I/O failure on {path}: {original}")
        self.path = path
        self.original = original
