"""Typed configuration documents for the command-line experiments.

Frequencies are given as detunings (omega - omega0) / gamma_x; angles accept
'<number>pi' strings.
"""
from enum import Enum
from typing import Annotated, List, Optional, Type, get_args, get_origin

import numpy as np
from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from common.utils.misc import parseAngle
from common.wqed.hamiltonians import PhaseMode
from common.wqed.model import LatticeParams

Angle = Annotated[float, BeforeValidator(parseAngle)]

ORACLE_MAX_SIDE = 10


class ExperimentName(str, Enum):
    SCATTER = "scatter"
    SWEEP = "sweep"
    SIZE_SCAN = "size_scan"
    RATIO_SCAN = "ratio_scan"
    KY_SCAN = "ky_scan"
    SPECTRUM = "spectrum"
    SCALE_FREE = "scale_free"
    RIBBON_BANDS = "ribbon_bands"
    ORACLE_CHECK = "oracle_check"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Grid(Section):
    start: Angle
    stop: Angle
    points: int = Field(ge=1)

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class LatticeConfig(Section):
    n_x: int = Field(ge=1)
    n_y: int = Field(ge=1)
    d: float = Field(default=1.0, gt=0)
    c: float = Field(default=100.0, gt=0)
    omega0: float = Field(default=100.0, gt=0)
    g_x: float = Field(default=1.0, ge=0)
    g_y: float = Field(default=1.0, ge=0)
    phi0: Optional[Angle] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def applyPhase(self) -> "LatticeConfig":
        if self.phi0 is not None:
            self.omega0 = self.phi0 * self.c / self.d
        return self

    def toLattice(self) -> LatticeParams:
        return LatticeParams(n_x=self.n_x, n_y=self.n_y, d=self.d, c=self.c, omega0=self.omega0,
                             g_x=self.g_x, g_y=self.g_y)


class InjectionConfig(Section):
    """Single-port injection on each listed row, or one Gaussian packet when sigma is set."""
    ports: List[int] = Field(default_factory=lambda: [1], min_length=1)
    sigma: Optional[float] = Field(default=None, gt=0)
    ky: Angle = 0.0
    center: Optional[float] = None


class ScatterConfig(InjectionConfig):
    """ribbon solves with periodic y boundaries; epsilon regularizes its momentum sum."""
    detuning: float = 0.0
    ribbon: bool = False
    epsilon: Optional[float] = Field(default=None, gt=0)


class SweepConfig(InjectionConfig):
    grid: Grid = Field(default_factory=lambda: Grid(start=-5.0, stop=5.0, points=201))
    momentum: bool = False


class SizeScanConfig(InjectionConfig):
    detuning: float = -3.445
    n_x_min: int = Field(default=1, ge=1)
    n_x_max: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def checkRange(self) -> "SizeScanConfig":
        if self.n_x_max < self.n_x_min:
            raise ValueError("n_x_max must not be below n_x_min")
        return self


class RatioScanConfig(InjectionConfig):
    detuning: float = -0.078
    ratios: List[float] = Field(default_factory=lambda: [1e-4, 3e-4, 1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0],
                                min_length=1)


class KyScanConfig(Section):
    grid: Grid = Field(default_factory=lambda: Grid(start=-3.0, stop=3.0, points=61))
    ky: Grid = Field(default_factory=lambda: Grid(start=-0.3 * np.pi, stop=0.3 * np.pi, points=31))
    sigma: float = Field(default=3.0, gt=0)
    center: Optional[float] = None


class SpectrumConfig(Section):
    phase_mode: PhaseMode = PhaseMode.MARKOV
    detuning: float = 0.0


class ScaleFreeConfig(Section):
    n: int = Field(default=600, ge=2)
    phi: Angle = Field(default=np.pi / 2)
    gamma: float = Field(default=1.0, gt=0)
    square: bool = False
    candidates: int = Field(default=30, ge=1)
    theta: Grid = Field(default_factory=lambda: Grid(start=1e-3, stop=2 * np.pi - 1e-3, points=2000))


class RibbonBandsConfig(Section):
    kx: Grid = Field(default_factory=lambda: Grid(start=-np.pi, stop=np.pi, points=401))


class OracleCheckConfig(Section):
    grid: Grid = Field(default_factory=lambda: Grid(start=-5.0, stop=5.0, points=100))
    port: int = Field(default=1, ge=1)


class OutputConfig(Section):
    path: Optional[str] = None
    format: OutputFormat = OutputFormat.CSV


class ExperimentConfig(Section):
    experiment: ExperimentName
    lattice: LatticeConfig
    scatter: ScatterConfig = Field(default_factory=ScatterConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    size_scan: SizeScanConfig = Field(default_factory=SizeScanConfig)
    ratio_scan: RatioScanConfig = Field(default_factory=RatioScanConfig)
    ky_scan: KyScanConfig = Field(default_factory=KyScanConfig)
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)
    scale_free: ScaleFreeConfig = Field(default_factory=ScaleFreeConfig)
    ribbon_bands: RibbonBandsConfig = Field(default_factory=RibbonBandsConfig)
    oracle_check: OracleCheckConfig = Field(default_factory=OracleCheckConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def checkOracleSize(self) -> "ExperimentConfig":
        if self.experiment is ExperimentName.ORACLE_CHECK and max(self.lattice.n_x, self.lattice.n_y) > ORACLE_MAX_SIDE:
            raise ValueError(f"oracle_check runs on lattices up to {ORACLE_MAX_SIDE}x{ORACLE_MAX_SIDE}")
        return self

    def outputPath(self) -> str:
        return self.output.path or f"results/{self.experiment.value}"


def _sectionOf(annotation) -> Optional[Type[BaseModel]]:
    if isinstance(annotation, type) and issubclass(annotation, BaseModel):
        return annotation
    if get_origin(annotation) is not None:
        for argument in get_args(annotation):
            section = _sectionOf(argument)
            if section is not None:
                return section
    return None


def hasPath(parts: List[str], model: Type[BaseModel] = ExperimentConfig) -> bool:
    """True when the dotted key names a field of the schema."""
    field = model.model_fields.get(parts[0])
    if field is None:
        return False
    if len(parts) == 1:
        return True
    section = _sectionOf(field.annotation)
    return section is not None and hasPath(parts[1:], section)


def errorLocation(loc) -> str:
    return ".".join(str(part) for part in loc)
