"""Output-beam displacements and the sweeps built on them.

Positions are port indices (units of d). A displacement is undefined, not
zero, when the direction carries no probability.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import fft as sfft

from common.wqed.errors import InvalidInputError, PoleError, Result, WaveguideError
from common.wqed.green_scattering import ScatteringAmplitudes, port_totals, scatter
from common.wqed.model import Direction, LatticeParams, PhotonInput, gaussian_input

logger = logging.getLogger(__name__)

UNDEFINED_TOTAL = 1e-12
NUDGE = 1e-9
SAMPLES_PER_PORT = 64
SMALL_INPUT = 1e-10
EXCLUDED_WEIGHT_LIMIT = 1e-6
PEAK_TO_MEDIAN = 3.0
TREND_DEGREE = 3
MIN_PEAK_BIN = 4


@dataclass(frozen=True)
class QghResult:
    s_x: float
    s_xbar: float
    s_y: float
    s_ybar: float
    p_x: Optional[float]
    p_xbar: Optional[float]
    dp_x: Optional[float]
    dp_xbar: Optional[float]
    conserved: bool = True

    @property
    def total(self) -> float:
        return self.s_x + self.s_xbar + self.s_y + self.s_ybar


def _mean_position(amplitudes: np.ndarray) -> Optional[float]:
    weights = np.abs(amplitudes) ** 2
    total = weights.sum()
    if total <= UNDEFINED_TOTAL:
        return None
    return float(np.dot(np.arange(1, len(weights) + 1), weights) / total)


def mean_shift(amps: ScatteringAmplitudes, photon: PhotonInput) -> QghResult:
    totals = port_totals(amps)
    p_x, p_xbar = _mean_position(amps.chi_x), _mean_position(amps.chi_xbar)
    return QghResult(
        s_x=totals.s_x, s_xbar=totals.s_xbar, s_y=totals.s_y, s_ybar=totals.s_ybar,
        p_x=p_x, p_xbar=p_xbar,
        dp_x=None if p_x is None else p_x - photon.centroid,
        dp_xbar=None if p_xbar is None else p_xbar - photon.centroid,
        conserved=amps.conserved,
    )


@dataclass(frozen=True)
class MomentumSpectrum:
    k_grid: np.ndarray
    h_in: np.ndarray
    h_re: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    reliable: bool
    excluded_weight: float
    ambiguous_window: Optional[Tuple[float, float]] = None


def port_transform(amplitudes: np.ndarray, samples: int) -> Tuple[np.ndarray, np.ndarray]:
    """h(k) = sum_l a_l exp(-i k l) on a symmetric grid in (-pi, pi)."""
    k_grid = 2 * np.pi * sfft.fftshift(sfft.fftfreq(samples))
    spectrum = sfft.fftshift(sfft.fft(amplitudes, n=samples)) * np.exp(-1j * k_grid)
    return k_grid, spectrum


def port_transform_slope(amplitudes: np.ndarray, samples: int) -> np.ndarray:
    """dh/dk = sum_l (-i l) a_l exp(-i k l) on the port_transform grid."""
    amplitudes = np.asarray(amplitudes)
    return port_transform(-1j * np.arange(1, len(amplitudes) + 1) * amplitudes, samples)[1]


def _phase_slope(h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    """d arg(h) / dk = Im(h' / h), zero where h vanishes."""
    out = np.zeros(len(h))
    np.divide((h.conj() * dh).imag, np.abs(h) ** 2, out=out, where=np.abs(h) > 0)
    return out


def momentum_qgh(lattice: LatticeParams, photon: PhotonInput, amps: ScatteringAmplitudes,
                 direction: Direction = Direction.BACKWARD_X,
                 samples_per_port: int = SAMPLES_PER_PORT) -> Tuple[Optional[float], MomentumSpectrum]:
    """Displacement from the k-derivative of the relative phase theta = arg(h_re / h_in).

    The slope is taken from the transforms of -i l a_l, so it is exact on the
    grid. The phase itself is unwrapped with period pi for the reliability
    check: sign changes of a real envelope at zeros of either transform are
    not phase gradients.
    """
    if not direction.horizontal:
        raise InvalidInputError("momentum displacements are defined for the horizontal outputs", field="direction")
    samples = samples_per_port * lattice.n_y + 1
    outputs = amps.vector(direction)
    k_grid, h_in = port_transform(photon.f, samples)
    _, h_re = port_transform(outputs, samples)

    valid = np.abs(h_in) > SMALL_INPUT * np.abs(h_in).max()

    ratio = np.full(samples, np.nan)
    ratio[valid] = np.abs(h_re[valid]) / np.abs(h_in[valid])
    theta = np.unwrap(np.angle(h_re) - np.angle(h_in), period=np.pi)
    slope = (_phase_slope(h_re, port_transform_slope(outputs, samples))
             - _phase_slope(h_in, port_transform_slope(photon.f, samples)))

    weights = np.abs(h_re) ** 2
    total = weights.sum()
    excluded = float(weights[~valid].sum() / total) if total > 0 else 0.0
    steps = np.abs(np.diff(theta))
    ambiguous = None
    if np.any(steps[valid[1:] & valid[:-1]] > np.pi / 4):
        at = int(np.argmax(np.where(valid[1:] & valid[:-1], steps, 0.0)))
        ambiguous = (float(k_grid[at]), float(k_grid[at + 1]))
    reliable = excluded <= EXCLUDED_WEIGHT_LIMIT and ambiguous is None

    spectrum = MomentumSpectrum(k_grid=k_grid, h_in=h_in, h_re=h_re, r=ratio, theta=theta,
                                reliable=reliable, excluded_weight=excluded, ambiguous_window=ambiguous)
    kept = weights[valid].sum()
    if kept <= UNDEFINED_TOTAL * max(total, 1.0) or total <= UNDEFINED_TOTAL:
        return None, spectrum
    if not reliable:
        logger.warning("momentum displacement at omega=%r is unreliable (excluded weight %.3e, window %s)",
                       amps.omega, excluded, ambiguous)
    return float(-np.dot(weights[valid], slope[valid]) / kept), spectrum


@dataclass(frozen=True)
class SweepPoint:
    input_index: int
    omega: float
    result: Result[QghResult]
    nudged: bool = False
    solved_omega: Optional[float] = None


def solve_point(lattice: LatticeParams, photon: PhotonInput) -> Tuple[QghResult, bool, float]:
    """Scatter once, retrying a hair above the frequency when the resolvent is singular."""
    try:
        amps, _ = scatter(lattice, photon)
        return mean_shift(amps, photon), False, photon.omega
    except PoleError as e:
        omega = photon.omega + NUDGE * lattice.gamma_x
        logger.warning("pole at omega=%r (condition %.3e); retrying at %r", photon.omega, e.condition, omega)
        nudged = photon.with_omega(lattice, omega)
        amps, _ = scatter(lattice, nudged)
        return mean_shift(amps, nudged), True, omega


def sweep_frequency(lattice: LatticeParams, inputs: Sequence[PhotonInput], omega_grid: Sequence[float],
                    threads: int = 1, progress: Callable[[SweepPoint], None] = None) -> List[SweepPoint]:
    """One point per (input, omega), input-major; failures are kept in-row."""
    tasks = [(index, float(omega)) for index in range(len(inputs)) for omega in omega_grid]

    def run(task) -> SweepPoint:
        index, omega = task
        try:
            result, nudged, solved = solve_point(lattice, inputs[index].with_omega(lattice, omega))
            point = SweepPoint(index, omega, Result.success(result), nudged, solved)
        except WaveguideError as e:
            point = SweepPoint(index, omega, Result.failure(e))
        if progress is not None:
            progress(point)
        return point

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        return list(executor.map(run, tasks))


@dataclass(frozen=True)
class SizeScan:
    n_x: np.ndarray
    s_x: np.ndarray
    s_xbar: np.ndarray


def size_scan(lattice: LatticeParams, n_x_values: Sequence[int], photon: PhotonInput, omega: float,
              threads: int = 1, progress: Callable[[SweepPoint], None] = None) -> SizeScan:
    sizes = np.asarray(n_x_values, dtype=int)
    if np.any(np.diff(sizes) <= 0):
        raise InvalidInputError("n_x values must be strictly ascending", field="n_x_values")

    def run(position_size) -> SweepPoint:
        position, n_x = position_size
        sized = lattice.with_size(n_x=int(n_x))
        try:
            result, nudged, solved = solve_point(sized, photon.with_omega(sized, omega))
            point = SweepPoint(position, omega, Result.success(result), nudged, solved)
        except WaveguideError as e:
            point = SweepPoint(position, omega, Result.failure(e))
        if progress is not None:
            progress(point)
        return point

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        points = list(executor.map(run, enumerate(sizes)))
    s_x = np.array([p.result.value.s_x if p.result.ok else np.nan for p in points])
    s_xbar = np.array([p.result.value.s_xbar if p.result.ok else np.nan for p in points])
    return SizeScan(n_x=sizes, s_x=s_x, s_xbar=s_xbar)


@dataclass(frozen=True)
class OscillationPeriod:
    period: Optional[float]
    momentum: Optional[float]
    peak_bin: Optional[int]
    spectrum: np.ndarray


def oscillation_period(series: Sequence[float]) -> OscillationPeriod:
    """Dominant spatial period 2 pi / K of a size series, K = 2 pi m / N.

    A cubic trend is removed before the transform and bins below MIN_PEAK_BIN
    are not searched: the decay envelope of S_x(n_x) lives there.
    """
    values = np.asarray(series, dtype=float)
    if values.size < 16:
        raise InvalidInputError(f"need at least 16 samples, got {values.size}", field="series")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("series contains undefined samples", field="series")
    sizes = np.arange(values.size, dtype=float)
    trend = Polynomial.fit(sizes, values, TREND_DEGREE)(sizes)
    spectrum = np.abs(sfft.rfft(values - trend))
    body = spectrum[MIN_PEAK_BIN:]
    peak = int(np.argmax(body)) + MIN_PEAK_BIN
    if body.max() <= 0 or spectrum[peak] < PEAK_TO_MEDIAN * np.median(body):
        return OscillationPeriod(None, None, None, spectrum)
    momentum = 2 * np.pi * peak / values.size
    return OscillationPeriod(period=values.size / peak, momentum=momentum, peak_bin=peak, spectrum=spectrum)


def predicted_period(k_x: float) -> float:
    """Beat period max{pi / k_x, pi / (pi - k_x)} of a Bloch mode sampled once per site."""
    if not 0 < k_x < np.pi:
        raise InvalidInputError(f"quasi-momentum must lie in (0, pi), got {k_x!r}", field="k_x")
    return float(max(np.pi / k_x, np.pi / (np.pi - k_x)))


@dataclass(frozen=True)
class RatioScan:
    ratio: np.ndarray
    value: np.ndarray
    upward: np.ndarray
    downward: np.ndarray


def ratio_scaling(lattice: LatticeParams, ratio_grid: Sequence[float], photon: PhotonInput, omega: float,
                  threads: int = 1, progress: Callable[[SweepPoint], None] = None) -> RatioScan:
    """(S_y + S_ybar) / (S_x + S_xbar) with g_y = g_x sqrt(ratio)."""
    ratios = np.asarray(ratio_grid, dtype=float)
    if np.any(ratios < 0):
        raise InvalidInputError("decay-rate ratios must be non-negative", field="ratio_grid")

    def run(position_ratio):
        position, ratio = position_ratio
        scaled = lattice.with_couplings(g_y=lattice.g_x * float(np.sqrt(ratio)))
        try:
            result, nudged, solved = solve_point(scaled, photon.with_omega(scaled, omega))
        except WaveguideError as e:
            logger.warning("ratio %r failed: %s", ratio, e)
            if progress is not None:
                progress(SweepPoint(position, omega, Result.failure(e)))
            return np.nan, np.nan, np.nan
        if progress is not None:
            progress(SweepPoint(position, omega, Result.success(result), nudged, solved))
        horizontal = result.s_x + result.s_xbar
        return (result.s_y + result.s_ybar) / horizontal, result.s_y / horizontal, result.s_ybar / horizontal

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        rows = np.array(list(executor.map(run, enumerate(ratios))), dtype=float).reshape(-1, 3)
    return RatioScan(ratio=ratios, value=rows[:, 0], upward=rows[:, 1], downward=rows[:, 2])


def collapse_constant(phi: float, detuning: float) -> float:
    """Small-ratio limit of the per-direction vertical/horizontal ratio divided by gamma_y / gamma_x.

    rho is the decaying 1D transfer eigenvalue at the given in-gap detuning (units of gamma_x).
    """
    tau = np.cos(phi) + np.sin(phi) / detuning
    if abs(tau) <= 1:
        raise InvalidInputError(f"detuning {detuning!r} is not in the band gap", field="detuning")
    rho = tau + np.sqrt(tau ** 2 - 1) if tau < 0 else tau - np.sqrt(tau ** 2 - 1)
    return float((1 - 2 * rho * np.cos(phi) + rho ** 2) / (1 - rho ** 2))


@dataclass(frozen=True)
class KyScanRow:
    omega: float
    k_y: float
    dp_x: Optional[float]
    dp_xbar: Optional[float]
    error: Optional[str] = None


def ky_scan(lattice: LatticeParams, omega_grid: Sequence[float], ky_grid: Sequence[float], sigma: float,
            center: float = None, threads: int = 1,
            progress: Callable[[SweepPoint], None] = None) -> List[KyScanRow]:
    """Real-space displacement map over injection frequency and transverse momentum."""
    omegas = np.asarray(omega_grid, dtype=float)
    kys = np.asarray(ky_grid, dtype=float)
    inputs = [gaussian_input(lattice, float(omegas[0]), sigma, float(k_y), center) for k_y in kys]
    points = sweep_frequency(lattice, inputs, omegas, threads=threads, progress=progress)
    rows = []
    for point in points:
        k_y = float(kys[point.input_index])
        if point.result.ok:
            rows.append(KyScanRow(point.omega, k_y, point.result.value.dp_x, point.result.value.dp_xbar))
        else:
            rows.append(KyScanRow(point.omega, k_y, None, None, type(point.result.error).__name__))
    return rows


@dataclass(frozen=True)
class MomentumShift:
    omega: float
    dp_x: Optional[float]
    dp_xbar: Optional[float]
    reliable: bool


def momentum_sweep(lattice: LatticeParams, photon: PhotonInput, omega_grid: Sequence[float],
                   threads: int = 1) -> List[Result[MomentumShift]]:
    """Momentum-space displacements in both horizontal directions over a frequency grid."""

    def run(omega: float) -> Result[MomentumShift]:
        try:
            shifted = photon.with_omega(lattice, float(omega))
            amps, _ = scatter(lattice, shifted)
            dp_x, forward = momentum_qgh(lattice, shifted, amps, Direction.FORWARD_X)
            dp_xbar, backward = momentum_qgh(lattice, shifted, amps, Direction.BACKWARD_X)
        except WaveguideError as e:
            return Result.failure(e)
        return Result.success(MomentumShift(float(omega), dp_x, dp_xbar, forward.reliable and backward.reliable))

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        return list(executor.map(run, omega_grid))
