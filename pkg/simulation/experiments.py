import logging
from typing import Callable, Dict, List, Optional

import numpy as np

from common.types.ExperimentConfig import ExperimentConfig, ExperimentName, InjectionConfig
from common.utils.experiments import Provenance
from common.wqed.errors import InvalidInputError
from common.wqed.green_scattering import excitation_profile, scatter, scatter_ribbon
from common.wqed.hamiltonians import build_heff_2d, inverse_chain_coefficients
from common.wqed.model import Direction, LatticeParams, PhotonInput, gaussian_input, single_port_input
from common.wqed.qgh import (SweepPoint, ky_scan, mean_shift, momentum_sweep, oscillation_period, predicted_period,
                             ratio_scaling, size_scan, sweep_frequency)
from common.wqed.spectral import (FitForm, SquareBasis, best_corner_fit, eigendecompose, fit_scale_free,
                                  inverse_chain_spectrum, inverse_square_spectrum, inverse_square_states,
                                  ribbon_bands, scale_free_F, scale_free_curve, subradiant_frequencies)
from common.wqed.transfer_oracle import oracle_check, resonant_kx
from simulation import ResultTable
from simulation.events import EventType, PointEventData, SweepFinishedData, SweepStartedData
from simulation.observers import EventManager

logger = logging.getLogger(__name__)

BAND_EDGE_CLEARANCE = 1e-9

SUMMARY_UNITS = {"input": "", "s_x": "probability", "s_xbar": "probability", "s_y": "probability",
                 "s_ybar": "probability", "total": "probability", "dp_x": "port", "dp_xbar": "port",
                 "conserved": "flag"}


def _value(value):
    return np.nan if value is None else value


class ExperimentRunner:
    """Runs one configured experiment and returns its result tables."""

    def __init__(self, config: ExperimentConfig, provenance: Provenance, eventManager: EventManager,
                 threads: int = 1):
        self.config = config
        self.provenance = provenance
        self.eventManager = eventManager
        self.threads = max(1, threads)
        self.lattice: LatticeParams = config.lattice.toLattice()
        self.failed = False

        self.experimentMap: Dict[ExperimentName, Callable[[], List[ResultTable]]] = {
            ExperimentName.SCATTER: self.runScatter,
            ExperimentName.SWEEP: self.runSweep,
            ExperimentName.SIZE_SCAN: self.runSizeScan,
            ExperimentName.RATIO_SCAN: self.runRatioScan,
            ExperimentName.KY_SCAN: self.runKyScan,
            ExperimentName.SPECTRUM: self.runSpectrum,
            ExperimentName.SCALE_FREE: self.runScaleFree,
            ExperimentName.RIBBON_BANDS: self.runRibbonBands,
            ExperimentName.ORACLE_CHECK: self.runOracleCheck,
        }

    def run(self) -> List[ResultTable]:
        experiment = self.config.experiment
        logger.info("running %s on a %dx%d lattice (omega0=%r, gamma_x=%r, gamma_y=%r)", experiment.value,
                    self.lattice.n_x, self.lattice.n_y, self.lattice.omega0, self.lattice.gamma_x,
                    self.lattice.gamma_y)
        tables = self.experimentMap[experiment]()
        self.eventManager.notify(EventType.SWEEP_FINISHED, SweepFinishedData(experiment.value))
        return tables

    # -----------------------------------------------------------------
    # helpers
    # -----------------------------------------------------------------

    def _table(self, name: str, series) -> ResultTable:
        return ResultTable.fromSeries(name, series, self.provenance.asObject())

    def _inputs(self, injection: InjectionConfig, omega: float) -> List[PhotonInput]:
        if injection.sigma is not None:
            return [gaussian_input(self.lattice, omega, injection.sigma, injection.ky, injection.center)]
        return [single_port_input(self.lattice, omega, port) for port in injection.ports]

    def _labels(self, injection: InjectionConfig) -> List[str]:
        if injection.sigma is not None:
            return [f"gaussian(sigma={injection.sigma:g},ky={injection.ky:.17g})"]
        return [f"port{port}" for port in injection.ports]

    def _started(self, total: int):
        self.eventManager.notify(EventType.SWEEP_STARTED, SweepStartedData(self.config.experiment.value, total))

    def _progress(self, point: SweepPoint):
        if not point.result.ok:
            error = point.result.error
            self.eventManager.notify(EventType.POINT_FAILED, PointEventData(
                point.input_index, point.omega, error=type(error).__name__, message=str(error)))
            return
        if point.nudged:
            self.eventManager.notify(EventType.POINT_NUDGED, PointEventData(
                point.input_index, point.omega, solved_omega=point.solved_omega))
        self.eventManager.notify(EventType.POINT_COMPLETED, PointEventData(
            point.input_index, point.omega, solved_omega=point.solved_omega))

    def _oracleProgress(self, index: int, omega: float, error: Optional[Exception]):
        if error is not None:
            self.eventManager.notify(EventType.POINT_FAILED, PointEventData(
                index, omega, error=type(error).__name__, message=str(error)))
            return
        self.eventManager.notify(EventType.POINT_COMPLETED, PointEventData(index, omega, solved_omega=omega))

    def _completed(self, omega: float):
        self.eventManager.notify(EventType.POINT_COMPLETED, PointEventData(0, omega, solved_omega=omega))

    def _ribbonAmplitudes(self, inputs: List[PhotonInput], labels: List[str], epsilon: Optional[float]) -> ResultTable:
        rows = {"input": [], "direction": [], "port": [], "chi": [], "probability": []}
        for index, (photon, label) in enumerate(zip(inputs, labels)):
            forward, backward = scatter_ribbon(self.lattice, photon, epsilon)
            for direction, values in ((Direction.FORWARD_X, forward), (Direction.BACKWARD_X, backward)):
                for port, value in enumerate(values, start=1):
                    rows["input"].append(label)
                    rows["direction"].append(direction.value)
                    rows["port"].append(port)
                    rows["chi"].append(complex(value))
                    rows["probability"].append(abs(value) ** 2)
            self.eventManager.notify(EventType.POINT_COMPLETED,
                                     PointEventData(index, photon.omega, solved_omega=photon.omega))
        return self._table("ribbon", {
            "input": (rows["input"], ""), "direction": (rows["direction"], ""), "port": (rows["port"], "index"),
            "chi": (rows["chi"], "amplitude"), "probability": (rows["probability"], "probability")})

    # -----------------------------------------------------------------
    # experiments
    # -----------------------------------------------------------------

    def runScatter(self) -> List[ResultTable]:
        settings = self.config.scatter
        omega = self.lattice.omega_at(settings.detuning)
        inputs, labels = self._inputs(settings, omega), self._labels(settings)
        self._started(len(inputs))
        if settings.ribbon:
            return [self._ribbonAmplitudes(inputs, labels, settings.epsilon)]
        amplitude_rows = {"input": [], "direction": [], "port": [], "chi": [], "probability": []}
        excitation_rows = {"input": [], "j": [], "l": [], "Q": [], "abs_Q": []}
        summary_rows = {"input": [], "s_x": [], "s_xbar": [], "s_y": [], "s_ybar": [], "total": [],
                        "dp_x": [], "dp_xbar": [], "conserved": []}
        for index, (photon, label) in enumerate(zip(inputs, labels)):
            amps, excitation = scatter(self.lattice, photon)
            for direction in Direction:
                for port, value in enumerate(amps.vector(direction), start=1):
                    amplitude_rows["input"].append(label)
                    amplitude_rows["direction"].append(direction.value)
                    amplitude_rows["port"].append(port)
                    amplitude_rows["chi"].append(complex(value))
                    amplitude_rows["probability"].append(abs(value) ** 2)
            field = excitation.Q.reshape(self.lattice.n_x, self.lattice.n_y)
            magnitude = excitation_profile(excitation, self.lattice)
            for j in range(self.lattice.n_x):
                for l in range(self.lattice.n_y):
                    excitation_rows["input"].append(label)
                    excitation_rows["j"].append(j + 1)
                    excitation_rows["l"].append(l + 1)
                    excitation_rows["Q"].append(complex(field[j, l]))
                    excitation_rows["abs_Q"].append(float(magnitude[j, l]))
            result = mean_shift(amps, photon)
            for key, value in (("input", label), ("s_x", result.s_x), ("s_xbar", result.s_xbar),
                               ("s_y", result.s_y), ("s_ybar", result.s_ybar), ("total", result.total),
                               ("dp_x", _value(result.dp_x)), ("dp_xbar", _value(result.dp_xbar)),
                               ("conserved", result.conserved)):
                summary_rows[key].append(value)
            self.eventManager.notify(EventType.POINT_COMPLETED, PointEventData(index, omega, solved_omega=omega))
        return [
            self._table("amplitudes", {
                "input": (amplitude_rows["input"], ""), "direction": (amplitude_rows["direction"], ""),
                "port": (amplitude_rows["port"], "index"), "chi": (amplitude_rows["chi"], "amplitude"),
                "probability": (amplitude_rows["probability"], "probability")}),
            self._table("excitation", {
                "input": (excitation_rows["input"], ""), "j": (excitation_rows["j"], "index"),
                "l": (excitation_rows["l"], "index"), "Q": (excitation_rows["Q"], "amplitude"),
                "abs_Q": (excitation_rows["abs_Q"], "amplitude")}),
            self._table("summary", {key: (values, SUMMARY_UNITS[key]) for key, values in summary_rows.items()}),
        ]

    def runSweep(self) -> List[ResultTable]:
        settings = self.config.sweep
        detunings = settings.grid.values()
        omegas = np.array([self.lattice.omega_at(detuning) for detuning in detunings])
        inputs, labels = self._inputs(settings, self.lattice.omega0), self._labels(settings)
        self._started(len(inputs) * len(omegas))
        points = sweep_frequency(self.lattice, inputs, omegas, threads=self.threads, progress=self._progress)

        momentum = None
        if settings.momentum:
            if settings.sigma is None:
                raise InvalidInputError("momentum displacements need a Gaussian input (sweep.sigma)",
                                        field="sweep.momentum")
            momentum = momentum_sweep(self.lattice, inputs[0], omegas, threads=self.threads)

        def column(getter):
            return [_value(getter(point.result.value)) if point.result.ok else np.nan for point in points]

        common = {
            "input": ([labels[point.input_index] for point in points], ""),
            "detuning": ([self.lattice.detuning(point.omega) for point in points], "gamma_x"),
            "omega": ([point.solved_omega if point.result.ok else point.omega for point in points], "omega"),
            "nudged": ([point.nudged for point in points], "flag"),
            "conserved": ([point.result.ok and point.result.value.conserved for point in points], "flag"),
            "error": (["" if point.result.ok else type(point.result.error).__name__ for point in points], ""),
        }
        tables = []
        for name, getter, unit in (("s_forward", lambda r: r.s_x, "probability"),
                                   ("s_backward", lambda r: r.s_xbar, "probability"),
                                   ("dp_forward", lambda r: r.dp_x, "port"),
                                   ("dp_backward", lambda r: r.dp_xbar, "port")):
            series = dict(common)
            series["value"] = (column(getter), unit)
            if momentum is not None and name.startswith("dp"):
                pick = (lambda shift: shift.dp_x) if name == "dp_forward" else (lambda shift: shift.dp_xbar)
                series["momentum_value"] = ([_value(pick(entry.value)) if entry.ok else np.nan
                                             for entry in momentum], unit)
                series["momentum_reliable"] = ([entry.ok and entry.value.reliable for entry in momentum], "flag")
            tables.append(self._table(name, series))
        return tables

    def runSizeScan(self) -> List[ResultTable]:
        settings = self.config.size_scan
        omega = self.lattice.omega_at(settings.detuning)
        photon = self._inputs(settings, omega)[0]
        sizes = list(range(settings.n_x_min, settings.n_x_max + 1))
        self._started(len(sizes))
        scan = size_scan(self.lattice, sizes, photon, omega, threads=self.threads, progress=self._progress)
        tables = [self._table("series", {"n_x": (scan.n_x.tolist(), "atoms"), "s_x": (scan.s_x, "probability"),
                                         "s_xbar": (scan.s_xbar, "probability")})]
        try:
            k_x = resonant_kx(self.lattice, omega)
            expected = predicted_period(k_x)
        except InvalidInputError as e:
            logger.info("no Bloch resonance at this detuning: %s", e)
            k_x, expected = np.nan, np.nan
        if len(sizes) >= 16 and np.all(np.isfinite(scan.s_x)):
            oscillation = oscillation_period(scan.s_x)
            bins = np.arange(len(oscillation.spectrum))
            tables.append(self._table("spectrum", {
                "bin": (bins.tolist(), "index"), "K": (2 * np.pi * bins / len(sizes), "rad"),
                "magnitude": (oscillation.spectrum, "arb")}))
            measured, momentum = _value(oscillation.period), _value(oscillation.momentum)
        else:
            logger.warning("size series too short or incomplete for a period estimate")
            measured, momentum = np.nan, np.nan
        tables.append(self._table("period", {
            "detuning": ([settings.detuning], "gamma_x"), "period": ([measured], "sites"),
            "K": ([momentum], "rad"), "k_x": ([k_x], "rad"), "predicted_period": ([expected], "sites")}))
        return tables

    def runRatioScan(self) -> List[ResultTable]:
        settings = self.config.ratio_scan
        omega = self.lattice.omega_at(settings.detuning)
        photon = self._inputs(settings, omega)[0]
        self._started(len(settings.ratios))
        scan = ratio_scaling(self.lattice, settings.ratios, photon, omega, threads=self.threads,
                             progress=self._progress)
        with np.errstate(divide="ignore", invalid="ignore"):
            normalized = np.where(scan.ratio > 0, scan.value / scan.ratio, np.nan)
        return [self._table("series", {
            "ratio": (scan.ratio, "gamma_y/gamma_x"), "value": (scan.value, "probability ratio"),
            "upward": (scan.upward, "probability ratio"), "downward": (scan.downward, "probability ratio"),
            "value_over_ratio": (normalized, "")})]

    def runKyScan(self) -> List[ResultTable]:
        settings = self.config.ky_scan
        detunings = settings.grid.values()
        omegas = [self.lattice.omega_at(detuning) for detuning in detunings]
        kys = settings.ky.values()
        self._started(len(omegas) * len(kys))
        rows = ky_scan(self.lattice, omegas, kys, settings.sigma, settings.center, threads=self.threads,
                       progress=self._progress)
        return [self._table("heatmap", {
            "detuning": ([self.lattice.detuning(row.omega) for row in rows], "gamma_x"),
            "omega": ([row.omega for row in rows], "omega"),
            "k_y": ([row.k_y for row in rows], "rad/port"),
            "dp_x": ([_value(row.dp_x) for row in rows], "port"),
            "dp_xbar": ([_value(row.dp_xbar) for row in rows], "port"),
            "error": ([row.error or "" for row in rows], "")})]

    def runSpectrum(self) -> List[ResultTable]:
        settings = self.config.spectrum
        omega = self.lattice.omega_at(settings.detuning)
        H = build_heff_2d(self.lattice, omega, settings.phase_mode)
        self._started(1)
        dec = eigendecompose(H)
        self._completed(omega)
        residual = dec.residual(H.matrix)
        if np.any(residual > 1e-8 * np.linalg.norm(H.matrix)):
            logger.warning("eigen-residuals up to %.3e exceed tolerance", residual.max())
        subradiant = subradiant_frequencies(self.lattice)
        resonances = subradiant_frequencies(self.lattice, all_levels=True)
        return [
            self._table("eigenvalues", {
                "index": (list(range(1, len(dec.eigenvalues) + 1)), "index"),
                "eigenvalue": ([complex(value) for value in dec.eigenvalues], "omega"),
                "detuning": ([self.lattice.detuning(value.real) for value in dec.eigenvalues], "gamma_x"),
                "decay": ((-dec.eigenvalues.imag / self.lattice.gamma_x).tolist(), "gamma_x"),
                "ipr": (dec.ipr, ""), "flagged": (dec.flagged.tolist(), "flag")}),
            self._table("subradiant", {
                "index": (list(range(1, len(subradiant) + 1)), "index"), "omega": (subradiant, "omega"),
                "detuning": ([self.lattice.detuning(value) for value in subradiant], "gamma_x")}),
            self._table("resonances", {
                "index": (list(range(1, len(resonances) + 1)), "index"), "omega": (resonances, "omega"),
                "detuning": ([self.lattice.detuning(value) for value in resonances], "gamma_x")}),
        ]

    def runScaleFree(self) -> List[ResultTable]:
        settings = self.config.scale_free
        coeffs = inverse_chain_coefficients(settings.gamma, settings.phi)
        self._started(1)
        if settings.square:
            dec = inverse_square_spectrum(coeffs, settings.n)
            energies = settings.gamma * dec.eigenvalues
            with np.errstate(divide="ignore", invalid="ignore"):
                decay = energies.imag / np.abs(energies) ** 2
            spectrum = {"eigenvalue": ([complex(value) for value in dec.eigenvalues], "1/gamma"),
                        "inverse_energy": (energies.real, ""), "decay_ratio": (decay, ""), "ipr": (dec.ipr, "")}
            symmetrized = inverse_square_states(coeffs, settings.n, SquareBasis.SYMMETRIZED)
            product = inverse_square_states(coeffs, settings.n, SquareBasis.PRODUCT)
            rows = [(symmetrized, *best_corner_fit(symmetrized, FitForm.CORNER_TWO, candidates=1)),
                    (product, *best_corner_fit(product, FitForm.CORNER_FOUR, settings.candidates))]
            fits = [(states.basis.value, index, states.eigenvalues[index], states.ipr[index], fit)
                    for states, index, fit in rows]
        else:
            inverse = inverse_chain_spectrum(coeffs, settings.n)
            best = int(np.argmax(inverse.ipr))
            fits = [("chain", best, inverse.eigenvalues[best], inverse.ipr[best],
                     fit_scale_free(inverse.eigenvectors[:, best], FitForm.EDGE))]
            spectrum = {"eigenvalue": ([complex(value) for value in inverse.eigenvalues], "1/gamma"),
                        "inverse_energy": (inverse.inverse_energy, ""),
                        "decay_ratio": (inverse.decay_ratio, ""), "ipr": (inverse.ipr, "")}
        self._completed(self.lattice.omega0)
        tables = [self._table("spectrum", {"index": (list(range(1, len(spectrum["ipr"][0]) + 1)), "index"),
                                           **spectrum})]
        curve = scale_free_curve(coeffs, settings.theta.values(), settings.n)
        tables.append(self._table("curve", {
            "theta": (curve.theta, "rad"), "F": (scale_free_F(coeffs, curve.theta), ""),
            "inverse_energy": (curve.inverse_energy, ""), "decay_ratio": (curve.decay_ratio, "")}))
        tables.append(self._table("fit", {
            "basis": ([row[0] for row in fits], ""), "state": ([row[1] + 1 for row in fits], "index"),
            "eigenvalue": ([complex(row[2]) for row in fits], "1/gamma"), "ipr": ([row[3] for row in fits], ""),
            "form": ([row[4].form.value for row in fits], ""), "F": ([row[4].F for row in fits], ""),
            "residual": ([row[4].residual for row in fits], ""), "baseline": ([row[4].baseline for row in fits], ""),
            "quality": ([row[4].quality for row in fits], "")}))
        return tables

    def runRibbonBands(self) -> List[ResultTable]:
        k_grid = self.config.ribbon_bands.kx.values()
        clear = np.abs(np.cos(k_grid) - np.cos(self.lattice.phi0)) > BAND_EDGE_CLEARANCE
        if not clear.all():
            logger.warning("dropped %d momenta on the band-edge pole", int((~clear).sum()))
        self._started(1)
        bands = ribbon_bands(self.lattice, k_grid[clear])
        self._completed(self.lattice.omega0)
        detunings = (bands.bands - self.lattice.omega0) / self.lattice.gamma_x
        series = {"k_x": (bands.k_grid, "rad")}
        for row, values in enumerate(detunings, start=1):
            series[f"branch_{row}"] = (values, "gamma_x")
        series["subradiant"] = (detunings[bands.subradiant_branch], "gamma_x")
        return [self._table("bands", series)]

    def runOracleCheck(self) -> List[ResultTable]:
        settings = self.config.oracle_check
        omegas = [self.lattice.omega_at(detuning) for detuning in settings.grid.values()]
        self._started(len(omegas))
        report = oracle_check(self.lattice, omegas, settings.port, progress=self._oracleProgress)
        self.failed = not report.passed
        ports = sorted(report.max_discrepancy, key=lambda port: (port.direction.value, port.index))
        return [
            self._table("report", {
                "direction": ([port.direction.value for port in ports], ""),
                "port": ([port.index for port in ports], "index"),
                "max_discrepancy": ([report.max_discrepancy[port] for port in ports], "probability")}),
            self._table("summary", {
                "worst_port": ([str(report.worst_port)], ""), "worst": ([report.worst], "probability"),
                "tolerance": ([report.tolerance], "probability"), "points": ([len(omegas)], "count"),
                "failures": ([len(report.failures)], "count"), "passed": ([report.passed], "flag")}),
        ]
