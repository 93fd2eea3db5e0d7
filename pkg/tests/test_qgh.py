import numpy as np
import pytest

import common.wqed.qgh as qgh
from common.wqed.errors import InvalidInputError, PoleError
from common.wqed.green_scattering import ScatteringAmplitudes, port_totals, scatter
from common.wqed.hamiltonians import coupling_block
from common.wqed.model import Direction, LatticeParams, gaussian_input, single_port_input
from common.wqed.qgh import (collapse_constant, ky_scan, mean_shift, momentum_qgh, momentum_sweep,
                             oscillation_period, port_transform, port_transform_slope, predicted_period,
                             ratio_scaling, size_scan, solve_point, sweep_frequency)
from common.wqed.transfer_oracle import gap_range, resonant_kx


def test_center_port_has_no_shift(sweep_lattice):
    for detuning in (-2.0, 0.1, 1.5):
        photon = single_port_input(sweep_lattice, sweep_lattice.omega_at(detuning), 3)
        amps, _ = scatter(sweep_lattice, photon)
        result = mean_shift(amps, photon)
        assert abs(result.dp_x) < 1e-10
        assert abs(result.dp_xbar) < 1e-10


def test_mirrored_ports_shift_oppositely(sweep_lattice):
    for detuning in np.linspace(-5, 5, 11):
        omega = sweep_lattice.omega_at(detuning)
        for port in (1, 2):
            left = single_port_input(sweep_lattice, omega, port)
            right = single_port_input(sweep_lattice, omega, sweep_lattice.mirror(port))
            left_result = mean_shift(scatter(sweep_lattice, left)[0], left)
            right_result = mean_shift(scatter(sweep_lattice, right)[0], right)
            assert left_result.s_xbar == pytest.approx(right_result.s_xbar, abs=1e-10)
            assert left_result.dp_xbar == pytest.approx(-right_result.dp_xbar, abs=1e-9)


def test_shift_is_undefined_without_probability(small_lattice):
    photon = single_port_input(small_lattice, 100.0, 1)
    amps = ScatteringAmplitudes(chi_x=photon.f.copy(), chi_xbar=np.zeros(4, dtype=complex),
                                chi_y=np.zeros(3, dtype=complex), chi_ybar=np.zeros(3, dtype=complex), omega=100.0)
    result = mean_shift(amps, photon)
    assert result.dp_xbar is None and result.p_xbar is None
    assert result.dp_x == pytest.approx(0.0)
    assert result.total == pytest.approx(1.0)


def test_port_transform_grid():
    k_grid, spectrum = port_transform(np.array([1.0, 0.0, 0.0]), 9)
    assert len(k_grid) == 9 and k_grid[4] == 0.0
    assert np.allclose(k_grid, -k_grid[::-1])
    # a photon at port 1 has h(k) = exp(-i k)
    assert np.allclose(spectrum, np.exp(-1j * k_grid))


@pytest.mark.parametrize("shift", [-3, 2])
@pytest.mark.parametrize("k_y", [0.0, 0.3])
def test_momentum_shift_of_a_translated_beam(shift, k_y):
    lattice = LatticeParams(n_x=3, n_y=61, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=1.0)
    photon = gaussian_input(lattice, 100.0, sigma=2.0, k_y=k_y)
    reflected = np.zeros(lattice.n_y, dtype=complex)
    if shift > 0:
        reflected[shift:] = photon.f[:-shift]
    else:
        reflected[:shift] = photon.f[-shift:]
    amps = ScatteringAmplitudes(chi_x=np.zeros(61, dtype=complex), chi_xbar=reflected,
                                chi_y=np.zeros(3, dtype=complex), chi_ybar=np.zeros(3, dtype=complex), omega=100.0)
    dp, spectrum = momentum_qgh(lattice, photon, amps, Direction.BACKWARD_X)
    assert dp == pytest.approx(shift, abs=1e-6)
    assert spectrum.reliable
    assert mean_shift(amps, photon).dp_xbar == pytest.approx(shift, abs=1e-9)


def test_momentum_shift_equals_the_real_space_shift():
    lattice = LatticeParams(n_x=6, n_y=9, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=1.0)
    photon = gaussian_input(lattice, 100.0, sigma=1.0, k_y=0.1 * np.pi)
    for detuning in (-2.0, -0.3, 0.8):
        moved = photon.with_omega(lattice, lattice.omega_at(detuning))
        amps, _ = scatter(lattice, moved)
        real_space = mean_shift(amps, moved)
        for direction, expected in ((Direction.BACKWARD_X, real_space.dp_xbar),
                                    (Direction.FORWARD_X, real_space.dp_x)):
            dp, spectrum = momentum_qgh(lattice, moved, amps, direction)
            assert spectrum.excluded_weight == 0.0
            assert dp == pytest.approx(expected, abs=1e-9)


def test_port_transform_slope_is_the_k_derivative():
    amplitudes = np.array([0.3, -1.0j, 0.5 + 0.2j, 0.1])
    k_grid, h = port_transform(amplitudes, 41)
    slope = port_transform_slope(amplitudes, 41)
    l = np.arange(1, 5)
    assert np.allclose(h, np.exp(-1j * np.outer(k_grid, l)) @ amplitudes)
    assert np.allclose(slope, np.exp(-1j * np.outer(k_grid, l)) @ (-1j * l * amplitudes))


def test_momentum_shift_is_horizontal_only(small_lattice):
    photon = single_port_input(small_lattice, 100.0, 1)
    amps, _ = scatter(small_lattice, photon)
    with pytest.raises(InvalidInputError):
        momentum_qgh(small_lattice, photon, amps, Direction.UPWARD_Y)


def test_transverse_momentum_flip_reverses_the_shift():
    lattice = LatticeParams(n_x=6, n_y=9, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=1.0)
    omegas = [lattice.omega_at(detuning) for detuning in (-2.0, -0.3, 0.8)]
    rows = ky_scan(lattice, omegas, [0.1 * np.pi, -0.1 * np.pi], sigma=2.0)
    assert len(rows) == 6
    forward = {row.omega: row for row in rows if row.k_y > 0}
    backward = {row.omega: row for row in rows if row.k_y < 0}
    for omega in omegas:
        assert forward[omega].dp_xbar == pytest.approx(-backward[omega].dp_xbar, abs=1e-9)
        assert forward[omega].dp_x == pytest.approx(-backward[omega].dp_x, abs=1e-9)


def test_sweep_is_input_major_and_thread_independent(small_lattice):
    inputs = [single_port_input(small_lattice, 100.0, port) for port in (1, 4)]
    omegas = [small_lattice.omega_at(detuning) for detuning in np.linspace(-2, 2, 5)]
    serial = sweep_frequency(small_lattice, inputs, omegas, threads=1)
    parallel = sweep_frequency(small_lattice, inputs, omegas, threads=3)
    assert [point.input_index for point in serial] == [0] * 5 + [1] * 5
    assert [point.omega for point in serial[:5]] == pytest.approx(omegas)
    for a, b in zip(serial, parallel):
        assert a.result.ok and b.result.ok
        assert a.result.value == b.result.value


def test_pole_triggers_one_nudge(small_lattice, monkeypatch):
    real_scatter = qgh.scatter
    calls = []

    def flaky(lattice, photon):
        calls.append(photon.omega)
        if len(calls) == 1:
            raise PoleError(photon.omega, 1e16)
        return real_scatter(lattice, photon)

    monkeypatch.setattr(qgh, "scatter", flaky)
    result, nudged, solved = solve_point(small_lattice, single_port_input(small_lattice, 100.0, 2))
    assert nudged
    assert solved == 100.0 + 1e-9 * small_lattice.gamma_x
    assert result.total == pytest.approx(1.0, abs=1e-9)


def test_sweep_keeps_failed_points(small_lattice, monkeypatch):
    def always(lattice, photon):
        raise PoleError(photon.omega, np.inf)

    monkeypatch.setattr(qgh, "scatter", always)
    seen = []
    points = sweep_frequency(small_lattice, [single_port_input(small_lattice, 100.0, 1)], [100.0, 100.01],
                             progress=seen.append)
    assert len(points) == 2 and len(seen) == 2
    assert all(not point.result.ok for point in points)
    assert isinstance(points[0].result.error, PoleError)


def test_oscillation_period_of_a_synthetic_series():
    n = np.arange(1, 101)
    series = 0.5 + 0.3 * np.cos(np.pi * n / 2) * np.exp(-n / 200)
    found = oscillation_period(series)
    assert found.peak_bin == 25
    assert found.period == pytest.approx(4.0)
    assert found.momentum == pytest.approx(np.pi / 2)


def test_oscillation_period_ignores_a_decaying_trend():
    n = np.arange(1, 101)
    series = 0.2 + 0.6 * np.exp(-n / 15) + 0.05 * np.cos(np.pi * n / 2)
    found = oscillation_period(series)
    assert found.peak_bin == 25
    assert found.period == pytest.approx(4.0)


def test_oscillation_period_rejects_bad_series():
    with pytest.raises(InvalidInputError):
        oscillation_period(np.ones(10))
    with pytest.raises(InvalidInputError):
        oscillation_period(np.r_[np.ones(20), np.nan])


def test_predicted_period():
    assert predicted_period(np.pi / 4) == pytest.approx(4.0)
    assert predicted_period(np.pi / 8) == pytest.approx(8.0)
    assert predicted_period(3 * np.pi / 4) == pytest.approx(4.0)
    with pytest.raises(InvalidInputError):
        predicted_period(0.0)


def test_collapse_constant_at_the_reference_point():
    assert collapse_constant(np.pi / 3, -0.078) == pytest.approx(1.052, abs=2e-3)
    with pytest.raises(InvalidInputError):
        collapse_constant(np.pi / 3, -3.0)


def test_ratio_scaling_without_vertical_coupling(small_lattice):
    photon = single_port_input(small_lattice, 100.0, 2)
    scan = ratio_scaling(small_lattice, [0.0, 0.5], photon, small_lattice.omega_at(0.2))
    assert scan.value[0] == 0.0
    assert scan.value[1] > 0
    assert scan.value[1] == pytest.approx(scan.upward[1] + scan.downward[1])
    with pytest.raises(InvalidInputError):
        ratio_scaling(small_lattice, [-1.0], photon, 100.0)


def test_size_scan_series(small_lattice):
    photon = single_port_input(small_lattice, 100.0, 1)
    scan = size_scan(small_lattice, [1, 2, 3, 5], photon, small_lattice.omega_at(0.5), threads=2)
    assert list(scan.n_x) == [1, 2, 3, 5]
    longest = small_lattice.with_size(n_x=5)
    expected = port_totals(scatter(longest, photon.with_omega(longest, longest.omega_at(0.5)))[0])
    assert scan.s_x[-1] == pytest.approx(expected.s_x)
    with pytest.raises(InvalidInputError):
        size_scan(small_lattice, [3, 2], photon, 100.0)


def test_momentum_sweep_reports_results(small_lattice):
    lattice = small_lattice.with_size(n_y=9)
    photon = gaussian_input(lattice, 100.0, sigma=1.5, k_y=0.0)
    results = momentum_sweep(lattice, photon, [lattice.omega_at(-1.0), lattice.omega_at(1.0)], threads=2)
    assert len(results) == 2
    assert all(result.ok for result in results)


@pytest.mark.slow
def test_momentum_and_real_space_shifts_agree():
    lattice = LatticeParams(n_x=15, n_y=25, d=1.0, c=100.0, omega0=100.0, g_x=1.0, g_y=1.0)
    photon = gaussian_input(lattice, 100.0, sigma=3.0, k_y=0.1 * np.pi)
    omegas = [lattice.omega_at(detuning) for detuning in np.linspace(-5, 5, 100)]
    for omega, entry in zip(omegas, momentum_sweep(lattice, photon, omegas, threads=4)):
        if not entry.ok or not entry.value.reliable or entry.value.dp_xbar is None:
            continue
        moved = photon.with_omega(lattice, omega)
        real_space = mean_shift(scatter(lattice, moved)[0], moved)
        assert entry.value.dp_xbar == pytest.approx(real_space.dp_xbar, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("n_y", [3, 4, 5, 6])
def test_vertical_ratio_collapses_at_small_decay_ratio(n_y):
    lattice = LatticeParams.from_decay_rates(n_x=60, n_y=n_y, gamma_x=0.01, gamma_y=0.01, phi0=np.pi / 3)
    omega = lattice.omega_at(-0.078)
    photon = single_port_input(lattice, omega, 1)
    scan = ratio_scaling(lattice, [1e-4, 1e-3], photon, omega)
    expected = 2 * collapse_constant(np.pi / 3, -0.078)
    assert np.allclose(scan.value / scan.ratio, expected, rtol=0.02)
    # each vertical direction carries the ratio itself within ten percent
    for series in (scan.upward, scan.downward):
        assert np.all((series / scan.ratio >= 0.9) & (series / scan.ratio <= 1.1))


@pytest.mark.slow
@pytest.mark.parametrize("detuning, table_period", [(-3.445, 4.0), (8.3442, 7.7), (-0.6642, 3.03)])
def test_size_scan_oscillates_with_the_bloch_period(ribbon_lattice, detuning, table_period):
    omega = ribbon_lattice.omega_at(detuning)
    photon = single_port_input(ribbon_lattice, omega, 4)
    scan = size_scan(ribbon_lattice, range(1, 101), photon, omega, threads=4)
    found = oscillation_period(scan.s_x)
    expected_bin = 100 / predicted_period(resonant_kx(ribbon_lattice, omega))
    assert abs(found.peak_bin - expected_bin) <= 1
    assert abs(found.peak_bin - 100 / table_period) <= 1


@pytest.mark.slow
def test_band_gap_blocks_transmission():
    lattice = LatticeParams.from_decay_rates(n_x=100, n_y=5, gamma_x=0.01, gamma_y=0.0004, phi0=np.pi / 6)
    detuning = 0.6
    # every y level keeps the shifted detuning inside the 1D gap
    shifts = np.linalg.eigvals(coupling_block(5, lattice.gamma_y, lattice.phi0)).real / lattice.gamma_x
    low, high = gap_range(lattice.phi0)
    assert np.all((detuning - shifts > low) & (detuning - shifts < high))
    omega = lattice.omega_at(detuning)
    photon = single_port_input(lattice, omega, 2)
    scan = size_scan(lattice, range(1, 101), photon, omega, threads=4)
    assert scan.s_x[-1] < 1e-3
    assert np.all(np.diff(scan.s_x[19:]) <= 1e-6)
    # the array reflects what it does not pass upward or downward
    assert np.all(np.diff(scan.s_xbar[19:]) <= 1e-6)
    assert scan.s_xbar[-1] > 0.5
