"""Eigenstructure of the complex-symmetric effective Hamiltonians.

Eigenvectors are normalized with the unconjugated product (sum psi^2 = 1), so
the resolvent expands as G = sum_n psi_n psi_n^T / (omega - omega_n).
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from common.wqed.errors import InvalidInputError, UnreliableReconstructionError
from common.wqed.hamiltonians import (EffectiveHamiltonian, InverseChainCoefficients, build_h1d,
                                      build_inverse_h1d, build_inverse_h2d, coupling_block)
from common.wqed.model import LatticeParams, single_port_input
from common.wqed.transfer_oracle import dispersion_1d

logger = logging.getLogger(__name__)

SELF_ORTHOGONAL_TOLERANCE = 1e-10
DEGENERACY_TOLERANCE = 1e-8
EXCLUDED_WEIGHT_LIMIT = 1e-6
ZERO_PROBABILITY = 1e-14
CORNER_CANDIDATES = 30


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    ipr: np.ndarray
    flagged: np.ndarray

    @property
    def usable(self) -> np.ndarray:
        return ~self.flagged

    def residual(self, matrix: np.ndarray) -> np.ndarray:
        """||H psi_n - omega_n psi_n|| per state."""
        return np.linalg.norm(matrix @ self.eigenvectors - self.eigenvectors * self.eigenvalues, axis=0)


def inverse_participation_ratio(vectors: np.ndarray) -> np.ndarray:
    """sum |psi|^4 / (sum |psi|^2)^2 along the first axis."""
    weights = np.abs(vectors) ** 2
    return np.sum(weights ** 2, axis=0) / np.sum(weights, axis=0) ** 2


def _bilinear_orthogonalize(vectors: np.ndarray, cluster: np.ndarray) -> None:
    """Modified Gram-Schmidt with the unconjugated product inside a degenerate cluster."""
    for position, a in enumerate(cluster):
        norm = np.sum(vectors[:, a] ** 2)
        if abs(norm) < SELF_ORTHOGONAL_TOLERANCE * np.sum(np.abs(vectors[:, a]) ** 2):
            continue
        vectors[:, a] /= np.sqrt(norm)
        for b in cluster[position + 1:]:
            vectors[:, b] -= np.sum(vectors[:, a] * vectors[:, b]) * vectors[:, a]


def eigendecompose(H: Union[EffectiveHamiltonian, np.ndarray]) -> SpectralDecomposition:
    matrix = H.matrix if isinstance(H, EffectiveHamiltonian) else np.asarray(H, dtype=complex)
    eigenvalues, vectors = la.eig(matrix)
    order = np.lexsort((eigenvalues.imag, eigenvalues.real))
    eigenvalues, vectors = eigenvalues[order], vectors[:, order].astype(complex)

    scale = max(np.linalg.norm(matrix), 1e-300)
    start = 0
    for stop in range(1, len(eigenvalues) + 1):
        if stop == len(eigenvalues) or abs(eigenvalues[stop] - eigenvalues[stop - 1]) > DEGENERACY_TOLERANCE * scale:
            if stop - start > 1:
                _bilinear_orthogonalize(vectors, np.arange(start, stop))
            start = stop

    norms = np.sum(vectors ** 2, axis=0)
    magnitudes = np.sum(np.abs(vectors) ** 2, axis=0)
    flagged = np.abs(norms) < SELF_ORTHOGONAL_TOLERANCE * magnitudes
    vectors[:, ~flagged] /= np.sqrt(norms[~flagged])
    vectors[:, flagged] /= np.sqrt(magnitudes[flagged])
    if flagged.any():
        logger.warning("%d near self-orthogonal eigenstates flagged", int(flagged.sum()))
    return SpectralDecomposition(eigenvalues=eigenvalues, eigenvectors=vectors,
                                 ipr=inverse_participation_ratio(vectors), flagged=flagged)


def _excluded_weight(dec: SpectralDecomposition, left: np.ndarray, right: np.ndarray) -> float:
    contributions = np.abs(left * right)
    total = contributions.sum()
    if total == 0:
        return 0.0
    return float(contributions[dec.flagged].sum() / total)


def spectral_green_entry(dec: SpectralDecomposition, omega: float, i: int, i_prime: int) -> complex:
    """sum_n psi_n(i) psi_n(i') / (omega - omega_n) over the usable states."""
    left, right = dec.eigenvectors[i], dec.eigenvectors[i_prime]
    excluded = _excluded_weight(dec, left, right)
    if excluded > EXCLUDED_WEIGHT_LIMIT:
        raise UnreliableReconstructionError(excluded)
    usable = dec.usable
    return complex(np.sum(left[usable] * right[usable] / (omega - dec.eigenvalues[usable])))


def most_subradiant_y(lattice: LatticeParams) -> complex:
    """Eigenvalue of the bare y-chain coupling with the smallest decay rate.

    Ties are broken towards the smaller real part.
    """
    values = la.eigvals(coupling_block(lattice.n_y, lattice.gamma_y, lattice.phi0))
    decay = np.abs(values.imag)
    candidates = np.flatnonzero(decay <= decay.min() + 1e-12 * max(lattice.gamma_y, 1.0))
    return complex(values[candidates[np.argmin(values[candidates].real)]])


def subradiant_frequencies(lattice: LatticeParams, all_levels: bool = False) -> np.ndarray:
    """Re(omega_x^s + omega_y^s0) for every x-chain state, sorted.

    With all_levels every y level n contributes Re(omega_x^s + omega_y^n): the
    forward-transmission maxima of a port sweep sit on this full set.
    """
    x_levels = la.eigvals(build_h1d(lattice.n_x, lattice.gamma_x, lattice.phi0, lattice.omega0).matrix)
    if not all_levels:
        return np.sort((x_levels + most_subradiant_y(lattice)).real)
    y_levels = la.eigvals(coupling_block(lattice.n_y, lattice.gamma_y, lattice.phi0))
    return np.sort((x_levels[:, None] + y_levels[None, :]).real.ravel())


@dataclass(frozen=True)
class RibbonBands:
    k_grid: np.ndarray
    y_levels: np.ndarray
    bands: np.ndarray
    subradiant_branch: int


def ribbon_bands(lattice: LatticeParams, kx_grid: Sequence[float]) -> RibbonBands:
    """Re[omega_x(k) + omega_y^n] on a k grid, one row per y level ordered by real part."""
    k_grid = np.asarray(kx_grid, dtype=float)
    y_levels = la.eigvals(coupling_block(lattice.n_y, lattice.gamma_y, lattice.phi0))
    y_levels = y_levels[np.lexsort((y_levels.imag, y_levels.real))]
    omega_x = lattice.omega0 + dispersion_1d(lattice.gamma_x, lattice.phi0, k_grid)
    bands = (omega_x[None, :] + y_levels[:, None]).real
    branch = int(np.argmin(np.abs(y_levels - most_subradiant_y(lattice))))
    return RibbonBands(k_grid=k_grid, y_levels=y_levels, bands=bands, subradiant_branch=branch)


@dataclass(frozen=True)
class SymmetryDecomposition:
    s_xbar: float
    p_xbar: float
    chi_xbar: np.ndarray


def symmetry_decomposition(lattice: LatticeParams, omega: float, l_in: int) -> SymmetryDecomposition:
    """Backward total and mean position from the separable Markov spectra.

    chi_xbar(l) = -i gamma_x sum_{n_x, n_y} d_{n_x}^2 psi_{n_y}(l) psi_{n_y}(l_in) / (omega - omega_{n_x} - omega_{n_y})
    with dipole moments d_{n_x} = sum_j exp(i kappa x_j) psi_{n_x}(j).
    """
    photon = single_port_input(lattice, omega, l_in)
    x_dec = eigendecompose(build_h1d(lattice.n_x, lattice.gamma_x, lattice.phi0, lattice.omega0))
    y_dec = eigendecompose(coupling_block(lattice.n_y, lattice.gamma_y, lattice.phi0))
    for dec in (x_dec, y_dec):
        if dec.flagged.any():
            raise UnreliableReconstructionError(float(dec.flagged.mean()))

    dipoles = np.exp(1j * photon.kappa * lattice.x_positions()) @ x_dec.eigenvectors
    weights = dipoles[:, None] ** 2 / (omega - x_dec.eigenvalues[:, None] - y_dec.eigenvalues[None, :])
    correlation = y_dec.eigenvectors * y_dec.eigenvectors[l_in - 1][None, :]
    chi_xbar = -1j * lattice.gamma_x * (correlation @ weights.sum(axis=0))

    probability = np.abs(chi_xbar) ** 2
    s_xbar = float(probability.sum())
    p_xbar = float(np.dot(np.arange(1, lattice.n_y + 1), probability) / s_xbar) if s_xbar > 1e-12 else float("nan")
    return SymmetryDecomposition(s_xbar=s_xbar, p_xbar=p_xbar, chi_xbar=chi_xbar)


def scale_free_F(coeffs: InverseChainCoefficients, theta):
    """F(theta) = ln|(J e^{i theta} - C) / (J e^{-i theta} - C)| with J = A - B."""
    J = coeffs.A - coeffs.B
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(J * np.exp(1j * theta) - coeffs.C)) - np.log(np.abs(J * np.exp(-1j * theta) - coeffs.C))


@dataclass(frozen=True)
class ScaleFreeCurve:
    theta: np.ndarray
    inverse_energy: np.ndarray
    decay_ratio: np.ndarray
    dropped: np.ndarray


def _axes(gamma: float, energies: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    scaled = gamma * np.asarray(energies, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        return scaled.real, scaled.imag / np.abs(scaled) ** 2


def scale_free_curve(coeffs: InverseChainCoefficients, thetas: Sequence[float], n: int) -> ScaleFreeCurve:
    """Analytic (inverse energy, decay ratio) curve of the scale-free states of an n-site inverse chain."""
    if n < 2:
        raise InvalidInputError(f"inverse chain needs at least two sites, got {n}", field="n")
    thetas = np.asarray(thetas, dtype=float)
    J = coeffs.A - coeffs.B
    denominator = np.abs(J * np.exp(-1j * thetas) - coeffs.C)
    F = scale_free_F(coeffs, thetas)
    bad = ~np.isfinite(F) | (denominator < 1e-12 * (abs(J) + abs(coeffs.C)))
    if bad.any():
        logger.warning("dropped %d divergent scale-free samples", int(bad.sum()))
    kept = thetas[~bad]
    energies = 2 * coeffs.C * np.cos(kept) + coeffs.B + 1j * 2 * coeffs.C * np.sin(kept) * F[~bad] / n
    inverse_energy, decay_ratio = _axes(coeffs.gamma, energies)
    return ScaleFreeCurve(theta=kept, inverse_energy=inverse_energy, decay_ratio=decay_ratio, dropped=thetas[bad])


@dataclass(frozen=True)
class InverseSpectrum:
    eigenvalues: np.ndarray
    inverse_energy: np.ndarray
    decay_ratio: np.ndarray
    ipr: np.ndarray
    eigenvectors: np.ndarray


def inverse_chain_spectrum(coeffs: InverseChainCoefficients, n: int) -> InverseSpectrum:
    dec = eigendecompose(build_inverse_h1d(n, coeffs))
    inverse_energy, decay_ratio = _axes(coeffs.gamma, dec.eigenvalues)
    return InverseSpectrum(eigenvalues=dec.eigenvalues, inverse_energy=inverse_energy,
                           decay_ratio=decay_ratio, ipr=dec.ipr, eigenvectors=dec.eigenvectors)


def inverse_square_spectrum(coeffs: InverseChainCoefficients, n: int) -> SpectralDecomposition:
    return eigendecompose(build_inverse_h2d(n, coeffs))


class SquareBasis(Enum):
    PRODUCT = "product"
    SYMMETRIZED = "symmetrized"


@dataclass(frozen=True)
class SquareStates:
    eigenvalues: np.ndarray
    fields: np.ndarray
    ipr: np.ndarray
    pairs: np.ndarray
    basis: SquareBasis

    def field(self, index: int) -> np.ndarray:
        return self.fields[:, :, index]

    def ranked(self, count: int = None) -> np.ndarray:
        """State indices by descending IPR."""
        order = np.argsort(-self.ipr, kind="stable")
        return order if count is None else order[:count]


def inverse_square_states(coeffs: InverseChainCoefficients, n: int,
                          basis: SquareBasis = SquareBasis.SYMMETRIZED) -> SquareStates:
    """Eigenstates of the inverse square assembled from the chain eigenstates.

    Every pair a != b of chain states is exchange degenerate. The product basis
    keeps psi_a(j) psi_b(l); the symmetrized basis replaces each pair by
    (psi_a psi_b +- psi_b psi_a) / sqrt(2), the x <-> y even and odd states.
    """
    chain = inverse_chain_spectrum(coeffs, n)
    vectors, energies = chain.eigenvectors, chain.eigenvalues
    eigenvalues, fields, pairs = [], [], []
    for a in range(n):
        for b in range(a if basis is SquareBasis.SYMMETRIZED else 0, n):
            product = np.outer(vectors[:, a], vectors[:, b])
            if basis is SquareBasis.SYMMETRIZED and a != b:
                combinations = [(product + product.T) / np.sqrt(2), (product - product.T) / np.sqrt(2)]
            else:
                combinations = [product]
            for combination in combinations:
                eigenvalues.append(energies[a] + energies[b])
                fields.append(combination)
                pairs.append((a, b))
    fields = np.stack(fields, axis=-1)
    return SquareStates(eigenvalues=np.asarray(eigenvalues), fields=fields,
                        ipr=inverse_participation_ratio(fields.reshape(n * n, -1)),
                        pairs=np.asarray(pairs, dtype=int), basis=basis)


class FitForm(Enum):
    EDGE = "edge"
    CORNER_TWO = "corner_two"
    CORNER_FOUR = "corner_four"


@dataclass(frozen=True)
class ScaleFreeFit:
    F: float
    form: FitForm
    residual: float
    baseline: float

    @property
    def quality(self) -> float:
        """Flat-profile misfit over the fitted misfit."""
        return float(self.baseline / self.residual) if self.residual > 0 else float("inf")


def _log_cosh2(z: np.ndarray) -> np.ndarray:
    """log((2 cosh z)^2) without overflow."""
    return 2 * np.logaddexp(z, -z)


def _log_shapes(form: FitForm, shape: Tuple[int, ...]):
    n = shape[0]
    u = np.arange(1, n + 1) - (n + 1) / 2
    if form is FitForm.EDGE:
        if len(shape) != 1:
            raise InvalidInputError("edge fits take a chain profile", field="state")
        return [lambda F: _log_cosh2(F * u / n)]
    if len(shape) != 2 or shape[0] != shape[1]:
        raise InvalidInputError("corner fits take a square n x n profile", field="state")
    ux, vy = np.meshgrid(u, u, indexing="ij")
    if form is FitForm.CORNER_TWO:
        return [lambda F: _log_cosh2(F * (ux + vy) / n), lambda F: _log_cosh2(F * (ux - vy) / n)]

    def four_corner(F):
        diagonal, anti = F * (ux + vy) / n, F * (ux - vy) / n
        return 2 * logsumexp(np.stack([diagonal, -diagonal, anti, -anti]), axis=0)

    return [four_corner]


def fit_scale_free(state: np.ndarray, form: FitForm) -> ScaleFreeFit:
    """Least squares for F on the log-probability, weighted by the site probability.

    Sites below 1e-14 are excluded. The baseline is the misfit of a flat profile.
    """
    probability = np.abs(np.asarray(state)) ** 2
    probability = probability / probability.sum()
    mask = probability > ZERO_PROBABILITY
    log_p = np.log(probability[mask])
    weights = probability[mask] / probability[mask].sum()

    def misfit(log_shape: np.ndarray) -> float:
        residual = log_p - log_shape[mask]
        residual = residual - np.dot(weights, residual)
        return float(np.dot(weights, residual ** 2))

    baseline = misfit(np.zeros(probability.shape))
    n = probability.shape[0]
    grid = np.concatenate([[0.0], np.geomspace(1e-3, 20.0 * n, 400)])
    best = None
    for shape in _log_shapes(form, probability.shape):
        objective = lambda F: misfit(shape(F))
        values = np.array([objective(F) for F in grid])
        at = int(np.argmin(values))
        lower, upper = grid[max(at - 1, 0)], grid[min(at + 1, len(grid) - 1)]
        if upper > lower:
            found = minimize_scalar(objective, bounds=(lower, upper), method="bounded",
                                    options={"xatol": 1e-12 * max(upper, 1.0)})
            F, value = (float(found.x), float(found.fun)) if found.fun <= values[at] else (grid[at], values[at])
        else:
            F, value = float(grid[at]), float(values[at])
        if best is None or value < best[1]:
            best = (F, value)
    logger.debug("%s fit: F=%.6g residual=%.3e baseline=%.3e", form.value, best[0], best[1], baseline)
    return ScaleFreeFit(F=best[0], form=form, residual=best[1], baseline=baseline)


def best_corner_fit(states: SquareStates, form: FitForm,
                    candidates: int = CORNER_CANDIDATES) -> Tuple[int, ScaleFreeFit]:
    """Highest-quality fit among the largest-IPR states; returns (state index, fit)."""
    if form is FitForm.EDGE:
        raise InvalidInputError("corner searches take a corner form", field="form")
    best = None
    for index in states.ranked(candidates):
        fit = fit_scale_free(states.field(int(index)), form)
        if best is None or fit.quality > best[1].quality:
            best = (int(index), fit)
    logger.info("best %s state %d (pair %s): F=%.4g, quality %.3g", form.value, best[0],
                tuple(states.pairs[best[0]]), best[1].F, best[1].quality)
    return best
