import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.configuration_space import TruncationOps, cutoff
from polymer_subdiffusion.errors import CFLViolation, InvalidParameter, ShapeMismatch
from polymer_subdiffusion.fokker_planck import TransportData
from polymer_subdiffusion.grid import PeriodicGrid
from polymer_subdiffusion.utilities.array import read_only
from polymer_subdiffusion.utilities.predicates import is_finite_number

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
ComplexArray = NDArray[np.complex128]

# two-thirds rule: modes with |k| ≥ n/3 are dropped from the convection product
DEALIAS_FRACTION = 1.0 / 3.0


@dataclass(frozen=True, eq=False)
class _Wavenumbers:
    kx: FloatArray
    ky: FloatArray
    square: FloatArray
    inverse_square: FloatArray
    resolved: NDArray[np.bool_]
    dealias: NDArray[np.bool_]
    # 1 on the ky = 0 and Nyquist columns, 2 elsewhere: multiplicity of a
    # half-spectrum entry in the full spectrum
    multiplicity: FloatArray


# One table per grid size, shared between calls; every array in it is read-only.
@functools.lru_cache(maxsize=None)
def _wavenumbers(grid: PeriodicGrid) -> _Wavenumbers:
    n = grid.n
    kx, ky = grid.wavenumbers()
    square = kx**2 + ky**2
    inverse_square = np.divide(1.0, square, out=np.zeros_like(square), where=square > 0)
    resolved = (np.abs(kx) < n // 2) & (np.abs(ky) < n // 2)
    dealias = (np.abs(kx) < DEALIAS_FRACTION * n) & (np.abs(ky) < DEALIAS_FRACTION * n)
    multiplicity = np.full(ky.shape, 2.0)
    multiplicity[:, 0] = 1.0
    multiplicity[:, -1] = 1.0

    return _Wavenumbers(
        kx=read_only(kx),
        ky=read_only(ky),
        square=read_only(square),
        inverse_square=read_only(inverse_square),
        resolved=np.broadcast_to(resolved, square.shape),
        dealias=np.broadcast_to(dealias, square.shape),
        multiplicity=np.broadcast_to(multiplicity, square.shape),
    )


def _forward(values: FloatArray) -> ComplexArray:
    return np.fft.rfft2(values, axes=(-2, -1))


def _inverse(spectrum: ComplexArray, grid: PeriodicGrid) -> FloatArray:
    return np.fft.irfft2(spectrum, s=(grid.n, grid.n), axes=(-2, -1))


# Samples u (2, n, n) and ∇u (n, n, 2, 2) with [a, b] = ∂_b u_a, kept together
# with the spectrum they were synthesized from.
@dataclass(frozen=True, eq=False)
class VelocityField:
    grid: PeriodicGrid
    spectrum: ComplexArray
    values: FloatArray
    gradient: FloatArray

    @staticmethod
    def from_spectrum(grid: PeriodicGrid, spectrum: ComplexArray) -> 'VelocityField':
        waves = _wavenumbers(grid)
        derivatives = np.stack([1j * waves.kx * spectrum, 1j * waves.ky * spectrum], axis=1)
        gradient = np.moveaxis(_inverse(derivatives, grid), (0, 1), (2, 3))
        return VelocityField(
            grid=grid,
            spectrum=read_only(spectrum),
            values=read_only(_inverse(spectrum, grid)),
            gradient=read_only(np.ascontiguousarray(gradient)),
        )


@dataclass(frozen=True, eq=False)
class StressField:
    values: FloatArray

    def __post_init__(self) -> None:
        if self.values.ndim != 4 or self.values.shape[-2:] != (2, 2):
            raise ShapeMismatch(
                f'stress samples must have shape (n, n, 2, 2), got {self.values.shape}'
            )


# One forcing term a·sin(ξ·x) with an integer wavevector ξ ≠ 0.
@dataclass(frozen=True)
class ForcingMode:
    wavevector: tuple[int, int]
    amplitude: tuple[float, float]

    def __post_init__(self) -> None:
        if self.wavevector == (0, 0):
            raise InvalidParameter('forcing mode (0, 0) would add mean momentum')
        if not all(is_finite_number(a) for a in self.amplitude):
            raise InvalidParameter(f'forcing amplitude must be finite, got {self.amplitude}')


@dataclass(frozen=True)
class Forcing:
    modes: tuple[ForcingMode, ...] = ()

    def scaled(self, factor: float) -> 'Forcing':
        return Forcing(
            tuple(
                ForcingMode(m.wavevector, (factor * m.amplitude[0], factor * m.amplitude[1]))
                for m in self.modes
            )
        )


def zero_stress(grid: PeriodicGrid) -> StressField:
    return StressField(np.zeros((grid.n, grid.n, 2, 2)))


def forcing_samples(forcing: Forcing, grid: PeriodicGrid) -> FloatArray:
    x, y = grid.coordinates()
    samples = np.zeros((2, grid.n, grid.n))
    for mode in forcing.modes:
        kx, ky = mode.wavevector
        if max(abs(kx), abs(ky)) >= grid.n // 2:
            raise InvalidParameter(f'forcing mode {mode.wavevector} is not resolved on n={grid.n}')
        phase = np.sin(kx * x + ky * y)
        samples[0] += mode.amplitude[0] * phase
        samples[1] += mode.amplitude[1] * phase
    return samples


# Σ_ξ weight(ξ)·|v̂(ξ)|², normalized so that weight ≡ 1 gives ∫_Ω |v|².
def _spectral_sum(spectrum: ComplexArray, weight: FloatArray, grid: PeriodicGrid) -> float:
    waves = _wavenumbers(grid)
    scale = grid.area / grid.n**4
    terms = waves.multiplicity * weight * np.abs(spectrum) ** 2
    return float(scale * np.sum(terms))


def forcing_norm_squared(forcing: Forcing, grid: PeriodicGrid) -> float:
    spectrum = _forward(forcing_samples(forcing, grid))
    return _spectral_sum(spectrum, _wavenumbers(grid).inverse_square, grid)


# (I − ξξᵀ/|ξ|²)v̂; the mean and the unpaired Nyquist modes are set to zero.
def _project(spectrum: ComplexArray, grid: PeriodicGrid) -> ComplexArray:
    waves = _wavenumbers(grid)
    parallel = (waves.kx * spectrum[0] + waves.ky * spectrum[1]) * waves.inverse_square
    projected = np.stack([spectrum[0] - waves.kx * parallel, spectrum[1] - waves.ky * parallel])
    return np.where(waves.resolved & (waves.square > 0), projected, 0.0)


def leray_project(raw: FloatArray, grid: PeriodicGrid) -> VelocityField:
    samples = np.asarray(raw, dtype=np.float64)
    if samples.shape != (2, grid.n, grid.n):
        raise ShapeMismatch(f'velocity samples must have shape (2, n, n), got {samples.shape}')
    return VelocityField.from_spectrum(grid, _project(_forward(samples), grid))


def zero_velocity(grid: PeriodicGrid) -> VelocityField:
    return leray_project(np.zeros((2, grid.n, grid.n)), grid)


def taylor_green(grid: PeriodicGrid, amplitude: float = 1.0) -> VelocityField:
    x, y = grid.coordinates()
    samples = amplitude * np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    return leray_project(samples, grid)


def divergence(u: VelocityField) -> FloatArray:
    waves = _wavenumbers(u.grid)
    return _inverse(1j * (waves.kx * u.spectrum[0] + waves.ky * u.spectrum[1]), u.grid)


def divergence_norm(u: VelocityField) -> float:
    return float(np.max(np.abs(divergence(u))))


def kinetic_energy(u: VelocityField) -> float:
    return 0.5 * u.grid.cell_area * float(np.sum(u.values**2))


def enstrophy(u: VelocityField) -> float:
    return u.grid.cell_area * float(np.sum(u.gradient**2))


def l2_distance(u: VelocityField, v: VelocityField) -> float:
    return math.sqrt(u.grid.cell_area * float(np.sum((u.values - v.values) ** 2)))


def velocity_unbounded_check(u: VelocityField, trunc: TruncationOps) -> bool:
    return bool(np.max(np.sum(u.values**2, axis=0)) <= trunc.level)


def cfl_ratio(u: VelocityField, dt: float) -> float:
    speed = float(np.sqrt(np.max(np.sum(u.values**2, axis=0))))
    return speed * dt / u.grid.spacing


# div of a tensor field T[..., a, b] over its two leading (x, y) axes, row-wise:
# (div T)_a = Σ_b ∂_b T_ab.
def _tensor_divergence(tensor: FloatArray, grid: PeriodicGrid) -> ComplexArray:
    waves = _wavenumbers(grid)
    spectrum = _forward(np.moveaxis(tensor, (2, 3), (0, 1)))
    return 1j * (waves.kx * spectrum[:, 0] + waves.ky * spectrum[:, 1])


# û ← e^{−ν|ξ|²dt}·(û + dt·P[−div(Γ_ℓ(|u|²)u⊗u) + div S + f]).
def ns_step(
    u: VelocityField,
    stress: StressField,
    forcing: Forcing,
    trunc: TruncationOps,
    dt: float,
    viscosity: float = 1.0,
) -> VelocityField:
    grid = u.grid
    if stress.values.shape[:2] != (grid.n, grid.n):
        raise ShapeMismatch(f'stress covers {stress.values.shape[:2]}, grid is {grid.n}x{grid.n}')

    ratio = cfl_ratio(u, dt)
    logger.debug('convection CFL ratio %.3g', ratio)
    if ratio > 1.0:
        raise CFLViolation(f'convection CFL ratio {ratio:.3g} exceeds 1', ratio)

    waves = _wavenumbers(grid)
    weight = cutoff(trunc, np.sum(u.values**2, axis=0))
    flux = weight[:, :, None, None] * np.einsum('aij,bij->ijab', u.values, u.values)
    convection = -_tensor_divergence(flux, grid) * waves.dealias

    # derivatives of a constant tensor are zero; subtracting one sample keeps
    # them exactly zero through the transform
    fluctuation = stress.values - stress.values[:1, :1]
    source = convection + _tensor_divergence(fluctuation, grid)
    if forcing.modes:
        source = source + _forward(forcing_samples(forcing, grid))

    decay = np.exp(-viscosity * waves.square * dt)
    return VelocityField.from_spectrum(grid, decay * _project(u.spectrum + dt * source, grid))


# ∇u samples and volumetric x-face fluxes for the Fokker–Planck transport. The
# fluxes are differences of a stream function sampled at cell corners, so the
# net flux out of every cell vanishes identically.
def transport_data(u: VelocityField) -> TransportData:
    grid = u.grid
    waves = _wavenumbers(grid)
    vorticity = 1j * (waves.kx * u.spectrum[1] - waves.ky * u.spectrum[0])
    half = 0.5 * grid.spacing
    shift = np.exp(1j * (waves.kx + waves.ky) * half)
    corners = _inverse(vorticity * waves.inverse_square * shift, grid)
    east = corners - np.roll(corners, 1, axis=1)
    north = np.roll(corners, 1, axis=0) - corners
    return TransportData(
        gradient=u.gradient, east_flux=read_only(east), north_flux=read_only(north)
    )
