import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.errors import InvalidParameter

FloatArray = NDArray[np.float64]

PERIOD = 2.0 * math.pi


# Uniform n×n grid on the torus [0, 2π)², nodes at (i·h, j·h); arrays over the
# grid are indexed [i (x), j (y)].
@dataclass(frozen=True)
class PeriodicGrid:
    n: int

    def __post_init__(self) -> None:
        if self.n < 4 or self.n % 2 != 0:
            raise InvalidParameter(f'periodic grid needs an even n >= 4, got {self.n}')

    @property
    def spacing(self) -> float:
        return PERIOD / self.n

    @property
    def area(self) -> float:
        return PERIOD**2

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    def coordinates(self) -> tuple[FloatArray, FloatArray]:
        axis = self.spacing * np.arange(self.n)
        x, y = np.meshgrid(axis, axis, indexing='ij')
        return x, y

    # integer wavenumbers for the full FFT axis and the half (rfft) axis
    def wavenumbers(self) -> tuple[FloatArray, FloatArray]:
        kx = np.fft.fftfreq(self.n, d=1.0 / self.n)[:, None]
        ky = np.fft.rfftfreq(self.n, d=1.0 / self.n)[None, :]
        return kx, ky

    # eigenvalue of −Δ_h (five-point, periodic) on Fourier mode (a, b)
    def laplacian_eigenvalue(self, a: int, b: int) -> float:
        scale = 4.0 / self.spacing**2
        return scale * (math.sin(math.pi * a / self.n) ** 2 + math.sin(math.pi * b / self.n) ** 2)


# Five-point periodic Laplacian over the two leading axes.
def periodic_laplacian(values: FloatArray, grid: PeriodicGrid) -> FloatArray:
    neighbours = (
        np.roll(values, 1, axis=0)
        + np.roll(values, -1, axis=0)
        + np.roll(values, 1, axis=1)
        + np.roll(values, -1, axis=1)
    )
    return (neighbours - 4.0 * values) / grid.cell_area
