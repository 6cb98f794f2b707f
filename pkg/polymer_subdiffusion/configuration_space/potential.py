import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.special import roots_legendre

from polymer_subdiffusion.errors import InvalidParameter
from polymer_subdiffusion.utilities.array import read_only

FloatArray = NDArray[np.float64]


# FENE spring: U(s) = −(b/2)·ln(1 − 2s/b) on the ball of radius √b.
@dataclass(frozen=True)
class FenePotential:
    kind = 'fene'
    b: float

    @property
    def radius(self) -> float:
        return math.sqrt(self.b)

    def value(self, s: FloatArray) -> FloatArray:
        return -0.5 * self.b * np.log1p(-2.0 * s / self.b)

    def derivative(self, s: FloatArray) -> FloatArray:
        return 1.0 / (1.0 - 2.0 * s / self.b)


SpringPotential = FenePotential


# Z = ∫_D (1 − |q|²/b)^{b/2} dq = 2πb/(b+2) on the disk, so M(0) = 1/Z.
def fene_center_value(b: float) -> float:
    return (b + 2.0) / (2.0 * math.pi * b)


# Polar tensor-product quadrature on D and everything the solvers reuse from
# it. Arrays are indexed [radial node, angular node]; flattened degrees of
# freedom are row-major over that pair.
@dataclass(frozen=True, eq=False)
class MaxwellianTable:
    potential: SpringPotential
    r: FloatArray
    theta: FloatArray
    weights: FloatArray
    values: FloatArray
    gradient: FloatArray
    potential_derivative: FloatArray
    q: FloatArray
    moment: FloatArray
    r_faces: FloatArray
    normalization: float

    @property
    def n_r(self) -> int:
        return len(self.r)

    @property
    def n_theta(self) -> int:
        return len(self.theta)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_r, self.n_theta)

    @property
    def size(self) -> int:
        return self.n_r * self.n_theta

    @property
    def d_theta(self) -> float:
        return 2.0 * math.pi / self.n_theta

    # w·M, the per-node mass of ψ̂ ≡ 1
    @property
    def mass_weights(self) -> FloatArray:
        return self.weights * self.values

    def maxwellian_at(self, radius: FloatArray) -> FloatArray:
        b = self.potential.b
        return np.clip(1.0 - radius**2 / b, 0.0, None) ** (0.5 * b) / self.normalization


def build_maxwellian(pot: SpringPotential, n_r: int, n_theta: int) -> MaxwellianTable:
    if pot.b <= 2:
        raise InvalidParameter(f'FENE extensibility must exceed 2, got b={pot.b}')
    if n_r < 4 or n_theta < 4:
        raise InvalidParameter(f'polar grid needs n_r, n_theta >= 4, got ({n_r}, {n_theta})')

    radius = pot.radius
    nodes, node_weights = roots_legendre(n_r)
    r = 0.5 * radius * (nodes + 1.0)
    radial_weights = 0.5 * radius * node_weights * r
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    weights = np.outer(radial_weights, np.full(n_theta, 2.0 * math.pi / n_theta))

    half_square = 0.5 * r**2
    unnormalized = np.exp(-pot.value(half_square))
    normalization = float(np.sum(weights * unnormalized[:, None]))
    values = np.repeat((unnormalized / normalization)[:, None], n_theta, axis=1)

    q = np.stack([np.outer(r, np.cos(theta)), np.outer(r, np.sin(theta))])
    derivative = np.repeat(pot.derivative(half_square)[:, None], n_theta, axis=1)
    # ∇_q M = −U′(½|q|²)·q·M
    gradient = -derivative * q * values
    moment = np.einsum('aij,bij->abij', q, q) * derivative

    r_faces = np.concatenate([[0.0], 0.5 * (r[1:] + r[:-1]), [radius]])

    return MaxwellianTable(
        potential=pot,
        r=read_only(r),
        theta=read_only(theta),
        weights=read_only(weights),
        values=read_only(values),
        gradient=read_only(gradient),
        potential_derivative=read_only(derivative),
        q=read_only(q),
        moment=read_only(moment),
        r_faces=read_only(r_faces),
        normalization=normalization,
    )
