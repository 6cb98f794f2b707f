from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.errors import InvalidParameter

FloatArray = NDArray[np.float64]
Scalar = Union[float, FloatArray]

# Γ(σ) = 1 − τ³(10 − 15τ + 6τ²) with τ = |σ| − 1 on the transition 1 < |σ| < 2.
# These coefficients are part of the configuration reference; any other
# implementation must use the same ones to agree bit for bit.
TRANSITION_COEFFICIENTS = (10.0, -15.0, 6.0)
# ∫₀^τ of the quintic step above, and T at full cutoff (σ ≥ 2)
PRIMITIVE_COEFFICIENTS = (2.5, -3.0, 1.0)
SATURATION = 1.5


@dataclass(frozen=True)
class TruncationOps:
    level: float

    def __post_init__(self) -> None:
        if not self.level > 0:
            raise InvalidParameter(f'truncation level must be positive, got {self.level}')


def _transition(s: Scalar, level: float) -> tuple[FloatArray, FloatArray]:
    sigma = np.abs(np.asarray(s, dtype=np.float64)) / level
    tau = np.clip(sigma - 1.0, 0.0, 1.0)
    return sigma, tau


def cutoff(ops: TruncationOps, s: Scalar) -> FloatArray:
    sigma, tau = _transition(s, ops.level)
    c3, c4, c5 = TRANSITION_COEFFICIENTS
    step = tau**3 * (c3 + c4 * tau + c5 * tau**2)
    return np.where(sigma <= 1.0, 1.0, np.where(sigma >= 2.0, 0.0, 1.0 - step))


# T_ℓ(s) = ∫₀ˢ Γ_ℓ; returns s itself (not ℓ·(s/ℓ)) below the level so that
# inactive truncation is bit-exact.
def primitive(ops: TruncationOps, s: Scalar) -> FloatArray:
    values = np.asarray(s, dtype=np.float64)
    sigma, tau = _transition(values, ops.level)
    p4, p5, p6 = PRIMITIVE_COEFFICIENTS
    ramp = 1.0 + tau - tau**4 * (p4 + p5 * tau + p6 * tau**2)
    saturated = np.where(sigma >= 2.0, SATURATION, ramp)
    return np.where(sigma <= 1.0, values, np.sign(values) * ops.level * saturated)


def scaled(ops: TruncationOps, s: Scalar) -> FloatArray:
    return np.asarray(s, dtype=np.float64) * cutoff(ops, s)


def evaluate_truncations(ops: TruncationOps, s: float) -> tuple[float, float, float]:
    return (float(cutoff(ops, s)), float(primitive(ops, s)), float(scaled(ops, s)))
