from typing import Literal

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.configuration_space.potential import MaxwellianTable
from polymer_subdiffusion.configuration_space.truncation import TruncationOps, primitive
from polymer_subdiffusion.errors import ShapeMismatch

FloatArray = NDArray[np.float64]

StressForm = Literal['gradient', 'potential']


def _check_profile(psi: FloatArray, tab: MaxwellianTable) -> None:
    if psi.shape[-2:] != tab.shape:
        raise ShapeMismatch(f'profile shape {psi.shape} does not match the table {tab.shape}')


# ∇_q ψ̂ in Cartesian components from polar differences: second order in r on
# the Gauss nodes (one-sided at the ends), centered and periodic in θ.
def profile_gradient(psi: FloatArray, tab: MaxwellianTable) -> FloatArray:
    _check_profile(psi, tab)
    d_r = np.gradient(psi, tab.r, axis=-2, edge_order=2)
    d_theta = (np.roll(psi, -1, axis=-1) - np.roll(psi, 1, axis=-1)) / (2.0 * tab.d_theta)
    cos, sin = np.cos(tab.theta), np.sin(tab.theta)
    angular = d_theta / tab.r[:, None]
    return np.stack([cos * d_r - sin * angular, sin * d_r + cos * angular])


def kramers_stress(psi: FloatArray, tab: MaxwellianTable, form: StressForm) -> FloatArray:
    _check_profile(psi, tab)
    if psi.ndim != 2:
        raise ShapeMismatch(f'kramers_stress takes one q-profile, got shape {psi.shape}')

    weighted = tab.mass_weights * psi
    if form == 'potential':
        # −(∫Mψ̂)·I + ∫Mψ̂·qqᵀU′
        return np.einsum('abij,ij->ab', tab.moment, weighted) - np.sum(weighted) * np.eye(2)

    # ∫ M ∇_q ψ̂ ⊗ q
    gradient = profile_gradient(psi, tab)
    return np.einsum('aij,bij,ij->ab', gradient, tab.q, tab.mass_weights)


def truncated_stress(psi: FloatArray, tab: MaxwellianTable, ops: TruncationOps) -> FloatArray:
    return kramers_stress(primitive(ops, psi), tab, 'potential')


# S_ℓ at every x-node at once: psi has shape (..., n_r, n_theta), the result (..., 2, 2).
def field_stress(psi: FloatArray, tab: MaxwellianTable, ops: TruncationOps) -> FloatArray:
    _check_profile(psi, tab)
    weighted = primitive(ops, psi) * tab.mass_weights
    mass = np.sum(weighted, axis=(-2, -1))
    second = np.einsum('...ij,abij->...ab', weighted, tab.moment)
    return second - mass[..., None, None] * np.eye(2)


# Entry-wise bound C for |S_ℓ(ψ̂)| ≤ C·ℓ from |T_ℓ| ≤ 1.5ℓ and the table moments.
def stress_bound_constant(tab: MaxwellianTable) -> float:
    moment = np.abs(tab.moment).max(axis=(0, 1))
    return float(1.5 * np.sum(tab.mass_weights * (1.0 + moment)))
