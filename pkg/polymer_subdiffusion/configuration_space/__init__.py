from polymer_subdiffusion.configuration_space.potential import (
    FenePotential,
    MaxwellianTable,
    SpringPotential,
    build_maxwellian,
    fene_center_value,
)
from polymer_subdiffusion.configuration_space.stress import (
    field_stress,
    kramers_stress,
    profile_gradient,
    stress_bound_constant,
    truncated_stress,
)
from polymer_subdiffusion.configuration_space.truncation import (
    TruncationOps,
    cutoff,
    evaluate_truncations,
    primitive,
    scaled,
)

__all__ = [
    'FenePotential',
    'MaxwellianTable',
    'SpringPotential',
    'TruncationOps',
    'build_maxwellian',
    'cutoff',
    'evaluate_truncations',
    'fene_center_value',
    'field_stress',
    'kramers_stress',
    'primitive',
    'profile_gradient',
    'scaled',
    'stress_bound_constant',
    'truncated_stress',
]
