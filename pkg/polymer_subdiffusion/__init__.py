from typing import Optional

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.coupled_driver import (
    ENERGY_TOLERANCE,
    RunResult,
    SimulationSetup,
    StateObserver,
    energy_report,
    energy_satisfied,
    initial_state,
    prepare,
    run_from,
)
from polymer_subdiffusion.io_cli.config import SimulationConfig, parse_config


class Simulator:
    # Keeps the tabulated kernel, the Maxwellian table and the assembled
    # operators of one configuration, so repeated runs reuse the factorized
    # diffusion blocks cached on the operator set.

    config: SimulationConfig
    setup: SimulationSetup

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.setup = prepare(config)

    @staticmethod
    def from_text(text: str) -> 'Simulator':
        return Simulator(parse_config(text))

    def run(
        self,
        keep_states: bool = False,
        observer: Optional[StateObserver] = None,
        profile: Optional[NDArray[np.float64]] = None,
    ) -> RunResult:
        state = initial_state(self.setup, profile)
        return run_from(self.setup, state, keep_states=keep_states, observer=observer)

    def energy_report(self, result: RunResult) -> NDArray[np.float64]:
        return energy_report(result.diagnostics, self.setup.kernel)

    def energy_satisfied(self, result: RunResult, tolerance: float = ENERGY_TOLERANCE) -> bool:
        return energy_satisfied(result.diagnostics, self.setup.kernel, tolerance)
