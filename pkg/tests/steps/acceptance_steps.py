from dataclasses import replace

import numpy as np
from behave import then, when
from behave.runner import Context

from polymer_subdiffusion import Simulator
from polymer_subdiffusion.coupled_driver import CoupledState, run_coupled
from polymer_subdiffusion.io_cli import format_diagnostics
from polymer_subdiffusion.navier_stokes import velocity_unbounded_check


@when('the coupled run is watched')
def step_watched_run(context: Context) -> None:
    simulator = Simulator(context.sim_config)
    bounded = []

    def watch(state: CoupledState) -> None:
        assert state.velocity is not None
        bounded.append(velocity_unbounded_check(state.velocity, simulator.setup.truncation))

    context.simulator = simulator
    context.result = simulator.run(observer=watch)
    context.velocity_bounded = bounded


@then('the mass drifts by at most {bound:g}')
def step_mass_drift(context: Context, bound: float) -> None:
    masses = np.array([record.mass for record in context.result.records])
    assert float(np.max(np.abs(masses - masses[0]))) <= bound, masses


@then('the entropy ends below its initial value')
def step_entropy_final(context: Context) -> None:
    records = context.result.records
    assert records[-1].entropy < records[0].entropy, (records[0].entropy, records[-1].entropy)


@then('the entropy decreases at every step')
def step_entropy_monotone(context: Context) -> None:
    entropies = np.array([record.entropy for record in context.result.records])
    assert np.all(np.diff(entropies) <= 1e-15), np.diff(entropies)
    assert entropies[-1] < entropies[0]


@then('the energy estimate holds with tolerance {tolerance:g}')
def step_energy_estimate(context: Context, tolerance: float) -> None:
    result = context.result
    assert context.simulator.energy_satisfied(result, tolerance), [
        record.energy_residual for record in result.records
    ]


@then('the truncation never acts on the velocity')
def step_truncation_inactive(context: Context) -> None:
    assert context.velocity_bounded and all(context.velocity_bounded)


@then('raising the truncation level to {level:g} gives identical diagnostics')
def step_truncation_independent(context: Context, level: float) -> None:
    raised = run_coupled(replace(context.sim_config, trunc_level=level))
    assert format_diagnostics(raised.records) == format_diagnostics(context.result.records)
