import math
from dataclasses import replace

import numpy as np
from behave import given, then, when
from behave.runner import Context

from polymer_subdiffusion import Simulator
from polymer_subdiffusion.coupled_driver import (
    Diagnostics,
    DiagnosticsRecord,
    energy_report,
    energy_satisfied,
    perturbation_experiment,
    run_coupled,
    stress_feedback_comparison,
)
from polymer_subdiffusion.errors import SimulationError
from polymer_subdiffusion.fokker_planck import field_shape
from polymer_subdiffusion.grid import PeriodicGrid
from polymer_subdiffusion.io_cli import format_diagnostics, parse_config
from polymer_subdiffusion.kernel_algebra import kernel_l1_norm, tabulate_kernel
from polymer_subdiffusion.navier_stokes import Forcing, ForcingMode, forcing_norm_squared

EQUILIBRIUM_ENTROPY = 1.0 / math.e


def _record(t: float, **overrides: float) -> DiagnosticsRecord:
    values = dict(
        t=t,
        ke=0.0,
        enstrophy=0.0,
        entropy=EQUILIBRIUM_ENTROPY,
        mass=1.0,
        min_psi=1.0,
        clip_mass=0.0,
        max_rho=1.0,
        stress_norm=0.0,
        energy_residual=math.nan,
        root_gradient=0.0,
    )
    values.update(overrides)
    return DiagnosticsRecord(**values)


def _diagnostics(records: list[DiagnosticsRecord]) -> Diagnostics:
    return Diagnostics(records=tuple(records), domain_area=1.0, forcing_norm=0.0, viscosity=1.0)


@given('the configuration')
def step_configuration(context: Context) -> None:
    context.sim_config = parse_config(context.text)


@given('a simulator for the configuration')
def step_simulator(context: Context) -> None:
    context.simulator = Simulator.from_text(context.text)


@given('an equilibrium diagnostics trace over {steps:d} steps')
def step_equilibrium_trace(context: Context, steps: int) -> None:
    context.kw = tabulate_kernel(context.spec)
    h = context.kw.h
    context.diagnostics = _diagnostics([_record(n * h) for n in range(steps + 1)])


@given('a diagnostics trace that is {defect}')
def step_defective_trace(context: Context, defect: str) -> None:
    kw = tabulate_kernel(context.spec)
    context.kw = kw
    records = [_record(n * kw.h) for n in range(kw.steps + 1)]
    if defect == 'empty':
        records = []
    elif defect == 'starting after zero':
        records = records[1:]
    elif defect == 'longer than the kernel':
        records.append(_record((kw.steps + 1) * kw.h))
    elif defect == 'missing the root-gradient term':
        records[3] = replace(records[3], root_gradient=math.nan)
    else:
        raise ValueError(f'unknown defect {defect!r}')
    context.diagnostics = _diagnostics(records)


@when('the coupled run is carried out')
def step_run(context: Context) -> None:
    try:
        context.result = run_coupled(context.sim_config, keep_states=True)
    except SimulationError as error:
        context.error = error


@when('the coupled run is carried out twice')
def step_run_twice(context: Context) -> None:
    context.results = [run_coupled(context.sim_config), run_coupled(context.sim_config)]


@when('the simulator runs twice')
def step_simulator_twice(context: Context) -> None:
    context.results = [context.simulator.run(), context.simulator.run()]
    context.result = context.results[0]


@when('the simulator runs from a uniform profile of height {height:g}')
def step_simulator_profile(context: Context, height: float) -> None:
    setup = context.simulator.setup
    profile = np.full(field_shape(setup.mode, setup.table), height)
    context.result = context.simulator.run(keep_states=True, profile=profile)


@when('the energy report is computed')
def step_energy_report(context: Context) -> None:
    try:
        context.residuals = energy_report(context.diagnostics, context.kw)
    except SimulationError as error:
        context.error = error


@when('the perturbation experiment runs with sizes {first:g} and {second:g}')
def step_perturbation_pair(context: Context, first: float, second: float) -> None:
    context.sizes = (first, second)
    context.traces = [perturbation_experiment(context.sim_config, size) for size in context.sizes]


@when('the perturbation experiment runs with size {size:g}')
def step_perturbation(context: Context, size: float) -> None:
    context.trace = perturbation_experiment(context.sim_config, size)


@when('the stress feedback is compared')
def step_feedback(context: Context) -> None:
    context.comparison = stress_feedback_comparison(context.sim_config)


@then('the velocity stays exactly zero')
def step_velocity_zero(context: Context) -> None:
    for state in context.result.states:
        assert state.velocity is not None
        assert not np.any(state.velocity.values), f'velocity moved at step {state.step}'


@then('the profile stays exactly one')
def step_profile_one(context: Context) -> None:
    for state in context.result.states:
        assert np.all(state.pdf.values == 1.0), f'profile moved at step {state.step}'


@then('the entropy column is {expected:g} throughout')
def step_entropy_column(context: Context, expected: float) -> None:
    for record in context.result.records:
        assert abs(record.entropy - expected) <= 1e-12, (record.t, record.entropy)


@then('the energy residuals are at least {bound:g}')
def step_residuals_bound(context: Context, bound: float) -> None:
    residuals = [record.energy_residual for record in context.result.records]
    assert min(residuals) >= bound, residuals


@then('the minimum of the profile stays nonnegative')
def step_min_psi(context: Context) -> None:
    assert min(record.min_psi for record in context.result.records) >= 0.0


@then('no mass is clipped')
def step_no_clip(context: Context) -> None:
    assert all(record.clip_mass == 0.0 for record in context.result.records)


@then('the largest density stays below its initial value plus {slack:g}')
def step_max_rho(context: Context, slack: float) -> None:
    records = context.result.records
    peak = max(record.max_rho for record in records)
    assert peak <= records[0].max_rho + slack, (records[0].max_rho, peak)


@then('the kinetic energy decreases')
def step_ke_decreases(context: Context) -> None:
    records = context.result.records
    assert records[-1].ke < records[0].ke, (records[0].ke, records[-1].ke)


@then('the stress becomes nonzero')
def step_stress_nonzero(context: Context) -> None:
    records = context.result.records
    assert max(record.stress_norm for record in records[1:]) > 1e-6 + records[0].stress_norm


@then('every record carries an energy residual')
def step_residuals_present(context: Context) -> None:
    assert all(math.isfinite(record.energy_residual) for record in context.result.records)


@then('both runs write the same diagnostics')
def step_same_diagnostics(context: Context) -> None:
    first, second = (format_diagnostics(result.records) for result in context.results)
    assert first == second


@then('the error is attached to step {step:d}')
def step_error_step(context: Context, step: int) -> None:
    assert context.error is not None, 'no error was raised'
    assert context.error.step == step, context.error.step


@then('the first residual is the kernel norm times {entropy:g}')
def step_first_residual(context: Context, entropy: float) -> None:
    expected = kernel_l1_norm(context.kw) * entropy
    assert math.isclose(context.residuals[0], expected, rel_tol=1e-14), context.residuals[0]


@then('the residuals do not increase')
def step_residuals_monotone(context: Context) -> None:
    assert np.all(np.diff(context.residuals) <= 0.0), context.residuals


@then('the energy estimate is satisfied')
def step_energy_satisfied(context: Context) -> None:
    assert energy_satisfied(context.diagnostics, context.kw)


@then('the initial distances equal the perturbation sizes within {tolerance:g} relative')
def step_initial_distances(context: Context, tolerance: float) -> None:
    for size, trace in zip(context.sizes, context.traces):
        assert math.isclose(trace.errors[0], size, rel_tol=tolerance), (size, trace.errors[0])


@then('the final distances differ by a factor between {low:g} and {high:g}')
def step_linear_sensitivity(context: Context, low: float, high: float) -> None:
    ratio = context.traces[0].errors[-1] / context.traces[1].errors[-1]
    assert low <= ratio <= high, ratio


@then('both traces are bounded')
def step_traces_bounded(context: Context) -> None:
    assert all(trace.bounded for trace in context.traces), [t.growth for t in context.traces]


@then('every distance is exactly zero')
def step_zero_distances(context: Context) -> None:
    assert not np.any(context.trace.errors)
    assert len(context.trace.errors) == context.sim_config.steps + 1


@then('the trace is bounded')
def step_trace_bounded(context: Context) -> None:
    assert context.trace.bounded


@then('the coupled and uncoupled energies agree over the first step')
def step_feedback_first(context: Context) -> None:
    comparison = context.comparison
    assert np.array_equal(comparison.coupled[:2], comparison.uncoupled[:2])


@then('the coupled energy ends no higher than the uncoupled one')
def step_feedback_final(context: Context) -> None:
    comparison = context.comparison
    assert comparison.coupled[-1] <= comparison.uncoupled[-1], comparison.difference


@then('the energy report has {count:d} entries')
def step_report_length(context: Context, count: int) -> None:
    assert len(context.simulator.energy_report(context.result)) == count


@then(
    'doubling the forcing mode ({kx:d}, {ky:d}) with amplitude ({ax:g}, {ay:g}) on a {n:d} '
    'grid quadruples its share of every residual'
)
def step_forcing_share(
    context: Context, kx: int, ky: int, ax: float, ay: float, n: int
) -> None:
    grid = PeriodicGrid(n)
    forcing = Forcing((ForcingMode((kx, ky), (ax, ay)),))
    unforced = energy_report(replace(context.diagnostics, forcing_norm=0.0), context.kw)
    shares = [
        energy_report(
            replace(context.diagnostics, forcing_norm=forcing_norm_squared(f, grid)), context.kw
        )
        - unforced
        for f in (forcing, forcing.scaled(2.0))
    ]
    assert shares[0][0] > 0.0
    assert np.allclose(shares[1], 4.0 * shares[0], rtol=1e-12, atol=0.0), shares
    assert np.allclose(shares[0], shares[0][0], rtol=1e-12, atol=0.0), shares[0]
