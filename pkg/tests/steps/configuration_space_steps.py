import math

import numpy as np
from behave import given, then, when
from behave.runner import Context
from scipy.integrate import quad

from polymer_subdiffusion.configuration_space import (
    FenePotential,
    TruncationOps,
    build_maxwellian,
    cutoff,
    evaluate_truncations,
    fene_center_value,
    field_stress,
    kramers_stress,
    primitive,
    stress_bound_constant,
    truncated_stress,
)
from polymer_subdiffusion.errors import SimulationError
from polymer_subdiffusion.selftest import stress_form_gap


@given('a FENE table with b = {b:g} on a {nr:d} by {ntheta:d} polar grid')
def step_fene_table(context: Context, b: float, nr: int, ntheta: int) -> None:
    context.maxwellian = build_maxwellian(FenePotential(b), nr, ntheta)


@when('a FENE table with b = {b:g} is built')
def step_build_table(context: Context, b: float) -> None:
    try:
        build_maxwellian(FenePotential(b), 8, 8)
    except SimulationError as error:
        context.error = error


@then('the Maxwellian weights sum to 1 within {tolerance:g}')
def step_unit_mass(context: Context, tolerance: float) -> None:
    total = float(np.sum(context.maxwellian.mass_weights))
    assert abs(total - 1.0) <= tolerance, total


@then('the normalization matches the closed-form centre value within {tolerance:g}')
def step_center_value(context: Context, tolerance: float) -> None:
    table = context.maxwellian
    center = 1.0 / table.normalization
    assert math.isclose(center, fene_center_value(table.potential.b), rel_tol=tolerance), center


@then('the Maxwellian evaluated at the radius sqrt(b) is 0')
def step_boundary_value(context: Context) -> None:
    radius = np.array([context.maxwellian.potential.radius])
    assert context.maxwellian.maxwellian_at(radius)[0] == 0.0


@given('truncation at level {level:g}')
def step_truncation(context: Context, level: float) -> None:
    context.truncation = TruncationOps(level)


@when('truncation at level {level:g} is requested')
def step_request_truncation(context: Context, level: float) -> None:
    try:
        TruncationOps(level)
    except SimulationError as error:
        context.error = error


@then(
    'the cutoff, primitive and scaled values at {s:g} are {gamma:g}, {integral:g}, {product:g}'
)
def step_truncation_values(
    context: Context, s: float, gamma: float, integral: float, product: float
) -> None:
    values = evaluate_truncations(context.truncation, s)
    for actual, expected in zip(values, (gamma, integral, product)):
        assert math.isclose(actual, expected, abs_tol=1e-14), (values, (gamma, integral, product))


@then('the cutoff is nonincreasing on [0, {upper:g}]')
def step_cutoff_monotone(context: Context, upper: float) -> None:
    values = cutoff(context.truncation, np.linspace(0.0, upper, 2001))
    assert np.all(np.diff(values) <= 0.0)
    assert np.all((values >= 0.0) & (values <= 1.0))


@then('the primitive matches the integral of the cutoff within {tolerance:g} on [0, {upper:g}]')
def step_primitive_integral(context: Context, tolerance: float, upper: float) -> None:
    ops = context.truncation
    for s in np.linspace(0.0, upper, 17):
        breaks = [p for p in (ops.level, 2.0 * ops.level) if 0.0 < p < s] or None
        integral, _ = quad(lambda x: float(cutoff(ops, x)), 0.0, s, points=breaks, limit=200)
        assert abs(float(primitive(ops, s)) - integral) <= tolerance, (s, integral)


@then('the potential-form stress of the profile 1 is 0 within {tolerance:g}')
def step_equilibrium_stress(context: Context, tolerance: float) -> None:
    stress = kramers_stress(np.ones(context.maxwellian.shape), context.maxwellian, 'potential')
    assert float(np.max(np.abs(stress))) <= tolerance, stress


@then('the truncated stress of the profile 1 at level {level:g} is 0 within {tolerance:g}')
def step_equilibrium_truncated(context: Context, level: float, tolerance: float) -> None:
    table = context.maxwellian
    stress = truncated_stress(np.ones(table.shape), table, TruncationOps(level))
    assert float(np.max(np.abs(stress))) <= tolerance, stress


@when('the two stress forms are compared on square polar grids of size {sizes}')
def step_stress_forms(context: Context, sizes: str) -> None:
    context.sizes = [int(n) for n in sizes.replace(' and ', ', ').split(',')]
    context.gaps = [stress_form_gap(n) for n in context.sizes]


@then('the gap between them shrinks with observed order at least {order:g}')
def step_stress_form_order(context: Context, order: float) -> None:
    gaps, sizes = context.gaps, context.sizes
    assert all(fine < coarse for coarse, fine in zip(gaps, gaps[1:])), gaps
    for coarse, fine, n, m in zip(gaps, gaps[1:], sizes, sizes[1:]):
        assert math.log(coarse / fine) / math.log(m / n) >= order, gaps


@given('a random nonnegative profile on the table')
def step_random_profile(context: Context) -> None:
    context.psi = np.random.default_rng(17).uniform(0.0, 2.0, context.maxwellian.shape)


@then('its potential-form stress is symmetric')
def step_symmetric_stress(context: Context) -> None:
    stress = kramers_stress(context.psi, context.maxwellian, 'potential')
    assert math.isclose(stress[0, 1], stress[1, 0], rel_tol=1e-12, abs_tol=1e-15), stress


@given('a stack of {nx:d} by {ny:d} random profiles on the table')
def step_profile_stack(context: Context, nx: int, ny: int) -> None:
    rng = np.random.default_rng(23)
    context.stack = rng.uniform(0.0, 30.0, (nx, ny, *context.maxwellian.shape))


@then('the field stress agrees with the node-by-node truncated stress at level {level:g}')
def step_field_stress(context: Context, level: float) -> None:
    ops = TruncationOps(level)
    fields = field_stress(context.stack, context.maxwellian, ops)
    for i, j in np.ndindex(context.stack.shape[:2]):
        expected = truncated_stress(context.stack[i, j], context.maxwellian, ops)
        np.testing.assert_allclose(fields[i, j], expected, rtol=1e-12, atol=1e-14)


@then('every field stress entry is bounded by the stress bound constant times {level:g}')
def step_stress_bound(context: Context, level: float) -> None:
    fields = field_stress(context.stack, context.maxwellian, TruncationOps(level))
    bound = stress_bound_constant(context.maxwellian) * level
    assert float(np.max(np.abs(fields))) <= bound


@when('the stress of a {nr:d} by {ntheta:d} profile is requested')
def step_mismatched_stress(context: Context, nr: int, ntheta: int) -> None:
    try:
        kramers_stress(np.ones((nr, ntheta)), context.maxwellian, 'potential')
    except SimulationError as error:
        context.error = error
