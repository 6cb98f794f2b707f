import logging
import math
from collections.abc import Iterator
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.configuration_space import (
    FenePotential,
    MaxwellianTable,
    TruncationOps,
    build_maxwellian,
    field_stress,
)
from polymer_subdiffusion.errors import IncompleteDiagnostics, SimulationError
from polymer_subdiffusion.fokker_planck import (
    FieldMode,
    FPOperatorSet,
    FullMode,
    HomogeneousMode,
    PDFField,
    assemble_operators,
    constant_transport,
    entropy,
    field_shape,
    fp_step,
    initial_field,
    mass,
    min_value,
    rho,
)
from polymer_subdiffusion.grid import PeriodicGrid
from polymer_subdiffusion.io_cli.config import SimulationConfig
from polymer_subdiffusion.io_cli.output import Snapshot
from polymer_subdiffusion.kernel_algebra import (
    KernelWeights,
    convolve,
    kernel_l1_norm,
    tabulate_kernel,
)
from polymer_subdiffusion.navier_stokes import (
    StressField,
    VelocityField,
    enstrophy,
    forcing_norm_squared,
    kinetic_energy,
    l2_distance,
    ns_step,
    taylor_green,
    transport_data,
    zero_velocity,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

# default tolerance of the energy estimate, relative to its right-hand side
ENERGY_TOLERANCE = 1e-6
PERTURBATION_GROWTH_BOUND = 1e3
PROGRESS_REPORTS = 10


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    ke: float
    enstrophy: float
    entropy: float
    mass: float
    min_psi: float
    clip_mass: float
    max_rho: float
    stress_norm: float
    energy_residual: float
    root_gradient: float


# Records plus the constants the energy estimate needs: |Ω| (1 in
# homogeneous mode), ‖f‖²_{H⁻¹} and ν.
@dataclass(frozen=True)
class Diagnostics:
    records: tuple[DiagnosticsRecord, ...]
    domain_area: float
    forcing_norm: float
    viscosity: float


@dataclass(frozen=True, eq=False)
class SimulationSetup:
    config: SimulationConfig
    kernel: KernelWeights
    table: MaxwellianTable
    operators: FPOperatorSet
    truncation: TruncationOps
    mode: FieldMode
    grid: Optional[PeriodicGrid]
    forcing_norm: float


# S is the stress of the current profile: what the next velocity step sees.
@dataclass(frozen=True, eq=False)
class CoupledState:
    step: int
    velocity: Optional[VelocityField]
    pdf: PDFField
    stress: FloatArray


@dataclass(frozen=True, eq=False)
class RunResult:
    states: tuple[CoupledState, ...]
    diagnostics: Diagnostics

    @property
    def records(self) -> tuple[DiagnosticsRecord, ...]:
        return self.diagnostics.records

    @property
    def final(self) -> CoupledState:
        return self.states[-1]


@dataclass(frozen=True, eq=False)
class PerturbationTrace:
    times: FloatArray
    errors: FloatArray

    @property
    def growth(self) -> float:
        if self.errors[0] == 0.0:
            return math.nan
        return float(self.errors[-1] / self.errors[0])

    @property
    def bounded(self) -> bool:
        return not self.growth > PERTURBATION_GROWTH_BOUND


@dataclass(frozen=True, eq=False)
class FeedbackComparison:
    times: FloatArray
    coupled: FloatArray
    uncoupled: FloatArray

    @property
    def difference(self) -> FloatArray:
        return self.coupled - self.uncoupled


StateObserver = Callable[[CoupledState], None]


def prepare(config: SimulationConfig) -> SimulationSetup:
    kernel = tabulate_kernel(config.kernel_spec)
    table = build_maxwellian(FenePotential(config.fene_b), config.nr, config.ntheta)
    grid = PeriodicGrid(config.nx) if config.mode == 'full' else None
    mode: FieldMode = FullMode(grid) if grid is not None else HomogeneousMode()
    operators = assemble_operators(
        table, grid, x_coefficient=config.eps, q_coefficient=config.q_coefficient
    )
    return SimulationSetup(
        config=config,
        kernel=kernel,
        table=table,
        operators=operators,
        truncation=TruncationOps(config.trunc_level),
        mode=mode,
        grid=grid,
        forcing_norm=forcing_norm_squared(config.forcing, grid) if grid is not None else 0.0,
    )


# Gaussian in q around (√b/2, 0), scaled to a unit maximum.
def configuration_bump(table: MaxwellianTable) -> FloatArray:
    radius = table.potential.radius
    center = np.array([0.5 * radius, 0.0])[:, None, None]
    width = 0.25 * radius
    return np.exp(-np.sum((table.q - center) ** 2, axis=0) / (2.0 * width**2))


# Periodic bump in x centered at (π, π), scaled to a unit maximum.
def spatial_bump(grid: PeriodicGrid) -> FloatArray:
    x, y = grid.coordinates()
    return np.exp(np.cos(x - math.pi) + np.cos(y - math.pi) - 2.0)


def initial_profile(setup: SimulationSetup) -> FloatArray:
    config, table = setup.config, setup.table
    shape = field_shape(setup.mode, table)
    if config.init_psi == 'equilibrium':
        return np.ones(shape)

    if config.init_psi == 'bump':
        profile = 1.0 + config.bump * configuration_bump(table)
        profile = profile / float(np.sum(profile * table.mass_weights))
        return np.broadcast_to(profile, shape).copy()

    if setup.grid is None:
        raise Exception('programming error: rho_bump reached homogeneous mode')
    density = 1.0 + config.bump * spatial_bump(setup.grid)
    density = density / float(np.mean(density))
    return np.broadcast_to(density[:, :, None, None], shape).copy()


def _stress(setup: SimulationSetup, pdf: PDFField) -> FloatArray:
    return field_stress(pdf.values, setup.table, setup.truncation)


def initial_state(setup: SimulationSetup, profile: Optional[FloatArray] = None) -> CoupledState:
    values = initial_profile(setup) if profile is None else profile
    pdf = initial_field(setup.mode, setup.table, values, setup.kernel.steps)

    velocity: Optional[VelocityField] = None
    if setup.grid is not None:
        if setup.config.init_u == 'taylor_green':
            velocity = taylor_green(setup.grid)
        else:
            velocity = zero_velocity(setup.grid)
    return CoupledState(step=0, velocity=velocity, pdf=pdf, stress=_stress(setup, pdf))


# Lie splitting: the stress of ψ̂ⁿ⁻¹ drives the velocity step, the new velocity
# drives the Fokker–Planck step.
def coupled_step(setup: SimulationSetup, state: CoupledState) -> CoupledState:
    config = setup.config
    step = state.step + 1
    velocity: Optional[VelocityField] = None
    try:
        if state.velocity is not None:
            stress = state.stress if config.stress_coupling else np.zeros_like(state.stress)
            velocity = ns_step(
                state.velocity,
                StressField(stress),
                config.forcing,
                setup.truncation,
                config.dt,
                viscosity=config.viscosity,
            )
            transport = transport_data(velocity)
        else:
            transport = constant_transport(np.array(config.flow_gradient))

        pdf = fp_step(
            state.pdf, setup.operators, setup.kernel, transport, setup.truncation, config.dt
        )
    except SimulationError as error:
        raise error.at_step(step)

    return CoupledState(step=step, velocity=velocity, pdf=pdf, stress=_stress(setup, pdf))


def coupled_steps(setup: SimulationSetup, state: CoupledState) -> Iterator[CoupledState]:
    while state.step < setup.kernel.steps:
        state = coupled_step(setup, state)
        yield state


def _stress_norm(setup: SimulationSetup, stress: FloatArray) -> float:
    if setup.grid is None:
        return float(np.sqrt(np.sum(stress**2)))
    return float(np.sqrt(setup.grid.cell_area * np.sum(stress**2)))


def diagnose(setup: SimulationSetup, state: CoupledState) -> DiagnosticsRecord:
    table, pdf, velocity = setup.table, state.pdf, state.velocity
    max_rho = float(np.max(rho(pdf, table))) if setup.grid is not None else mass(pdf, table)
    return DiagnosticsRecord(
        t=state.step * setup.config.dt,
        ke=kinetic_energy(velocity) if velocity is not None else 0.0,
        enstrophy=enstrophy(velocity) if velocity is not None else 0.0,
        entropy=entropy(pdf, table),
        mass=mass(pdf, table),
        min_psi=min_value(pdf),
        clip_mass=pdf.clip_mass,
        max_rho=max_rho,
        stress_norm=_stress_norm(setup, state.stress),
        energy_residual=math.nan,
        root_gradient=pdf.root_gradient,
    )


# residual_n = RHS − LHS_n with
#   LHS_n = ½‖u_n‖² + ½ν·Σ_{j≤n} dt‖∇u_j‖² + |Ω|·(k∗E)_n + Σ_{j≤n} dt·R_j
#   RHS   = ½‖u_0‖² + ‖k‖_{L¹(0,T)}·|Ω|·E_0 + T·‖f‖²_{H⁻¹}/(2ν)
# E the x-averaged entropy, R the root-gradient dissipation.
def energy_report(diagnostics: Diagnostics, kw: KernelWeights) -> FloatArray:
    records = diagnostics.records
    if not records:
        raise IncompleteDiagnostics('energy report needs at least the initial record')
    if records[0].t != 0.0:
        raise IncompleteDiagnostics(f'first record is at t={records[0].t}, expected t=0')
    if len(records) - 1 > kw.steps:
        raise IncompleteDiagnostics(f'{len(records) - 1} steps recorded, kernel covers {kw.steps}')

    later = records[1:]
    if any(math.isnan(r.root_gradient) or math.isnan(r.entropy) for r in records):
        raise IncompleteDiagnostics('records lack the entropy or root-gradient terms')

    dt = kw.h
    area = diagnostics.domain_area
    viscosity = diagnostics.viscosity
    horizon = kw.h * kw.steps
    initial = records[0]

    rhs = (
        initial.ke
        + kernel_l1_norm(kw) * area * initial.entropy
        + 0.5 * horizon * diagnostics.forcing_norm / viscosity
    )
    if not later:
        return np.array([rhs - initial.ke])

    ke = np.array([r.ke for r in later])
    viscous = 0.5 * viscosity * dt * np.cumsum([r.enstrophy for r in later])
    entropies = area * convolve(kw, np.array([r.entropy for r in later]))
    roots = dt * np.cumsum([r.root_gradient for r in later])
    lhs = ke + viscous + entropies + roots
    return np.concatenate([[rhs - initial.ke], rhs - lhs])


def energy_satisfied(
    diagnostics: Diagnostics, kw: KernelWeights, tolerance: float = ENERGY_TOLERANCE
) -> bool:
    residuals = energy_report(diagnostics, kw)
    return bool(np.all(residuals >= -tolerance * (residuals[0] + diagnostics.records[0].ke)))


def _with_residuals(setup: SimulationSetup, records: list[DiagnosticsRecord]) -> Diagnostics:
    diagnostics = Diagnostics(
        records=tuple(records),
        domain_area=setup.operators.domain_area,
        forcing_norm=setup.forcing_norm,
        viscosity=setup.config.viscosity,
    )
    residuals = energy_report(diagnostics, setup.kernel)
    return replace(
        diagnostics,
        records=tuple(
            replace(record, energy_residual=float(residual))
            for record, residual in zip(records, residuals)
        ),
    )


def run_from(
    setup: SimulationSetup,
    state: CoupledState,
    keep_states: bool = False,
    observer: Optional[StateObserver] = None,
) -> RunResult:
    records = [diagnose(setup, state)]
    states = [state]
    if observer is not None:
        observer(state)

    total = setup.kernel.steps
    report_every = max(1, total // PROGRESS_REPORTS)
    for current in coupled_steps(setup, state):
        record = diagnose(setup, current)
        records.append(record)
        if keep_states:
            states.append(current)
        if observer is not None:
            observer(current)
        if current.step % report_every == 0 or current.step == total:
            logger.info(
                'step %d/%d t=%.4f ke=%.6g entropy=%.6g min_psi=%.3g',
                current.step,
                total,
                record.t,
                record.ke,
                record.entropy,
                record.min_psi,
            )
        state = current

    if not keep_states and state is not states[0]:
        states.append(state)
    return RunResult(states=tuple(states), diagnostics=_with_residuals(setup, records))


def run_coupled(
    config: SimulationConfig,
    keep_states: bool = False,
    observer: Optional[StateObserver] = None,
) -> RunResult:
    setup = prepare(config)
    return run_from(setup, initial_state(setup), keep_states=keep_states, observer=observer)


def state_snapshot(state: CoupledState) -> Snapshot:
    return Snapshot(
        mode=state.pdf.mode.kind,
        step=state.step,
        psi=np.array(state.pdf.values),
        velocity=None if state.velocity is None else np.array(state.velocity.values),
    )


def _weighted_norm(setup: SimulationSetup, values: FloatArray) -> float:
    squares = np.sum(values**2 * setup.table.mass_weights, axis=(-2, -1))
    cell = setup.grid.cell_area if setup.grid is not None else 1.0
    return math.sqrt(cell * float(np.sum(squares)))


def _state_distance(setup: SimulationSetup, a: CoupledState, b: CoupledState) -> float:
    velocity = 0.0
    if a.velocity is not None and b.velocity is not None:
        velocity = l2_distance(a.velocity, b.velocity)
    return velocity + _weighted_norm(setup, a.pdf.values - b.pdf.values)


# e(t) = ‖u₁ − u₂‖_{L²} + ‖ψ̂₁ − ψ̂₂‖_{L²_M} between the configured run and
# one whose ψ̂₀ is shifted by delta times a bump of unit L²_M norm. The two
# runs advance in lockstep.
def perturbation_experiment(
    config: SimulationConfig, delta: Optional[float] = None
) -> PerturbationTrace:
    size = config.perturb_delta if delta is None else delta
    setup = prepare(config)
    base = initial_state(setup)

    bump = np.broadcast_to(configuration_bump(setup.table), base.pdf.values.shape)
    if setup.grid is not None:
        bump = bump * spatial_bump(setup.grid)[:, :, None, None]
    unit = bump / _weighted_norm(setup, bump)
    perturbed = initial_state(setup, base.pdf.values + size * unit)

    times = [0.0]
    errors = [_state_distance(setup, base, perturbed)]
    for first, second in zip(coupled_steps(setup, base), coupled_steps(setup, perturbed)):
        times.append(first.step * config.dt)
        errors.append(_state_distance(setup, first, second))

    trace = PerturbationTrace(times=np.array(times), errors=np.array(errors))
    logger.info('perturbation delta=%g: e(0)=%.3e e(T)=%.3e', size, errors[0], errors[-1])
    return trace


def stress_feedback_comparison(config: SimulationConfig) -> FeedbackComparison:
    coupled = run_coupled(replace(config, stress_coupling=True))
    uncoupled = run_coupled(replace(config, stress_coupling=False))
    return FeedbackComparison(
        times=np.array([r.t for r in coupled.records]),
        coupled=np.array([r.ke for r in coupled.records]),
        uncoupled=np.array([r.ke for r in uncoupled.records]),
    )
