import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from polymer_subdiffusion.configuration_space import (
    FenePotential,
    TruncationOps,
    build_maxwellian,
    kramers_stress,
)
from polymer_subdiffusion.coupled_driver import run_coupled, state_snapshot
from polymer_subdiffusion.fokker_planck import (
    HomogeneousMode,
    assemble_operators,
    fp_step,
    initial_field,
    mass,
    quiescent_transport,
    relative_entropy,
    rho_and_max_principle,
)
from polymer_subdiffusion.grid import PeriodicGrid
from polymer_subdiffusion.io_cli.config import SimulationConfig
from polymer_subdiffusion.io_cli.output import decode_snapshot, encode_snapshot, format_diagnostics
from polymer_subdiffusion.kernel_algebra import (
    SONINE_TOLERANCE,
    AbelKernel,
    HistorySeries,
    KernelSpec,
    check_alikhanov,
    make_pair,
    solve_fractional_relaxation,
    sonine_residual,
    tabulate_kernel,
)
from polymer_subdiffusion.navier_stokes import (
    Forcing,
    divergence_norm,
    kinetic_energy,
    ns_step,
    taylor_green,
    zero_stress,
)
from polymer_subdiffusion.utilities.special import mittag_leffler, mittag_leffler_half

logger = logging.getLogger(__name__)

RELAXATION_TOLERANCE = 1e-2
ALIKHANOV_TOLERANCE = -1e-10
DIVERGENCE_TOLERANCE = 1e-12
DECAY_TOLERANCE = 1e-3
# the two stress forms differ by a quadrature error of at least first order
STRESS_ORDER = 1.0
EQUILIBRIUM_STRESS_TOLERANCE = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


# E_α(−rate) against the L1 solution at t = 1; the series is exact enough for
# |z| ≤ 1, and α = ½ has a closed form.
def relaxation_error(alpha: float, steps: int, rate: float = 1.0) -> tuple[float, float]:
    spec = KernelSpec(AbelKernel(alpha), horizon=1.0, steps=steps)
    numeric = float(solve_fractional_relaxation(spec, rate, 1.0).samples[-1])
    exact = mittag_leffler_half(-rate) if alpha == 0.5 else mittag_leffler(alpha, -rate)
    return numeric, exact


def _sonine() -> CheckResult:
    worst = max(
        sonine_residual(make_pair(KernelSpec(AbelKernel(alpha), 1.0, steps)))
        for alpha in (0.3, 0.5, 0.8)
        for steps in (64, 1024)
    )
    return CheckResult('sonine identity', worst <= SONINE_TOLERANCE, f'max residual {worst:.3e}')


def _relaxation() -> CheckResult:
    numeric, exact = relaxation_error(0.5, 1024)
    error = abs(numeric - exact) / exact
    return CheckResult(
        'fractional relaxation', error <= RELAXATION_TOLERANCE, f'relative error {error:.3e}'
    )


def _alikhanov(histories: int = 10_000) -> CheckResult:
    rng = np.random.default_rng(7)
    worst = np.inf
    for alpha in (0.3, 0.5, 0.8):
        kw = tabulate_kernel(KernelSpec(AbelKernel(alpha), 1.0, 64))
        for _ in range(histories):
            steps = int(rng.integers(1, kw.steps + 1))
            samples = rng.uniform(-1.0, 1.0, steps + 1)
            residual = check_alikhanov(kw, HistorySeries(h=kw.h, samples=samples))
            worst = min(worst, residual)
    return CheckResult(
        'alikhanov inequality', worst >= ALIKHANOV_TOLERANCE, f'min residual {worst:.3e}'
    )


def stress_form_gap(n: int, b: float = 4.0) -> float:
    table = build_maxwellian(FenePotential(b), n, n)
    x, y = table.q
    profile = 1.0 + 0.3 * np.cos(x) * np.exp(0.2 * y)
    potential = kramers_stress(profile, table, 'potential')
    gradient = kramers_stress(profile, table, 'gradient')
    return float(np.max(np.abs(potential - gradient)))


def _stress_forms(sizes: Sequence[int] = (16, 32, 64)) -> CheckResult:
    gaps = [stress_form_gap(n) for n in sizes]
    orders = [
        float(np.log(coarse / fine) / np.log(m / n))
        for coarse, fine, n, m in zip(gaps, gaps[1:], sizes, sizes[1:])
    ]
    finest = build_maxwellian(FenePotential(4.0), sizes[-1], sizes[-1])
    equilibrium = float(np.max(np.abs(kramers_stress(np.ones(finest.shape), finest, 'potential'))))
    passed = min(orders) >= STRESS_ORDER and equilibrium <= EQUILIBRIUM_STRESS_TOLERANCE
    detail = ', '.join(f'{g:.2e}' for g in gaps) + f' (orders {min(orders):.2f}+)'
    return CheckResult('stress forms', passed, f'gaps {detail}, S(1) {equilibrium:.1e}')


def _homogeneous_structure() -> CheckResult:
    table = build_maxwellian(FenePotential(4.0), 16, 16)
    ops = assemble_operators(table)
    kw = tabulate_kernel(KernelSpec(AbelKernel(0.5), 1.0, 64))
    mode = HomogeneousMode()
    trunc = TruncationOps(10.0)
    transport = quiescent_transport(mode)

    x, _ = table.q
    bump = 1.0 + 0.5 * np.exp(-((x - 1.0) ** 2))
    field = initial_field(mode, table, bump / float(np.sum(bump * table.mass_weights)), kw.steps)
    flat = initial_field(mode, table, np.ones(table.shape), kw.steps)
    for _ in range(kw.steps):
        field = fp_step(field, ops, kw, transport, trunc, kw.h)
        flat = fp_step(flat, ops, kw, transport, trunc, kw.h)

    initial = replace(field, values=field.initial)
    drift = abs(mass(field, table) - mass(initial, table))
    passed = (
        drift <= 1e-12
        and field.clip_mass == 0.0
        and bool(np.all(flat.values == 1.0))
        and relative_entropy(field, table) < relative_entropy(initial, table)
    )
    return CheckResult('fokker-planck structure', passed, f'mass drift {drift:.2e}')


def _max_principle() -> CheckResult:
    config = SimulationConfig(
        steps=16, horizon=0.1, nx=8, nr=8, ntheta=8, init_psi='rho_bump', init_u='taylor_green'
    )
    result = run_coupled(config, keep_states=True)
    table = build_maxwellian(FenePotential(config.fene_b), config.nr, config.ntheta)
    report = rho_and_max_principle([s.pdf for s in result.states], table)
    return CheckResult(
        'maximum principle', report.holds, f'max rho trace peak {float(np.max(report.max_rho)):.6f}'
    )


def _taylor_green(steps: int = 500, dt: float = 1e-3) -> CheckResult:
    grid = PeriodicGrid(32)
    u = taylor_green(grid)
    initial = kinetic_energy(u)
    stress = zero_stress(grid)
    trunc = TruncationOps(10.0)
    divergence = 0.0
    for _ in range(steps):
        u = ns_step(u, stress, Forcing(), trunc, dt)
        divergence = max(divergence, divergence_norm(u))
    expected = initial * np.exp(-4.0 * steps * dt)
    error = abs(kinetic_energy(u) - expected) / expected
    passed = error <= DECAY_TOLERANCE and divergence <= DIVERGENCE_TOLERANCE
    detail = f'relative error {error:.2e}, div {divergence:.1e}'
    return CheckResult('taylor-green decay', passed, detail)


def _determinism() -> CheckResult:
    config = SimulationConfig(
        mode='homogeneous',
        steps=16,
        horizon=0.5,
        nr=8,
        ntheta=8,
        init_psi='bump',
        flow_gradient=(0.0, 0.5, 0.0, 0.0),
    )
    first, second = run_coupled(config), run_coupled(config)
    same_csv = format_diagnostics(first.records) == format_diagnostics(second.records)

    snapshot = state_snapshot(first.final)
    restored = decode_snapshot(encode_snapshot(snapshot))
    same_snapshot = restored.psi.tobytes() == snapshot.psi.tobytes()
    return CheckResult('determinism and i/o', same_csv and same_snapshot, 'csv and snapshot')


CHECKS: Sequence[Callable[[], CheckResult]] = (
    _sonine,
    _relaxation,
    _alikhanov,
    _stress_forms,
    _homogeneous_structure,
    _max_principle,
    _taylor_green,
    _determinism,
)


def run_selftest() -> list[CheckResult]:
    results = []
    for check in CHECKS:
        try:
            result = check()
        except Exception as error:
            logger.debug('check %s raised', check.__name__, exc_info=True)
            detail = f'{type(error).__name__}: {error}'
            result = CheckResult(check.__name__.lstrip('_').replace('_', ' '), False, detail)
        logger.info('%s: %s (%s)', result.name, 'pass' if result.passed else 'FAIL', result.detail)
        results.append(result)
    return results
