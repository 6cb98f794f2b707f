import math
from dataclasses import dataclass, fields, replace
from typing import Any, Callable, Literal, Optional

from polymer_subdiffusion.errors import ConfigError, InvalidParameter
from polymer_subdiffusion.kernel_algebra import (
    AbelKernel,
    ClassicalKernel,
    KernelKind,
    KernelSpec,
    TabulatedKernel,
    validate_kernel_spec,
)
from polymer_subdiffusion.navier_stokes import Forcing, ForcingMode
from polymer_subdiffusion.utilities.multi_map import MultiMap

Mode = Literal['full', 'homogeneous']
InitialVelocity = Literal['zero', 'taylor_green']
InitialProfile = Literal['equilibrium', 'bump', 'rho_bump']

# relative tolerance for time.dt against T/N
DT_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SimulationConfig:
    kernel: KernelKind = AbelKernel(0.5)
    steps: int = 256
    horizon: float = 1.0
    fene_b: float = 4.0
    trunc_level: float = 10.0
    nx: int = 16
    nr: int = 24
    ntheta: int = 16
    mode: Mode = 'full'
    init_u: InitialVelocity = 'taylor_green'
    init_psi: InitialProfile = 'equilibrium'
    bump: float = 0.5
    forcing: Forcing = Forcing()
    perturb_delta: float = 1e-6
    flow_gradient: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    viscosity: float = 1.0
    eps: float = 1.0
    relaxation: float = 0.25
    stress_coupling: bool = True
    out_dir: Optional[str] = None
    out_every: int = 0

    @property
    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(kind=self.kernel, horizon=self.horizon, steps=self.steps)

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    # A/(4λ) with A = 1
    @property
    def q_coefficient(self) -> float:
        return 1.0 / (4.0 * self.relaxation)


class _Invalid(Exception):
    pass


def _number(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise _Invalid(f'malformed number {text!r}') from None
    if not math.isfinite(value):
        raise _Invalid(f'number must be finite, got {text!r}')
    return value


def _integer(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise _Invalid(f'malformed integer {text!r}') from None


def _numbers(text: str) -> tuple[float, ...]:
    return tuple(_number(part.strip()) for part in text.split(',') if part.strip())


def _choice(*allowed: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in allowed:
            raise _Invalid(f'expected one of {", ".join(allowed)}, got {text!r}')
        return text

    return parse


def _switch(text: str) -> bool:
    return _choice('on', 'off')(text) == 'on'


def _gradient(text: str) -> tuple[float, ...]:
    values = _numbers(text)
    if len(values) != 4:
        raise _Invalid(f'expected four numbers (row-major 2x2), got {len(values)}')
    return values


# "kx,ky,ax,ay; kx,ky,ax,ay; ..."
def _forcing(text: str) -> Forcing:
    modes = []
    for entry in filter(None, (part.strip() for part in text.split(';'))):
        parts = [part.strip() for part in entry.split(',')]
        if len(parts) != 4:
            raise _Invalid(f'forcing mode {entry!r} needs kx,ky,ax,ay')
        kx, ky = _integer(parts[0]), _integer(parts[1])
        try:
            modes.append(ForcingMode((kx, ky), (_number(parts[2]), _number(parts[3]))))
        except InvalidParameter as error:
            raise _Invalid(error.message) from None
    return Forcing(tuple(modes))


def _kernel_kind(text: str) -> str:
    name = _choice('abel', 'classical', 'classical_limit', 'tabulated')(text)
    return 'classical_limit' if name == 'classical' else name


# key -> (parser, SimulationConfig field). Keys mapped to None feed cross-field
# construction instead of a single field.
_KEYS: dict[str, tuple[Callable[[str], Any], Optional[str]]] = {
    'kernel.kind': (_kernel_kind, None),
    'kernel.alpha': (_number, None),
    'kernel.values': (_numbers, None),
    'kernel.N': (_integer, 'steps'),
    'time.T': (_number, 'horizon'),
    'time.dt': (_number, None),
    'fene.b': (_number, 'fene_b'),
    'trunc.ell': (_number, 'trunc_level'),
    'grid.nx': (_integer, 'nx'),
    'grid.nr': (_integer, 'nr'),
    'grid.ntheta': (_integer, 'ntheta'),
    'mode': (_choice('full', 'homogeneous'), 'mode'),
    'init.u': (_choice('zero', 'taylor_green'), 'init_u'),
    'init.psi': (_choice('equilibrium', 'bump', 'rho_bump'), 'init_psi'),
    'init.bump': (_number, 'bump'),
    'forcing.modes': (_forcing, 'forcing'),
    'perturb.delta': (_number, 'perturb_delta'),
    'flow.gradient': (_gradient, 'flow_gradient'),
    'phys.nu': (_number, 'viscosity'),
    'phys.eps': (_number, 'eps'),
    'phys.lambda': (_number, 'relaxation'),
    'coupling.stress': (_switch, 'stress_coupling'),
    'out.dir': (str, 'out_dir'),
    'out.every': (_integer, 'out_every'),
}


def _read_lines(text: str) -> tuple[dict[str, tuple[int, str]], list[str]]:
    occurrences: MultiMap[str, tuple[int, str]] = MultiMap()
    violations = []

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, separator, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not separator:
            violations.append(f'line {number}: expected key=value, got {line!r}')
            continue
        if key not in _KEYS:
            violations.append(f'line {number}: unknown key {key!r}')
            continue
        occurrences.add(key, (number, value))

    for key, seen in occurrences.repeated().items():
        lines = [str(number) for number, _ in seen]
        listed = ', '.join(lines[:-1]) + f' and {lines[-1]}'
        violations.append(f'duplicate key {key!r} on lines {listed}')

    entries = {key: occurrences.first(key) for key in occurrences}
    return entries, violations


def _kernel(parsed: dict[str, Any], violations: list[str]) -> KernelKind:
    kind = parsed.get('kernel.kind', 'abel')
    if kind != 'abel' and 'kernel.alpha' in parsed:
        violations.append(f'kernel.alpha applies to the abel kernel only, kind is {kind}')
    if kind != 'tabulated' and 'kernel.values' in parsed:
        violations.append(f'kernel.values applies to the tabulated kernel only, kind is {kind}')

    if kind == 'abel':
        return AbelKernel(parsed.get('kernel.alpha', 0.5))
    if kind == 'classical_limit':
        return ClassicalKernel()
    if 'kernel.values' not in parsed:
        violations.append('tabulated kernel needs kernel.values')
    return TabulatedKernel(tuple(parsed.get('kernel.values', ())))


def _check_ranges(config: SimulationConfig, violations: list[str]) -> None:
    def require(condition: bool, message: str) -> None:
        if not condition:
            violations.append(message)

    require(config.steps > 0, f'kernel.N must be positive, got {config.steps}')
    require(config.horizon > 0, f'time.T must be positive, got {config.horizon}')
    require(config.fene_b > 2, f'fene.b must exceed 2, got {config.fene_b}')
    require(config.trunc_level > 0, f'trunc.ell must be positive, got {config.trunc_level}')
    require(
        config.nx >= 4 and config.nx % 2 == 0, f'grid.nx must be even and >= 4, got {config.nx}'
    )
    require(config.nr >= 4, f'grid.nr must be >= 4, got {config.nr}')
    require(config.ntheta >= 4, f'grid.ntheta must be >= 4, got {config.ntheta}')
    require(config.bump >= 0, f'init.bump must be nonnegative, got {config.bump}')
    require(
        config.perturb_delta >= 0,
        f'perturb.delta must be nonnegative, got {config.perturb_delta}',
    )
    require(config.viscosity > 0, f'phys.nu must be positive, got {config.viscosity}')
    require(config.eps > 0, f'phys.eps must be positive, got {config.eps}')
    require(config.relaxation > 0, f'phys.lambda must be positive, got {config.relaxation}')
    require(config.out_every >= 0, f'out.every must be nonnegative, got {config.out_every}')
    require(
        config.mode == 'full' or config.init_psi != 'rho_bump',
        'init.psi=rho_bump needs mode=full',
    )
    require(
        config.mode == 'homogeneous' or not any(config.flow_gradient),
        'flow.gradient applies to mode=homogeneous only',
    )
    require(
        config.mode == 'full' or not config.forcing.modes,
        'forcing.modes applies to mode=full only',
    )
    for mode in config.forcing.modes:
        require(
            max(abs(k) for k in mode.wavevector) < config.nx // 2,
            f'forcing mode {mode.wavevector} is not resolved on grid.nx={config.nx}',
        )

    if config.steps > 0 and config.horizon > 0:
        try:
            validate_kernel_spec(config.kernel_spec)
        except InvalidParameter as error:
            violations.append(error.message)


def parse_config(text: str) -> SimulationConfig:
    entries, violations = _read_lines(text)

    parsed: dict[str, Any] = {}
    for key, (number, value) in entries.items():
        parser, _ = _KEYS[key]
        try:
            parsed[key] = parser(value)
        except _Invalid as error:
            violations.append(f'line {number}: {key}: {error}')

    values = {
        name: parsed[key]
        for key, (_, name) in _KEYS.items()
        if name is not None and key in parsed
    }
    config = replace(SimulationConfig(), kernel=_kernel(parsed, violations), **values)
    _check_ranges(config, violations)

    if 'time.dt' in parsed and config.steps > 0:
        dt = parsed['time.dt']
        if not math.isclose(dt, config.dt, rel_tol=DT_TOLERANCE):
            violations.append(f'time.dt={dt!r} is inconsistent with T/N={config.dt!r}')

    if violations:
        raise ConfigError(violations)
    return config


def _format_numbers(values: tuple[float, ...]) -> str:
    return ', '.join(repr(v) for v in values)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'on' if value else 'off'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return _format_numbers(value)
    if isinstance(value, Forcing):
        return '; '.join(
            f'{m.wavevector[0]},{m.wavevector[1]},{m.amplitude[0]!r},{m.amplitude[1]!r}'
            for m in value.modes
        )
    return str(value)


def format_config(config: SimulationConfig) -> str:
    kernel = config.kernel
    lines = [f'kernel.kind = {"classical" if isinstance(kernel, ClassicalKernel) else kernel.kind}']
    if isinstance(kernel, AbelKernel):
        lines.append(f'kernel.alpha = {kernel.alpha!r}')
    elif isinstance(kernel, TabulatedKernel):
        lines.append(f'kernel.values = {_format_numbers(kernel.values)}')

    names = {f.name for f in fields(config)}
    for key, (_, name) in _KEYS.items():
        if name is None or name not in names:
            continue
        value = getattr(config, name)
        if value is None or (isinstance(value, Forcing) and not value.modes):
            continue
        lines.append(f'{key} = {_format_value(value)}')

    return '\n'.join(lines) + '\n'
