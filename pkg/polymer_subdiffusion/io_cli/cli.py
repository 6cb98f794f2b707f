import argparse
import logging
import os
import sys
from collections.abc import Sequence
from typing import Optional

from polymer_subdiffusion import Simulator
from polymer_subdiffusion.coupled_driver import CoupledState, StateObserver, state_snapshot
from polymer_subdiffusion.errors import SimulationError
from polymer_subdiffusion.io_cli.config import SimulationConfig, format_config, parse_config
from polymer_subdiffusion.io_cli.output import (
    format_diagnostics,
    snapshot_path,
    write_diagnostics,
    write_snapshot,
)
from polymer_subdiffusion.kernel_algebra import AbelKernel, KernelSpec, make_pair, sonine_residual
from polymer_subdiffusion.selftest import (
    RELAXATION_TOLERANCE,
    SONINE_TOLERANCE,
    relaxation_error,
    run_selftest,
)

logger = logging.getLogger(__name__)

DIAGNOSTICS_FILE = 'diagnostics.csv'
CONFIG_FILE = 'config.cfg'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='polymer-subdiffusion',
        description='Nonlocal-in-time Navier-Stokes-Fokker-Planck simulator for FENE polymers',
    )
    parser.add_argument('-v', '--verbose', action='store_true', help='log solver details')
    commands = parser.add_subparsers(dest='command', required=True, metavar='command')

    simulate = commands.add_parser('simulate', help='run a coupled simulation')
    simulate.add_argument('--config', required=True, metavar='PATH')

    commands.add_parser('selftest', help='run the invariant suite')

    pair = commands.add_parser('pair-check', help='check the discrete abel kernel pair')
    pair.add_argument('--alpha', type=float, required=True)
    pair.add_argument('--steps', type=int, required=True)

    return parser


def _read_config(path: str) -> SimulationConfig:
    try:
        with open(path, encoding='utf-8') as handle:
            text = handle.read()
    except OSError as error:
        raise SimulationError(f'cannot read config {path}: {error.strerror or error}') from error
    return parse_config(text)


def _snapshot_writer(config: SimulationConfig) -> Optional[StateObserver]:
    if config.out_dir is None or config.out_every == 0:
        return None
    directory, every = config.out_dir, config.out_every

    def observe(state: CoupledState) -> None:
        if state.step % every == 0:
            write_snapshot(state_snapshot(state), snapshot_path(directory, state.step))

    return observe


def _prepare_output(config: SimulationConfig) -> None:
    if config.out_dir is None:
        return
    path = os.path.join(config.out_dir, CONFIG_FILE)
    try:
        os.makedirs(config.out_dir, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(format_config(config))
    except OSError as error:
        raise SimulationError(f'cannot write {path}: {error.strerror or error}') from error


def _simulate(path: str) -> int:
    simulator = Simulator(_read_config(path))
    config = simulator.config
    _prepare_output(config)

    result = simulator.run(observer=_snapshot_writer(config))
    if config.out_dir is None:
        sys.stdout.write(format_diagnostics(result.records))
    else:
        write_diagnostics(result.records, os.path.join(config.out_dir, DIAGNOSTICS_FILE))

    logger.info('finished %d steps of %s', len(result.records) - 1, path)

    clipped = sum(record.clip_mass for record in result.records)
    if clipped > 0.0:
        logger.warning('clipping removed %.3e of mass over the run', clipped)
    if not simulator.energy_satisfied(result):
        logger.warning('energy estimate violated, see the energy_residual column')
    return EXIT_OK


def _selftest() -> int:
    results = run_selftest()
    for result in results:
        status = 'pass' if result.passed else 'FAIL'
        print(f'{status:4}  {result.name}: {result.detail}')
    return EXIT_OK if all(result.passed for result in results) else EXIT_FAILURE


def _pair_check(alpha: float, steps: int) -> int:
    residual = sonine_residual(make_pair(KernelSpec(AbelKernel(alpha), 1.0, steps)))
    numeric, exact = relaxation_error(alpha, steps)
    error = abs(numeric - exact) / exact
    print(f'sonine residual: {residual:.3e}')
    print(f'relaxation at t=1: {numeric:.6f} against E_alpha(-1) = {exact:.6f}')
    print(f'relaxation error: {error:.3e}')
    passed = residual <= SONINE_TOLERANCE and error <= RELAXATION_TOLERANCE
    return EXIT_OK if passed else EXIT_FAILURE


def cli_dispatch(argv: Sequence[str]) -> int:
    try:
        args = _parser().parse_args(list(argv))
    except SystemExit as exit_:
        # argparse exits on usage errors and --help
        return exit_.code if isinstance(exit_.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    try:
        if args.command == 'simulate':
            return _simulate(args.config)
        if args.command == 'selftest':
            return _selftest()
        if args.command == 'pair-check':
            return _pair_check(args.alpha, args.steps)
    except SimulationError as error:
        print(f'error: {error}', file=sys.stderr)
        return EXIT_FAILURE

    raise Exception(f'programming error: unhandled command {args.command!r}')


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))
