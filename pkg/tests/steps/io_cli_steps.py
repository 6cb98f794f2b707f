import contextlib
import io
import os
import shlex

import numpy as np
from behave import given, then, when
from behave.runner import Context

from polymer_subdiffusion import kernel_algebra, selftest
from polymer_subdiffusion.coupled_driver import DiagnosticsRecord
from polymer_subdiffusion.errors import ConfigError, SimulationError
from polymer_subdiffusion.io_cli import (
    SimulationConfig,
    Snapshot,
    decode_snapshot,
    encode_snapshot,
    format_config,
    format_diagnostics,
    parse_config,
    read_snapshot,
    snapshot_path,
    write_diagnostics,
    write_snapshot,
)
from polymer_subdiffusion.io_cli.cli import CONFIG_FILE, DIAGNOSTICS_FILE, cli_dispatch


def _expand(context: Context, text: str) -> str:
    return text.replace('{workdir}', context.workdir)


def _parse(context: Context, text: str) -> None:
    try:
        context.sim_config = parse_config(text)
    except SimulationError as error:
        context.error = error


@given('{count:d} diagnostics records')
def step_records(context: Context, count: int) -> None:
    rng = np.random.default_rng(count)
    context.records = [
        DiagnosticsRecord(0.125 * n, *(float(v) for v in rng.random(10))) for n in range(count)
    ]


@given(
    'a random {mode} snapshot on {nx:d} x-nodes and a {nr:d} by {ntheta:d} table at step {step:d}'
)
def step_snapshot(context: Context, mode: str, nx: int, nr: int, ntheta: int, step: int) -> None:
    rng = np.random.default_rng(step)
    if mode == 'full':
        psi = rng.random((nx, nx, nr, ntheta))
        velocity = rng.standard_normal((2, nx, nx))
        context.snapshot = Snapshot(mode=mode, step=step, psi=psi, velocity=velocity)
    else:
        context.snapshot = Snapshot(mode=mode, step=step, psi=rng.random((nr, ntheta)))


@given('a configuration file "{name}" containing')
def step_config_file(context: Context, name: str) -> None:
    with open(os.path.join(context.workdir, name), 'w', encoding='utf-8') as handle:
        handle.write(_expand(context, context.text))


@given('the self-test runs a passing check and a check raising "{message}"')
def step_patched_checks(context: Context, message: str) -> None:
    def _steady_check() -> selftest.CheckResult:
        return selftest.CheckResult('steady check', True, 'ok')

    def _crashing_check() -> selftest.CheckResult:
        raise ValueError(message)

    original = selftest.CHECKS
    selftest.CHECKS = (_steady_check, _crashing_check)
    context.add_cleanup(setattr, selftest, 'CHECKS', original)


@when('the configuration is parsed')
def step_parse_text_block(context: Context) -> None:
    _parse(context, context.text)


@when('the configuration text "{text}" is parsed')
def step_parse_inline(context: Context, text: str) -> None:
    _parse(context, text.replace('\\n', '\n'))


@when('the diagnostics are written to "{name}"')
def step_write_diagnostics(context: Context, name: str) -> None:
    context.path = os.path.join(context.workdir, name)
    try:
        write_diagnostics(context.records, context.path)
    except SimulationError as error:
        context.error = error


@when('the snapshot is written and read back')
def step_snapshot_round_trip(context: Context) -> None:
    path = snapshot_path(context.workdir, context.snapshot.step)
    write_snapshot(context.snapshot, path)
    context.restored = read_snapshot(path)


@when('the snapshot is decoded after {damage}')
def step_damaged_snapshot(context: Context, damage: str) -> None:
    data = bytearray(encode_snapshot(context.snapshot))
    if damage == 'replacing the magic':
        data[:4] = b'PNG\x00'
    elif damage == 'dropping the last byte':
        data = data[:-1]
    elif damage == 'keeping only ten bytes':
        data = data[:10]
    elif damage == 'bumping the version':
        data[4:8] = (2).to_bytes(4, 'little')
    else:
        raise ValueError(f'unknown damage {damage!r}')
    try:
        decode_snapshot(bytes(data))
    except SimulationError as error:
        context.error = error


@when('the snapshot "{name}" is read')
def step_read_snapshot(context: Context, name: str) -> None:
    try:
        read_snapshot(os.path.join(context.workdir, name))
    except SimulationError as error:
        context.error = error


@when('the command "{command}" is run')
def step_command(context: Context, command: str) -> None:
    stdout, stderr = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
        context.status = cli_dispatch(shlex.split(_expand(context, command)))
    context.stdout, context.stderr = stdout.getvalue(), stderr.getvalue()


@then('the parsed configuration equals the default one')
def step_default_config(context: Context) -> None:
    assert context.sim_config == SimulationConfig(), context.sim_config


@then('the parsed configuration has')
def step_config_fields(context: Context) -> None:
    config = context.sim_config
    for row in context.table:
        name, expected = row['field'], row['value']
        if name == 'alpha':
            actual = config.kernel.alpha
        elif name == 'forcing modes':
            actual = len(config.forcing.modes)
        else:
            actual = getattr(config, name)

        if isinstance(actual, (bool, str)):
            assert str(actual) == expected, (name, actual, expected)
        else:
            assert actual == float(expected), (name, actual, expected)


@then('the parsed kernel is {name}')
def step_kernel_kind(context: Context, name: str) -> None:
    assert context.error is None, context.error
    kernel = context.sim_config.kernel
    assert isinstance(kernel, getattr(kernel_algebra, name)), kernel


@then('the error lists {count:d} violations')
def step_violation_count(context: Context, count: int) -> None:
    assert isinstance(context.error, ConfigError)
    assert len(context.error.violations) == count, context.error.violations


@then('formatting and parsing it again gives the same configuration')
def step_format_round_trip(context: Context) -> None:
    text = format_config(context.sim_config)
    assert parse_config(text) == context.sim_config, text


@then('the file starts with "{header}"')
def step_file_header(context: Context, header: str) -> None:
    with open(context.path, encoding='utf-8') as handle:
        assert handle.readline().rstrip('\n') == header


@then('the file has {count:d} lines')
def step_file_lines(context: Context, count: int) -> None:
    with open(context.path, encoding='utf-8') as handle:
        assert len(handle.read().splitlines()) == count


@then('the file content equals the formatted diagnostics')
def step_file_content(context: Context) -> None:
    with open(context.path, encoding='utf-8', newline='') as handle:
        assert handle.read() == format_diagnostics(context.records)


@then('the restored snapshot is identical')
def step_snapshot_identical(context: Context) -> None:
    original, restored = context.snapshot, context.restored
    assert (restored.mode, restored.step) == (original.mode, original.step)
    assert restored.psi.shape == original.psi.shape
    assert restored.psi.tobytes() == original.psi.tobytes()
    if original.velocity is None:
        assert restored.velocity is None
    else:
        assert restored.velocity is not None
        assert restored.velocity.tobytes() == original.velocity.tobytes()


@then('the exit status is {status:d}')
def step_exit_status(context: Context, status: int) -> None:
    assert context.status == status, (context.status, context.stderr)


@then('the output mentions "{text}"')
def step_stdout_mentions(context: Context, text: str) -> None:
    assert text in context.stdout, context.stdout


@then('the error output mentions "{text}"')
def step_stderr_mentions(context: Context, text: str) -> None:
    assert text in context.stderr, context.stderr


@then('the output directory holds {rows:d} diagnostic rows')
def step_output_rows(context: Context, rows: int) -> None:
    path = os.path.join(context.workdir, 'out', DIAGNOSTICS_FILE)
    with open(path, encoding='utf-8') as handle:
        assert len(handle.read().splitlines()) == rows + 1


@then('the output directory holds the snapshots of steps {steps}')
def step_output_snapshots(context: Context, steps: str) -> None:
    directory = os.path.join(context.workdir, 'out')
    expected = [int(step) for step in steps.split(',')]
    names = sorted(name for name in os.listdir(directory) if name.endswith('.nsfp'))
    assert names == [os.path.basename(snapshot_path(directory, s)) for s in expected], names
    for step in expected:
        assert read_snapshot(snapshot_path(directory, step)).step == step


@then('the saved configuration parses back to the one that was run')
def step_saved_config(context: Context) -> None:
    with open(os.path.join(context.workdir, 'out', CONFIG_FILE), encoding='utf-8') as handle:
        saved = parse_config(handle.read())
    with open(os.path.join(context.workdir, 'run.cfg'), encoding='utf-8') as handle:
        original = parse_config(handle.read())
    assert saved == original
