import csv
import io
import logging
import os
from collections.abc import Sequence
from dataclasses import astuple, dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from polymer_subdiffusion.errors import OutputError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DIAGNOSTIC_COLUMNS = (
    't',
    'ke',
    'enstrophy',
    'entropy',
    'mass',
    'min_psi',
    'clip_mass',
    'max_rho',
    'stress_norm',
    'energy_residual',
)

SNAPSHOT_MAGIC = b'NSFP'
SNAPSHOT_VERSION = 1
SNAPSHOT_HEADER = np.dtype(
    [
        ('magic', 'S4'),
        ('version', '<u4'),
        ('mode', 'S12'),
        ('nx', '<u4'),
        ('nr', '<u4'),
        ('ntheta', '<u4'),
        ('step', '<u8'),
    ]
)
PAYLOAD_DTYPE = np.dtype('<f8')


# psi has shape (nx, nx, nr, ntheta) in full mode and (nr, ntheta) otherwise;
# velocity (2, nx, nx) is present in full mode only.
@dataclass(frozen=True, eq=False)
class Snapshot:
    mode: str
    step: int
    psi: FloatArray
    velocity: Optional[FloatArray] = None

    @property
    def nx(self) -> int:
        return 0 if self.velocity is None else int(self.velocity.shape[-1])


def format_diagnostics(records: Sequence[Any]) -> str:
    if not records:
        raise OutputError('<memory>', 'no diagnostics to write')

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(DIAGNOSTIC_COLUMNS)
    for record in records:
        row = astuple(record)[: len(DIAGNOSTIC_COLUMNS)]
        writer.writerow([repr(float(value)) for value in row])
    return buffer.getvalue()


def write_diagnostics(records: Sequence[Any], path: str) -> None:
    if not records:
        raise OutputError(path, 'no diagnostics to write')

    text = format_diagnostics(records)
    try:
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
    except OSError as error:
        raise OutputError(path, error.strerror or str(error)) from error
    logger.info('wrote %d diagnostic rows to %s', len(records), path)


def encode_snapshot(snapshot: Snapshot) -> bytes:
    full = snapshot.velocity is not None
    nr, ntheta = snapshot.psi.shape[-2:]
    header = np.array(
        [
            (
                SNAPSHOT_MAGIC,
                SNAPSHOT_VERSION,
                snapshot.mode.encode('ascii'),
                snapshot.nx,
                nr,
                ntheta,
                snapshot.step,
            )
        ],
        dtype=SNAPSHOT_HEADER,
    )
    parts = [header.tobytes(), np.ascontiguousarray(snapshot.psi, dtype=PAYLOAD_DTYPE).tobytes()]
    if full:
        parts.append(np.ascontiguousarray(snapshot.velocity, dtype=PAYLOAD_DTYPE).tobytes())
    return b''.join(parts)


def decode_snapshot(data: bytes, source: str = '<memory>') -> Snapshot:
    if len(data) < SNAPSHOT_HEADER.itemsize:
        raise OutputError(source, 'truncated snapshot header')

    header = np.frombuffer(data, dtype=SNAPSHOT_HEADER, count=1)[0]
    if bytes(header['magic']) != SNAPSHOT_MAGIC:
        raise OutputError(source, 'not a snapshot file (bad magic)')
    if int(header['version']) != SNAPSHOT_VERSION:
        raise OutputError(source, f'unsupported snapshot version {int(header["version"])}')

    mode = bytes(header['mode']).decode('ascii')
    nx, nr, ntheta = int(header['nx']), int(header['nr']), int(header['ntheta'])
    psi_shape = (nx, nx, nr, ntheta) if nx > 0 else (nr, ntheta)
    velocity_shape = (2, nx, nx)
    psi_count = int(np.prod(psi_shape))
    velocity_count = int(np.prod(velocity_shape)) if nx > 0 else 0

    payload = data[SNAPSHOT_HEADER.itemsize :]
    expected = (psi_count + velocity_count) * PAYLOAD_DTYPE.itemsize
    if len(payload) != expected:
        raise OutputError(source, f'payload holds {len(payload)} bytes, header implies {expected}')

    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).astype(np.float64)
    psi = values[:psi_count].reshape(psi_shape)
    velocity = values[psi_count:].reshape(velocity_shape) if nx > 0 else None
    return Snapshot(mode=mode, step=int(header['step']), psi=psi, velocity=velocity)


def write_snapshot(snapshot: Snapshot, path: str) -> None:
    try:
        with open(path, 'wb') as handle:
            handle.write(encode_snapshot(snapshot))
    except OSError as error:
        raise OutputError(path, error.strerror or str(error)) from error


def read_snapshot(path: str) -> Snapshot:
    try:
        with open(path, 'rb') as handle:
            data = handle.read()
    except OSError as error:
        raise OutputError(path, error.strerror or str(error)) from error
    return decode_snapshot(data, path)


def snapshot_path(directory: str, step: int) -> str:
    return os.path.join(directory, f'snapshot_{step:06d}.nsfp')
