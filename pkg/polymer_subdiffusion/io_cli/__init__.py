from polymer_subdiffusion.io_cli.config import SimulationConfig, format_config, parse_config
from polymer_subdiffusion.io_cli.output import (
    DIAGNOSTIC_COLUMNS,
    Snapshot,
    decode_snapshot,
    encode_snapshot,
    format_diagnostics,
    read_snapshot,
    snapshot_path,
    write_diagnostics,
    write_snapshot,
)

__all__ = [
    'DIAGNOSTIC_COLUMNS',
    'SimulationConfig',
    'Snapshot',
    'decode_snapshot',
    'encode_snapshot',
    'format_config',
    'format_diagnostics',
    'parse_config',
    'read_snapshot',
    'snapshot_path',
    'write_diagnostics',
    'write_snapshot',
]
