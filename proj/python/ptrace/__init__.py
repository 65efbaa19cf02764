"""Parallel semi-analytical particle tracking engine."""

from ._ptrace import (
    Scenario,
    build_tc1,
    build_tc2,
    config_digest,
    decode_endpoint,
    decode_timeseries,
    generate_field,
    hardware_workers,
)

__all__ = [
    "Scenario",
    "build_tc1",
    "build_tc2",
    "config_digest",
    "decode_endpoint",
    "decode_timeseries",
    "generate_field",
    "hardware_workers",
]
