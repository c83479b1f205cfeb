"""Deterministic SCADA co-simulation with capture analysis helpers."""

try:
    from ._core import (
        BadMagic,
        ConfigError,
        IoError,
        Packet,
        TruncatedRecord,
        config_hash,
        connection_matrix,
        packets_over_time,
        parse_pcap,
        power_report,
        protocol_distribution,
        run_scenario,
        validate_config,
    )
except ImportError:  # build tree, where _core sits next to the test runner
    from _core import (
        BadMagic,
        ConfigError,
        IoError,
        Packet,
        TruncatedRecord,
        config_hash,
        connection_matrix,
        packets_over_time,
        parse_pcap,
        power_report,
        protocol_distribution,
        run_scenario,
        validate_config,
    )

__all__ = [
    "BadMagic",
    "ConfigError",
    "IoError",
    "Packet",
    "TruncatedRecord",
    "config_hash",
    "connection_matrix",
    "packets_over_time",
    "parse_pcap",
    "power_report",
    "protocol_distribution",
    "run_scenario",
    "validate_config",
]
