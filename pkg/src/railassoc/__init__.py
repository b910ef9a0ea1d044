"""User association for full-duplex mmWave mobile-relay train networks.

Coalition-formation association (utilitarian and selfish switch orders),
half-duplex baseline, exhaustive-search optimum, and a sweep harness that
writes plot-ready CSV/JSON.
"""

from .scenario import (
    ConfigError,
    Geometry,
    Scenario,
    SystemConfig,
    bandwidth_fractions,
    build_scenario,
    load_config,
    validate_config,
)
from .game import (
    GameTrace,
    Partition,
    initial_partition,
    is_nash_stable,
    run_coalition_formation,
)
from .oracle import OracleResult, average_deviation, bell_number, optimal_partition

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "GameTrace",
    "Geometry",
    "OracleResult",
    "Partition",
    "Scenario",
    "SystemConfig",
    "average_deviation",
    "bandwidth_fractions",
    "bell_number",
    "build_scenario",
    "initial_partition",
    "is_nash_stable",
    "load_config",
    "optimal_partition",
    "run_coalition_formation",
    "validate_config",
]
