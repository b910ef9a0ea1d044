"""System configuration, topology generation and feasibility checks.

Coordinate frame: the track runs along the x-axis, the origin is the foot of
the base station on the track, and the BS sits at ``(0, -bs_offset_m)``. The
train occupies ``[-L/2, L/2]`` on the track; outdoor users are drawn in a
rectangle on the BS side of the track.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import rates as _rates

DUPLEX_MODES = ("full", "half")
PREFERENCE_MODES = ("utilitarian", "selfish")
FADING_MODELS = ("deterministic", "nakagami")

BS_ONBOARD_PENETRATION = "bs-onboard"


class ConfigError(ValueError):
    """Raised when a configuration is invalid or cannot be parsed."""


@dataclass(frozen=True)
class Geometry:
    track_length_m: float = 1000.0
    bs_offset_m: float = 50.0
    train_length_m: float = 200.0
    outdoor_region_length_m: float = 500.0
    outdoor_region_width_m: float = 100.0
    # gap between the track and the near edge of the outdoor region
    outdoor_region_gap_m: float = 10.0
    onboard_fraction: float = 0.5


@dataclass(frozen=True)
class SystemConfig:
    """All physical and game parameters of one run.

    ``bs_capacity`` / ``mr_capacity`` left as ``None`` mean "no binding cap"
    and resolve to ``num_users``.
    """

    total_bandwidth_hz: float = 2160e6
    bs_tx_power_dbm: float = 30.0
    mr_tx_power_dbm: float = 23.0
    noise_psd_dbm_per_mhz: float = -134.0
    path_loss_exponent: float = 2.0
    carrier_wavelength_m: float = 5e-3
    half_power_beamwidth_deg: float = 30.0
    si_cancellation: float = 1e-13
    num_mrs: int = 2
    num_users: int = 40
    bs_bandwidth_fraction: float = 1.0 / 3.0
    bs_capacity: int | None = None
    mr_capacity: int | None = None
    duplex_mode: str = "full"
    preference_mode: str = "utilitarian"
    fading: str = "deterministic"
    nakagami_m: float = 1.0
    penetration_loss_db: float = 0.0
    min_distance_m: float = 1.0
    rng_seed: int = 0
    non_switch_budget_multiplier: int = 10
    geometry: Geometry = field(default_factory=Geometry)

    @property
    def bs_cap(self) -> int:
        return self.num_users if self.bs_capacity is None else self.bs_capacity

    @property
    def mr_cap(self) -> int:
        return self.num_users if self.mr_capacity is None else self.mr_capacity

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def bandwidth_fractions(config: SystemConfig) -> np.ndarray:
    """Per-node bandwidth fractions, MRs first and the BS last."""
    n = config.num_mrs
    alpha = np.full(n + 1, (1.0 - config.bs_bandwidth_fraction) / n)
    alpha[n] = config.bs_bandwidth_fraction
    return alpha


def validate_config(config: SystemConfig) -> list[str]:
    """Return every violated constraint as a message; empty means valid."""
    problems = []
    g = config.geometry
    n, users = config.num_mrs, config.num_users

    def positive(name, value):
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            problems.append(f"{name} must be positive and finite, got {value!r}")

    positive("total_bandwidth_hz", config.total_bandwidth_hz)
    positive("path_loss_exponent", config.path_loss_exponent)
    positive("carrier_wavelength_m", config.carrier_wavelength_m)
    positive("min_distance_m", config.min_distance_m)
    for name in ("bs_tx_power_dbm", "mr_tx_power_dbm", "noise_psd_dbm_per_mhz"):
        if not math.isfinite(getattr(config, name)):
            problems.append(f"{name} must be finite")
    if not 0.0 < config.half_power_beamwidth_deg <= 180.0:
        problems.append("half_power_beamwidth_deg must lie in (0, 180]")
    if not (config.si_cancellation >= 0.0 and math.isfinite(config.si_cancellation)):
        problems.append("si_cancellation must be >= 0")
    if config.penetration_loss_db < 0.0:
        problems.append("penetration_loss_db must be >= 0")

    if n < 1:
        problems.append(f"num_mrs must be >= 1, got {n}")
    if users < 1:
        problems.append(f"num_users must be >= 1, got {users}")
    a = config.bs_bandwidth_fraction
    if a >= 1.0:
        problems.append("BS fraction must be < 1")
    if a <= 0.0:
        problems.append("BS fraction must be > 0")

    y, z = config.bs_cap, config.mr_cap
    if y < 1:
        problems.append(f"bs_capacity must be >= 1, got {y}")
    if z < 1:
        problems.append(f"mr_capacity must be >= 1, got {z}")
    if n >= 1 and users >= 1 and y + n * z < users:
        problems.append(f"capacity infeasible: {y}+{n}·{z} < {users}")

    if config.duplex_mode not in DUPLEX_MODES:
        problems.append(f"duplex_mode must be one of {DUPLEX_MODES}")
    if config.preference_mode not in PREFERENCE_MODES:
        problems.append(f"preference_mode must be one of {PREFERENCE_MODES}")
    if config.fading not in FADING_MODELS:
        problems.append(f"fading must be one of {FADING_MODELS}")
    elif config.fading == "nakagami" and not config.nakagami_m > 0.5:
        problems.append("nakagami_m must be > 0.5")
    if config.non_switch_budget_multiplier < 1:
        problems.append("non_switch_budget_multiplier must be >= 1")

    for name in ("track_length_m", "bs_offset_m", "outdoor_region_length_m",
                 "outdoor_region_width_m"):
        positive(f"geometry.{name}", getattr(g, name))
    if g.train_length_m < 0 or g.outdoor_region_gap_m < 0:
        problems.append("geometry lengths must be >= 0")
    if g.train_length_m > g.track_length_m:
        problems.append("train longer than the track")
    if g.train_length_m == 0 and n >= 2:
        problems.append("zero-length train cannot host 2 or more MRs")
    if not 0.0 <= g.onboard_fraction <= 1.0:
        problems.append("geometry.onboard_fraction must lie in [0, 1]")
    return problems


@dataclass(frozen=True, eq=False)
class Scenario:
    """A realized topology with precomputed PHY rates.

    ``distances`` and ``phy_rate`` have shape ``(num_users, num_mrs + 1)``;
    column ``num_mrs`` is the BS.
    """

    config: SystemConfig
    bs_position: np.ndarray
    mr_positions: np.ndarray
    user_positions: np.ndarray
    onboard: np.ndarray
    distances: np.ndarray
    fading_power: np.ndarray
    alpha: np.ndarray
    phy_rate: np.ndarray

    @property
    def num_users(self) -> int:
        return self.config.num_users

    @property
    def num_mrs(self) -> int:
        return self.config.num_mrs

    @property
    def bs(self) -> int:
        return self.config.num_mrs

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.config == other.config and all(
            np.array_equal(getattr(self, f.name), getattr(other, f.name))
            for f in dataclasses.fields(self) if f.name != "config")


def _frozen(array):
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


def mr_track_positions(config: SystemConfig) -> np.ndarray:
    """x-coordinates of the MRs, equally spaced over the train."""
    n, length = config.num_mrs, config.geometry.train_length_m
    return -length / 2.0 + (np.arange(n) + 0.5) * length / n


def build_scenario(config: SystemConfig) -> Scenario:
    problems = validate_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
    g = config.geometry
    n, users = config.num_mrs, config.num_users
    rng = np.random.default_rng(config.rng_seed)

    bs = np.array([0.0, -g.bs_offset_m])
    mrs = np.column_stack([mr_track_positions(config), np.zeros(n)])

    n_on = int(round(users * g.onboard_fraction))
    onboard = np.arange(users) < n_on
    pos = np.empty((users, 2))
    pos[:n_on, 0] = rng.uniform(-g.train_length_m / 2, g.train_length_m / 2, n_on)
    pos[:n_on, 1] = 0.0
    n_out = users - n_on
    pos[n_on:, 0] = rng.uniform(-g.outdoor_region_length_m / 2, g.outdoor_region_length_m / 2, n_out)
    pos[n_on:, 1] = -rng.uniform(g.outdoor_region_gap_m,
                                 g.outdoor_region_gap_m + g.outdoor_region_width_m, n_out)

    nodes = np.vstack([mrs, bs])
    dist = np.linalg.norm(pos[:, None, :] - nodes[None, :, :], axis=-1)
    dist = np.maximum(dist, config.min_distance_m)

    if config.fading == "nakagami":
        m = config.nakagami_m
        fading = rng.gamma(shape=m, scale=1.0 / m, size=dist.shape)
    else:
        fading = np.ones_like(dist)

    alpha = bandwidth_fractions(config)
    phy = _rates.compute_phy_rates(config, dist, fading, onboard, alpha)
    return Scenario(
        config=config,
        bs_position=_frozen(bs),
        mr_positions=_frozen(mrs),
        user_positions=_frozen(pos),
        onboard=_frozen(onboard),
        distances=_frozen(dist),
        fading_power=_frozen(fading),
        alpha=_frozen(alpha),
        phy_rate=_frozen(phy),
    )


# -- config files -----------------------------------------------------------

def _read_mapping(path: Path) -> dict:
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if path.suffix.lower() == ".json":
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}: unsupported config format (use .toml or .json)")


def _coerce(name: str, default: Any, value: Any) -> Any:
    if isinstance(default, bool):
        if isinstance(value, str):
            return value.lower() in ("1", "true", "yes", "on")
        return bool(value)
    if name in ("bs_capacity", "mr_capacity"):
        if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
            return None
        return int(value)
    if isinstance(default, int):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"{name} must be an integer, got {value}")
        return int(value)
    if isinstance(default, float):
        return float(value)
    return str(value)


def _build(cls, data: Mapping, prefix: str = ""):
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        default = getattr(defaults, key)
        if dataclasses.is_dataclass(default):
            if not isinstance(value, Mapping):
                raise ConfigError(f"{prefix}{key} must be a table")
            kwargs[key] = _build(type(default), value, f"{prefix}{key}.")
        else:
            try:
                kwargs[key] = _coerce(key, default, value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{prefix}{key}: {exc}") from exc
    return cls(**kwargs)


def config_from_dict(data: Mapping) -> SystemConfig:
    return _build(SystemConfig, data)


def load_config(path) -> SystemConfig:
    """Read a TOML or JSON config; unknown keys raise :class:`ConfigError`."""
    return config_from_dict(_read_mapping(Path(path)))


def apply_overrides(config: SystemConfig, overrides: Mapping[str, Any]) -> SystemConfig:
    """Apply dotted-name overrides such as ``{"geometry.train_length_m": "300"}``."""
    data = config.to_dict()
    for dotted, value in overrides.items():
        *parents, leaf = dotted.split(".")
        node = data
        for part in parents:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config key: {dotted}")
            node = node[part]
        if leaf not in node or isinstance(node[leaf], dict):
            raise ConfigError(f"unknown config key: {dotted}")
        node[leaf] = value
    return config_from_dict(data)
