"""Parameter sweeps, seed replication, oracle comparison and CSV/JSON output."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .game import run_coalition_formation
from .oracle import DEFAULT_MAX_MRS, DEFAULT_MAX_USERS, OracleCapError, average_deviation, optimal_partition
from .rates import per_class_throughput, system_average_throughput
from .scenario import (ConfigError, SystemConfig, _read_mapping, apply_overrides, build_scenario,
                       config_from_dict, validate_config)

log = logging.getLogger(__name__)

# scheme -> (duplex mode, preference order); OS uses exhaustive search
SCHEMES = {
    "CG-FD": ("full", "utilitarian"),
    "CG-HD": ("half", "utilitarian"),
    "NCCG-FD": ("full", "selfish"),
    "OS": ("full", None),
}
DEFAULT_SCHEMES = ("CG-FD", "CG-HD", "NCCG-FD")


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    base: SystemConfig = field(default_factory=SystemConfig)
    schemes: tuple = DEFAULT_SCHEMES
    replications: int = 10
    output: Optional[str] = None
    record_runtime: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if not self.values:
            raise ConfigError("sweep needs at least one parameter value")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"unknown schemes: {unknown}; choose from {sorted(SCHEMES)}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")

    def seeds(self) -> list[int]:
        return [self.base.rng_seed + k for k in range(self.replications)]

    def point_config(self, value) -> SystemConfig:
        return apply_overrides(self.base, {self.parameter: value})


_SPEC_KEYS = {"parameter", "values", "base", "schemes", "replications", "output", "record_runtime"}


def spec_from_dict(data) -> SweepSpec:
    unknown = sorted(set(data) - _SPEC_KEYS)
    if unknown:
        raise ConfigError(f"unknown sweep keys: {', '.join(unknown)}")
    for key in ("parameter", "values"):
        if key not in data:
            raise ConfigError(f"sweep file lacks '{key}'")
    kwargs = {k: v for k, v in data.items() if k != "base"}
    return SweepSpec(base=config_from_dict(data.get("base", {})), **kwargs)


def load_sweep(path) -> SweepSpec:
    return spec_from_dict(_read_mapping(Path(path)))


@dataclass
class SweepRecord:
    """One result row. Aggregate rows (mean over seeds) carry ``seed=None``."""

    parameter: str
    value: Any
    scheme: str
    seed: Optional[int]
    avg_system_throughput: float
    bs_user_throughput: Optional[float]
    mr_user_throughput: Optional[float]
    switch_count: float
    runtime_ms: Optional[float]

    @property
    def is_aggregate(self) -> bool:
        return self.seed is None


FIELDS = [f.name for f in dataclasses.fields(SweepRecord)]


@dataclass(frozen=True)
class SkippedCell:
    value: Any
    scheme: str
    seed: Optional[int]
    reason: str


@dataclass
class SweepResult:
    spec: SweepSpec
    records: list
    skipped: list

    def aggregates(self) -> list:
        return [r for r in self.records if r.is_aggregate]

    def mean_series(self, scheme, metric="avg_system_throughput") -> tuple[list, list]:
        rows = sorted((r for r in self.aggregates() if r.scheme == scheme), key=lambda r: r.value)
        return [r.value for r in rows], [getattr(r, metric) for r in rows]


def run_scheme(config: SystemConfig, scheme: str, *, max_users=DEFAULT_MAX_USERS,
               max_mrs=DEFAULT_MAX_MRS):
    """Build the scenario for ``scheme`` and solve it.

    Returns ``(scenario, partition, switch_count)``.
    """
    duplex, order = SCHEMES[scheme]
    scenario = build_scenario(config.replace(duplex_mode=duplex,
                                             preference_mode=order or "utilitarian"))
    if order is None:
        result = optimal_partition(scenario, max_users=max_users, max_mrs=max_mrs)
        return scenario, result.partition, 0
    partition, trace = run_coalition_formation(scenario, order)
    return scenario, partition, trace.switch_count


def _run_cell(parameter, value, config, scheme, seed, record_runtime):
    t0 = time.perf_counter()
    scenario, partition, switches = run_scheme(config, scheme)
    elapsed = (time.perf_counter() - t0) * 1e3 if record_runtime else None
    bs_mean, mr_mean = per_class_throughput(partition, scenario.phy_rate)
    return SweepRecord(parameter, value, scheme, seed,
                       system_average_throughput(partition, scenario.phy_rate),
                       bs_mean, mr_mean, switches, elapsed)


def _mean_or_none(values):
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def aggregate(records) -> list:
    """Mean-over-seeds rows, one per (value, scheme)."""
    groups = {}
    for r in records:
        if not r.is_aggregate:
            groups.setdefault((r.value, r.scheme), []).append(r)
    out = []
    for (value, scheme), rows in groups.items():
        out.append(SweepRecord(
            rows[0].parameter, value, scheme, None,
            float(np.mean([r.avg_system_throughput for r in rows])),
            _mean_or_none([r.bs_user_throughput for r in rows]),
            _mean_or_none([r.mr_user_throughput for r in rows]),
            float(np.mean([r.switch_count for r in rows])),
            _mean_or_none([r.runtime_ms for r in rows])))
    return out


def sort_key(record):
    return (record.value, record.scheme, record.seed is None, record.seed or 0)


def check_oracle_points(spec: SweepSpec, max_users=DEFAULT_MAX_USERS, max_mrs=DEFAULT_MAX_MRS):
    """Raise :class:`OracleCapError` naming every point too large for OS."""
    if "OS" not in spec.schemes:
        return
    bad = []
    for value in spec.values:
        cfg = spec.point_config(value)
        if cfg.num_users > max_users or cfg.num_mrs > max_mrs:
            bad.append(f"{spec.parameter}={value} (N={cfg.num_users}, n={cfg.num_mrs})")
    if bad:
        raise OracleCapError(
            f"oracle cap N<={max_users}, n<={max_mrs} exceeded at: {', '.join(bad)}")


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Run every (value, scheme, seed) cell and append per-value means.

    Invalid derived configs are recorded as skipped cells. The output does
    not depend on ``workers``.
    """
    check_oracle_points(spec)
    cells, skipped = [], []
    for value in spec.values:
        try:
            cfg = spec.point_config(value)
            problems = validate_config(cfg)
        except ConfigError as exc:
            problems = [str(exc)]
        if problems:
            reason = "; ".join(problems)
            log.warning("skipping %s=%r: %s", spec.parameter, value, reason)
            skipped.extend(SkippedCell(value, s, None, reason) for s in spec.schemes)
            continue
        for seed in spec.seeds():
            for scheme in spec.schemes:
                cells.append((spec.parameter, value, cfg.replace(rng_seed=seed), scheme, seed,
                              spec.record_runtime))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, *zip(*cells))) if cells else []
    else:
        records = [_run_cell(*c) for c in cells]
    records += aggregate(records)
    records.sort(key=sort_key)
    return SweepResult(spec, records, skipped)


@dataclass
class OracleComparison:
    parameter: str
    values: list
    os_means: list
    alg_means: list
    deviations: list
    average_deviation: float
    sweep: SweepResult

    def to_dict(self) -> dict:
        return {
            "parameter": self.parameter,
            "points": [
                {"value": v, "os": o, "cg_fd": a, "deviation": d}
                for v, o, a, d in zip(self.values, self.os_means, self.alg_means, self.deviations)
            ],
            "average_deviation": self.average_deviation,
        }


def compare_with_oracle(spec: SweepSpec, scheme: str = "CG-FD", workers: int = 1) -> OracleComparison:
    """Per-point seed-mean objective of OS and ``scheme`` plus their average deviation."""
    spec = dataclasses.replace(spec, schemes=("OS", scheme))
    result = run_sweep(spec, workers=workers)
    if result.skipped:
        raise ConfigError(f"invalid sweep points: {sorted({str(s.value) for s in result.skipped})}")
    values, os_means = result.mean_series("OS")
    _, alg = result.mean_series(scheme)
    devs = [(o - a) / o for o, a in zip(os_means, alg)]
    return OracleComparison(spec.parameter, values, os_means, alg, devs,
                            average_deviation(os_means, alg), result)


# -- emission ---------------------------------------------------------------

def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(FIELDS)
    for r in sorted(records, key=sort_key):
        writer.writerow([_csv_cell(getattr(r, f)) for f in FIELDS])
    return buf.getvalue()


def records_to_json(records) -> str:
    rows = [dataclasses.asdict(r) for r in sorted(records, key=sort_key)]
    for row in rows:
        for k, v in row.items():
            if isinstance(v, float) and not math.isfinite(v):
                raise ValueError(f"non-finite {k} in record {row}")
    return json.dumps(rows, indent=2) + "\n"


def emit(records, path, formats=("csv", "json")) -> list[Path]:
    """Write records to ``<path>.csv`` / ``<path>.json``; returns written paths."""
    records = list(records)
    if not records:
        raise ValueError("no records to emit")
    stem = Path(path)
    written = []
    for fmt in formats:
        target = stem.with_name(stem.name + "." + fmt)
        text = records_to_csv(records) if fmt == "csv" else records_to_json(records)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with open(target, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {target}: {exc.strerror or exc}") from exc
        written.append(target)
    return written


def _parse_scalar(text):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_csv(path) -> list:
    """Parse an emitted CSV back into :class:`SweepRecord` objects."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            opt = lambda k: None if row[k] == "" else float(row[k])
            out.append(SweepRecord(
                parameter=row["parameter"],
                value=_parse_scalar(row["value"]),
                scheme=row["scheme"],
                seed=None if row["seed"] == "" else int(row["seed"]),
                avg_system_throughput=float(row["avg_system_throughput"]),
                bs_user_throughput=opt("bs_user_throughput"),
                mr_user_throughput=opt("mr_user_throughput"),
                switch_count=_parse_scalar(row["switch_count"]),
                runtime_ms=opt("runtime_ms"),
            ))
    return out


def write_skipped(skipped, path) -> Optional[Path]:
    if not skipped:
        return None
    target = Path(path)
    target = target.with_name(target.name + ".skipped.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps([dataclasses.asdict(s) for s in skipped], indent=2) + "\n")
    return target


# -- built-in sweeps --------------------------------------------------------

def _preset(parameter, values, schemes=DEFAULT_SCHEMES, **base):
    return SweepSpec(parameter, tuple(values), SystemConfig(**base), tuple(schemes))


PRESETS = {
    "beta": lambda: _preset("si_cancellation", [1e-9, 1e-10, 1e-11, 1e-12, 1e-13, 1e-14, 1e-15],
                            num_users=40, num_mrs=2),
    "mrs": lambda: _preset("num_mrs", range(1, 7), num_users=40),
    "users": lambda: _preset("num_users", range(25, 51, 5), num_mrs=4),
    "bs-power": lambda: _preset("bs_tx_power_dbm", [20.0, 25.0, 30.0, 35.0, 40.0, 45.0],
                                num_users=40, num_mrs=2),
    "mr-power": lambda: _preset("mr_tx_power_dbm", [5.0, 10.0, 15.0, 20.0, 25.0],
                                num_users=40, num_mrs=2),
    "bs-fraction": lambda: _preset("bs_bandwidth_fraction", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
                                   num_users=40, num_mrs=2),
    "switches-2mr": lambda: _preset("num_users", range(25, 51, 5), ["CG-FD"], num_mrs=2),
    "switches-4mr": lambda: _preset("num_users", range(25, 51, 5), ["CG-FD"], num_mrs=4),
    "oracle-users": lambda: _preset("num_users", [6, 8, 10, 12, 14], ["CG-FD", "OS"], num_mrs=2),
    "oracle-mrs": lambda: _preset("num_mrs", [1, 2, 3, 4], ["CG-FD", "OS"], num_users=10),
}
