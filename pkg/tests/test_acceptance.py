"""Exit criteria for the package, one test per criterion.

Each test prints a single PASS/FAIL line (collected again in the pytest
terminal summary). Tolerances are fixed here and never tuned.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from railassoc import channel
from railassoc.experiments import PRESETS, compare_with_oracle, run_sweep
from railassoc.game import initial_partition, is_nash_stable, run_coalition_formation
from railassoc.oracle import bell_number, enumerate_feasible
from railassoc.scenario import SystemConfig, build_scenario

SCHEMES = ("CG-FD", "CG-HD", "NCCG-FD")
ORACLE_DEVIATION_MAX = 0.10
ORACLE_RUNTIME_S = 120.0
STABILITY_RUNTIME_S = 60.0
PLATEAU_REL_CHANGE = 0.01
USERS_SPREAD_MAX = 0.15
# the step tolerance for "non-increasing" / "non-decreasing": exact, up to float rounding
MONO_RTOL = 1e-12


@pytest.fixture(scope="module")
def sweeps():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_sweep(PRESETS[name]())
        return cache[name]
    return get


def monotone(values, direction):
    """Steps that break monotonicity, as (index, previous, next)."""
    bad = []
    for k, (a, b) in enumerate(zip(values, values[1:])):
        step = (b - a) * direction
        if step < -MONO_RTOL * max(abs(a), abs(b)):
            bad.append((k, a, b))
    return bad


def gbps(values):
    return "[" + ", ".join(f"{v / 1e9:.4f}" for v in values) + "]"


def test_1_oracle_near_optimality(criterion):
    t0 = time.perf_counter()
    cmp = compare_with_oracle(PRESETS["oracle-users"]())
    elapsed = time.perf_counter() - t0
    ok = (cmp.average_deviation <= ORACLE_DEVIATION_MAX
          and all(d >= 0 for d in cmp.deviations)
          and elapsed <= ORACLE_RUNTIME_S)
    criterion("1 oracle near-optimality", ok,
              f"avg deviation {cmp.average_deviation:.4f} (<= {ORACLE_DEVIATION_MAX}), per-point "
              f"{[round(d, 4) for d in cmp.deviations]}, {elapsed:.1f}s (<= {ORACLE_RUNTIME_S:.0f}s)")
    assert ok


def random_instances(count, seed=2024):
    rng = np.random.default_rng(seed)
    for k in range(count):
        yield SystemConfig(num_users=int(rng.integers(1, 41)), num_mrs=int(rng.integers(1, 5)),
                           rng_seed=int(rng.integers(0, 2**31)))


def test_2_nash_stability(criterion):
    t0 = time.perf_counter()
    unstable = []
    for cfg in random_instances(100):
        sc = build_scenario(cfg)
        final, _ = run_coalition_formation(sc, "utilitarian")
        if not is_nash_stable(final, "utilitarian", sc.phy_rate):
            unstable.append((cfg.num_users, cfg.num_mrs, cfg.rng_seed))
    elapsed = time.perf_counter() - t0
    ok = not unstable and elapsed <= STABILITY_RUNTIME_S
    criterion("2 Nash stability", ok,
              f"100 scenarios (N<=40, n<=4), unstable={unstable}, {elapsed:.1f}s (<= 60s)")
    assert ok


def test_3_strict_ascent_and_convergence(criterion):
    problems = []
    traces = 0
    for cfg in random_instances(100, seed=77):
        _, trace = run_coalition_formation(build_scenario(cfg), "utilitarian")
        traces += 1
        u = trace.utilities()
        if not all(b > a for a, b in zip(u, u[1:])) or trace.termination != "stable":
            problems.append(("ascent", cfg.num_users, cfg.num_mrs, cfg.rng_seed))
    rng = np.random.default_rng(5)
    for _ in range(60):
        users, mrs = int(rng.integers(1, 9)), int(rng.integers(1, 4))
        y = int(rng.integers(1, users + 1))
        z = max(1, -(-(users - y) // mrs))
        cfg = SystemConfig(num_users=users, num_mrs=mrs, bs_capacity=y, mr_capacity=z,
                           rng_seed=int(rng.integers(0, 2**31)))
        _, trace = run_coalition_formation(build_scenario(cfg), "utilitarian")
        traces += 1
        space = sum(1 for _ in enumerate_feasible(users, mrs, y, z))
        u = trace.utilities()
        if trace.switch_count > space or not all(b > a for a, b in zip(u, u[1:])):
            problems.append(("bound", users, mrs, y, z, trace.switch_count, space))
    ok = not problems
    criterion("3 strict ascent & convergence", ok,
              f"{traces} traces, violations={problems}")
    assert ok


def test_4_beta_behaviour(criterion, sweeps):
    res = sweeps("beta")
    betas, fd = res.mean_series("CG-FD")
    _, hd = res.mean_series("CG-HD")
    hd_rows = {}
    for r in res.records:
        if r.scheme == "CG-HD" and not r.is_aggregate:
            hd_rows.setdefault(r.seed, set()).add(r.avg_system_throughput)
    checks = {}
    checks["HD constant"] = all(len(v) == 1 for v in hd_rows.values()) and len(set(hd)) == 1
    checks["FD non-increasing in beta"] = not monotone(fd, -1)
    fd_at = dict(zip(betas, fd))
    hd_at = dict(zip(betas, hd))
    plateau = abs(fd_at[1e-13] - fd_at[1e-15]) / fd_at[1e-15]
    checks[f"plateau rel change {plateau:.4f} < {PLATEAU_REL_CHANGE}"] = plateau < PLATEAU_REL_CHANGE
    large = [b for b in betas if b >= 1e-9]
    checks["FD <= HD for beta >= 1e-9 " + str({b: (round(fd_at[b] / 1e9, 4), round(hd_at[b] / 1e9, 4))
                                                for b in large})] = \
        all(fd_at[b] <= hd_at[b] for b in large)
    ok = all(checks.values())
    detail = "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items())
    criterion("4 beta behaviour", ok, f"{detail}; beta={betas}, CG-FD={gbps(fd)}, CG-HD={gbps(hd)}")
    assert ok, detail


TREND_SWEEPS = [
    # preset, direction (+1 non-decreasing, -1 non-increasing, 0 approx. constant)
    ("mrs", -1),
    ("users", 0),
    ("bs-power", +1),
    ("mr-power", +1),
    ("bs-fraction", -1),
]


def test_5_trend_suite(criterion, sweeps):
    failures, lines = [], []
    for name, direction in TREND_SWEEPS:
        res = sweeps(name)
        means = {s: res.mean_series(s)[1] for s in SCHEMES}
        values = res.mean_series("CG-FD")[0]
        for s in SCHEMES:
            m = means[s]
            if direction == 0:
                spread = (max(m) - min(m)) / np.mean(m)
                if spread >= USERS_SPREAD_MAX:
                    failures.append(f"{name}/{s}: spread {spread:.3f} >= {USERS_SPREAD_MAX}")
            else:
                bad = monotone(m, direction)
                if bad:
                    failures.append(f"{name}/{s}: {len(bad)} monotonicity breaks at "
                                    f"{[values[k + 1] for k, _, _ in bad]}")
            lines.append(f"{name}/{s} {values} -> {gbps(m)}")
        for k, v in enumerate(values):
            fd, hd, nc = (means[s][k] for s in SCHEMES)
            if not fd >= hd >= nc:
                failures.append(f"{name}={v}: ordering FD {fd / 1e9:.4f}, HD {hd / 1e9:.4f}, "
                                f"NCCG {nc / 1e9:.4f}")
    ok = not failures
    criterion("5 trend suite", ok, f"{len(failures)} violations: {failures}")
    for line in lines:
        print("    " + line)
    assert ok, "\n".join(failures)


def test_6_switch_growth(criterion, sweeps):
    failures, detail = [], []
    for name, mrs in (("switches-2mr", 2), ("switches-4mr", 4)):
        res = sweeps(name)
        users, sw = res.mean_series("CG-FD", "switch_count")
        finite = all(math.isfinite(r.switch_count) for r in res.records)
        bad = monotone(sw, +1)
        if bad or not finite:
            failures.append((mrs, bad))
        detail.append(f"n={mrs}: N={users} -> {[round(x, 1) for x in sw]}")
    ok = not failures
    criterion("6 switch-operation growth", ok, "; ".join(detail) + (f"; breaks {failures}" if failures else ""))
    assert ok


def test_7_formula_values(criterion):
    rel = 1e-6
    p_mr = channel.dbm_to_w(23.0)
    checks = [
        ("G0(30deg)", channel.antenna_gain_db(0.0, 30.0), 15.9099774372099657, rel),
        ("Gsl(30deg)", channel.antenna_gain_db(90.0, 30.0), -11.9772322436013121, rel),
        ("G(15deg)", channel.antenna_gain_db(15.0, 30.0), 12.8999774372099657, rel),
        ("Pr(100m)", channel.received_power_w(1.0, channel.db_to_linear(15.9099774372099657),
                                              channel.db_to_linear(15.9099774372099657), 100.0),
         2.40721991717355641e-8, rel),
        ("noise(1/3)", channel.noise_power_w(1 / 3, 2160e6, -134.0), 2.86637162798518021e-14, rel),
        ("snr", channel.snr(2.40721991717355641e-8, 2.86637162798518021e-14), 839814.312167759946, rel),
        ("sinr/snr beta=1e-13",
         channel.sinr_fd(1.0, 2.86637162798518021e-14, 1e-13, p_mr) / channel.snr(1.0, 2.86637162798518021e-14),
         0.589590179272834259, rel),
        ("zero fading", channel.received_power_w(1.0, 39.0, 39.0, 100.0, fading_power=0.0), 0.0, rel),
        ("double distance",
         channel.received_power_w(1.0, 39.0, 39.0, 200.0) * 4 / channel.received_power_w(1.0, 39.0, 39.0, 100.0),
         1.0, rel),
        ("unit band noise", channel.noise_power_w(1.0, 1e6, -134.0), channel.dbm_to_w(-134.0), rel),
        ("half alpha noise", channel.noise_power_w(1 / 6, 2160e6, -134.0) * 2, 2.86637162798518021e-14, rel),
        ("snr equal", channel.snr(3e-14, 3e-14), 1.0, rel),
        ("snr zero", channel.snr(0.0, 3e-14), 0.0, rel),
        ("sinr beta=0", channel.sinr_fd(2.4e-8, 2.86e-14, 0.0, p_mr), channel.snr(2.4e-8, 2.86e-14), rel),
        ("30 dBm", channel.dbm_to_w(30.0), 1.0, 1e-12),
        ("0 dB", channel.db_to_linear(0.0), 1.0, 1e-12),
        ("dBm round trip", channel.w_to_dbm(channel.dbm_to_w(-73.25)), -73.25, 1e-12),
        ("B(0)", bell_number(0), 1, 0),
        ("B(3)", bell_number(3), 5, 0),
        ("B(5)", bell_number(5), 52, 0),
    ]
    bad = [(name, got, want) for name, got, want, tol in checks
           if not math.isclose(got, want, rel_tol=tol, abs_tol=0.0) and got != want]
    ok = not bad
    criterion("7 formula unit values", ok, f"{len(checks)} values checked, mismatches={bad}")
    assert ok


def test_8_sweep_determinism(criterion, tmp_path):
    spec = tmp_path / "beta.toml"
    spec.write_text('parameter = "si_cancellation"\nvalues = [1e-9, 1e-11, 1e-13, 1e-15]\n'
                    'replications = 10\n[base]\nnum_users = 40\nnum_mrs = 2\n')
    outputs = []
    for tag in ("first", "second"):
        stem = tmp_path / tag / "beta"
        proc = subprocess.run([sys.executable, "-m", "railassoc", "sweep", str(spec),
                               "--output", str(stem)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append([(stem.parent / f"beta.{ext}").read_bytes() for ext in ("csv", "json")])
    ok = outputs[0] == outputs[1]
    criterion("8 determinism", ok,
              f"two CLI sweeps -> CSV {len(outputs[0][0])} bytes, JSON {len(outputs[0][1])} bytes, "
              f"identical={ok}")
    assert ok
