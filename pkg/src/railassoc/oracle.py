"""Exhaustive-search ground truth for the association problem.

The search space is the set of labeled assignments (user -> node), not set
partitions: coalitions are tied to physical nodes, so there are
``(n + 1) ** N`` candidates before capacity filtering.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .game import Partition

DEFAULT_MAX_USERS = 14
DEFAULT_MAX_MRS = 4
_CHUNK = 1 << 18


class OracleCapError(ValueError):
    """The instance is too large to enumerate."""


def check_size(num_users, num_mrs, max_users=DEFAULT_MAX_USERS, max_mrs=DEFAULT_MAX_MRS):
    if num_users > max_users or num_mrs > max_mrs:
        raise OracleCapError(
            f"N={num_users}, n={num_mrs} exceeds the oracle cap (N<={max_users}, n<={max_mrs}); "
            f"{num_mrs + 1}^{num_users} = {(num_mrs + 1) ** num_users:,} assignments")


def enumerate_feasible(num_users, num_mrs, bs_capacity, mr_capacity, max_users=DEFAULT_MAX_USERS):
    """Yield every capacity-feasible assignment as a tuple of node indices.

    Order is lexicographic with user 0 most significant.
    """
    if num_users > max_users:
        raise OracleCapError(
            f"N={num_users} exceeds the enumeration cap {max_users}; "
            f"{(num_mrs + 1) ** num_users:,} assignments")
    bs = num_mrs
    for assign in itertools.product(range(num_mrs + 1), repeat=num_users):
        counts = [0] * (num_mrs + 1)
        for c in assign:
            counts[c] += 1
        if counts[bs] <= bs_capacity and all(k <= mr_capacity for k in counts[:bs]):
            yield assign


def _digits(start, stop, num_users, base):
    idx = np.arange(start, stop, dtype=np.int64)
    powers = base ** np.arange(num_users - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] // powers[None, :]) % base).astype(np.int8)


def _search_range(rates, bs_capacity, mr_capacity, start, stop):
    """Best (index, value) and feasible count over assignment indices [start, stop)."""
    num_users, nodes = rates.shape
    best_idx, best_val, count = -1, -math.inf, 0
    for lo in range(start, stop, _CHUNK):
        hi = min(lo + _CHUNK, stop)
        digits = _digits(lo, hi, num_users, nodes)
        value = np.zeros(hi - lo)
        feasible = np.ones(hi - lo, dtype=bool)
        for c in range(nodes):
            mask = digits == c
            k = mask.sum(axis=1)
            s = mask @ rates[:, c]
            value += np.divide(s, k, out=np.zeros_like(s), where=k > 0)
            feasible &= k <= (bs_capacity if c == nodes - 1 else mr_capacity)
        count += int(feasible.sum())
        if not feasible.any():
            continue
        value[~feasible] = -math.inf
        i = int(np.argmax(value))
        if value[i] > best_val:
            best_idx, best_val = lo + i, float(value[i])
    return best_idx, best_val, count


def _reduce(branches):
    best_idx, best_val, count = -1, -math.inf, 0
    for idx, val, cnt in branches:
        count += cnt
        if idx >= 0 and val > best_val:
            best_idx, best_val = idx, val
    return best_idx, best_val, count


@dataclass(frozen=True)
class OracleResult:
    partition: Partition
    objective: float
    num_feasible: int
    wall_time_s: float

    def to_dict(self) -> dict:
        return {
            "assignment": list(self.partition.assignment),
            "objective": self.objective,
            "num_feasible": self.num_feasible,
            "wall_time_s": self.wall_time_s,
        }


def optimal_partition(scenario, *, max_users=DEFAULT_MAX_USERS, max_mrs=DEFAULT_MAX_MRS,
                      workers=1) -> OracleResult:
    """Maximize the sum of coalition utilities by exhaustive enumeration.

    The space is split into one branch per coalition of user 0; branches
    are reduced in order, so ties go to the first assignment in enumeration
    order whether ``workers`` is 1 or more.
    """
    cfg = scenario.config
    n_users, n = cfg.num_users, cfg.num_mrs
    check_size(n_users, n, max_users, max_mrs)
    rates = np.asarray(scenario.phy_rate, dtype=float)
    base = n + 1
    branch = base ** (n_users - 1)
    bounds = [(k * branch, (k + 1) * branch) for k in range(base)]

    t0 = time.perf_counter()
    args = [(rates, cfg.bs_cap, cfg.mr_cap, lo, hi) for lo, hi in bounds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            branches = list(pool.map(_search_range, *zip(*args)))
    else:
        branches = [_search_range(*a) for a in args]
    best_idx, best_val, count = _reduce(branches)
    elapsed = time.perf_counter() - t0

    assign = tuple(int(d) for d in _digits(best_idx, best_idx + 1, n_users, base)[0])
    return OracleResult(Partition.for_scenario(scenario, assign), best_val, count, elapsed)


def average_deviation(os_values, alg_values) -> float:
    """Mean relative shortfall of an algorithm against the optimum."""
    os_values = np.asarray(os_values, dtype=float)
    alg_values = np.asarray(alg_values, dtype=float)
    if os_values.shape != alg_values.shape or os_values.ndim != 1 or os_values.size == 0:
        raise ValueError("series must be non-empty 1-D arrays of equal length")
    if np.any(os_values <= 0):
        raise ValueError("optimal values must be positive")
    return float(np.mean((os_values - alg_values) / os_values))


def bell_number(k: int) -> int:
    """Number of set partitions of ``k`` elements, 0 <= k <= 25."""
    if not 0 <= k <= 25:
        raise ValueError(f"bell_number supports 0 <= k <= 25, got {k}")
    bells = [1]
    for m in range(1, k + 1):
        bells.append(sum(math.comb(m - 1, j) * bells[j] for j in range(m)))
    return bells[k]
