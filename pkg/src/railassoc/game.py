"""Coalition formation for user association.

Each user is a player; the coalitions are the user sets served by each MR
(indices ``0..n-1``) and by the BS (index ``n``). Users are visited in a
fixed round-robin order and switch to the best admissible coalition they
strictly prefer. The run ends once ``multiplier * N`` consecutive visits
produce no switch.

Two preference orders are supported:

``utilitarian``
    move iff the combined utility of the source and target coalitions rises.
``selfish``
    move iff the target coalition (after joining) beats the current one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rates import total_utility

# relative margin for "strictly greater"; keeps float noise from faking a gain
STRICT_RTOL = 1e-12


class CapacityError(ValueError):
    """A move would exceed a coalition's capacity."""


@dataclass(frozen=True)
class Partition:
    """Assignment of every user to one of ``num_mrs + 1`` coalitions."""

    assignment: tuple
    num_mrs: int
    bs_capacity: int
    mr_capacity: int

    def __post_init__(self):
        assign = tuple(int(x) for x in self.assignment)
        object.__setattr__(self, "assignment", assign)
        if any(not 0 <= x <= self.num_mrs for x in assign):
            raise ValueError(f"coalition indices must lie in [0, {self.num_mrs}]")
        sizes = self.sizes()
        for node, size in enumerate(sizes):
            if size > self.capacity(node):
                raise CapacityError(f"coalition {node} holds {size} > {self.capacity(node)} users")

    @classmethod
    def for_scenario(cls, scenario, assignment):
        cfg = scenario.config
        return cls(tuple(assignment), cfg.num_mrs, cfg.bs_cap, cfg.mr_cap)

    @property
    def bs(self) -> int:
        return self.num_mrs

    @property
    def num_users(self) -> int:
        return len(self.assignment)

    def capacity(self, node: int) -> int:
        return self.bs_capacity if node == self.num_mrs else self.mr_capacity

    def sizes(self) -> np.ndarray:
        return np.bincount(np.asarray(self.assignment, dtype=int), minlength=self.num_mrs + 1)

    def members(self, node: int) -> list[int]:
        return [u for u, c in enumerate(self.assignment) if c == node]

    def coalition_of(self, user: int) -> int:
        return self.assignment[user]

    def can_accept(self, node: int) -> bool:
        return int(self.sizes()[node]) + 1 <= self.capacity(node)

    def coalitions(self) -> list[list[int]]:
        return [self.members(i) for i in range(self.num_mrs + 1)]


def random_partition(num_users, num_mrs, bs_capacity, mr_capacity, rng):
    """Assign users in index order, each uniformly among non-full coalitions."""
    residual = [mr_capacity] * num_mrs + [bs_capacity]
    assignment = []
    for _ in range(num_users):
        open_nodes = [i for i, r in enumerate(residual) if r > 0]
        if not open_nodes:
            raise CapacityError("capacities cannot host every user")
        node = open_nodes[int(rng.integers(len(open_nodes)))]
        residual[node] -= 1
        assignment.append(node)
    return Partition(tuple(assignment), num_mrs, bs_capacity, mr_capacity)


def game_rng(config):
    """Generator for the initial partition, independent of the topology stream."""
    return np.random.default_rng([config.rng_seed, 1])


def initial_partition(scenario, rng=None) -> Partition:
    cfg = scenario.config
    rng = game_rng(cfg) if rng is None else rng
    return random_partition(cfg.num_users, cfg.num_mrs, cfg.bs_cap, cfg.mr_cap, rng)


def _greater(a, b):
    return a - b > STRICT_RTOL * max(abs(a), abs(b))


def _mean(total, count):
    return total / count if count else 0.0


def _utilitarian_terms(sum_s, cnt_s, r_s, sum_t, cnt_t, r_t):
    after = _mean(sum_t + r_t, cnt_t + 1) + _mean(sum_s - r_s, cnt_s - 1)
    before = _mean(sum_t, cnt_t) + _mean(sum_s, cnt_s)
    return after, before


def _selfish_terms(sum_s, cnt_s, r_s, sum_t, cnt_t, r_t):
    return _mean(sum_t + r_t, cnt_t + 1), _mean(sum_s, cnt_s)


_ORDERS = {"utilitarian": _utilitarian_terms, "selfish": _selfish_terms}


def _move_terms(mode, partition, user, target, rates):
    if mode not in _ORDERS:
        raise ValueError(f"unknown preference mode {mode!r}")
    source = partition.coalition_of(user)
    if target == source:
        raise ValueError("target coalition must differ from the user's current one")
    if not 0 <= target <= partition.num_mrs:
        raise ValueError(f"no coalition {target}")
    s_members = partition.members(source)
    t_members = partition.members(target)
    return _ORDERS[mode](
        math.fsum(rates[s_members, source]), len(s_members), float(rates[user, source]),
        math.fsum(rates[t_members, target]), len(t_members), float(rates[user, target]))


def utilitarian_prefers(partition, user, target, rates) -> bool:
    """True iff moving ``user`` to ``target`` strictly raises U(S) + U(T)."""
    return _greater(*_move_terms("utilitarian", partition, user, target, rates))


def selfish_prefers(partition, user, target, rates) -> bool:
    """True iff U(target + user) strictly exceeds U(current coalition)."""
    return _greater(*_move_terms("selfish", partition, user, target, rates))


def prefers(mode, partition, user, target, rates) -> bool:
    return _greater(*_move_terms(mode, partition, user, target, rates))


def apply_switch(partition: Partition, user: int, target: int) -> Partition:
    """Move ``user`` into coalition ``target``; raises if ``target`` is full."""
    if partition.coalition_of(user) == target:
        raise ValueError("user already belongs to the target coalition")
    if not partition.can_accept(target):
        raise CapacityError(f"coalition {target} is full ({partition.capacity(target)} users)")
    assign = list(partition.assignment)
    assign[user] = target
    return Partition(tuple(assign), partition.num_mrs, partition.bs_capacity,
                     partition.mr_capacity)


def is_nash_stable(partition, preference_mode, rates) -> bool:
    """No user has an admissible deviation it strictly prefers."""
    sizes = partition.sizes()
    for user, source in enumerate(partition.assignment):
        for target in range(partition.num_mrs + 1):
            if target == source or sizes[target] + 1 > partition.capacity(target):
                continue
            if prefers(preference_mode, partition, user, target, rates):
                return False
    return True


@dataclass(frozen=True)
class SwitchEvent:
    user: int
    source: int
    target: int
    utility_before: float
    utility_after: float


@dataclass
class GameTrace:
    """What happened during one run of the coalition-formation loop.

    ``utility`` values are the system objective (sum of coalition utilities,
    bit/s). ``non_switch_history`` holds the consecutive-non-switch counter
    after every visit.
    """

    preference_mode: str
    initial_utility: float
    final_utility: float = float("nan")
    events: list[SwitchEvent] = field(default_factory=list)
    iterations: int = 0
    termination: str = ""
    non_switch_history: list[int] = field(default_factory=list)

    @property
    def switch_count(self) -> int:
        return len(self.events)

    def utilities(self) -> list[float]:
        return [self.initial_utility] + [e.utility_after for e in self.events]

    def to_dict(self) -> dict:
        return {
            "events": [vars(e) for e in self.events],
            "summary": {
                "preference_mode": self.preference_mode,
                "switch_count": self.switch_count,
                "iterations": self.iterations,
                "termination": self.termination,
                "initial_utility": self.initial_utility,
                "final_utility": self.final_utility,
            },
            "non_switch_history": list(self.non_switch_history),
        }


def run_coalition_formation(scenario, preference_mode=None, *, initial=None, rng=None,
                            max_iterations=None):
    """Run the switch dynamics from a random (or given) initial partition.

    Returns
    -------
    (Partition, GameTrace)

    Notes
    -----
    The selfish order has no ascent guarantee and can cycle. The loop is
    deterministic, so a state (assignment, next user) seen again right after
    a switch means it would repeat forever; the run then stops with
    ``termination == "cycle"``. ``max_iterations`` (default
    ``1000 * N * (n + 1)`` visits) is a further backstop, reported as
    ``"iteration_limit"``.
    """
    cfg = scenario.config
    mode = preference_mode or cfg.preference_mode
    if mode not in _ORDERS:
        raise ValueError(f"unknown preference mode {mode!r}")
    terms = _ORDERS[mode]
    rates = scenario.phy_rate
    n_users, nodes = cfg.num_users, cfg.num_mrs + 1
    caps = [cfg.mr_cap] * cfg.num_mrs + [cfg.bs_cap]
    budget = cfg.non_switch_budget_multiplier * n_users
    if max_iterations is None:
        max_iterations = 1000 * n_users * nodes

    partition = initial_partition(scenario, rng) if initial is None else initial
    assign = list(partition.assignment)
    members = [set() for _ in range(nodes)]
    for u, c in enumerate(assign):
        members[c].add(u)
    sums = [math.fsum(rates[sorted(m), c]) for c, m in enumerate(members)]
    rate_rows = rates.tolist()

    def objective():
        return sum(_mean(sums[c], len(members[c])) for c in range(nodes))

    trace = GameTrace(mode, initial_utility=objective())
    seen = set()
    j = 0
    user = 0
    while j < budget:
        if trace.iterations >= max_iterations:
            trace.termination = "iteration_limit"
            break
        trace.iterations += 1
        source = assign[user]
        row = rate_rows[user]
        best, best_score = None, None
        for target in range(nodes):
            if target == source or len(members[target]) + 1 > caps[target]:
                continue
            after, before = terms(sums[source], len(members[source]), row[source],
                                  sums[target], len(members[target]), row[target])
            if not _greater(after, before):
                continue
            score = after - before if mode == "utilitarian" else after
            if best is None or score > best_score:
                best, best_score = target, score
        if best is None:
            j += 1
        else:
            before_total = objective()
            members[source].discard(user)
            members[best].add(user)
            assign[user] = best
            for c in (source, best):
                sums[c] = math.fsum(rates[sorted(members[c]), c])
            trace.events.append(SwitchEvent(user, source, best, before_total, objective()))
            j = 0
        trace.non_switch_history.append(j)
        user = (user + 1) % n_users
        if best is not None:
            state = (tuple(assign), user)
            if state in seen:
                trace.termination = "cycle"
                break
            seen.add(state)
    else:
        trace.termination = "stable"

    final = Partition(tuple(assign), cfg.num_mrs, cfg.bs_cap, cfg.mr_cap)
    trace.final_utility = total_utility(final, rates)
    return final, trace
