import numpy as np
import pytest

from railassoc.scenario import SystemConfig, build_scenario


@pytest.fixture
def small_config():
    return SystemConfig(num_users=8, num_mrs=2, rng_seed=3)


@pytest.fixture
def small_scenario(small_config):
    return build_scenario(small_config)


def random_rates(rng, num_users, num_nodes, low=1e9, high=2e10):
    return rng.uniform(low, high, size=(num_users, num_nodes))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    def record(label, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
