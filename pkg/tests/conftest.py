import numpy as np
import pytest

from medguard.ingest import GenConfig, generate_attack_data, generate_device_data


@pytest.fixture(scope="session")
def device_small():
    recs, kinds = generate_device_data(GenConfig(n_records=3000, anomaly_rate=0.2, seed=11), return_kinds=True)
    return recs, np.array(kinds)


@pytest.fixture(scope="session")
def attack_small():
    recs, kinds = generate_attack_data(GenConfig(n_records=3000, anomaly_rate=0.1, seed=11), return_kinds=True)
    return recs, np.array(kinds)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)`` then assert on ``ok``."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(number, ok, detail):
        lines.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
