import numpy as np
import pytest

from mmtrack.scenarios import get
from mmtrack.simulator import simulate

_SIM_CACHE = {}
VERDICTS = []  # (criterion, passed, detail) from the acceptance suite


@pytest.fixture(scope="session")
def sim():
    """Memoised simulate(get(name)) so several tests can share one recording."""
    def run(name, seed=None):
        key = (name, seed)
        if key not in _SIM_CACHE:
            sc = get(name, seed)
            _SIM_CACHE[key] = (sc, simulate(sc))
        return _SIM_CACHE[key]
    return run


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def verdict():
    """Record a criterion's outcome, print it, then fail the test if any check failed."""
    def record(number, title, checks, detail=""):
        bad = [k for k, ok in checks.items() if not ok]
        line = f"criterion {number:>2} {'PASS' if not bad else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        if bad:
            line += f"  failed: {', '.join(bad)}"
        VERDICTS.append(line)
        print(line)
        assert not bad, line
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
