import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swarmtrack.config import ExperimentConfig

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def short_cfg():
    """Default scenario cut to 40 ticks and a handful of runs."""
    return ExperimentConfig(runs=3).with_(T=40)


ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    """Record one acceptance verdict; all verdicts are printed after the run."""
    line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
