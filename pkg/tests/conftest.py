import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from smoltt.tt import TTTensor

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def random_tt(rng, d, N, r):
    ranks = [1] + [r] * (d - 1) + [1]
    return TTTensor([rng.standard_normal((ranks[k], N, ranks[k + 1])) for k in range(d)])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, echoed in the terminal summary
CRITERIA_LINES = []


@pytest.fixture
def criterion():
    def record(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        CRITERIA_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)
