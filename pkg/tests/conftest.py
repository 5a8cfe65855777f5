import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.line = None

    def report(self, passed, detail, seconds, limit):
        passed = bool(passed) and seconds < limit
        self.line = (f"criterion {self.number:>2} {'PASS' if passed else 'FAIL'}  "
                     f"{self.title}: {detail} [{seconds:.1f} s, limit {limit:g} s]")
        ACCEPTANCE_LINES.append(self.line)
        print(self.line)
        return passed


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    crit = _Criterion(*marker.args)
    yield crit
    if crit.line is None:
        ACCEPTANCE_LINES.append(f"criterion {crit.number:>2} FAIL  {crit.title}: raised before reporting")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
