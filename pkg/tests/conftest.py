import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[dict]()


class _Criterion:
    def __init__(self, results, number, title):
        self.results = results
        self.number = number
        self.title = title

    def record(self, ok, detail):
        self.results[self.number] = (bool(ok), self.title, detail)
        return bool(ok)


@pytest.fixture
def criterion(request):
    """Factory ``criterion(n, title)`` returning a recorder whose result is
    listed in the terminal summary."""
    results = request.config.stash.setdefault(_ACCEPTANCE, {})
    made = []

    def make(number, title):
        c = _Criterion(results, number, title)
        made.append(c)
        return c

    yield make
    for c in made:
        # an exception before the check still counts as a failure
        results.setdefault(c.number, (False, c.title, "error before the check completed"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, title, detail = results[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
