import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("exact", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("exact")


@pytest.fixture
def rng():
    return random.Random(20261019)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, name, ok, seconds, limit in sorted(ACCEPTANCE):
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:>2} {status}  {name}  ({seconds:.1f}s, limit {limit}s)")
