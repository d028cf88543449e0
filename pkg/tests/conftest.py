import pytest
from hypothesis import HealthCheck, settings

from cylstereo import SimulationSpec, sample_2d_direct

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def record_criterion(request):
    """Record ``(number, passed, detail)`` for the acceptance summary."""
    table = request.config.stash[_CRITERIA]

    def record(number: int, passed: bool, detail: str):
        table[number] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    table = config.stash.get(_CRITERIA, {})
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(table):
        passed, detail = table[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def sim500():
    return sample_2d_direct(SimulationSpec(500, seed=11))


@pytest.fixture(scope="session")
def sim5000():
    return sample_2d_direct(SimulationSpec(5000, seed=12))
