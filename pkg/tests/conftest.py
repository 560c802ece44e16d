import pytest
from hypothesis import HealthCheck, settings

from d2dcovert import Strategy, SystemParams

settings.register_profile(
    "numerics", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("numerics")


@pytest.fixture(scope="session")
def defaults():
    return SystemParams()


@pytest.fixture(scope="session")
def mid_strategy():
    # 15 dBm on both powers
    return Strategy.from_dbm(15.0, 15.0)


@pytest.fixture(scope="session")
def default_sample(defaults):
    """10^5 unit-power Monte Carlo trials at the default parameters, drawn once per session."""
    from d2dcovert.simulator import McConfig, draw_aggregates

    return draw_aggregates(defaults, McConfig(trials=100_000))


# one verdict line per acceptance criterion, printed after the run
_ACCEPTANCE = {}


@pytest.fixture
def verdict(request):
    def record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        print(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{number}. {'PASS' if passed else 'FAIL'}  {title}  ({detail})")
