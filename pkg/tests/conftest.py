import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

_VERDICTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_VERDICTS] = {}


@pytest.fixture
def verdict(request):
    """Record (and print) the outcome of one numbered acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str) -> None:
        request.config.stash[_VERDICTS][number] = (title, ok, detail)
        print(_line(number, title, ok, detail))

    return record


def _line(number, title, ok, detail):
    return f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}  {title}: {detail}"


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(_VERDICTS, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(_line(number, *verdicts[number]))
