import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_criteria: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, summary = mark.args
    failed = rep.failed or (rep.when == "call" and rep.outcome != "passed")
    if failed or (rep.when == "call" and number not in _criteria):
        _criteria[number] = ("FAIL" if failed else "PASS", summary)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        status, summary = _criteria[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {summary}")
