import time
from contextlib import contextmanager

import pytest

_ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = {}


class CriterionRecorder:
    def __init__(self, store: dict):
        self.store = store

    @contextmanager
    def __call__(self, number: int, title: str, detail: str = ""):
        start = time.perf_counter()
        info = {"detail": detail}
        try:
            yield info
        except BaseException:
            self.store[number] = ("FAIL", title, time.perf_counter() - start, info["detail"])
            raise
        self.store[number] = ("PASS", title, time.perf_counter() - start, info["detail"])


@pytest.fixture(scope="session")
def criterion(pytestconfig):
    return CriterionRecorder(pytestconfig.stash[_ACCEPTANCE])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, seconds, detail = results[number]
        line = f"criterion {number}: {status}  {title}  ({seconds:.1f}s)"
        if detail:
            line += f"  {detail}"
        terminalreporter.write_line(line)
