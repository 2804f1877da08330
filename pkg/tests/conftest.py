import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from emsaccess.fixtures import grid5x5, synthetic_city  # noqa: E402


@pytest.fixture(scope="session")
def city():
    return synthetic_city()


@pytest.fixture(scope="session")
def grid_fixture():
    return grid5x5()


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is None or (rep.when != "call" and not rep.failed):
        return
    num, title = m.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.failed:
        msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") \
            else "error"
        detail = (detail + "; " if detail else "") + msg.splitlines()[0][:160]
    _ACCEPTANCE[num] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[num]
        line = f"[{status}] criterion {num}: {title}"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
