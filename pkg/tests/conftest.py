import math

import numpy as np
import pytest

from dwlab import selfmaps as sm

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    k = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        ok = rep.passed
        prev = _ACCEPTANCE.get(k, True)
        _ACCEPTANCE[k] = prev and ok


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if _ACCEPTANCE[k] else 'FAIL'}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def catalog(name):
    domain, key = name.split(":", 1)
    return sm.catalog(domain, key)


DISK_MAPS = ["disk:z/2", "disk:z^2", "disk:z/(2-z)", "disk:blaschke(0.5)"]
HALFPLANE_MAPS = ["halfplane:2z", "halfplane:2z+i", "halfplane:z+1", "halfplane:z+i", "halfplane:z+1-1/z"]
GOLDEN_LOG = math.log((3 + math.sqrt(5)) / 2)
