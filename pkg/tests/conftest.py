import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from goldenconn import catalog  # noqa: E402

NAMED = list(catalog.NAMED)
RANDOM = ["random:3:2:7", "random:2:1:3", "random:3:1:11"]
ALL_ENTRIES = NAMED + RANDOM

_PAIRS = {}


def get_pair(name):
    if name not in _PAIRS:
        _PAIRS[name] = catalog.get(name).pair()
    return _PAIRS[name]


@pytest.fixture(params=ALL_ENTRIES)
def entry_pair(request):
    return request.param, get_pair(request.param)


@pytest.fixture
def twisted():
    return get_pair("twisted_book")


@pytest.fixture
def flat():
    return get_pair("flat_fibonacci")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
