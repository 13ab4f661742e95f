from pathlib import Path

import numpy as np
import pytest

from privchan import ChannelMatrix, QueryTable, RecordUniverse, randomized_response_channel

FIXTURES = Path(__file__).parent / "fixtures"


def example1_query() -> QueryTable:
    u = RecordUniverse((3, 2))
    return QueryTable.from_function(u, 2, lambda x1, x2: int(x1 == x2))


def random_channel(rng, sizes, m, alpha=1.0) -> ChannelMatrix:
    u = RecordUniverse(tuple(sizes))
    return ChannelMatrix(u, rng.dirichlet(np.full(m, alpha), size=u.size).T)


@pytest.fixture
def example1():
    return example1_query()


@pytest.fixture
def rr25(example1):
    return randomized_response_channel(example1, 0.25)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


# -- acceptance summary ----------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1].split("[")[0]
        status, title = _ACCEPTANCE.get(name, ("NOT RUN", name))
        if status != "FAIL":
            status = "PASS" if report.passed else "FAIL"
        _ACCEPTANCE[name] = (status, title)


def pytest_collection_modifyitems(items):
    for item in items:
        name = item.nodeid.split("::")[-1].split("[")[0]
        if "test_acceptance.py::test_criterion_" in item.nodeid:
            doc = (item.function.__doc__ or "").strip().splitlines()
            _ACCEPTANCE.setdefault(name, ("NOT RUN", doc[0] if doc else name))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        status, title = _ACCEPTANCE[name]
        number = int(name.split("_")[2])
        terminalreporter.write_line(f"{status:7s} criterion {number:2d}: {title}")
