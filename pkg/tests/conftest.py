from pathlib import Path

import pytest

from flowmine import parse_flowspec, parse_message_table, parse_trace

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def table():
    return parse_message_table((DATA / "cache_read.msg").read_text())


@pytest.fixture(scope="session")
def flowspec(table):
    return parse_flowspec((DATA / "cache_read.flow").read_text(), table)


@pytest.fixture(scope="session")
def simul_trace(table):
    return parse_trace((DATA / "simul_start.trace").read_text(), table)


@pytest.fixture(scope="session")
def pipelined_trace(table):
    return parse_trace((DATA / "pipelined.trace").read_text(), table)


@pytest.fixture(scope="session")
def mixed_trace(table):
    return parse_trace((DATA / "mixed.trace").read_text(), table)


@pytest.fixture(scope="session")
def hits_trace(table):
    return parse_trace((DATA / "hits.trace").read_text(), table)


@pytest.fixture(scope="session")
def data_dir():
    return DATA
