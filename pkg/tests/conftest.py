import numpy as np
import pytest

from memharbor.model import MemoryStore
from memharbor.query import QueryProcessor

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion id")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    entry = _criteria.get(report.nodeid)
    if entry is not None:
        entry["outcome"] = report.outcome
        notes = [text for name, text in report.user_properties if name == "measured"]
        if notes:
            entry["measured"] = notes[-1]


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _criteria[item.nodeid] = {"number": number, "title": title, "outcome": "not run"}


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for entry in sorted(_criteria.values(), key=lambda e: e["number"]):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(entry["outcome"], "NOT RUN")
        line = f"[{status}] criterion {entry['number']:>2}: {entry['title']}"
        if "measured" in entry:
            line += f" ({entry['measured']})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def processor():
    return QueryProcessor()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def make_store(processor):
    """Build a store from (id, user, text, timestamp[, markers]) tuples."""

    def build(rows):
        store = MemoryStore(processor.dimension)
        for row in rows:
            rid, user, text, ts, *rest = row
            store.ingest(processor.make_record(rid, user, text, ts, tuple(rest[0]) if rest else ()))
        return store

    return build
