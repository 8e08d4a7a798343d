from collections import defaultdict

import pytest

_criteria = defaultdict(list)


@pytest.fixture
def criterion(request):
    """Record ``(ok, detail)`` for an acceptance criterion under the test's ``criterion`` marker."""
    marker = request.node.get_closest_marker("criterion")
    key = marker.args[0]

    def record(ok, detail):
        _criteria[key].append((request.node.name, bool(ok), detail))
        return ok

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_runtest_makereport(item, call):
    # a test that raised before recording still counts against its criterion
    marker = item.get_closest_marker("criterion")
    if marker and call.when == "call" and call.excinfo is not None:
        names = [n for n, _, _ in _criteria[marker.args[0]]]
        if item.name not in names:
            _criteria[marker.args[0]].append((item.name, False, f"raised {call.excinfo.typename}"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_criteria):
        checks = _criteria[key]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        tr.write_line(f"criterion {key}: {status}")
        for name, ok, detail in checks:
            tr.write_line(f"    [{'ok' if ok else 'FAILED'}] {name}: {detail}")
