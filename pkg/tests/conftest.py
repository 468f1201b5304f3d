import pytest

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, text): acceptance criterion number and summary")
    config.addinivalue_line("markers", "slow: long Monte-Carlo runs")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, text = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        ok = rep.outcome == "passed"
        prev = _results.get(n, (True, text, []))
        details = [v for k, v in item.user_properties if k == "detail"]
        _results[n] = (prev[0] and ok, text, prev[2] + details)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_results):
        ok, text, details = _results[n]
        tr.write_line(f"AC{n:<2d} {'PASS' if ok else 'FAIL'}  {text}")
        for d in details:
            tr.write_line(f"       {d}")
