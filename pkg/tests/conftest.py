import pytest

_RESULTS = {}


@pytest.fixture
def record(request):
    """Collect a one-line verdict for the acceptance summary."""
    def _record(key, passed, detail=""):
        _RESULTS[key] = (passed, detail)
    return _record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    label = item.get_closest_marker("criterion")
    if label is not None and rep.when == "call":
        key = label.args[0]
        detail = _RESULTS.get(key, (None, ""))[1]
        _RESULTS[key] = (rep.passed, detail)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS):
        passed, detail = _RESULTS[key]
        verdict = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {key:>2}: {verdict}  {detail}")
