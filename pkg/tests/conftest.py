import pytest


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")
    config._criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    n, title = marker.args
    detail = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    item.config._criteria[n] = (title, call.excinfo is None, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    crit = getattr(config, "_criteria", {})
    if not crit:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(crit):
        title, ok, detail = crit[n]
        line = f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))


@pytest.fixture
def record(request):
    def put(**kw):
        for k, v in kw.items():
            request.node.user_properties.append((k, f"{v:.6g}" if isinstance(v, float) else v))

    return put
