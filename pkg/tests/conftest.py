import numpy as np
import pytest

from pacl.data import Dataset

_ACCEPTANCE = []


def central_difference(f, theta, step=1e-6):
    theta = np.asarray(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        h = step * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        grad[i] = (f(up) - f(dn)) / (2.0 * h)
    return grad


def relative_error(actual, expected):
    scale = max(np.linalg.norm(expected), 1e-12)
    return np.linalg.norm(np.asarray(actual) - np.asarray(expected)) / scale


@pytest.fixture
def line_data():
    x = np.linspace(-1.0, 1.0, 11)
    return Dataset(x, 0.5 + 2.0 * x, "line")


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = dict(report.user_properties).get("criterion")
    if crit is not None:
        _ACCEPTANCE.append((crit, report.outcome, report.duration))


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is not None and call.when == "call":
        num, title = marker.args
        if not any(k == "criterion" for k, _ in item.user_properties):
            item.user_properties.append(("criterion", f"{num}. {title}"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, outcome, duration in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split(".")[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  criterion {crit}  ({duration:.2f}s)")
