import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_symplectic(rng, modes):
    """Product of random single-mode squeezers, phase rotations and beamsplitters."""
    from squeezed_cvqkd.gaussian import beamsplitter, single_mode_squeezer

    S = np.eye(2 * modes)
    for _ in range(3):
        for k in range(modes):
            phi = rng.uniform(0, 2 * np.pi)
            rot = np.array([[np.cos(phi), np.sin(phi)], [-np.sin(phi), np.cos(phi)]])
            local = np.eye(2 * modes)
            local[2 * k:2 * k + 2, 2 * k:2 * k + 2] = rot @ single_mode_squeezer(rng.uniform(-1, 1))
            S = local @ S
        for k in range(modes - 1):
            local = np.eye(2 * modes)
            local[2 * k:2 * k + 4, 2 * k:2 * k + 4] = beamsplitter(rng.uniform(0.05, 0.95))
            S = local @ S
    return S


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion, printed after the run
_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, label): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    if report.when == "setup" and report.passed:
        return
    number, label = marker.args
    entry = _criteria.setdefault(number, {"label": label, "passed": True, "expected_fail": False})
    if hasattr(report, "wasxfail"):
        entry["expected_fail"] = True
        entry["passed"] = False
    elif not report.passed:
        entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        if entry["passed"]:
            status = "PASS"
        elif entry["expected_fail"]:
            status = "FAIL (known unattainable part, marked xfail)"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {number:>2}: {status:<5} {entry['label']}")
