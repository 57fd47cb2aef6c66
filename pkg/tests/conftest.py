import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conformal_rules.data import MultiLabelDataset  # noqa: E402


def random_normalized_dataset(rng, n, d, k, p_pos=0.4, grid=None):
    """Features in [0, 1] (optionally snapped to a grid to force distance ties)."""
    x = rng.uniform(size=(n, d))
    if grid:
        x = np.round(x * grid) / grid
    y = (rng.uniform(size=(n, k)) < p_pos).astype(np.int8)
    return MultiLabelDataset(x, y, [f"f{j}" for j in range(d)], [f"l{j}" for j in range(k)])


@pytest.fixture
def tiny_arff():
    return "@relation t\n@attribute a1 numeric\n@attribute L1 {0,1}\n@data\n0.5,1\n"


@pytest.fixture
def two_row_dataset():
    return MultiLabelDataset([[0.1, 0.2], [0.7, 0.9]], [[1], [0]], ["a", "b"], ["y"])


_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    number, title = marker
    prev = _CRITERIA.get(number, (title, True, ""))
    ok = prev[1] and report.passed
    _CRITERIA[number] = (title, ok, f"{prev[2]} {report.duration:.1f}s".strip())


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result()._criterion = marker.args


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, times = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}  ({times})")
