from __future__ import annotations

import numpy as np
import pytest

from multikey.info_measures import GaussianModel, JointPmf, random_pmf

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def bern_half():
    return JointPmf(["A"], [0.5, 0.5])


@pytest.fixture
def bern_quarter():
    return JointPmf(["A"], [0.25, 0.75])


@pytest.fixture
def random_joint(rng):
    return random_pmf(["A", "E"], [3, 4], rng)


@pytest.fixture
def standard_gaussian_pair():
    return GaussianModel(["X", "Y"], [[1.0, 0.8], [0.8, 1.0]])


@pytest.fixture
def record_criterion():
    """Store a one-line verdict for the acceptance summary; parts of a criterion are merged."""

    def record(number: int, passed: bool, detail: str):
        if number in _CRITERIA:
            prev_pass, prev_detail = _CRITERIA[number]
            passed, detail = prev_pass and passed, f"{prev_detail}; {detail}"
        _CRITERIA[number] = (bool(passed), detail)

    return record


def pytest_runtest_logreport(report):
    numbers = [v for k, v in report.user_properties if k == "criterion"]
    if report.when == "call" and numbers and report.failed:
        number = int(numbers[0])
        detail = _CRITERIA.get(number, (False, "assertion failed"))[1]
        _CRITERIA[number] = (False, detail)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark and mark.args:
            item.user_properties.append(("criterion", int(mark.args[0])))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
