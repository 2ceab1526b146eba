"""The eight acceptance criteria at their stated sample sizes and tolerances.

Each test prints one PASS/FAIL line (also collected into the terminal
summary by ``conftest.py``).
"""

import pytest

from indexcurv import acceptance

pytestmark = pytest.mark.acceptance

LINES = []


@pytest.mark.parametrize("number", range(1, 9))
def test_criterion(number):
    res = acceptance.CRITERIA[number - 1]()
    LINES.append(res.line())
    print(res.line())
    assert res.passed, res.line()
