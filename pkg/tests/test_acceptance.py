"""Acceptance criteria C1 to C14 at their stated tolerances.

Each test prints one ``[PASS]``/``[FAIL]`` line with the measured value.
Run ``python3 tests/test_acceptance.py`` for the bare report.
"""
import pytest

from critwave.verify import CHECKS, timed

CRITERIA = CHECKS[:14]


@pytest.mark.parametrize("check", CRITERIA, ids=[f"C{k}" for k in range(1, 15)])
def test_criterion(check, capsys):
    res = timed(check, "full")
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()


if __name__ == "__main__":
    for check in CRITERIA:
        print(timed(check, "full").line(), flush=True)
