"""Acceptance suite: one test per numbered criterion, one PASS/FAIL line each."""

import pytest

import conftest
from circulant_clt.acceptance import CRITERIA, run_criterion


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{c.number:02d}" for c in CRITERIA])
def test_criterion(criterion, accept_ctx):
    res = run_criterion(criterion, accept_ctx)
    line = res.summary()
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    for detail in res.outcome.details:
        print("    " + detail)
    assert res.passed, "\n".join([line, *res.outcome.details])
