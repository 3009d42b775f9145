"""One test per acceptance criterion; each prints a PASS/FAIL line."""

import pytest

from persuasion_protocols import acceptance

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("cid", [c[0] for c in acceptance.CRITERIA], ids=[f"{c[0]}_{c[1]}" for c in acceptance.CRITERIA])
def test_criterion(cid):
    result = acceptance.run_one(cid)
    line = result.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert result.passed, line


def test_tolerances_pinned():
    assert acceptance.EXACT_TOL == 1e-12
    assert acceptance.CONVERGENCE_TOL == 1e-3
    assert acceptance.ORACLE_TOL == 1e-9
    assert acceptance.HELLMAN_TOL == 1e-9
    assert acceptance.SPREAD_SLACK == 1e-10
    assert acceptance.HITTING_SLACK == 1e-9
    assert acceptance.PAYOFF_SLACK == 1e-9
    assert acceptance.MC_SIGMAS == 3.0
