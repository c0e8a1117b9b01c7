"""Acceptance gate: every criterion at its stated tolerance, one line each."""

from pathlib import Path

import pytest

from teugels_control.acceptance import CRITERIA, AcceptanceResult, criterion_12
from teugels_control.scenario import load_scenario

REPO = Path(__file__).resolve().parents[1]


def _report(r: AcceptanceResult) -> None:
    status = "PASS" if r.passed else "FAIL"
    print(f"criterion {r.number:2d} {status} {r.name}: "
          f"measured {r.measured:.3e} vs {r.threshold:g} ({r.detail})")


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda fn: fn.__name__)
def test_criterion(criterion):
    result = criterion()
    _report(result)
    assert result.passed, f"{result.name}: {result.detail}"


def test_criterion_12(tmp_path):
    scenario = load_scenario(str(REPO / "scenarios" / "default.scn"))
    result = criterion_12(scenario, str(tmp_path))
    _report(result)
    assert result.passed, f"{result.name}: {result.detail}"
