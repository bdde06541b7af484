"""
Tests for the acceptance checks.
"""

import pytest

from induced_coherence import closed_form, validation
from induced_coherence.validation import CHECKS, CheckResult, format_table, run_checks


def _only(*numbers):
    return [check for check in CHECKS if check[0] in numbers]


class TestRunChecks:
    """Test the check runner."""

    def test_quick_checks_pass(self):
        """Every fast check passes."""
        results = run_checks(quick=True)
        assert [r.number for r in results] == [1, 2, 3, 4, 6, 9]
        failed = [f"{r.number}: {r.detail}" for r in results if not r.passed]
        assert not failed

    def test_corrupted_g13_is_caught(self, monkeypatch):
        """A wrong g13 formula fails both checks that use it."""
        monkeypatch.setattr(closed_form, "g13_full", lambda t_mag, v2: 1.0)
        results = run_checks(checks=_only(2, 4))
        assert [r.passed for r in results] == [False, False]

    def test_exceptions_become_failures(self):
        """A check that raises is reported as failed, not propagated."""

        def broken():
            raise ValueError("boom")

        (result,) = run_checks(checks=[(99, "broken", broken, True)])
        assert not result.passed
        assert "ValueError: boom" in result.detail

    def test_format_table(self):
        """The table lists each check and a summary line."""
        results = [
            CheckResult(number=1, name="first", passed=True, detail="ok", seconds=0.1),
            CheckResult(number=2, name="second", passed=False, detail="bad", seconds=0.2),
        ]
        table = format_table(results)
        assert "PASS" in table and "FAIL" in table
        assert table.splitlines()[-1] == "1/2 checks passed"


@pytest.mark.slow
class TestSlowChecks:
    """The expensive checks."""

    def test_oracle_engine(self):
        """Oracle and engine agree and the oracle converges."""
        passed, detail = validation.check_oracle_engine()
        assert passed, detail

    def test_monte_carlo(self):
        """Floor, s2 peak and calibrated ratio match the rate model."""
        passed, detail = validation.check_monte_carlo()
        assert passed, detail

    def test_closed_loop(self):
        """D̂ recovers the trace distance along the loss sweep."""
        passed, detail = validation.check_closed_loop()
        assert passed, detail


if __name__ == "__main__":
    pytest.main([__file__])
