"""Tests for verification reports."""

import json

import numpy as np
import pytest

from cbvf.core.report import MAX_WITNESSES, Report, Witness, worst_witnesses


def _fail(label: str = "check", violation: float = 0.5) -> Report:
    return Report(
        verdict="fail",
        max_violation=violation,
        witnesses=[Witness.at([0.1, 0.2], 1.0, 0.3, 0.8)],
        tolerances={"tol": 0.1},
        label=label,
    )


class TestWitness:
    """Tests for Witness class."""

    def test_to_dict_keys(self):
        """Test the serialized field names."""
        data = Witness.at(0.5, 2.0, 0.1, 0.4).to_dict()
        assert data == {"x": [0.5], "t_or_T": 2.0, "measured": 0.1, "required": 0.4}

    def test_serialization(self):
        """Test serialization."""
        witness = Witness.at([1.0, -1.0], 0.25, 0.0, 1.0)
        assert Witness.from_dict(witness.to_dict()) == witness


class TestReport:
    """Tests for Report class."""

    def test_fail_needs_witness(self):
        """Test a failing report without a witness is rejected."""
        with pytest.raises(ValueError):
            Report(verdict="fail", max_violation=1.0, tolerances={"tol": 0.1})

    def test_pass_within_tolerance(self):
        """Test a passing report must respect its tolerance."""
        with pytest.raises(ValueError):
            Report(verdict="pass", max_violation=0.2, tolerances={"tol": 0.1})

    def test_unknown_verdict(self):
        """Test verdicts are restricted."""
        with pytest.raises(ValueError):
            Report(verdict="maybe")

    @pytest.mark.parametrize(
        "verdict, code", [("pass", 0), ("fail", 1), ("inconclusive", 4)]
    )
    def test_exit_codes(self, verdict, code):
        """Test verdicts map to exit codes."""
        report = _fail() if verdict == "fail" else Report(verdict=verdict)
        assert report.exit_code == code
        assert report.passed == (verdict == "pass")

    def test_json_round_trip(self):
        """Test serialization through JSON."""
        report = Report.combine("both", [_fail(), Report(verdict="pass", tolerances={"tol": 0.2})])
        restored = Report.from_dict(json.loads(report.to_json()))

        assert restored.verdict == "fail"
        assert restored.label == "both"
        assert len(restored.components) == 2
        assert restored.witnesses[0].state == (0.1, 0.2)

    def test_summary(self):
        """Test the one-line summary."""
        summary = _fail("viscosity CBF").summary()
        assert summary.startswith("[FAIL] viscosity CBF")
        assert "tol=0.1" in summary


class TestCombine:
    """Tests for Report.combine."""

    def test_fail_wins(self):
        """Test fail beats inconclusive and pass."""
        combined = Report.combine(
            "all", [Report(verdict="pass"), Report(verdict="inconclusive"), _fail()]
        )
        assert combined.verdict == "fail"
        assert combined.witnesses

    def test_inconclusive_beats_pass(self):
        """Test inconclusive beats pass."""
        combined = Report.combine("all", [Report(verdict="pass"), Report(verdict="inconclusive")])
        assert combined.verdict == "inconclusive"

    def test_tolerance_and_counts(self):
        """Test the combined tolerance, violation and check count."""
        a = Report(verdict="pass", max_violation=0.05, tolerances={"tol": 0.1}, checked=3)
        b = Report(verdict="pass", max_violation=0.15, tolerances={"tol": 0.2}, checked=4)
        combined = Report.combine("both", [a, b])

        assert combined.tolerances == {"tol": 0.2}
        assert combined.max_violation == 0.15
        assert combined.checked == 7

    def test_empty(self):
        """Test combining nothing."""
        with pytest.raises(ValueError):
            Report.combine("none", [])


class TestWorstWitnesses:
    """Tests for worst_witnesses."""

    def test_order_and_cap(self):
        """Test witnesses come worst first and are capped."""
        n = 25
        violation = np.linspace(0.0, 1.0, n)
        states = np.arange(n, dtype=float)[:, None]
        picked = worst_witnesses(
            states, np.zeros(n), np.zeros(n), violation, violation, tol=0.1
        )

        assert len(picked) == MAX_WITNESSES
        assert picked[0].state == (24.0,)
        assert picked[0].required == pytest.approx(1.0)

    def test_only_above_tolerance(self):
        """Test entries within tolerance are skipped."""
        violation = np.array([0.0, 0.3, 0.05])
        picked = worst_witnesses(
            np.zeros((3, 1)), np.zeros(3), np.zeros(3), violation, violation, tol=0.1
        )
        assert len(picked) == 1
