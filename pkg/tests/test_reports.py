"""
Glassbox — Report Tests
"""

import sys
from fractions import Fraction
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent.resolve()))

import pytest

from src.anonymization.adversary import Breach, IndividualRisk, RiskReport, TransparencyReport
from src.anonymization.fixtures import DISEASES
from src.anonymization.reports import MACHINE_MARKER, ReportDocument, RunMetadata, posterior_of
from src.anonymization.utility import CountQuery, EvalResult, QueryError, Workload


def _exact_report() -> RiskReport:
    individuals = {
        "Ed": IndividualRisk("Ed", {"flu": Fraction(0), "gastritis": Fraction(1)}),
        "Ann": IndividualRisk("Ann", {"flu": Fraction(1, 2), "gastritis": Fraction(1, 2)}),
    }
    return RiskReport("optgen", 2, "exact", 96, Fraction(1, 4), individuals)


class TestRiskDocument:
    """Risk reports render for people and parse back exactly."""

    def test_round_trip(self):
        doc = ReportDocument.from_risk_report(_exact_report(), RunMetadata(command="attack", algorithm="optgen", l=2))
        parsed = ReportDocument.parse(doc.render())
        assert parsed == doc
        assert parsed.risk.passed is False

    def test_exact_posteriors(self):
        doc = ReportDocument.parse(ReportDocument.from_risk_report(_exact_report(), RunMetadata(command="attack")).render())
        assert posterior_of(doc, "Ed", "gastritis") == Fraction(1)
        assert posterior_of(doc, "Ann", "flu") == Fraction(1, 2)
        with pytest.raises(KeyError):
            posterior_of(doc, "Bruce", "flu")

    def test_breach_flags(self):
        doc = ReportDocument.from_risk_report(_exact_report(), RunMetadata(command="attack"))
        flags = {e.individual: e.breach for e in doc.risk.individuals}
        assert flags == {"Ed": True, "Ann": False}
        assert "FAIL" in doc.render()

    def test_monte_carlo_floats(self):
        risk = IndividualRisk("Ed", {"flu": 0.1, "gastritis": 0.9}, {"flu": 0.01, "gastritis": 0.01})
        report = RiskReport("optgen", 2, "mc", 96, 0.25, {"Ed": risk}, trials=1000)
        doc = ReportDocument.parse(ReportDocument.from_risk_report(report, RunMetadata(command="attack")).render())
        assert posterior_of(doc, "Ed", "gastritis") == pytest.approx(0.9)
        assert doc.risk.individuals[0].posteriors[1].half_width == pytest.approx(0.01)

    def test_missing_marker(self):
        with pytest.raises(ValueError):
            ReportDocument.parse("Glassbox risk report\nPASS\n")


class TestOtherDocuments:
    """Evaluation and transparency sections."""

    def test_evaluation(self):
        q = CountQuery(((21, 26), None), (2, 2), DISEASES)
        workload = Workload((q,), qd=2, selectivity=0.1)
        result = EvalResult([QueryError(1, 0.5, 0.5)], 0.04)
        doc = ReportDocument.from_eval_result(result, workload, RunMetadata(command="evaluate"))
        text = doc.render()
        assert MACHINE_MARKER in text
        assert ReportDocument.parse(text).evaluation.workload_error == pytest.approx(0.5)

    def test_transparency(self):
        report = TransparencyReport("optgen", 2, "exact", 1, [Breach("Ed", "gastritis", Fraction(1), 0)], Fraction(1))
        doc = ReportDocument.from_transparency(report, RunMetadata(command="verify"))
        parsed = ReportDocument.parse(doc.render())
        assert parsed.transparency.verdict == "FAIL"
        assert parsed.transparency.breaches[0].risk_exact == "1"

    def test_risk_accessor_on_other_kind(self):
        report = TransparencyReport("tailor", 2, "exact", 1)
        doc = ReportDocument.from_transparency(report, RunMetadata(command="verify"))
        with pytest.raises(ValueError):
            posterior_of(doc, "Ed", "flu")
