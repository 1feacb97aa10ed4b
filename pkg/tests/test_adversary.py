"""
Glassbox — Adversary Tests
Possible instances, disclosure risk, credibility and transparency verification.
"""

import sys
from fractions import Fraction
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent.resolve()))

import numpy as np
import pytest

from src.anonymization.adversary import (
    Estimate,
    IndividualRisk,
    ProbabilityMode,
    credibility,
    disclosure_risk,
    enumerate_possible_instances,
    half_width,
    minimal_instances,
    output_probability,
    risk_report,
    verify_transparency,
)
from src.anonymization.errors import EnumerationLimitError
from src.anonymization.fixtures import load_fixtures
from src.anonymization.registry import Algorithm, AlgorithmSpec
from tests.helpers import random_eligible_table


@pytest.fixture(scope="module")
def fx():
    return load_fixtures()


OPTGEN = AlgorithmSpec(Algorithm.OPTGEN, 2)
TAILOR = AlgorithmSpec(Algorithm.TAILOR, 2)
ACE = AlgorithmSpec(Algorithm.ACE, 2)


class TestPossibleInstances:
    """Tests for candidate-instance enumeration."""

    def test_t2_star_with_e1(self, fx):
        instances = list(enumerate_possible_instances(fx.e1, fx.t2_star))
        assert len(instances) == 96
        assert all("Bruce" not in inst.by_id for inst in instances)
        assert len({inst.records for inst in instances}) == 96

    def test_instances_reproduce_group_multisets(self, fx):
        for inst in enumerate_possible_instances(fx.e1, fx.t2_star):
            assert inst.by_id["Ann"].sensitive in ("dyspepsia", "flu")
            assert {inst.by_id["Cate"].sensitive, inst.by_id["Don"].sensitive} == {"bronchitis", "gastritis"}

    def test_row_limit(self, fx):
        with pytest.raises(EnumerationLimitError):
            list(enumerate_possible_instances(fx.e1, fx.t2_star, limit=4))

    def test_count_limit(self, fx):
        with pytest.raises(EnumerationLimitError):
            list(enumerate_possible_instances(fx.e1, fx.t2_star, count_limit=50))


class TestModes:
    """Tests for probability modes and Monte Carlo intervals."""

    def test_mode_validation(self):
        with pytest.raises(ValueError):
            ProbabilityMode("bayes")
        with pytest.raises(ValueError):
            ProbabilityMode("mc", 0)
        assert ProbabilityMode.monte_carlo().trials == 10_000
        assert ProbabilityMode.exact().is_exact

    def test_half_width(self):
        assert half_width(0.5, 10_000, 0.95) == pytest.approx(0.0098, abs=1e-4)
        assert half_width(1.0, 50) == 0
        assert half_width(0.3, 0) == float("inf")

    def test_estimate_contains(self):
        est = Estimate(0.5, 0.02, 1000)
        assert est.contains(Fraction(1, 2))
        assert not est.contains(0.53)

    def test_exceeds_exact(self):
        risk = IndividualRisk("o", {"a": Fraction(1, 2), "b": Fraction(1, 2)})
        assert not risk.exceeds(Fraction(1, 2))
        assert risk.witness == "a"

    def test_exceeds_needs_interval_above(self):
        assert IndividualRisk("o", {"a": 0.6, "b": 0.4}, {"a": 0.05, "b": 0.05}).exceeds(Fraction(1, 2))
        assert not IndividualRisk("o", {"a": 0.6, "b": 0.4}, {"a": 0.2, "b": 0.2}).exceeds(Fraction(1, 2))


class TestOutputProbability:
    """Tests for the exact and sampled output-probability oracles."""

    def test_exact(self, fx):
        assert output_probability(ACE, fx.t5, fx.t7_star) == 1
        assert output_probability(TAILOR, fx.t5, fx.t6_star) == 1
        assert output_probability(TAILOR, fx.t5, fx.t7_star) == 0

    def test_monte_carlo(self, fx):
        est = output_probability(ACE, fx.t5, fx.t7_star, ProbabilityMode.monte_carlo(50))
        assert est.value == 1.0
        assert est.contains(1)

    def test_infeasible_is_zero(self, fx):
        assert output_probability(AlgorithmSpec(Algorithm.TAILOR, 5), fx.t5, fx.t6_star) == 0


class TestDisclosureRisk:
    """Reverse-engineering attack on the non-transparent optimizer."""

    def test_ed_fully_disclosed(self, fx):
        risk = disclosure_risk("Ed", fx.t2_star, fx.e1, OPTGEN)
        assert risk.risk == 1
        assert risk.witness == "gastritis"

    def test_outsider_zero(self, fx):
        assert disclosure_risk("Bruce", fx.t2_star, fx.e1, OPTGEN).risk == 0

    def test_report_breaches(self, fx):
        report = risk_report(OPTGEN, fx.t2_star, fx.e1)
        assert report.instance_count == 96
        assert not report.passed
        assert "Ed" in {r.individual for r in report.breaches()}
        assert report.threshold == Fraction(1, 2)

    def test_monte_carlo_report(self, fx):
        report = risk_report(OPTGEN, fx.t2_star, fx.e1, ProbabilityMode.monte_carlo(300), seed=1)
        assert report.mode == "mc"
        assert report.individuals["Ed"].posteriors["gastritis"] == 1.0
        assert not report.passed

    def test_tailor_publication_safe(self, fx):
        report = risk_report(TAILOR, fx.t6_star, fx.t5.project())
        assert report.passed
        assert all(r.risk <= Fraction(1, 2) for r in report.individuals.values())

    def test_ace_posterior_exact(self, fx):
        ann = risk_report(ACE, fx.t7_star, fx.t5.project(), individuals=["Ann"]).individuals["Ann"]
        assert ann.posteriors["dyspepsia"] == Fraction(1, 2)
        assert ann.posteriors["flu"] == Fraction(1, 2)

    @pytest.mark.slow
    def test_ace_posterior_monte_carlo(self, fx):
        mode = ProbabilityMode.monte_carlo(10_000)
        report = risk_report(ACE, fx.t7_star, fx.t5.project(), mode, individuals=["Ann"], seed=3)
        ann = report.individuals["Ann"]
        assert abs(ann.posteriors["dyspepsia"] - 0.5) <= 0.02
        assert abs(ann.posteriors["flu"] - 0.5) <= 0.02


class TestCredibility:
    """Tests for the minimality-based credibility model."""

    def test_every_instance_minimal(self, fx):
        assert len(minimal_instances(fx.t2_star, fx.e1, 2)) == 96

    def test_values(self, fx):
        ed = credibility("Ed", fx.t2_star, fx.e1, 2)
        assert ed.support_size == 96
        assert ed.credibility == Fraction(1, 4)
        assert credibility("Ann", fx.t2_star, fx.e1, 2).credibility == Fraction(1, 2)
        assert credibility("Fred", fx.t2_star, fx.e1, 2).credibility == Fraction(1, 4)


class TestVerifyTransparency:
    """Tests for the end-to-end transparency verifier."""

    def test_tailor_passes(self, fx):
        report = verify_transparency(TAILOR, fx.t5)
        assert report.verdict == "PASS"
        assert report.outputs_checked == 1

    def test_ace_passes(self, fx):
        report = verify_transparency(ACE, fx.t5)
        assert report.passed
        assert report.max_risk <= Fraction(1, 2)

    def test_optgen_fails(self, fx):
        report = verify_transparency(OPTGEN, fx.t1)
        assert report.verdict == "FAIL"
        assert ("Ed", "gastritis") in {(b.individual, b.value) for b in report.breaches}


@pytest.mark.slow
class TestTransparencyRandomized:
    """Transparent algorithms never exceed 1/l on random tiny tables."""

    CASES = 100

    @pytest.mark.parametrize("algorithm", [Algorithm.TAILOR, Algorithm.ACE, Algorithm.HYBRID])
    def test_random_tables(self, algorithm):
        rng = np.random.default_rng(2024)
        for case in range(self.CASES):
            l = 2 if case % 2 == 0 else 3
            table = random_eligible_table(rng, l)
            report = verify_transparency(AlgorithmSpec(algorithm, l), table)
            assert report.passed, f"case {case}: {report.breaches}"
