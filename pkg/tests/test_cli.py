"""
Glassbox — CLI Tests
Sub-commands driven through main(argv), checked by exit code and output files.
"""

import sys
from fractions import Fraction
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent.resolve()))

import pytest

from config.settings import settings
from src.anonymization.cli import (
    DEMOS,
    EXIT_BREACH,
    EXIT_INFEASIBLE,
    EXIT_IO,
    EXIT_LIMITS,
    EXIT_OK,
    main,
)
from src.anonymization.dataio import load_published, load_table
from src.anonymization.fixtures import HOSPITAL_SCHEMA, load_fixtures
from src.anonymization.reports import ReportDocument, posterior_of

SAMPLES = Path(__file__).parent.parent / "data" / "samples"
HOSPITAL = str(SAMPLES / "hospital.schema")


def sample(name: str) -> str:
    return str(SAMPLES / name)


@pytest.fixture(scope="module")
def fx():
    return load_fixtures()


class TestDemos:
    """Every worked-example demo reproduces its expected values."""

    @pytest.mark.parametrize("name", sorted(DEMOS))
    def test_demo(self, name, capsys):
        assert main(["demo", name]) == EXIT_OK
        out = capsys.readouterr().out
        assert "BAD" not in out


class TestAnonymize:
    """Tests for the anonymize command."""

    def test_tailor_t5(self, fx, tmp_path):
        out = tmp_path / "t6.csv"
        code = main([
            "anonymize", "--input", sample("t5.csv"), "--schema", HOSPITAL,
            "--algo", "tailor", "--l", "2", "--output", str(out),
        ])
        assert code == EXIT_OK
        assert load_published(out, HOSPITAL_SCHEMA) == fx.t6_star

    def test_anatomy_files(self, tmp_path):
        out = tmp_path / "a.csv"
        code = main([
            "anonymize", "--input", sample("t5.csv"), "--schema", HOSPITAL,
            "--algo", "ace", "--l", "2", "--seed", "3", "--format", "anatomy", "--output", str(out),
        ])
        assert code == EXIT_OK
        assert (tmp_path / "a_qi.csv").exists() and (tmp_path / "a_sens.csv").exists()

    def test_not_eligible(self, tmp_path):
        code = main([
            "anonymize", "--input", sample("t9.csv"), "--schema", sample("appendix.schema"),
            "--algo", "tailor", "--l", "2", "--output", str(tmp_path / "x.csv"),
        ])
        assert code == EXIT_INFEASIBLE

    def test_l_too_large(self, tmp_path):
        code = main([
            "anonymize", "--input", sample("t1.csv"), "--schema", HOSPITAL,
            "--algo", "tailor", "--l", "10", "--output", str(tmp_path / "x.csv"),
        ])
        assert code == EXIT_INFEASIBLE

    def test_same_seed_same_bytes(self, tmp_path):
        texts = []
        for name in ("a.csv", "b.csv"):
            main([
                "anonymize", "--input", sample("t1.csv"), "--schema", HOSPITAL,
                "--algo", "hybrid", "--l", "2", "--seed", "7", "--output", str(tmp_path / name),
            ])
            texts.append((tmp_path / name).read_bytes())
        assert texts[0] == texts[1]

    def test_missing_input(self, tmp_path):
        code = main([
            "anonymize", "--input", str(tmp_path / "none.csv"), "--schema", HOSPITAL,
            "--algo", "tailor", "--l", "2", "--output", str(tmp_path / "x.csv"),
        ])
        assert code == EXIT_IO


class TestAttack:
    """Tests for the attack command."""

    def test_optgen_breach(self, tmp_path):
        report = tmp_path / "risk.txt"
        code = main([
            "attack", "--published", sample("t2_star.csv"), "--external", sample("e1.csv"),
            "--schema", HOSPITAL, "--algo", "optgen", "--l", "2", "--report", str(report),
        ])
        assert code == EXIT_BREACH
        doc = ReportDocument.parse(report.read_text(encoding="utf-8"))
        assert posterior_of(doc, "Ed", "gastritis") == Fraction(1)
        assert doc.risk.instance_count == 96

    def test_tailor_publication_passes(self, tmp_path):
        code = main([
            "attack", "--published", sample("t6_star.csv"), "--external", sample("t5.csv"),
            "--schema", HOSPITAL, "--algo", "tailor", "--l", "2", "--report", str(tmp_path / "r.txt"),
        ])
        assert code == EXIT_OK

    def test_single_individual(self, tmp_path):
        report = tmp_path / "ed.txt"
        main([
            "attack", "--published", sample("t2_star.csv"), "--external", sample("e1.csv"),
            "--schema", HOSPITAL, "--algo", "optgen", "--l", "2", "--individual", "Ed", "--report", str(report),
        ])
        doc = ReportDocument.parse(report.read_text(encoding="utf-8"))
        assert [e.individual for e in doc.risk.individuals] == ["Ed"]

    def test_algorithm_required(self):
        code = main([
            "attack", "--published", sample("t2_star.csv"), "--external", sample("e1.csv"),
            "--schema", HOSPITAL, "--l", "2",
        ])
        assert code == EXIT_IO

    @pytest.mark.slow
    def test_monte_carlo_on_ace_fixture(self, tmp_path):
        report = tmp_path / "mc.txt"
        code = main([
            "attack", "--published", sample("t7_star.csv"), "--external", sample("t5.csv"),
            "--schema", HOSPITAL, "--algo", "ace", "--l", "2", "--mode", "mc", "--trials", "2000",
            "--report", str(report),
        ])
        # sampled intervals may still flag a value by chance
        assert code in (EXIT_OK, EXIT_BREACH)
        doc = ReportDocument.parse(report.read_text(encoding="utf-8"))
        ann = next(e for e in doc.risk.individuals if e.individual == "Ann")
        dysp = next(p for p in ann.posteriors if p.value == "dyspepsia")
        # exact value is 1/2; allow two reported half-widths
        assert abs(dysp.probability - 0.5) <= 2 * dysp.half_width

    def test_instance_limit(self, monkeypatch):
        monkeypatch.setattr(settings, "instance_limit", 4)
        code = main([
            "attack", "--published", sample("t2_star.csv"), "--external", sample("e1.csv"),
            "--schema", HOSPITAL, "--algo", "optgen", "--l", "2",
        ])
        assert code == EXIT_LIMITS


class TestEvaluateVerifySynth:
    """Tests for evaluate, verify and synth."""

    def test_evaluate(self, tmp_path):
        report = tmp_path / "eval.txt"
        code = main([
            "evaluate", "--micro", sample("t5.csv"), "--schema", HOSPITAL, "--published", sample("t6_star.csv"),
            "--qd", "2", "--sel", "0.1", "--queries", "20", "--seed", "1", "--report", str(report),
        ])
        assert code == EXIT_OK
        doc = ReportDocument.parse(report.read_text(encoding="utf-8"))
        assert doc.evaluation.queries == 20
        assert doc.evaluation.delta == pytest.approx(0.04)

    def test_verify_tailor(self, tmp_path):
        code = main([
            "verify", "--input", sample("t5.csv"), "--schema", HOSPITAL,
            "--algo", "tailor", "--l", "2", "--report", str(tmp_path / "v.txt"),
        ])
        assert code == EXIT_OK

    def test_verify_optgen(self, tmp_path):
        report = tmp_path / "v.txt"
        code = main([
            "verify", "--input", sample("t1.csv"), "--schema", HOSPITAL,
            "--algo", "optgen", "--l", "2", "--report", str(report),
        ])
        assert code == EXIT_BREACH
        assert ReportDocument.parse(report.read_text(encoding="utf-8")).transparency.verdict == "FAIL"

    def test_synth(self, tmp_path):
        out = tmp_path / "synth.csv"
        assert main(["synth", "--n", "30", "--rho", "0.5", "--seed", "2", "--output", str(out)]) == EXIT_OK
        table = load_table(out, tmp_path / "synth.schema")
        assert len(table) == 30
