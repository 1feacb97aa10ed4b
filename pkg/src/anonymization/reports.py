"""
Glassbox — Report Documents
Pydantic models for risk, evaluation and transparency reports, rendered as a
human-readable table followed by a JSON section that parses back losslessly.
"""

from fractions import Fraction
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

from config.settings import settings
from src.anonymization.adversary import RiskReport, TransparencyReport
from src.anonymization.utility import EvalResult, Workload

MACHINE_MARKER = "--- machine-readable ---"


def _exact(x) -> Optional[str]:
    return str(x) if isinstance(x, Fraction) else None


# ─── Sections ───

class RunMetadata(BaseModel):
    """Who produced the report and with which public parameters."""
    command: str
    algorithm: Optional[str] = None
    l: Optional[int] = None
    seed: Optional[int] = None
    mode: Optional[str] = None
    trials: Optional[int] = None
    limits: dict[str, int] = Field(default_factory=dict)
    version: str = settings.app_version


class PosteriorEntry(BaseModel):
    value: str
    probability: float
    exact: Optional[str] = Field(None, description="Exact rational, e.g. '1/4', in exact mode")
    half_width: Optional[float] = Field(None, description="Confidence half-width in Monte Carlo mode")


class IndividualEntry(BaseModel):
    individual: str
    risk: float
    risk_exact: Optional[str] = None
    witness: Optional[str] = None
    breach: bool
    posteriors: list[PosteriorEntry] = Field(default_factory=list)


class RiskSection(BaseModel):
    threshold: str
    instance_count: int
    passed: bool
    individuals: list[IndividualEntry] = Field(default_factory=list)


class QueryEntry(BaseModel):
    act: int
    est: float
    error: float


class EvaluationSection(BaseModel):
    qd: int
    selectivity: float
    queries: int
    delta: float
    workload_error: float
    per_query: list[QueryEntry] = Field(default_factory=list)


class BreachEntry(BaseModel):
    individual: str
    value: Optional[str]
    risk: float
    risk_exact: Optional[str] = None
    output_index: int


class TransparencySection(BaseModel):
    verdict: Literal["PASS", "FAIL"]
    outputs_checked: int
    max_risk: float
    breaches: list[BreachEntry] = Field(default_factory=list)


# ─── Document ───

class ReportDocument(BaseModel):
    """One report: metadata plus exactly one populated section."""
    kind: Literal["risk", "evaluation", "transparency"]
    metadata: RunMetadata
    risk: Optional[RiskSection] = None
    evaluation: Optional[EvaluationSection] = None
    transparency: Optional[TransparencySection] = None

    @classmethod
    def from_risk_report(cls, report: RiskReport, metadata: RunMetadata) -> "ReportDocument":
        flagged = {r.individual for r in report.breaches()}
        entries = []
        for ident, r in report.individuals.items():
            entries.append(IndividualEntry(
                individual=ident,
                risk=float(r.risk),
                risk_exact=_exact(r.risk),
                witness=r.witness,
                breach=ident in flagged,
                posteriors=[
                    PosteriorEntry(value=v, probability=float(p), exact=_exact(p), half_width=r.half_widths.get(v))
                    for v, p in r.posteriors.items()
                ],
            ))
        section = RiskSection(
            threshold=str(report.threshold),
            instance_count=report.instance_count,
            passed=report.passed,
            individuals=entries,
        )
        return cls(kind="risk", metadata=metadata, risk=section)

    @classmethod
    def from_eval_result(cls, result: EvalResult, workload: Workload, metadata: RunMetadata) -> "ReportDocument":
        section = EvaluationSection(
            qd=workload.qd,
            selectivity=workload.selectivity,
            queries=len(workload),
            delta=result.delta,
            workload_error=result.workload_error,
            per_query=[QueryEntry(act=q.act, est=q.est, error=q.error) for q in result.per_query],
        )
        return cls(kind="evaluation", metadata=metadata, evaluation=section)

    @classmethod
    def from_transparency(cls, report: TransparencyReport, metadata: RunMetadata) -> "ReportDocument":
        section = TransparencySection(
            verdict=report.verdict,
            outputs_checked=report.outputs_checked,
            max_risk=float(report.max_risk),
            breaches=[
                BreachEntry(
                    individual=b.individual, value=b.value, risk=float(b.risk),
                    risk_exact=_exact(b.risk), output_index=b.output_index,
                )
                for b in report.breaches
            ],
        )
        return cls(kind="transparency", metadata=metadata, transparency=section)

    # ── Rendering ──

    def _human_lines(self) -> list[str]:
        m = self.metadata
        lines = [f"Glassbox {self.kind} report", "=" * 50, f"command:   {m.command}"]
        if m.algorithm:
            lines.append(f"algorithm: {m.algorithm}")
        if m.mode:
            lines.append(f"mode:      {m.mode}" + (f" ({m.trials} trials)" if m.trials else ""))
        lines.append("=" * 50)
        if self.risk is not None:
            lines.append(f"{'individual':<16} {'risk':>10}  {'witness':<16} breach")
            for e in self.risk.individuals:
                shown = e.risk_exact or f"{e.risk:.4f}"
                lines.append(f"{e.individual:<16} {shown:>10}  {e.witness or '-':<16} {'YES' if e.breach else 'no'}")
            lines.append(f"threshold 1/l = {self.risk.threshold}; instances = {self.risk.instance_count}")
            lines.append("PASS" if self.risk.passed else "FAIL")
        if self.evaluation is not None:
            ev = self.evaluation
            lines.append(f"queries:        {ev.queries} (qd={ev.qd}, s={ev.selectivity})")
            lines.append(f"delta:          {ev.delta}")
            lines.append(f"workload error: {ev.workload_error:.4f}")
        if self.transparency is not None:
            t = self.transparency
            lines.append(f"outputs checked: {t.outputs_checked}; max risk {t.max_risk:.4f}")
            for b in t.breaches:
                lines.append(f"  breach: {b.individual} -> {b.value} ({b.risk_exact or b.risk}) in output {b.output_index}")
            lines.append(t.verdict)
        return lines

    def render(self) -> str:
        return "\n".join(self._human_lines() + ["", MACHINE_MARKER, self.model_dump_json(indent=2), ""])

    @classmethod
    def parse(cls, text: str) -> "ReportDocument":
        """Recover the document from its rendered form (only the machine section is read)."""
        _, sep, machine = text.partition(MACHINE_MARKER)
        if not sep:
            raise ValueError("report has no machine-readable section")
        return cls.model_validate_json(machine.strip())


def posterior_of(doc: ReportDocument, individual: str, value: str) -> Union[Fraction, float]:
    """Exact posterior when the report carries one, the float otherwise."""
    if doc.risk is None:
        raise ValueError("not a risk report")
    for e in doc.risk.individuals:
        if e.individual == individual:
            for p in e.posteriors:
                if p.value == value:
                    return Fraction(p.exact) if p.exact else p.probability
    raise KeyError(f"no posterior for ({individual}, {value})")
