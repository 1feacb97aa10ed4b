"""
Glassbox — Adversary
Possible-instance enumeration, output-probability oracles, disclosure risk,
credibility and the transparency verifier.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from config.settings import settings
from src.anonymization.baselines import RecodingScheme, distinct_permutations, is_minimal_generalization
from src.anonymization.errors import (
    EnumerationLimitError,
    InconsistentPublicationError,
    InfeasibleError,
)
from src.anonymization.model import (
    AttributeSchema,
    ExternalSource,
    MicrodataTable,
    Record,
    multinomial,
)
from src.anonymization.recoding import AnonymizedTable, groupings_for
from src.anonymization.registry import AlgorithmSpec, distribution, exact_probability, run

logger = logging.getLogger(__name__)

# A possible instance is a microdata table over external individuals.
PossibleInstance = MicrodataTable


# ─── Modes & Estimates ───

@dataclass(frozen=True)
class ProbabilityMode:
    """Exact enumeration, or Monte Carlo over `trials` algorithm runs."""
    name: str = "exact"
    trials: int = 0

    def __post_init__(self):
        if self.name not in ("exact", "mc"):
            raise ValueError(f"unknown probability mode '{self.name}'")
        if self.name == "mc" and self.trials < 1:
            raise ValueError("Monte Carlo mode needs trials >= 1")

    @classmethod
    def exact(cls) -> "ProbabilityMode":
        return cls("exact", 0)

    @classmethod
    def monte_carlo(cls, trials: Optional[int] = None) -> "ProbabilityMode":
        return cls("mc", settings.mc_trials if trials is None else trials)

    @property
    def is_exact(self) -> bool:
        return self.name == "exact"


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo frequency with its normal-approximation half-width."""
    value: float
    half_width: float
    trials: int

    def contains(self, x) -> bool:
        return abs(float(x) - self.value) <= self.half_width


def half_width(p: float, n: int, confidence: Optional[float] = None) -> float:
    confidence = settings.confidence if confidence is None else confidence
    if n <= 0:
        return float("inf")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    return z * math.sqrt(max(p * (1 - p), 0.0) / n)


Posterior = Union[Fraction, float]


# ─── Reports ───

@dataclass
class IndividualRisk:
    """Posterior over the sensitive universe for one individual."""
    individual: str
    posteriors: dict[str, Posterior]
    half_widths: dict[str, float] = field(default_factory=dict)

    @property
    def risk(self) -> Posterior:
        return max(self.posteriors.values(), default=Fraction(0))

    @property
    def witness(self) -> Optional[str]:
        """Value attaining the risk (first in universe order)."""
        if not self.posteriors:
            return None
        top = self.risk
        return next(v for v, p in self.posteriors.items() if p == top)

    def exceeds(self, bound: Fraction) -> bool:
        """Exact comparison, or interval strictly above the bound for estimates."""
        if isinstance(self.risk, Fraction):
            return self.risk > bound
        v = self.witness
        return self.posteriors[v] - self.half_widths.get(v, 0.0) > float(bound)


@dataclass
class RiskReport:
    """Per-individual posteriors for one publication."""
    algorithm: str
    l: int
    mode: str
    instance_count: int
    consistent_weight: Posterior
    individuals: dict[str, IndividualRisk]
    trials: int = 0

    @property
    def threshold(self) -> Fraction:
        return Fraction(1, self.l)

    def breaches(self) -> list[IndividualRisk]:
        return [r for r in self.individuals.values() if r.exceeds(self.threshold)]

    @property
    def passed(self) -> bool:
        return not self.breaches()


@dataclass
class Breach:
    """A transparency violation: who, which value, how likely, for which output."""
    individual: str
    value: str
    risk: Posterior
    output_index: int


@dataclass
class TransparencyReport:
    algorithm: str
    l: int
    mode: str
    outputs_checked: int
    breaches: list[Breach] = field(default_factory=list)
    max_risk: Posterior = Fraction(0)

    @property
    def passed(self) -> bool:
        return not self.breaches

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


# ─── Possible Instances ───

def instance_schema(external: ExternalSource, published: AnonymizedTable) -> AttributeSchema:
    """External schema, widened when the publication shows values outside its universe."""
    universe = set(external.schema.sensitive_values)
    extra = set(published.sensitive_counts) - universe
    return external.schema.with_universe(universe | extra) if extra else external.schema


def enumerate_possible_instances(
    external: ExternalSource,
    published: AnonymizedTable,
    limit: Optional[int] = None,
    count_limit: Optional[int] = None,
) -> Iterator[PossibleInstance]:
    """
    Every instance that some recoding of the published partition shape
    could map to `published`: individuals seated so each group's box (or QI
    multiset) is exact, then every distinct permutation of each group's
    sensitive multiset.

    Raises:
        EnumerationLimitError: when the publication or candidate count is too large
    """
    limit = settings.instance_limit if limit is None else limit
    count_limit = settings.instance_count_limit if count_limit is None else count_limit
    if published.size > limit:
        raise EnumerationLimitError("published rows for instance enumeration", published.size, limit)
    schema = instance_schema(external, published)
    seatings = list(groupings_for(published, external.entries))
    per_seating = 1
    for g in published.groups:
        per_seating *= multinomial(Counter(g.sensitive).values())
    total = per_seating * len(seatings)
    if total > count_limit:
        raise EnumerationLimitError("candidate instances", total, count_limit)
    logger.debug(f"{len(seatings)} seatings x {per_seating} assignments")

    seen: set[tuple[Record, ...]] = set()
    groups = published.groups
    for seating in seatings:
        options = [list(distinct_permutations(g.sensitive)) for g in groups]

        def fill(j: int, acc: list[Record]) -> Iterator[list[Record]]:
            if j == len(groups):
                yield acc
                return
            ids = seating[j]
            for vals in options[j]:
                yield from fill(j + 1, acc + [Record(i, external.by_id[i], v) for i, v in zip(ids, vals)])

        for recs in fill(0, []):
            key = tuple(sorted(recs, key=lambda r: r.id))
            if key not in seen:
                seen.add(key)
                yield MicrodataTable(schema, key)


# ─── Output Probability ───

def output_probability(
    spec: AlgorithmSpec,
    instance: PossibleInstance,
    published: AnonymizedTable,
    mode: Optional[ProbabilityMode] = None,
    seed: int = 0,
) -> Union[Fraction, Estimate]:
    """
    Pr{algorithm(instance) = published}.

    Exact: run-and-compare for deterministic algorithms, exact distributions
    for the randomized ones. Monte Carlo: hit frequency over `trials` runs on
    independently spawned seeds.
    """
    mode = mode or ProbabilityMode.exact()
    if mode.is_exact:
        try:
            return exact_probability(spec, instance, published)
        except InfeasibleError:
            return Fraction(0)
    hits = 0
    for ss in np.random.SeedSequence(seed).spawn(mode.trials):
        try:
            out = run(spec, instance, np.random.default_rng(ss))
        except InfeasibleError:
            out = None
        hits += out is not None and published.matches(out)
    p = hits / mode.trials
    return Estimate(p, half_width(p, mode.trials), mode.trials)


# ─── Disclosure Risk ───

def risk_report(
    spec: AlgorithmSpec,
    published: AnonymizedTable,
    external: ExternalSource,
    mode: Optional[ProbabilityMode] = None,
    individuals: Optional[Iterable[str]] = None,
    seed: int = 0,
    progress: bool = False,
) -> RiskReport:
    """
    Posterior of every (individual, value) under a uniform prior over
    possible instances, weighted by the probability the algorithm emits
    `published` from each.

    Raises:
        InconsistentPublicationError: when no instance can produce `published`
    """
    mode = mode or ProbabilityMode.exact()
    who = list(individuals) if individuals is not None else external.ids
    instances = list(enumerate_possible_instances(external, published))
    universe = instance_schema(external, published).sensitive_values
    logger.info(f"Risk report for {spec.describe()}: {len(instances)} candidate instances ({mode.name})")

    if mode.is_exact:
        weights = []
        for inst in tqdm(instances, disable=not progress, desc="instances"):
            weights.append(output_probability(spec, inst, published, mode))
        denom = sum(weights, Fraction(0))
        if denom == 0:
            raise InconsistentPublicationError(
                f"no possible instance makes {spec.describe()} output the published table"
            )
        tallies = {o: Counter() for o in who}
        for inst, w in zip(instances, weights):
            if not w:
                continue
            for o in who:
                rec = inst.by_id.get(o)
                if rec is not None:
                    tallies[o][rec.sensitive] += w
        report = {
            o: IndividualRisk(o, {v: Fraction(tallies[o][v]) / denom for v in universe}) for o in who
        }
        return RiskReport(spec.algorithm.value, spec.l, mode.name, len(instances), denom, report)

    # ── Monte Carlo: draw an instance uniformly, run once, keep the hits ──
    if not instances:
        raise InconsistentPublicationError("no possible instance matches the published table")
    master = np.random.default_rng(np.random.SeedSequence(seed))
    picks = master.integers(len(instances), size=mode.trials)
    seeds = np.random.SeedSequence(seed).spawn(mode.trials)
    hits = 0
    tallies = {o: Counter() for o in who}
    for pick, ss in tqdm(zip(picks.tolist(), seeds), total=mode.trials, disable=not progress, desc="trials"):
        inst = instances[pick]
        try:
            out = run(spec, inst, np.random.default_rng(ss))
        except InfeasibleError:
            continue
        if out is None or not published.matches(out):
            continue
        hits += 1
        for o in who:
            rec = inst.by_id.get(o)
            if rec is not None:
                tallies[o][rec.sensitive] += 1
    if hits == 0:
        raise InconsistentPublicationError(f"no Monte Carlo trial reproduced the published table in {mode.trials} runs")
    report = {}
    for o in who:
        post = {v: tallies[o][v] / hits for v in universe}
        report[o] = IndividualRisk(o, post, {v: half_width(p, hits) for v, p in post.items()})
    return RiskReport(spec.algorithm.value, spec.l, mode.name, len(instances), hits / mode.trials, report, mode.trials)


def disclosure_risk(
    individual: str,
    published: AnonymizedTable,
    external: ExternalSource,
    spec: AlgorithmSpec,
    mode: Optional[ProbabilityMode] = None,
    seed: int = 0,
) -> IndividualRisk:
    """Posteriors and risk for one individual (risk 0 when no consistent instance holds them)."""
    return risk_report(spec, published, external, mode, [individual], seed).individuals[individual]


# ─── Credibility ───

@dataclass
class CredibilityResult:
    """Posteriors restricted to instances for which the publication is minimal."""
    individual: str
    posteriors: dict[str, Fraction]
    support_size: int

    @property
    def credibility(self) -> Fraction:
        return max(self.posteriors.values(), default=Fraction(0))


def minimal_instances(
    published: AnonymizedTable,
    external: ExternalSource,
    l: int,
    scheme: RecodingScheme = RecodingScheme.GLOBAL,
) -> list[PossibleInstance]:
    """S+: possible instances of which `published` is a minimal l-diverse generalization."""
    return [
        inst for inst in enumerate_possible_instances(external, published)
        if is_minimal_generalization(inst, published, l, scheme)
    ]


def credibility(
    individual: str,
    published: AnonymizedTable,
    external: ExternalSource,
    l: int,
    scheme: RecodingScheme = RecodingScheme.GLOBAL,
) -> CredibilityResult:
    """
    cred(o) = max_v |S+_{o,v}| / |S+|.

    Raises:
        InconsistentPublicationError: when S+ is empty
    """
    support = minimal_instances(published, external, l, scheme)
    if not support:
        raise InconsistentPublicationError("no instance has the published table as a minimal generalization")
    universe = instance_schema(external, published).sensitive_values
    counts = Counter(inst.by_id[individual].sensitive for inst in support if individual in inst.by_id)
    return CredibilityResult(
        individual, {v: Fraction(counts[v], len(support)) for v in universe}, len(support)
    )


# ─── Transparency ───

def verify_transparency(
    spec: AlgorithmSpec,
    table: MicrodataTable,
    external: Optional[ExternalSource] = None,
    mode: Optional[ProbabilityMode] = None,
    seeds: Optional[Iterable[int]] = None,
) -> TransparencyReport:
    """
    Run the algorithm on `table`, then attack every output it can produce.

    Exact mode covers the whole output support of randomized algorithms;
    Monte Carlo mode attacks the outputs of the given seeds (0..9 by default).
    PASS iff every individual's risk stays within 1/l.
    """
    mode = mode or ProbabilityMode.exact()
    external = external or table.project()
    if mode.is_exact:
        outputs = list(distribution(spec, table))
    else:
        outputs = []
        for s in (range(10) if seeds is None else seeds):
            out = run(spec, table, s)
            if out is not None and out not in outputs:
                outputs.append(out)

    report = TransparencyReport(spec.algorithm.value, spec.l, mode.name, len(outputs))
    for index, out in enumerate(outputs):
        risks = risk_report(spec, out, external, mode)
        for r in risks.individuals.values():
            if r.risk > report.max_risk:
                report.max_risk = r.risk
        for r in risks.breaches():
            report.breaches.append(Breach(r.individual, r.witness, r.risk, index))
    logger.info(f"Transparency of {spec.describe()}: {report.verdict} over {len(outputs)} outputs")
    return report
