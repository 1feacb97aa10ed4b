"""
Glassbox — Algorithm Registry
One entry point per algorithm id: run with a seed, exact output distribution,
exact probability of a given publication.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from src.anonymization.ace import Seed, ace, ace_distribution
from src.anonymization.baselines import (
    Partitioner,
    mask,
    mask_distribution,
    mondrian_lite,
    opt_gen,
)
from src.anonymization.hybrid import hybrid, hybrid_distribution, hybrid_output_probability
from src.anonymization.model import MicrodataTable
from src.anonymization.recoding import AnonymizationFunction, AnonymizedTable, PenaltyMetric
from src.anonymization.tailor import tailor

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    TAILOR = "tailor"
    ACE = "ace"
    HYBRID = "hybrid"
    OPTGEN = "optgen"
    MASK = "mask"
    MONDRIAN = "mondrian"

    @property
    def randomized(self) -> bool:
        return self in (Algorithm.ACE, Algorithm.HYBRID, Algorithm.MASK)

    @property
    def transparent(self) -> bool:
        return self in (Algorithm.TAILOR, Algorithm.ACE, Algorithm.HYBRID)


@dataclass(frozen=True)
class AlgorithmSpec:
    """An algorithm together with every public parameter the adversary is assumed to know."""
    algorithm: Algorithm
    l: int
    fn: AnonymizationFunction = AnonymizationFunction.MBR
    k: Optional[int] = None
    protected: frozenset[str] = frozenset()
    partitioner: Optional[Partitioner] = field(default=None, compare=False, hash=False)
    metric: Optional[PenaltyMetric] = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        object.__setattr__(self, "protected", frozenset(self.protected))
        if self.l < 1:
            raise ValueError(f"l must be positive, got {self.l}")

    @property
    def mask_k(self) -> int:
        return self.k if self.k is not None else self.l

    def describe(self) -> str:
        extra = f", k={self.mask_k}, V={sorted(self.protected)}" if self.algorithm == Algorithm.MASK else ""
        return f"{self.algorithm.value}(l={self.l}{extra})"


def run(spec: AlgorithmSpec, table: MicrodataTable, seed: Seed = None) -> Optional[AnonymizedTable]:
    """Run the algorithm once; None when it produces no output."""
    algo = spec.algorithm
    if algo == Algorithm.TAILOR:
        result = tailor(table, spec.l, spec.metric, spec.fn)
        return None if result is None else result[1]
    if algo == Algorithm.ACE:
        return ace(table, spec.l, seed, spec.metric, spec.fn)
    if algo == Algorithm.HYBRID:
        return hybrid(table, spec.l, seed, spec.metric, spec.fn)
    if algo == Algorithm.OPTGEN:
        return opt_gen(table, spec.l, fn=spec.fn)
    if algo == Algorithm.MASK:
        return mask(table, spec.mask_k, spec.l, spec.protected, seed, spec.partitioner, spec.fn)
    return mondrian_lite(table, spec.l, spec.fn)


def distribution(spec: AlgorithmSpec, table: MicrodataTable) -> dict[AnonymizedTable, Fraction]:
    """Exact output distribution (a single point mass for deterministic algorithms)."""
    algo = spec.algorithm
    if algo == Algorithm.ACE:
        return ace_distribution(table, spec.l, spec.metric, spec.fn)
    if algo == Algorithm.HYBRID:
        return hybrid_distribution(table, spec.l, spec.metric, spec.fn)
    if algo == Algorithm.MASK:
        return mask_distribution(table, spec.mask_k, spec.l, spec.protected, spec.partitioner, spec.fn)
    out = run(spec, table)
    return {} if out is None else {out: Fraction(1)}


def exact_probability(spec: AlgorithmSpec, table: MicrodataTable, published: AnonymizedTable) -> Fraction:
    """Pr{algorithm(table) = published}, exactly."""
    if spec.algorithm == Algorithm.HYBRID:
        return hybrid_output_probability(table, spec.l, published, spec.metric)
    if not spec.algorithm.randomized:
        out = run(spec, table)
        return Fraction(int(out is not None and published.matches(out)))
    return sum(
        (p for out, p in distribution(spec, table).items() if published.matches(out)),
        Fraction(0),
    )
