"""
Glassbox — Hybrid
Tailor's partition, refined by running Ace inside every group as a tiny table.
"""

import itertools
import logging
from collections import Counter
from fractions import Fraction
from typing import Optional

import numpy as np

from config.settings import settings
from src.anonymization.ace import Seed, ace_partition, ace_partition_distribution
from src.anonymization.errors import EnumerationLimitError
from src.anonymization.model import MicrodataTable, Partition, is_l_eligible
from src.anonymization.recoding import (
    AnonymizationFunction,
    AnonymizedTable,
    Anatomy,
    AnatomyGroup,
    Generalization,
    GeneralizedGroup,
    PenaltyMetric,
    PerimeterMetric,
    anonymize,
)
from src.anonymization.tailor import tailor_partition

logger = logging.getLogger(__name__)


def group_seeds(seed: Seed, count: int) -> list[np.random.SeedSequence]:
    """
    Independent per-group seed sequences keyed by (master seed, group index).

    A Generator master is reduced to one 63-bit draw first.
    """
    if isinstance(seed, np.random.Generator):
        seed = int(seed.integers(2 ** 63))
    master = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return master.spawn(count)


def group_tables(table: MicrodataTable, partition: Partition) -> list[MicrodataTable]:
    """Each group of a partition as a standalone table under the parent schema."""
    return [MicrodataTable(table.schema, g.members) for g in partition.groups]


def hybrid_partition(
    table: MicrodataTable,
    l: int,
    seed: Seed = None,
    metric: Optional[PenaltyMetric] = None,
) -> Optional[Partition]:
    """Final partition of Hybrid, or None when the table is not l-eligible."""
    metric = metric or PerimeterMetric(table.schema)
    coarse = tailor_partition(table, l, metric)
    if coarse is None:
        return None
    seeds = group_seeds(seed, len(coarse))
    groups = []
    # ── Step 2: Ace inside every Tailor group ──
    for sub, ss in zip(group_tables(table, coarse), seeds):
        refined = ace_partition(sub, l, np.random.default_rng(ss), metric)
        groups.extend(refined.groups)
    logger.info(f"Hybrid: {len(coarse)} Tailor groups refined into {len(groups)} groups")
    return Partition(tuple(groups))


def hybrid(
    table: MicrodataTable,
    l: int,
    seed: Seed = None,
    metric: Optional[PenaltyMetric] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
) -> Optional[AnonymizedTable]:
    """
    Run Hybrid.

    Args:
        table: Microdata to anonymize
        l: Diversity parameter
        seed: Master seed; group i runs Ace on the i-th spawned sub-seed
        metric: Penalty used by both stages (perimeter by default)
        fn: Anonymization function applied to the final partition

    Returns:
        Published table with per-group boundaries, or None if not l-eligible
    """
    partition = hybrid_partition(table, l, seed, metric)
    if partition is None:
        return None
    return anonymize(partition, fn, table.schema)


def _published_group(group, fn: AnonymizationFunction):
    return AnatomyGroup.of(group) if fn == AnonymizationFunction.ANATOMY else GeneralizedGroup.of(group)


def _group_outcomes(
    table: MicrodataTable,
    l: int,
    metric: PenaltyMetric,
    fn: AnonymizationFunction,
    limit: Optional[int],
) -> list[list[tuple[Counter, Fraction]]]:
    """Per Tailor group: the distribution over the multiset of published groups it emits."""
    coarse = tailor_partition(table, l, metric)
    outcomes = []
    for sub in group_tables(table, coarse):
        merged: dict[tuple, tuple[Counter, Fraction]] = {}
        for part, p in ace_partition_distribution(sub, l, metric, limit):
            emitted = Counter(_published_group(g, fn) for g in part.groups)
            key = tuple(sorted(emitted.elements()))
            prev = merged.get(key)
            merged[key] = (emitted, (prev[1] if prev else Fraction(0)) + p)
        outcomes.append(list(merged.values()))
    return outcomes


def hybrid_distribution(
    table: MicrodataTable,
    l: int,
    metric: Optional[PenaltyMetric] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
    limit: Optional[int] = None,
) -> dict[AnonymizedTable, Fraction]:
    """Exact output distribution: product of independent per-group Ace distributions."""
    if not is_l_eligible(table, l):
        return {}
    metric = metric or PerimeterMetric(table.schema)
    limit = settings.assign_support_limit if limit is None else limit
    outcomes = _group_outcomes(table, l, metric, fn, limit)
    combos = 1
    for o in outcomes:
        combos *= len(o)
    if combos > limit:
        raise EnumerationLimitError("Hybrid output combinations", combos, limit)
    dist: dict[AnonymizedTable, Fraction] = {}
    for pick in itertools.product(*outcomes):
        groups = tuple(g for emitted, _ in pick for g in emitted.elements())
        p = Fraction(1)
        for _, q in pick:
            p *= q
        out = _assemble(groups, fn, table)
        dist[out] = dist.get(out, Fraction(0)) + p
    return dist


def hybrid_output_probability(
    table: MicrodataTable,
    l: int,
    published: AnonymizedTable,
    metric: Optional[PenaltyMetric] = None,
    limit: Optional[int] = None,
) -> Fraction:
    """
    Pr{Hybrid(table, l) = published}: Tailor's groups are matched to
    sub-multisets of the published groups and per-group Ace probabilities
    multiplied along every complete decomposition.
    """
    fn = published.kind
    if not is_l_eligible(table, l):
        return Fraction(0)
    if not published.has_boundaries:
        dist = hybrid_distribution(table, l, metric, fn, limit)
        return sum((p for out, p in dist.items() if published.matches(out)), Fraction(0))
    metric = metric or PerimeterMetric(table.schema)
    target = Counter(published.groups)
    outcomes = [
        [(emitted, p) for emitted, p in options if not emitted - target]
        for options in _group_outcomes(table, l, metric, fn, limit)
    ]

    def walk(i: int, remaining: Counter) -> Fraction:
        if i == len(outcomes):
            return Fraction(1) if not +remaining else Fraction(0)
        total = Fraction(0)
        for emitted, p in outcomes[i]:
            if not emitted - remaining:
                total += p * walk(i + 1, remaining - emitted)
        return total

    return walk(0, target)


def _assemble(groups, fn: AnonymizationFunction, table: MicrodataTable) -> AnonymizedTable:
    if fn == AnonymizationFunction.ANATOMY:
        return Anatomy(groups, schema=table.schema)
    return Generalization(groups, schema=table.schema)
