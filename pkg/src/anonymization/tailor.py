"""
Glassbox — Tailor
Deterministic transparent l-diversity: recursively replace every 2l-diverse
QI-group by its canonical l-cut until no such group remains.
"""

import logging
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from src.anonymization.model import MicrodataTable, Partition, QIGroup, is_l_eligible
from src.anonymization.recoding import (
    AnonymizationFunction,
    AnonymizedTable,
    PenaltyMetric,
    PerimeterMetric,
    anonymize,
)

logger = logging.getLogger(__name__)


# ─── Ordered Split Search ───

@dataclass
class SplitChoice:
    """Best prefix split of one group: dimension, left size, the sort order it applies to, scaled cost."""
    dimension: int
    split_size: int
    order: np.ndarray
    cost: int


def ordered_extents(qi: np.ndarray, ranks: np.ndarray, dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Sort rows by (value on `dim`, identifier rank) and return the order with
    prefix and suffix QI extents: prefix[k-1] is the extent of the first k
    rows, suffix[k] the extent of the rows from position k on.
    """
    order = np.lexsort((ranks, qi[:, dim]))
    s = qi[order]
    prefix = np.maximum.accumulate(s, axis=0) - np.minimum.accumulate(s, axis=0)
    rev = s[::-1]
    suffix = (np.maximum.accumulate(rev, axis=0) - np.minimum.accumulate(rev, axis=0))[::-1]
    return order, prefix, suffix


def best_split(
    qi: np.ndarray,
    ranks: np.ndarray,
    metric: PenaltyMetric,
    min_side: int,
    prefer_larger: bool = True,
) -> Optional[SplitChoice]:
    """
    Cheapest ordered two-way split with both sides holding at least `min_side`
    rows. Ties go to the smallest dimension, then to the largest (or smallest)
    left side.
    """
    m, d = qi.shape
    min_side = max(1, min_side)
    if m < 2 * min_side:
        return None
    ks = np.arange(min_side, m - min_side + 1)
    best: Optional[SplitChoice] = None
    for dim in range(d):
        order, prefix, suffix = ordered_extents(qi, ranks, dim)
        costs = metric.scaled_costs(ks, prefix[ks - 1]) + metric.scaled_costs(m - ks, suffix[ks])
        low = costs.min()
        tied = ks[costs == low]
        k = int(tied.max() if prefer_larger else tied.min())
        if best is None or low < best.cost:
            best = SplitChoice(dim, k, order, low)
    return best


def group_ranks(group: QIGroup) -> np.ndarray:
    # members are stored sorted by id, so position is the id rank
    return np.arange(group.size)


# ─── l-Cuts ───

@dataclass(frozen=True)
class LCut:
    """An l-cut {G_a, G_b} of a group along one dimension."""
    left: QIGroup
    right: QIGroup
    dimension: int
    split_size: int
    perimeter: Fraction


def _cut_from_order(group: QIGroup, order: np.ndarray, dim: int, k: int, metric: PenaltyMetric) -> LCut:
    members = group.members
    left = QIGroup(tuple(members[i] for i in order[:k]))
    right = QIGroup(tuple(members[i] for i in order[k:]))
    return LCut(left, right, dim, k, metric.group_cost(left) + metric.group_cost(right))


def enumerate_l_cuts(group: QIGroup, l: int, metric: Optional[PenaltyMetric] = None, schema=None) -> list[LCut]:
    """
    All l-cuts of a group: for each dimension, every prefix of the
    (value, id) order whose both sides hold at least l*c records.
    """
    metric = metric or _default_metric(schema)
    c = group.max_multiplicity
    m = group.size
    ranks = group_ranks(group)
    cuts = []
    for dim in range(group.qi_matrix.shape[1]):
        order, _, _ = ordered_extents(group.qi_matrix, ranks, dim)
        for k in range(l * c, m - l * c + 1):
            cuts.append(_cut_from_order(group, order, dim, k, metric))
    return cuts


def canonical_l_cut(group: QIGroup, l: int, metric: Optional[PenaltyMetric] = None, schema=None) -> Optional[LCut]:
    """
    The l-cut of least penalty; ties go to the smallest dimension, then to the
    largest left side. None when the group is not 2l-diverse.
    """
    metric = metric or _default_metric(schema)
    choice = best_split(group.qi_matrix, group_ranks(group), metric, l * group.max_multiplicity)
    if choice is None:
        return None
    return _cut_from_order(group, choice.order, choice.dimension, choice.split_size, metric)


def _default_metric(schema) -> PenaltyMetric:
    if schema is None:
        raise ValueError("pass either a penalty metric or the schema to derive the perimeter from")
    return PerimeterMetric(schema)


# ─── Tailor ───

def tailor_partition(
    table: MicrodataTable,
    l: int,
    metric: Optional[PenaltyMetric] = None,
    rng: Optional[np.random.Generator] = None,
) -> Optional[Partition]:
    """
    Tailor's final partition, or None when the table is not l-eligible.

    Groups are processed from a FIFO queue (left child before right). Passing
    `rng` pops groups in random order instead; the final partition is the same.
    """
    if not is_l_eligible(table, l):
        logger.info(f"Table of {len(table)} records is not {l}-eligible")
        return None
    if not len(table):
        return Partition(())
    metric = metric or PerimeterMetric(table.schema)
    qi = table.qi_matrix
    codes = table.sensitive_codes
    n_values = len(table.schema.sensitive_values)

    queue: deque[np.ndarray] = deque([np.arange(len(table))])
    final: list[np.ndarray] = []
    cuts = 0
    while queue:
        if rng is not None and len(queue) > 1:
            queue.rotate(-int(rng.integers(len(queue))))
        idx = queue.popleft()
        c = int(np.bincount(codes[idx], minlength=n_values).max())
        # idx stays sorted ascending, so it is the identifier rank
        choice = best_split(qi[idx], idx, metric, l * c)
        if choice is None:
            final.append(idx)
            continue
        ordered = idx[choice.order]
        queue.append(np.sort(ordered[: choice.split_size]))
        queue.append(np.sort(ordered[choice.split_size:]))
        cuts += 1

    logger.info(f"Tailor: {cuts} cuts, {len(final)} groups for n={len(table)}, l={l}")
    records = table.records
    return Partition(tuple(QIGroup(tuple(records[i] for i in idx)) for idx in final))


def tailor(
    table: MicrodataTable,
    l: int,
    metric: Optional[PenaltyMetric] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
) -> Optional[tuple[Partition, AnonymizedTable]]:
    """
    Run Tailor.

    Args:
        table: Microdata to anonymize
        l: Diversity parameter
        metric: Cut-selection penalty (perimeter over the table's schema by default)
        fn: Anonymization function applied to the final partition

    Returns:
        (partition, published table), or None if the table is not l-eligible
    """
    partition = tailor_partition(table, l, metric)
    if partition is None:
        return None
    return partition, anonymize(partition, fn, table.schema)
