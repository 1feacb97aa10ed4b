"""
Glassbox — Ace
Randomized transparent l-diversity: Assign draws an l-diverse bucket partition,
Slice refines every bucket by canonical divisions.
"""

import itertools
import logging
import math
from collections import Counter, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Union

import numpy as np

from config.settings import settings
from src.anonymization.errors import AssignInvariantError, EnumerationLimitError
from src.anonymization.model import (
    Bucket,
    BucketPartition,
    MicrodataTable,
    Partition,
    QIGroup,
    Record,
    is_l_eligible,
    multinomial,
)
from src.anonymization.recoding import (
    AnonymizationFunction,
    AnonymizedTable,
    PenaltyMetric,
    PerimeterMetric,
    anonymize,
)

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, np.random.SeedSequence, None]


# ─── Assign ───

@dataclass(frozen=True)
class AssignStep:
    """One Assign iteration: take `alpha` records of every value in `signature`."""
    iteration: int
    beta: int
    alpha: int
    signature: tuple[str, ...]
    remaining_counts: tuple[tuple[str, int], ...]

    @property
    def signature_set(self) -> frozenset[str]:
        return frozenset(self.signature)


@dataclass(frozen=True)
class AssignSkeleton:
    """The deterministic part of Assign: every step's (alpha, beta, signature)."""
    steps: tuple[AssignStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[AssignStep]:
        return iter(self.steps)

    @property
    def shapes(self) -> Counter:
        """Multiset of (signature set, alpha) over the steps."""
        return Counter((s.signature_set, s.alpha) for s in self.steps)

    def execution_count(self) -> int:
        """m: the number of equally likely Assign executions."""
        per_value: dict[str, list[int]] = {}
        for s in self.steps:
            for v in s.signature:
                per_value.setdefault(v, []).append(s.alpha)
        m = 1
        for alphas in per_value.values():
            m *= multinomial(alphas)
        return m


def _ranked_values(counts: Mapping[str, int]) -> list[tuple[str, int]]:
    """Values with positive count by descending count, ties alphabetical."""
    return sorted(((v, c) for v, c in counts.items() if c > 0), key=lambda vc: (-vc[1], vc[0]))


def assign_params(counts: Mapping[str, int], l: int) -> tuple[int, int, tuple[str, ...]]:
    """
    (alpha, beta, signature) for the next Assign step on a residue.

    beta starts at l; alpha is the largest positive integer with
    alpha <= n_beta, n_1 - alpha <= (|S| - alpha*beta)/l and
    n_{beta+1} <= (|S| - alpha*beta)/l, where n_{w+1} = 0. When no alpha
    exists beta grows by one.
    """
    ranked = _ranked_values(counts)
    total = sum(c for _, c in ranked)
    w = len(ranked)
    if not ranked or l * ranked[0][1] > total:
        raise AssignInvariantError(f"residue {dict(counts)} is not {l}-eligible")
    n = [c for _, c in ranked] + [0]
    n1 = n[0]
    for beta in range(l, w + 1):
        bound = min(n[beta - 1], (total - l * n[beta]) // beta)
        if beta > l:
            bound = min(bound, (total - l * n1) // (beta - l))
        if bound >= 1:
            return bound, beta, tuple(v for v, _ in ranked[:beta])
    raise AssignInvariantError(f"no (alpha, beta) for residue {dict(counts)} with l={l}")


def assign_skeleton(counts: Mapping[str, int], l: int) -> AssignSkeleton:
    """Iterate assign_params on the shrinking residue."""
    residue = {v: c for v, c in counts.items() if c > 0}
    steps = []
    while residue:
        alpha, beta, signature = assign_params(residue, l)
        steps.append(AssignStep(len(steps), beta, alpha, signature, tuple(sorted(residue.items()))))
        for v in signature:
            residue[v] -= alpha
            if residue[v] == 0:
                del residue[v]
    return AssignSkeleton(tuple(steps))


def draw_without_replacement(pool: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """
    Partial Fisher-Yates over `pool` (sorted ascending): the first k slots
    after k swaps are the sample. Returns (taken, rest), both sorted.
    """
    a = pool.copy()
    picks = rng.integers(np.arange(k), len(a)) if k else np.zeros(0, dtype=np.int64)
    for j, r in enumerate(picks.tolist()):
        a[j], a[r] = a[r], a[j]
    return np.sort(a[:k]), np.sort(a[k:])


def _assign_indices(table: MicrodataTable, l: int, rng: np.random.Generator) -> list[list[tuple[str, np.ndarray]]]:
    """Assign on record indices: one list of (value, column indices) per bucket."""
    skeleton = assign_skeleton(table.sensitive_counts, l)
    codes = table.sensitive_codes
    universe = table.schema.sensitive_values
    residue = {
        v: np.flatnonzero(codes == i) for i, v in enumerate(universe) if table.sensitive_counts.get(v)
    }
    buckets = []
    for step in skeleton:
        columns = []
        for v in step.signature:
            taken, residue[v] = draw_without_replacement(residue[v], step.alpha, rng)
            columns.append((v, taken))
        buckets.append(columns)
    logger.debug(f"Assign: {len(buckets)} buckets for n={len(table)}, l={l}")
    return buckets


def assign(table: MicrodataTable, l: int, rng: Seed = None) -> BucketPartition:
    """
    Draw an l-diverse bucket partition.

    Args:
        table: l-eligible microdata
        l: Diversity parameter
        rng: numpy Generator or seed; draws are taken from each value's residue in id order

    Returns:
        BucketPartition with one bucket per skeleton step
    """
    rng = np.random.default_rng(rng)
    records = table.records
    return BucketPartition(tuple(
        Bucket(tuple((v, tuple(records[i] for i in idx)) for v, idx in columns))
        for columns in _assign_indices(table, l, rng)
    ))


def assign_probability(table: MicrodataTable, l: int, u: BucketPartition) -> Fraction:
    """
    Pr{Assign(table, l) = u}.

    Each execution has probability 1/m; u is produced by every ordering of its
    buckets that matches the skeleton step by step, i.e. the product over
    interchangeable steps (same signature set and alpha) of class_size!.
    """
    if not is_l_eligible(table, l) or not len(table):
        return Fraction(0)
    if not u.as_partition().covers(table):
        return Fraction(0)
    skeleton = assign_skeleton(table.sensitive_counts, l)
    produced = Counter((frozenset(b.signature), b.alpha) for b in u.buckets)
    if produced != skeleton.shapes:
        return Fraction(0)
    orderings = 1
    for size in produced.values():
        orderings *= math.factorial(size)
    return Fraction(orderings, skeleton.execution_count())


def enumerate_assign_executions(
    table: MicrodataTable,
    l: int,
    limit: Optional[int] = None,
) -> Iterator[tuple[Bucket, ...]]:
    """
    Every Assign execution as its ordered bucket sequence; each has probability 1/m.

    Raises:
        EnumerationLimitError: when m exceeds `limit`
    """
    limit = settings.assign_support_limit if limit is None else limit
    skeleton = assign_skeleton(table.sensitive_counts, l)
    m = skeleton.execution_count()
    if m > limit:
        raise EnumerationLimitError("Assign executions", m, limit)
    pools = {v: tuple(r for r in table.records if r.sensitive == v) for v in table.sensitive_counts}

    def walk(step_no: int, pools: dict[str, tuple[Record, ...]], acc: tuple[Bucket, ...]):
        if step_no == len(skeleton.steps):
            yield acc
            return
        step = skeleton.steps[step_no]
        choices = [itertools.combinations(pools[v], step.alpha) for v in step.signature]
        for combo in itertools.product(*choices):
            rest = dict(pools)
            for v, picked in zip(step.signature, combo):
                chosen = set(picked)
                rest[v] = tuple(r for r in pools[v] if r not in chosen)
            yield from walk(step_no + 1, rest, acc + (Bucket(tuple(zip(step.signature, combo))),))

    yield from walk(0, pools, ())


def assign_support(
    table: MicrodataTable,
    l: int,
    limit: Optional[int] = None,
) -> list[tuple[BucketPartition, Fraction]]:
    """Every distinct bucket partition Assign can return, with its probability."""
    m = assign_skeleton(table.sensitive_counts, l).execution_count()
    support: dict[tuple, tuple[BucketPartition, Fraction]] = {}
    for buckets in enumerate_assign_executions(table, l, limit):
        u = BucketPartition(buckets)
        key = u.canonical_form()
        prev = support.get(key)
        support[key] = (u, (prev[1] if prev else Fraction(0)) + Fraction(1, m))
    logger.debug(f"Assign support: {len(support)} partitions over m={m} executions")
    return list(support.values())


# ─── Divisions ───

@dataclass(frozen=True)
class Division:
    """A division {B_a, B_b}: top `left_column_size` records of every column go left."""
    left: Bucket
    right: Bucket
    dimension: int
    left_column_size: int
    perimeter: Fraction


def _column_arrays(bucket: Bucket) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-column QI matrices and identifier ranks within the bucket."""
    rank = {r.id: i for i, r in enumerate(sorted((r for _, recs in bucket.columns for r in recs), key=lambda r: r.id))}
    qis = [np.array([r.qi for r in recs], dtype=np.int64) for _, recs in bucket.columns]
    ranks = [np.array([rank[r.id] for r in recs], dtype=np.int64) for _, recs in bucket.columns]
    return qis, ranks


def _division_costs(
    qis: list[np.ndarray], ranks: list[np.ndarray], dim: int, metric: PenaltyMetric
) -> tuple[list[np.ndarray], np.ndarray]:
    """Column sort orders on `dim` and scaled costs for k = 1 .. alpha-1."""
    orders, pre_lo, pre_hi, suf_lo, suf_hi = [], [], [], [], []
    for qi, rk in zip(qis, ranks):
        order = np.lexsort((rk, qi[:, dim]))
        s = qi[order]
        orders.append(order)
        pre_lo.append(np.minimum.accumulate(s, axis=0))
        pre_hi.append(np.maximum.accumulate(s, axis=0))
        suf_lo.append(np.minimum.accumulate(s[::-1], axis=0)[::-1])
        suf_hi.append(np.maximum.accumulate(s[::-1], axis=0)[::-1])
    x = len(qis)
    alpha = qis[0].shape[0]
    ks = np.arange(1, alpha)
    left_ext = np.max(pre_hi, axis=0)[ks - 1] - np.min(pre_lo, axis=0)[ks - 1]
    right_ext = np.max(suf_hi, axis=0)[ks] - np.min(suf_lo, axis=0)[ks]
    costs = metric.scaled_costs(ks * x, left_ext) + metric.scaled_costs((alpha - ks) * x, right_ext)
    return orders, costs


def _division_from_orders(bucket: Bucket, orders: list[np.ndarray], dim: int, k: int, metric: PenaltyMetric) -> Division:
    left_cols, right_cols = [], []
    for (v, recs), order in zip(bucket.columns, orders):
        left_cols.append((v, tuple(recs[i] for i in order[:k])))
        right_cols.append((v, tuple(recs[i] for i in order[k:])))
    left, right = Bucket(tuple(left_cols)), Bucket(tuple(right_cols))
    cost = metric.group_cost(left.as_group()) + metric.group_cost(right.as_group())
    return Division(left, right, dim, k, cost)


def enumerate_divisions(bucket: Bucket, metric: PenaltyMetric) -> list[Division]:
    """Every division of the bucket: d * (alpha - 1) of them, none if a column has one record."""
    if not bucket.divisible:
        return []
    qis, ranks = _column_arrays(bucket)
    out = []
    for dim in range(qis[0].shape[1]):
        orders, _ = _division_costs(qis, ranks, dim, metric)
        out.extend(_division_from_orders(bucket, orders, dim, k, metric) for k in range(1, bucket.alpha))
    return out


def canonical_division(bucket: Bucket, metric: PenaltyMetric) -> Optional[Division]:
    """Least-penalty division; ties go to the smallest dimension, then the smallest B_a."""
    if not bucket.divisible:
        return None
    qis, ranks = _column_arrays(bucket)
    best = None
    for dim in range(qis[0].shape[1]):
        orders, costs = _division_costs(qis, ranks, dim, metric)
        low = costs.min()
        k = int(np.flatnonzero(costs == low)[0]) + 1
        if best is None or low < best[0]:
            best = (low, dim, k, orders)
    _, dim, k, orders = best
    return _division_from_orders(bucket, orders, dim, k, metric)


# ─── Slice ───

def _slice_indices(
    qi: np.ndarray,
    buckets: list[list[np.ndarray]],
    metric: PenaltyMetric,
    rng: Optional[np.random.Generator] = None,
) -> list[list[np.ndarray]]:
    """Slice on index columns over one QI matrix; indices double as id ranks."""
    queue = deque(buckets)
    final = []
    while queue:
        if rng is not None and len(queue) > 1:
            queue.rotate(-int(rng.integers(len(queue))))
        cols = queue.popleft()
        alpha = len(cols[0])
        if alpha < 2:
            final.append(cols)
            continue
        best = None
        for dim in range(qi.shape[1]):
            orders, costs = _division_costs([qi[c] for c in cols], cols, dim, metric)
            low = costs.min()
            k = int(np.flatnonzero(costs == low)[0]) + 1
            if best is None or low < best[0]:
                best = (low, k, orders)
        _, k, orders = best
        queue.append([np.sort(c[o[:k]]) for c, o in zip(cols, orders)])
        queue.append([np.sort(c[o[k:]]) for c, o in zip(cols, orders)])
    return final


def slice_buckets(
    u: BucketPartition,
    metric: PenaltyMetric,
    rng: Optional[np.random.Generator] = None,
) -> BucketPartition:
    """
    Replace divisible buckets by their canonical divisions until none is divisible.

    FIFO order by default; `rng` shuffles the processing order, which must not
    change the result.
    """
    records = sorted((r for b in u.buckets for _, recs in b.columns for r in recs), key=lambda r: r.id)
    if not records:
        return u
    pos = {r.id: i for i, r in enumerate(records)}
    qi = np.array([r.qi for r in records], dtype=np.int64)
    buckets = [
        [np.array(sorted(pos[r.id] for r in recs), dtype=np.int64) for _, recs in b.columns]
        for b in u.buckets
    ]
    out = []
    # buckets never exchange records, so each one is sliced on its own
    for b, cols in zip(u.buckets, buckets):
        for piece in _slice_indices(qi, [cols], metric, rng):
            out.append(Bucket(tuple(
                (v, tuple(records[i] for i in idx)) for v, idx in zip(b.signature, piece)
            )))
    return BucketPartition(tuple(out))


# ─── Ace ───

def ace_partition(
    table: MicrodataTable,
    l: int,
    rng: Seed = None,
    metric: Optional[PenaltyMetric] = None,
) -> Optional[Partition]:
    """Assign then Slice, returned as a plain partition (None if not l-eligible)."""
    if not is_l_eligible(table, l):
        logger.info(f"Table of {len(table)} records is not {l}-eligible")
        return None
    if not len(table):
        return Partition(())
    rng = np.random.default_rng(rng)
    metric = metric or PerimeterMetric(table.schema)
    buckets = _assign_indices(table, l, rng)
    sliced = []
    for columns in buckets:
        sliced.extend(_slice_indices(table.qi_matrix, [[idx for _, idx in columns]], metric))
    records = table.records
    logger.info(f"Ace: {len(buckets)} buckets sliced into {len(sliced)} groups for n={len(table)}, l={l}")
    return Partition(tuple(
        QIGroup(tuple(records[i] for col in cols for i in col)) for cols in sliced
    ))


def ace(
    table: MicrodataTable,
    l: int,
    rng: Seed = None,
    metric: Optional[PenaltyMetric] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
) -> Optional[AnonymizedTable]:
    """
    Run Ace.

    Args:
        table: Microdata to anonymize
        l: Diversity parameter
        rng: numpy Generator or integer seed
        metric: Division penalty (perimeter over the table's schema by default)
        fn: Anonymization function applied to the sliced partition

    Returns:
        Published table, or None if the table is not l-eligible
    """
    partition = ace_partition(table, l, rng, metric)
    if partition is None:
        return None
    return anonymize(partition, fn, table.schema)


def ace_distribution(
    table: MicrodataTable,
    l: int,
    metric: Optional[PenaltyMetric] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
    limit: Optional[int] = None,
) -> dict[AnonymizedTable, Fraction]:
    """Exact output distribution of Ace: Assign support pushed through Slice and `fn`."""
    if not is_l_eligible(table, l):
        return {}
    if not len(table):
        return {anonymize(Partition(()), fn, table.schema): Fraction(1)}
    metric = metric or PerimeterMetric(table.schema)
    dist: dict[AnonymizedTable, Fraction] = {}
    for u, p in assign_support(table, l, limit):
        out = anonymize(slice_buckets(u, metric).as_partition(), fn, table.schema)
        dist[out] = dist.get(out, Fraction(0)) + p
    return dist


def ace_partition_distribution(
    table: MicrodataTable,
    l: int,
    metric: Optional[PenaltyMetric] = None,
    limit: Optional[int] = None,
) -> list[tuple[Partition, Fraction]]:
    """Exact distribution over Ace's final partitions."""
    metric = metric or PerimeterMetric(table.schema)
    dist: dict[tuple, tuple[Partition, Fraction]] = {}
    for u, p in assign_support(table, l, limit):
        part = slice_buckets(u, metric).as_partition()
        key = part.canonical_form()
        prev = dist.get(key)
        dist[key] = (part, (prev[1] if prev else Fraction(0)) + p)
    return list(dist.values())
