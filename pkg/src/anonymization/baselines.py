"""
Glassbox — Baselines
Non-transparent reference algorithms: Opt-Gen (exhaustive discernability
minimizer), Mask, a k-anonymous partitioner and a Mondrian-style splitter,
plus the minimality check the credibility model relies on.
"""

import itertools
import logging
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from config.settings import settings
from src.anonymization.errors import (
    EnumerationLimitError,
    InconsistentPublicationError,
    InfeasibleError,
    UnmaskableError,
)
from src.anonymization.model import (
    ExternalSource,
    MicrodataTable,
    Partition,
    QIGroup,
    Record,
    is_l_diverse,
    is_l_eligible,
)
from src.anonymization.recoding import (
    AnonymizationFunction,
    AnonymizedTable,
    PenaltyMetric,
    PerimeterMetric,
    anonymize,
    discernability,
    groupings_for,
)
from src.anonymization.tailor import best_split

logger = logging.getLogger(__name__)

Partitioner = Callable[[MicrodataTable, int], Partition]


class RecodingScheme(str, Enum):
    """
    GLOBAL: records with identical QI values share a group and group MBRs are
    pairwise disjoint (closed intervals, so touching boxes overlap).
    LOCAL: any partition.
    """
    GLOBAL = "global"
    LOCAL = "local"


# ─── Partition Enumeration ───

Box = tuple[tuple[int, int], ...]


def _box(qis: Iterable[tuple[int, ...]]) -> Box:
    cols = list(zip(*qis))
    return tuple((min(c), max(c)) for c in cols)


def _merge(a: Box, b: Box) -> Box:
    return tuple((min(x[0], y[0]), max(x[1], y[1])) for x, y in zip(a, b))


def boxes_overlap(a: Box, b: Box) -> bool:
    return all(x[0] <= y[1] and y[0] <= x[1] for x, y in zip(a, b))


def _units(records: Sequence[Record], scheme: RecodingScheme) -> list[tuple[Record, ...]]:
    """Identical-QI classes under global recoding, single records otherwise."""
    if scheme == RecodingScheme.LOCAL:
        return [(r,) for r in records]
    classes: dict[tuple[int, ...], list[Record]] = {}
    for r in records:
        classes.setdefault(r.qi, []).append(r)
    return [tuple(v) for _, v in sorted(classes.items())]


@lru_cache(maxsize=64)
def _structural_partitions(
    keys: tuple[tuple[str, tuple[int, ...]], ...], max_groups: int, scheme: RecodingScheme
) -> tuple[tuple[tuple[str, ...], ...], ...]:
    """
    Unit partitions valid under the scheme, ignoring sensitive values.

    Boxes only grow as units join a group, so an overlap found on a prefix
    stays an overlap; such branches are cut early.
    """
    records = [Record(i, qi, "") for i, qi in keys]
    units = _units(records, scheme)
    unit_boxes = [_box(r.qi for r in u) for u in units]
    found = []
    groups: list[list[int]] = []
    boxes: list[Box] = []

    def clash(j: int) -> bool:
        if scheme == RecodingScheme.LOCAL:
            return False
        return any(boxes_overlap(boxes[j], boxes[o]) for o in range(len(groups)) if o != j)

    def walk(u: int) -> None:
        if u == len(units):
            found.append(tuple(sorted(
                tuple(sorted(r.id for x in g for r in units[x])) for g in groups
            )))
            return
        for j in range(len(groups)):
            saved = boxes[j]
            groups[j].append(u)
            boxes[j] = _merge(saved, unit_boxes[u])
            if not clash(j):
                walk(u + 1)
            groups[j].pop()
            boxes[j] = saved
        if len(groups) < max_groups:
            groups.append([u])
            boxes.append(unit_boxes[u])
            if not clash(len(groups) - 1):
                walk(u + 1)
            groups.pop()
            boxes.pop()

    walk(0)
    return tuple(sorted(found))


def enumerate_global_partitions(
    table: MicrodataTable,
    l: int,
    limit: Optional[int] = None,
    scheme: RecodingScheme = RecodingScheme.GLOBAL,
) -> Iterator[Partition]:
    """
    Every partition whose groups are l-diverse and satisfy the recoding
    scheme, in sorted canonical-form order.

    Raises:
        EnumerationLimitError: when the table exceeds `limit` records
    """
    limit = settings.partition_limit if limit is None else limit
    if len(table) > limit:
        raise EnumerationLimitError("records for partition search", len(table), limit)
    if not len(table) or not is_l_eligible(table, l):
        return iter(())
    keys = tuple(r.key for r in table.records)
    shapes = _structural_partitions(keys, len(table) // l, scheme)
    by_id = table.by_id

    def diverse(ids: tuple[str, ...]) -> bool:
        counts = Counter(by_id[i].sensitive for i in ids)
        return l * max(counts.values()) <= len(ids)

    return (
        Partition.from_id_sets(table, shape)
        for shape in shapes
        if all(diverse(ids) for ids in shape)
    )


def opt_gen_partition(table: MicrodataTable, l: int, limit: Optional[int] = None) -> Optional[Partition]:
    """Discernability-minimal global-recoding partition; ties by smallest canonical form."""
    best = None
    for p in enumerate_global_partitions(table, l, limit):
        key = (discernability(p), p.canonical_form())
        if best is None or key < best[0]:
            best = (key, p)
    return None if best is None else best[1]


def opt_gen(
    table: MicrodataTable,
    l: int,
    limit: Optional[int] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
) -> Optional[AnonymizedTable]:
    """Exhaustive Opt-Gen; None when no valid partition exists."""
    partition = opt_gen_partition(table, l, limit)
    if partition is None:
        return None
    logger.debug(f"Opt-Gen: discernability {discernability(partition)} over {len(partition)} groups")
    return anonymize(partition, fn, table.schema)


# ─── Minimality ───

def consistent_partitions(source: MicrodataTable, published: AnonymizedTable) -> list[Partition]:
    """Partitions of `source` that decide exactly `published`."""
    if published.size != len(source):
        return []
    sensitive = {r.id: r.sensitive for r in source.records}
    seen, out = set(), []
    for seating in groupings_for(published, [r.key for r in source.records], sensitive):
        p = Partition.from_id_sets(source, seating)
        key = p.canonical_form()
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


def satisfies_scheme(partition: Partition, scheme: RecodingScheme) -> bool:
    """Identical-QI and disjoint-MBR conditions of global recoding."""
    if scheme == RecodingScheme.LOCAL:
        return True
    home: dict[tuple[int, ...], int] = {}
    for j, g in enumerate(partition.groups):
        for r in g.members:
            if home.setdefault(r.qi, j) != j:
                return False
    boxes = [_box(r.qi for r in g.members) for g in partition.groups]
    return not any(boxes_overlap(a, b) for a, b in itertools.combinations(boxes, 2))


def _has_valid_child(partition: Partition, l: int, scheme: RecodingScheme) -> bool:
    others = list(partition.groups)
    for j, g in enumerate(partition.groups):
        if g.size < 2 * l:
            continue
        units = _units(g.members, scheme)
        # fix unit 0 on the left so each unordered split is seen once
        for mask in range(0, 2 ** (len(units) - 1)):
            left = list(units[0])
            right = []
            for b, u in enumerate(units[1:]):
                (left if mask >> b & 1 else right).extend(u)
            if not right:
                continue
            ga, gb = QIGroup(tuple(left)), QIGroup(tuple(right))
            if not (is_l_diverse(ga, l) and is_l_diverse(gb, l)):
                continue
            child = Partition(tuple(others[:j] + [ga, gb] + others[j + 1:]))
            if satisfies_scheme(child, scheme):
                return True
    return False


def is_minimal_generalization(
    source: MicrodataTable,
    published: AnonymizedTable,
    l: int,
    scheme: RecodingScheme = RecodingScheme.GLOBAL,
) -> bool:
    """
    True iff some partition of `source` deciding `published` is a valid
    l-diverse partition under `scheme` and none of its children is.

    Raises:
        InconsistentPublicationError: when no partition of `source` decides `published`
    """
    candidates = consistent_partitions(source, published)
    if not candidates:
        raise InconsistentPublicationError("published table is not a generalization of the source")
    for p in candidates:
        if not all(is_l_diverse(g, l) for g in p.groups) or not satisfies_scheme(p, scheme):
            continue
        if not _has_valid_child(p, l, scheme):
            return True
    return False


# ─── k-Anonymous Partitioning & Mondrian ───

def k_anon_partition(table: MicrodataTable, k: int, metric: Optional[PenaltyMetric] = None) -> Partition:
    """
    Greedy recursive splitting with Tailor's ordered-cut search, both sides
    holding at least k records.

    Raises:
        InfeasibleError: when the table has fewer than k records
    """
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if len(table) < k or not len(table):
        raise InfeasibleError(f"cannot build {k}-anonymous groups from {len(table)} records")
    metric = metric or PerimeterMetric(table.schema)
    qi = table.qi_matrix
    queue: deque[np.ndarray] = deque([np.arange(len(table))])
    final = []
    while queue:
        idx = queue.popleft()
        choice = best_split(qi[idx], idx, metric, k)
        if choice is None:
            final.append(idx)
            continue
        ordered = idx[choice.order]
        queue.append(np.sort(ordered[: choice.split_size]))
        queue.append(np.sort(ordered[choice.split_size:]))
    records = table.records
    return Partition(tuple(QIGroup(tuple(records[i] for i in idx)) for idx in final))


def mondrian_partition(table: MicrodataTable, l: int) -> Optional[Partition]:
    """
    Median splits on the widest normalized dimension first, falling back to
    narrower ones; a split is kept only when both halves are l-diverse.
    """
    if not is_l_eligible(table, l):
        return None
    if not len(table):
        return Partition(())
    metric = PerimeterMetric(table.schema)
    weights = np.array([metric.scale // a.width if a.width else 0 for a in table.schema.qi_attributes], dtype=object)
    qi = table.qi_matrix
    codes = table.sensitive_codes
    n_values = len(table.schema.sensitive_values)

    def diverse(idx: np.ndarray) -> bool:
        return l * int(np.bincount(codes[idx], minlength=n_values).max()) <= len(idx)

    queue: deque[np.ndarray] = deque([np.arange(len(table))])
    final = []
    while queue:
        idx = queue.popleft()
        sub = qi[idx]
        spread = (sub.max(axis=0) - sub.min(axis=0)).astype(object) * weights
        dims = sorted((d for d in range(sub.shape[1]) if spread[d] > 0), key=lambda d: (-spread[d], d))
        for dim in dims:
            order = np.lexsort((idx, sub[:, dim]))
            half = len(idx) // 2
            left, right = np.sort(idx[order[:half]]), np.sort(idx[order[half:]])
            if len(left) and diverse(left) and diverse(right):
                queue.append(left)
                queue.append(right)
                break
        else:
            final.append(idx)
    records = table.records
    logger.info(f"Mondrian: {len(final)} groups for n={len(table)}, l={l}")
    return Partition(tuple(QIGroup(tuple(records[i] for i in idx)) for idx in final))


def mondrian_lite(
    table: MicrodataTable,
    l: int,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
) -> Optional[AnonymizedTable]:
    """Mondrian-style baseline; None when the table is not l-eligible."""
    partition = mondrian_partition(table, l)
    if partition is None:
        return None
    return anonymize(partition, fn, table.schema)


# ─── Mask ───

def violates(counts: Counter, size: int, l: int, protected: Iterable[str]) -> bool:
    """Some protected value appears more than size / l times."""
    return any(l * counts.get(v, 0) > size for v in protected)


def classify_groups(partition: Partition, l: int, protected: Iterable[str]) -> tuple[list[QIGroup], list[QIGroup]]:
    """(P_1, P_2): groups that violate the protected-value bound, and the rest."""
    protected = frozenset(protected)
    p1, p2 = [], []
    for g in partition.groups:
        (p1 if violates(g.sensitive_counts, g.size, l, protected) else p2).append(g)
    return p1, p2


def apportion(source: Counter, size: int, l: int, protected: Iterable[str]) -> Counter:
    """
    Copy a sensitive distribution onto a group of `size` records.

    Equal sizes copy exactly. Otherwise largest-remainder rounding, with
    remainder units never pushing a protected value past floor(size / l).

    Raises:
        UnmaskableError: when the rounding cannot respect that cap
    """
    total = sum(source.values())
    if total == size:
        return Counter(source)
    protected = frozenset(protected)
    cap = size // l
    quotas = {v: Fraction(c * size, total) for v, c in source.items() if c}
    out = Counter({v: int(q) for v, q in quotas.items()})
    left = size - sum(out.values())
    ranked = sorted(quotas, key=lambda v: (-(quotas[v] - int(quotas[v])), v))
    for v in ranked:
        if left == 0:
            break
        if v in protected and out[v] + 1 > cap:
            continue
        out[v] += 1
        left -= 1
    if left or violates(out, size, l, protected):
        raise UnmaskableError(f"cannot copy distribution {dict(source)} onto {size} records")
    return +out


def donor_options(sources: Sequence[Counter], size: int, l: int, protected: Iterable[str]) -> list[Counter]:
    """
    Distributions Mask may copy onto a violating group of `size` records.

    One entry per P_2 group whose distribution apportions onto `size`
    records. When no single group fits, the pooled P_2 distribution is the
    only option.

    Raises:
        UnmaskableError: when not even the pooled distribution fits
    """
    protected = frozenset(protected)
    options = []
    for source in sources:
        try:
            options.append(apportion(source, size, l, protected))
        except UnmaskableError:
            continue
    if options:
        return options
    pooled = sum(sources, Counter())
    logger.debug(f"no single donor fits {size} records; pooling {len(sources)} groups")
    return [apportion(pooled, size, l, protected)]


def mask(
    table: MicrodataTable,
    k: int,
    l: int,
    protected: Iterable[str],
    rng=None,
    partitioner: Optional[Partitioner] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
) -> AnonymizedTable:
    """
    Run Mask.

    Args:
        table: Microdata to anonymize
        k: Minimum group size of the k-anonymous partition (k >= l)
        l: Bound applied to protected values
        protected: The value set V
        rng: numpy Generator or seed for the two random choices
        partitioner: (table, k) -> Partition; k_anon_partition by default

    Returns:
        Published table decided by the modified partition

    Raises:
        UnmaskableError: violating groups exist but every group violates, or
            no donor distribution fits a violating group
    """
    if k < l:
        raise ValueError(f"Mask needs k >= l, got k={k}, l={l}")
    protected = frozenset(protected)
    rng = np.random.default_rng(rng)
    partition = (partitioner or k_anon_partition)(table, k)
    if any(g.size < k for g in partition.groups):
        raise InfeasibleError(f"partitioner returned a group smaller than k={k}")
    p1, p2 = classify_groups(partition, l, protected)
    if p1 and not p2:
        raise UnmaskableError("every group violates the protected-value bound")
    sources = [g.sensitive_counts for g in p2]
    options: dict[int, list[Counter]] = {}
    modified = []
    for g in p1:
        if g.size not in options:
            options[g.size] = donor_options(sources, g.size, l, protected)
        donor = options[g.size][int(rng.integers(len(options[g.size])))]
        values = sorted(donor.elements())
        shuffled = [values[i] for i in rng.permutation(len(values))]
        modified.append(QIGroup(tuple(Record(r.id, r.qi, v) for r, v in zip(g.members, shuffled))))
    logger.info(f"Mask: {len(p1)} of {len(partition)} groups modified")
    return anonymize(Partition(tuple(modified + p2)), fn, table.schema)


def mask_distribution(
    table: MicrodataTable,
    k: int,
    l: int,
    protected: Iterable[str],
    partitioner: Optional[Partitioner] = None,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
    limit: Optional[int] = None,
) -> dict[AnonymizedTable, Fraction]:
    """Exact output distribution of Mask over its donor choices."""
    limit = settings.mask_choice_limit if limit is None else limit
    protected = frozenset(protected)
    partition = (partitioner or k_anon_partition)(table, k)
    p1, p2 = classify_groups(partition, l, protected)
    if p1 and not p2:
        raise UnmaskableError("every group violates the protected-value bound")
    sources = [g.sensitive_counts for g in p2]
    per_group = [donor_options(sources, g.size, l, protected) for g in p1]
    choices = math.prod(len(opts) for opts in per_group)
    if choices > limit:
        raise EnumerationLimitError("Mask donor combinations", choices, limit)
    dist: dict[AnonymizedTable, Fraction] = {}
    weight = Fraction(1, choices)
    for donors in itertools.product(*per_group):
        modified = []
        for g, donor in zip(p1, donors):
            values = sorted(donor.elements())
            # the output does not depend on which record gets which value
            modified.append(QIGroup(tuple(Record(r.id, r.qi, v) for r, v in zip(g.members, values))))
        out = anonymize(Partition(tuple(modified + p2)), fn, table.schema)
        dist[out] = dist.get(out, Fraction(0)) + weight
    return dist


@dataclass
class ConsistencyAttackResult:
    """Instances consistent with a Mask publication, counted with equal weight."""
    instance_count: int
    posteriors: dict[str, dict[str, Fraction]] = field(default_factory=dict)

    def posterior(self, individual: str, value: str) -> Fraction:
        return self.posteriors.get(individual, {}).get(value, Fraction(0))

    def risk(self, individual: str) -> Fraction:
        return max(self.posteriors.get(individual, {}).values(), default=Fraction(0))


def distinct_permutations(values: Sequence[str]) -> Iterator[tuple[str, ...]]:
    """Distinct orderings of a multiset, in lexicographic order."""
    counts = Counter(values)
    keys = sorted(counts)
    n = len(values)
    out: list[str] = []

    def walk() -> Iterator[tuple[str, ...]]:
        if len(out) == n:
            yield tuple(out)
            return
        for v in keys:
            if counts[v]:
                counts[v] -= 1
                out.append(v)
                yield from walk()
                out.pop()
                counts[v] += 1

    yield from walk()


def mask_consistency_attack(
    published: AnonymizedTable,
    external: ExternalSource,
    k: int,
    l: int,
    protected: Iterable[str],
    universe: Optional[Sequence[str]] = None,
) -> ConsistencyAttackResult:
    """
    Posterior of every (individual, value) given that Mask produced `published`.

    An instance is consistent when some seating of external individuals into
    the published groups, some set of modified groups with valid donors, and
    some original values for the modified groups yield `published`.
    """
    protected = frozenset(protected)
    universe = tuple(universe or external.schema.sensitive_values)
    groups = list(published.groups)
    if any(g.size < k for g in groups):
        return ConsistencyAttackResult(0)
    published_counts = [Counter(g.sensitive) for g in groups]

    # ── Which groups may have been modified, and what they looked like before ──
    plans = []
    for flags in itertools.product((False, True), repeat=len(groups)):
        kept = [j for j, f in enumerate(flags) if not f]
        changed = [j for j, f in enumerate(flags) if f]
        if any(violates(published_counts[j], groups[j].size, l, protected) for j in kept):
            continue
        if changed and not kept:
            continue
        sources = [published_counts[d] for d in kept]
        ok = True
        for j in changed:
            try:
                donors = donor_options(sources, groups[j].size, l, protected)
            except UnmaskableError:
                donors = []
            if published_counts[j] not in donors:
                ok = False
                break
        if ok:
            plans.append(flags)

    instances: set[tuple[tuple[str, str], ...]] = set()
    entries = list(external.entries)
    for seating in groupings_for(published, entries):
        for flags in plans:
            per_group = []
            for j, ids in enumerate(seating):
                if flags[j]:
                    options = [
                        vals for vals in itertools.product(universe, repeat=len(ids))
                        if violates(Counter(vals), len(ids), l, protected)
                    ]
                else:
                    options = list(distinct_permutations(groups[j].sensitive))
                per_group.append([tuple(zip(ids, vals)) for vals in options])
            for combo in itertools.product(*per_group):
                instances.add(tuple(sorted(pair for part in combo for pair in part)))

    total = len(instances)
    result = ConsistencyAttackResult(total)
    if not total:
        return result
    tallies: dict[str, Counter] = {}
    for inst in instances:
        for ident, value in inst:
            tallies.setdefault(ident, Counter())[value] += 1
    for ident in external.ids:
        counts = tallies.get(ident, Counter())
        result.posteriors[ident] = {v: Fraction(counts[v], total) for v in universe}
    logger.info(f"Mask attack: {total} consistent instances")
    return result
