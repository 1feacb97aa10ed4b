"""
Glassbox — Recoding
Anonymization functions (MBR generalization, anatomy) and the information-loss
metrics used to pick cuts and report utility.
"""

import itertools
import logging
import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from src.anonymization.errors import SchemaError
from src.anonymization.model import AttributeSchema, MicrodataTable, Partition, QIGroup

logger = logging.getLogger(__name__)

Interval = tuple[int, int]


class AnonymizationFunction(str, Enum):
    """Anonymization functions available to every algorithm."""
    MBR = "generalization"
    ANATOMY = "anatomy"


# ─── Output Types ───

@dataclass(frozen=True)
class GeneralizedRow:
    """One published tuple: closed interval per QI attribute plus the exact sensitive value."""
    intervals: tuple[Interval, ...]
    sensitive: str

    def __post_init__(self):
        for lo, hi in self.intervals:
            if lo > hi:
                raise SchemaError(f"interval [{lo}, {hi}] is empty")


@dataclass(frozen=True, order=True)
class GeneralizedGroup:
    """G*: rows sharing one interval vector, sensitive values kept as a sorted multiset."""
    intervals: tuple[Interval, ...]
    sensitive: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple((int(lo), int(hi)) for lo, hi in self.intervals))
        object.__setattr__(self, "sensitive", tuple(sorted(self.sensitive)))

    @classmethod
    def of(cls, group: QIGroup) -> "GeneralizedGroup":
        q = group.qi_matrix
        lo, hi = q.min(axis=0), q.max(axis=0)
        return cls(tuple(zip(lo.tolist(), hi.tolist())), group.sensitive_multiset)

    @property
    def size(self) -> int:
        return len(self.sensitive)

    def contains(self, qi: tuple[int, ...]) -> bool:
        return all(lo <= v <= hi for v, (lo, hi) in zip(qi, self.intervals))

    def rows(self) -> list[GeneralizedRow]:
        return [GeneralizedRow(self.intervals, v) for v in self.sensitive]


@dataclass(frozen=True, order=True)
class AnatomyGroup:
    """One anatomy group: exact QI vectors and the sensitive multiset, linked only by the group id."""
    qi: tuple[tuple[int, ...], ...]
    sensitive: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "qi", tuple(sorted(tuple(int(v) for v in q) for q in self.qi)))
        object.__setattr__(self, "sensitive", tuple(sorted(self.sensitive)))
        if len(self.qi) != len(self.sensitive):
            raise SchemaError("anatomy group has unequal QI and sensitive row counts")

    @classmethod
    def of(cls, group: QIGroup) -> "AnatomyGroup":
        return cls(tuple(r.qi for r in group.members), group.sensitive_multiset)

    @property
    def size(self) -> int:
        return len(self.sensitive)


class _Published:
    """Behaviour shared by both published-table variants."""

    groups: tuple

    @property
    def size(self) -> int:
        return sum(g.size for g in self.groups)

    @property
    def group_sizes(self) -> list[int]:
        return [g.size for g in self.groups]

    @property
    def sensitive_counts(self) -> Counter:
        return Counter(v for g in self.groups for v in g.sensitive)

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True)
class Generalization(_Published):
    """
    MBR-generalized table. Groups are sorted canonically so equality is
    multiset equality. Without boundaries, rows that share an interval vector
    are merged into one group, which is all a reader of the bare rows can see.
    """
    groups: tuple[GeneralizedGroup, ...]
    has_boundaries: bool = True
    schema: Optional[AttributeSchema] = field(default=None, compare=False, hash=False, repr=False)

    kind = AnonymizationFunction.MBR

    def __post_init__(self):
        groups = tuple(self.groups)
        if not self.has_boundaries:
            merged: dict[tuple, list[str]] = {}
            for g in groups:
                merged.setdefault(g.intervals, []).extend(g.sensitive)
            groups = tuple(GeneralizedGroup(iv, tuple(vals)) for iv, vals in merged.items())
        object.__setattr__(self, "groups", tuple(sorted(groups)))

    @property
    def rows(self) -> list[GeneralizedRow]:
        return [row for g in self.groups for row in g.rows()]

    def without_boundaries(self) -> "Generalization":
        return Generalization(self.groups, has_boundaries=False, schema=self.schema)

    def same_rows(self, other: "AnonymizedTable") -> bool:
        """Row-multiset equality, ignoring group boundaries."""
        if not isinstance(other, Generalization):
            return False
        return self.without_boundaries().groups == other.without_boundaries().groups

    def matches(self, candidate: "AnonymizedTable") -> bool:
        """Would a reader of this table accept `candidate` as the same publication?"""
        if self.has_boundaries:
            return candidate == self
        return self.same_rows(candidate)


@dataclass(frozen=True)
class Anatomy(_Published):
    """QI table plus sensitive table, linked by group id (1-based, canonical group order)."""
    groups: tuple[AnatomyGroup, ...]
    schema: Optional[AttributeSchema] = field(default=None, compare=False, hash=False, repr=False)

    kind = AnonymizationFunction.ANATOMY
    has_boundaries = True

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(sorted(self.groups)))

    @property
    def qi_rows(self) -> list[tuple[tuple[int, ...], int]]:
        return [(q, gid) for gid, g in enumerate(self.groups, start=1) for q in g.qi]

    @property
    def sensitive_rows(self) -> list[tuple[int, str]]:
        return [(gid, v) for gid, g in enumerate(self.groups, start=1) for v in g.sensitive]

    def matches(self, candidate: "AnonymizedTable") -> bool:
        return candidate == self


AnonymizedTable = Union[Generalization, Anatomy]


# ─── Anonymization Functions ───

def mbr_generalize(group: QIGroup) -> list[GeneralizedRow]:
    """Replace every QI value by the group's [min, max] on that attribute."""
    return GeneralizedGroup.of(group).rows()


def anatomize(group: QIGroup, gid: int) -> tuple[list[tuple[tuple[int, ...], int]], list[tuple[int, str]]]:
    """Split a group into QI rows and sensitive rows tagged with `gid`."""
    ag = AnatomyGroup.of(group)
    return [(q, gid) for q in ag.qi], [(gid, v) for v in ag.sensitive]


def anonymize(
    partition: Partition,
    fn: AnonymizationFunction = AnonymizationFunction.MBR,
    schema: Optional[AttributeSchema] = None,
) -> AnonymizedTable:
    """Union of per-group outputs, canonically ordered."""
    if fn == AnonymizationFunction.ANATOMY:
        return Anatomy(tuple(AnatomyGroup.of(g) for g in partition.groups), schema=schema)
    return Generalization(tuple(GeneralizedGroup.of(g) for g in partition.groups), schema=schema)


# ─── Penalty Metrics ───

def perimeter(group: QIGroup, schema: AttributeSchema) -> Fraction:
    """h_p(G) = |G| * sum_i extent_i / domain_width_i."""
    q = group.qi_matrix
    extents = (q.max(axis=0) - q.min(axis=0)).tolist()
    total = Fraction(0)
    for extent, attr in zip(extents, schema.qi_attributes):
        if attr.width == 0:
            if extent > 0:
                raise SchemaError(f"attribute '{attr.name}' has a degenerate domain but extent {extent}")
            continue
        total += Fraction(int(extent), attr.width)
    return group.size * total


def discernability(partition: Partition) -> int:
    """sum |G|^2 over the partition."""
    return sum(g.size ** 2 for g in partition.groups)


class PenaltyMetric(ABC):
    """
    A superadditive, sensitive-blind group cost.

    Besides the exact per-group value, each metric exposes `scaled_costs`, an
    integer-valued vectorised form equal to `scale` times the exact cost, so
    split searches can compare candidates without rounding.
    """

    name: str = "penalty"

    @abstractmethod
    def group_cost(self, group: QIGroup) -> Fraction:
        """Exact cost of one group."""

    @abstractmethod
    def scaled_costs(self, sizes: np.ndarray, extents: np.ndarray) -> np.ndarray:
        """Costs for groups of the given sizes (k,) and QI extents (k, d), times `scale`."""

    @property
    @abstractmethod
    def scale(self) -> int:
        """Positive constant relating scaled to exact costs."""

    def partition_cost(self, groups) -> Fraction:
        return sum((self.group_cost(g) for g in groups), Fraction(0))

    def unscale(self, value) -> Fraction:
        return Fraction(int(value), self.scale)


class PerimeterMetric(PenaltyMetric):
    """Size-weighted normalized extent sum, with denominators from the schema domains."""

    name = "perimeter"

    def __init__(self, schema: AttributeSchema):
        self.schema = schema
        widths = [a.width for a in schema.qi_attributes]
        nonzero = [w for w in widths if w > 0]
        self._scale = math.lcm(*nonzero) if nonzero else 1
        weights = [self._scale // w if w > 0 else 0 for w in widths]
        # |G| * extent * weight summed over d attributes must stay inside int64
        bound = max(1, sum(w * a.width for w, a in zip(weights, schema.qi_attributes)))
        self._dtype = np.int64 if bound < 2 ** 62 // (10 ** 7) else object
        self._weights = np.array(weights, dtype=self._dtype)

    @property
    def scale(self) -> int:
        return self._scale

    def group_cost(self, group: QIGroup) -> Fraction:
        return perimeter(group, self.schema)

    def scaled_costs(self, sizes: np.ndarray, extents: np.ndarray) -> np.ndarray:
        ext = extents.astype(self._dtype)
        return sizes.astype(self._dtype) * (ext @ self._weights)


class DiscernabilityMetric(PenaltyMetric):
    """h_d(G) = |G|^2; ignores QI extents entirely."""

    name = "discernability"

    @property
    def scale(self) -> int:
        return 1

    def group_cost(self, group: QIGroup) -> Fraction:
        return Fraction(group.size ** 2)

    def scaled_costs(self, sizes: np.ndarray, extents: np.ndarray) -> np.ndarray:
        s = sizes.astype(np.int64)
        return s * s


def total_perimeter(partition: Partition, schema: AttributeSchema) -> Fraction:
    return sum((perimeter(g, schema) for g in partition.groups), Fraction(0))


# ─── Correlation ───

def correlation_ratio(table: MicrodataTable, qi_attr: str, grouping_attr: str) -> float:
    """
    eta = sqrt(between-group variance / total variance) of `qi_attr`, grouped
    by `grouping_attr` (a QI name or the sensitive attribute name).
    """
    if not len(table):
        raise ValueError("correlation ratio needs a non-empty table")
    df = table.to_frame()
    if qi_attr not in df.columns or grouping_attr not in df.columns:
        raise SchemaError(f"unknown attribute in ({qi_attr!r}, {grouping_attr!r})")
    values = df[qi_attr].astype(float)
    mean = values.mean()
    total = float(((values - mean) ** 2).sum())
    if total == 0.0:
        return 0.0
    stats = values.groupby(df[grouping_attr]).agg(["mean", "count"])
    between = float((stats["count"] * (stats["mean"] - mean) ** 2).sum())
    return math.sqrt(min(1.0, between / total))


# ─── Group Matching ───

def groupings_for(
    published: AnonymizedTable,
    entries: Sequence[tuple[str, tuple[int, ...]]],
    sensitive: Optional[Mapping[str, str]] = None,
) -> Iterator[tuple[tuple[str, ...], ...]]:
    """
    Ways to seat individuals into the published groups.

    Yields one tuple of member-id tuples per published group (in the table's
    group order) such that every generalized group's box is exactly the MBR
    of its members, or every anatomy group's QI multiset is exactly theirs.
    When `sensitive` (id -> value) is given, each group's sensitive multiset
    must match as well.
    """
    groups = list(published.groups)
    if published.size > len(entries):
        return
    anatomy = isinstance(published, Anatomy)

    def fits(g, qi) -> bool:
        return qi in g.qi if anatomy else g.contains(qi)

    candidates = []
    for g in groups:
        allowed = Counter(g.sensitive)
        cands = [
            (i, qi) for i, qi in entries
            if fits(g, qi) and (sensitive is None or allowed[sensitive.get(i)] > 0)
        ]
        candidates.append(cands)
    # most constrained group first
    visit = sorted(range(len(groups)), key=lambda j: (len(candidates[j]), j))

    def exact(g, chosen) -> bool:
        qis = [qi for _, qi in chosen]
        if anatomy:
            if tuple(sorted(qis)) != g.qi:
                return False
        else:
            for dim, (lo, hi) in enumerate(g.intervals):
                col = [q[dim] for q in qis]
                if min(col) != lo or max(col) != hi:
                    return False
        if sensitive is not None:
            return tuple(sorted(sensitive[i] for i, _ in chosen)) == g.sensitive
        return True

    seats: dict[int, tuple[str, ...]] = {}

    def walk(pos: int, used: frozenset) -> Iterator[tuple[tuple[str, ...], ...]]:
        if pos == len(visit):
            yield tuple(seats[j] for j in range(len(groups)))
            return
        j = visit[pos]
        g = groups[j]
        pool = [c for c in candidates[j] if c[0] not in used]
        for chosen in itertools.combinations(pool, g.size):
            if exact(g, chosen):
                seats[j] = tuple(i for i, _ in chosen)
                yield from walk(pos + 1, used | set(seats[j]))
        seats.pop(j, None)

    yield from walk(0, frozenset())
