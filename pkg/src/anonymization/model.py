"""
Glassbox — Data Model
Schemas, microdata tables, QI-groups, partitions, buckets and the structural
predicates (l-diversity, eligibility, isomorphism, symmetry) built on them.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from src.anonymization.errors import DuplicateIdError, SchemaError

logger = logging.getLogger(__name__)


# ─── Schema ───

@dataclass(frozen=True)
class QIAttribute:
    """An integer-coded quasi-identifier with a closed domain [lo, hi]."""
    name: str
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise SchemaError(f"QI attribute '{self.name}' has lo={self.lo} > hi={self.hi}")

    @property
    def width(self) -> int:
        """Normalization denominator max - min of the domain."""
        return self.hi - self.lo

    @property
    def cardinality(self) -> int:
        """Number of integer points in the domain."""
        return self.hi - self.lo + 1


@dataclass(frozen=True)
class AttributeSchema:
    """
    Layout of a microdata table: identifier, d QI attributes, one sensitive attribute.

    The sensitive universe is stored sorted lexicographically; that order is
    the total order used for every sensitive-value tie-break.
    """
    qi_attributes: tuple[QIAttribute, ...]
    sensitive_name: str
    sensitive_values: tuple[str, ...]
    id_name: str = "Name"

    def __post_init__(self):
        object.__setattr__(self, "qi_attributes", tuple(self.qi_attributes))
        object.__setattr__(self, "sensitive_values", tuple(sorted(set(self.sensitive_values))))
        if not self.qi_attributes:
            raise SchemaError("schema needs at least one QI attribute")
        if not self.sensitive_values:
            raise SchemaError("sensitive value universe is empty")
        names = [a.name for a in self.qi_attributes] + [self.sensitive_name, self.id_name]
        if len(set(names)) != len(names):
            raise SchemaError(f"column names must be distinct: {names}")

    @property
    def d(self) -> int:
        return len(self.qi_attributes)

    @property
    def qi_names(self) -> list[str]:
        return [a.name for a in self.qi_attributes]

    def qi_index(self, name: str) -> int:
        """Position of a QI attribute by name."""
        for i, attr in enumerate(self.qi_attributes):
            if attr.name == name:
                return i
        raise SchemaError(f"unknown QI attribute '{name}'")

    def check_qi(self, qi: Sequence[int], row: Optional[int] = None) -> None:
        """Raise SchemaError if a QI vector has the wrong arity or leaves its domain."""
        if len(qi) != self.d:
            raise SchemaError(f"expected {self.d} QI values, got {len(qi)}", row=row)
        for value, attr in zip(qi, self.qi_attributes):
            if not attr.lo <= value <= attr.hi:
                raise SchemaError(
                    f"value {value} outside domain [{attr.lo}, {attr.hi}]", row=row, column=attr.name
                )

    def with_universe(self, values: Iterable[str]) -> "AttributeSchema":
        """Copy of this schema with a different sensitive universe."""
        return AttributeSchema(self.qi_attributes, self.sensitive_name, tuple(values), self.id_name)


# ─── Records & Tables ───

@dataclass(frozen=True)
class Record:
    """One individual: identifier, QI vector and sensitive value."""
    id: str
    qi: tuple[int, ...]
    sensitive: str

    def __post_init__(self):
        object.__setattr__(self, "qi", tuple(int(v) for v in self.qi))

    @property
    def key(self) -> tuple[str, tuple[int, ...]]:
        """The (id, qi) pair an external source can observe."""
        return (self.id, self.qi)


def _sorted_unique(records: Iterable[Record]) -> tuple[Record, ...]:
    ordered = tuple(sorted(records, key=lambda r: r.id))
    for a, b in zip(ordered, ordered[1:]):
        if a.id == b.id:
            raise DuplicateIdError(f"duplicate identifier '{a.id}'")
    return ordered


@dataclass(frozen=True)
class MicrodataTable:
    """
    The table being anonymized. Records are kept sorted by identifier, so the
    position of a record doubles as its identifier rank.
    """
    schema: AttributeSchema
    records: tuple[Record, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", _sorted_unique(self.records))
        universe = set(self.schema.sensitive_values)
        for i, rec in enumerate(self.records):
            self.schema.check_qi(rec.qi, row=i)
            if rec.sensitive not in universe:
                raise SchemaError(
                    f"sensitive value '{rec.sensitive}' not in the declared universe",
                    row=i, column=self.schema.sensitive_name,
                )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)

    @cached_property
    def by_id(self) -> dict[str, Record]:
        return {r.id: r for r in self.records}

    @cached_property
    def sensitive_counts(self) -> Counter:
        return Counter(r.sensitive for r in self.records)

    @cached_property
    def qi_matrix(self) -> np.ndarray:
        """n x d int64 matrix of QI values in identifier order."""
        if not self.records:
            return np.zeros((0, self.schema.d), dtype=np.int64)
        return np.array([r.qi for r in self.records], dtype=np.int64)

    @cached_property
    def sensitive_codes(self) -> np.ndarray:
        """Index of each record's value in the sorted sensitive universe."""
        lookup = {v: i for i, v in enumerate(self.schema.sensitive_values)}
        return np.array([lookup[r.sensitive] for r in self.records], dtype=np.int64)

    def subset(self, ids: Iterable[str]) -> "MicrodataTable":
        """Sub-table over the given identifiers, same schema."""
        return MicrodataTable(self.schema, tuple(self.by_id[i] for i in ids))

    def with_sensitive(self, assignment: Mapping[str, str]) -> "MicrodataTable":
        """Copy with some sensitive values replaced (id -> new value)."""
        return MicrodataTable(
            self.schema,
            tuple(Record(r.id, r.qi, assignment.get(r.id, r.sensitive)) for r in self.records),
        )

    def as_group(self) -> "QIGroup":
        return QIGroup(self.records)

    def project(self) -> "ExternalSource":
        """The (id, qi) projection an adversary could hold as an external source."""
        return ExternalSource(self.schema, tuple(r.key for r in self.records))

    def to_frame(self) -> pd.DataFrame:
        """pandas view with one column per attribute."""
        data = {self.schema.id_name: list(self.ids)}
        for i, name in enumerate(self.schema.qi_names):
            data[name] = self.qi_matrix[:, i] if len(self) else np.zeros(0, dtype=np.int64)
        data[self.schema.sensitive_name] = [r.sensitive for r in self.records]
        return pd.DataFrame(data)


# ─── Groups, Partitions, Buckets ───

@dataclass(frozen=True)
class QIGroup:
    """A non-empty set of records anonymized together."""
    members: tuple[Record, ...]

    def __post_init__(self):
        object.__setattr__(self, "members", _sorted_unique(self.members))
        if not self.members:
            raise SchemaError("a QI-group must have at least one member")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.members)

    @property
    def size(self) -> int:
        return len(self.members)

    @cached_property
    def ids(self) -> frozenset[str]:
        return frozenset(r.id for r in self.members)

    @cached_property
    def id_key(self) -> tuple[str, ...]:
        """Sorted member identifiers; the canonical form of the group."""
        return tuple(r.id for r in self.members)

    @cached_property
    def qi_pairs(self) -> frozenset[tuple[str, tuple[int, ...]]]:
        return frozenset(r.key for r in self.members)

    @cached_property
    def sensitive_counts(self) -> Counter:
        return Counter(r.sensitive for r in self.members)

    @property
    def sensitive_multiset(self) -> tuple[str, ...]:
        return tuple(sorted(r.sensitive for r in self.members))

    @property
    def max_multiplicity(self) -> int:
        return max(self.sensitive_counts.values())

    @cached_property
    def qi_matrix(self) -> np.ndarray:
        return np.array([r.qi for r in self.members], dtype=np.int64)


@dataclass(frozen=True)
class Partition:
    """Pairwise-disjoint QI-groups."""
    groups: tuple[QIGroup, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        seen: set[str] = set()
        for g in self.groups:
            if seen & g.ids:
                raise SchemaError(f"partition groups overlap on {sorted(seen & g.ids)}")
            seen |= g.ids

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self) -> Iterator[QIGroup]:
        return iter(self.groups)

    @cached_property
    def ids(self) -> frozenset[str]:
        return frozenset().union(*(g.ids for g in self.groups)) if self.groups else frozenset()

    @property
    def sizes(self) -> list[int]:
        return [g.size for g in self.groups]

    def canonical_form(self) -> tuple[tuple[str, ...], ...]:
        """Sorted list of sorted member-id lists."""
        return tuple(sorted(g.id_key for g in self.groups))

    def covers(self, table: MicrodataTable) -> bool:
        """True iff the groups hold exactly the table's records."""
        mine = {r for g in self.groups for r in g.members}
        return len(mine) == len(table) and mine == set(table.records)

    @classmethod
    def from_id_sets(cls, table: MicrodataTable, id_sets: Iterable[Iterable[str]]) -> "Partition":
        return cls(tuple(QIGroup(tuple(table.by_id[i] for i in ids)) for ids in id_sets))


@dataclass(frozen=True)
class Bucket:
    """
    A QI-group organised in equal-size columns, one per sensitive value.

    `columns` holds (value, records) pairs sorted by value; the values form
    the bucket's signature.
    """
    columns: tuple[tuple[str, tuple[Record, ...]], ...]

    def __post_init__(self):
        cols = tuple(sorted((v, _sorted_unique(recs)) for v, recs in self.columns))
        object.__setattr__(self, "columns", cols)
        if not cols:
            raise SchemaError("a bucket needs at least one column")
        values = [v for v, _ in cols]
        if len(set(values)) != len(values):
            raise SchemaError(f"bucket repeats a column value: {values}")
        sizes = {len(recs) for _, recs in cols}
        if len(sizes) != 1 or 0 in sizes:
            raise SchemaError(f"bucket columns must be non-empty and equal-sized, got {sorted(sizes)}")
        for value, recs in cols:
            if any(r.sensitive != value for r in recs):
                raise SchemaError(f"column '{value}' holds a record with another sensitive value")
        _sorted_unique(r for _, recs in cols for r in recs)

    @classmethod
    def from_columns(cls, columns: Mapping[str, Iterable[Record]]) -> "Bucket":
        return cls(tuple((v, tuple(recs)) for v, recs in columns.items()))

    @classmethod
    def from_records(cls, records: Iterable[Record]) -> "Bucket":
        """Build a bucket by grouping records on their sensitive value."""
        cols: dict[str, list[Record]] = {}
        for r in records:
            cols.setdefault(r.sensitive, []).append(r)
        return cls.from_columns(cols)

    @property
    def signature(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.columns)

    @property
    def x(self) -> int:
        """Number of columns."""
        return len(self.columns)

    @property
    def alpha(self) -> int:
        """Records per column."""
        return len(self.columns[0][1])

    @property
    def size(self) -> int:
        return self.x * self.alpha

    def column(self, value: str) -> tuple[Record, ...]:
        for v, recs in self.columns:
            if v == value:
                return recs
        raise KeyError(value)

    def column_keys(self) -> list[frozenset]:
        """Per column, the set of (id, qi) pairs it holds."""
        return [frozenset(r.key for r in recs) for _, recs in self.columns]

    def as_group(self) -> QIGroup:
        return QIGroup(tuple(r for _, recs in self.columns for r in recs))

    @property
    def divisible(self) -> bool:
        return self.alpha >= 2


@dataclass(frozen=True)
class BucketPartition:
    """Pairwise-disjoint buckets."""
    buckets: tuple[Bucket, ...]

    def __post_init__(self):
        object.__setattr__(self, "buckets", tuple(self.buckets))
        Partition(tuple(b.as_group() for b in self.buckets))

    def __len__(self) -> int:
        return len(self.buckets)

    def __iter__(self) -> Iterator[Bucket]:
        return iter(self.buckets)

    def as_partition(self) -> Partition:
        return Partition(tuple(b.as_group() for b in self.buckets))

    def canonical_form(self) -> tuple[tuple[tuple[str, tuple[str, ...]], ...], ...]:
        """Sorted buckets, each as sorted (value, member ids) columns."""
        return tuple(sorted(
            tuple((v, tuple(r.id for r in recs)) for v, recs in b.columns) for b in self.buckets
        ))


@dataclass(frozen=True)
class ExternalSource:
    """Identifiers and QI values known to the adversary; a superset of the table's individuals."""
    schema: AttributeSchema
    entries: tuple[tuple[str, tuple[int, ...]], ...]
    by_id: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        entries = tuple(sorted((str(i), tuple(int(v) for v in qi)) for i, qi in self.entries))
        for a, b in zip(entries, entries[1:]):
            if a[0] == b[0]:
                raise DuplicateIdError(f"duplicate identifier '{a[0]}' in external source")
        for row, (_, qi) in enumerate(entries):
            self.schema.check_qi(qi, row=row)
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "by_id", dict(entries))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.entries]

    def covers(self, table: MicrodataTable) -> bool:
        """True iff every individual of the table appears here with the same QI values."""
        return all(self.by_id.get(r.id) == r.qi for r in table.records)


# ─── Predicates ───

def _check_l(l: int) -> None:
    if l < 1:
        raise ValueError(f"l must be a positive integer, got {l}")


def is_l_diverse(group: QIGroup, l: int) -> bool:
    """At most |G|/l members share one sensitive value (compared as l * count <= |G|)."""
    _check_l(l)
    return l * group.max_multiplicity <= group.size


def is_l_eligible(table: MicrodataTable, l: int) -> bool:
    """The whole table satisfies the l-diversity multiplicity bound."""
    _check_l(l)
    if not len(table):
        return True
    return l * max(table.sensitive_counts.values()) <= len(table)


def are_isomorphic(g1: QIGroup, g2: QIGroup) -> bool:
    """Same (id, qi) pairs and the same sensitive multiset."""
    return g1.qi_pairs == g2.qi_pairs and g1.sensitive_counts == g2.sensitive_counts


def are_isomorphic_partitions(p1: Partition, p2: Partition) -> bool:
    # groups are id-disjoint, so the match is forced by the member-id set
    if len(p1) != len(p2):
        return False
    index = {g.ids: g for g in p2.groups}
    return all(g.ids in index and are_isomorphic(g, index[g.ids]) for g in p1.groups)


def are_symmetric(b1: Bucket, b2: Bucket) -> bool:
    """Same signature and the columns hold the same individual sets up to relabeling."""
    if set(b1.signature) != set(b2.signature):
        return False
    return Counter(b1.column_keys()) == Counter(b2.column_keys())


def are_symmetric_partitions(u1: BucketPartition, u2: BucketPartition) -> bool:
    """Every bucket of u1 is symmetric to a bucket of u2 over the same individuals, and vice versa."""
    if len(u1) != len(u2):
        return False
    index = {b.as_group().ids: b for b in u2.buckets}
    for b in u1.buckets:
        other = index.get(b.as_group().ids)
        if other is None or not are_symmetric(b, other):
            return False
    return True


def multinomial(counts: Iterable[int]) -> int:
    """(sum k_i)! / prod(k_i!)."""
    total, result = 0, 1
    for k in counts:
        total += k
        result *= math.comb(total, k)
    return result


def count_isomorphic_groups(group: QIGroup) -> int:
    """Number of distinct sensitive assignments over the group's individuals."""
    return multinomial(group.sensitive_counts.values())


def count_symmetric_buckets(bucket: Bucket) -> int:
    """x! column-to-value bijections."""
    return math.factorial(bucket.x)
