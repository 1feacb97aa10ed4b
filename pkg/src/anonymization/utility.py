"""
Glassbox — Utility
Count-query workloads, exact and estimated answers, and workload error.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from config.settings import settings
from src.anonymization.ace import Seed
from src.anonymization.model import AttributeSchema, MicrodataTable
from src.anonymization.recoding import Anatomy, AnonymizedTable, Interval

logger = logging.getLogger(__name__)


# ─── Queries ───

@dataclass(frozen=True)
class CountQuery:
    """
    SELECT COUNT(*) with one optional closed interval per QI attribute (None
    means Any) and an interval over the sorted sensitive universe, given as
    inclusive value indices.
    """
    qi: tuple[Optional[Interval], ...]
    sensitive: Interval
    universe: tuple[str, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "universe", tuple(self.universe))
        if not self.universe:
            raise ValueError("a count query needs the sorted sensitive universe")
        lo, hi = self.sensitive
        if not 0 <= lo <= hi < len(self.universe):
            raise ValueError(f"sensitive interval {self.sensitive} outside 0..{len(self.universe) - 1}")

    @property
    def qd(self) -> int:
        return 1 + sum(iv is not None for iv in self.qi)

    @property
    def sensitive_values(self) -> frozenset[str]:
        lo, hi = self.sensitive
        return frozenset(self.universe[lo:hi + 1])

    def accepts(self, qi: Sequence[int], value: str) -> bool:
        if value not in self.sensitive_values:
            return False
        return all(iv is None or iv[0] <= x <= iv[1] for x, iv in zip(qi, self.qi))


@dataclass(frozen=True)
class Workload:
    queries: tuple[CountQuery, ...]
    qd: int
    selectivity: float
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.queries)


def coverage(s: float, qd: int, domain: int) -> int:
    """Consecutive domain values covered per predicated attribute: ceil(s^(1/qd) * |domain|)."""
    # tolerance keeps exact products like 0.2 * 10 from rounding up
    return max(1, min(domain, math.ceil(s ** (1.0 / qd) * domain - 1e-9)))


def generate_workload(
    schema: AttributeSchema,
    qd: Optional[int] = None,
    s: Optional[float] = None,
    n_queries: Optional[int] = None,
    rng: Seed = None,
) -> Workload:
    """
    Random count queries: the sensitive attribute plus qd-1 distinct QI
    attributes, each with a uniformly placed interval.

    Args:
        schema: Attribute domains and sensitive universe
        qd: Number of predicated attributes, 2 <= qd <= d+1
        s: Expected selectivity, 0 < s < 1
        n_queries: Workload size
        rng: numpy Generator or seed

    Raises:
        ValueError: when qd or s is out of range
    """
    qd = settings.default_qd if qd is None else qd
    s = settings.default_selectivity if s is None else s
    n_queries = settings.default_queries if n_queries is None else n_queries
    if not 2 <= qd <= schema.d + 1:
        raise ValueError(f"qd must be in [2, {schema.d + 1}], got {qd}")
    if not 0 < s < 1:
        raise ValueError(f"selectivity must be in (0, 1), got {s}")
    seed = rng if isinstance(rng, int) else None
    rng = np.random.default_rng(rng)
    universe = schema.sensitive_values

    def place(domain: int) -> tuple[int, int]:
        width = coverage(s, qd, domain)
        start = int(rng.integers(0, domain - width + 1))
        return start, start + width - 1

    queries = []
    for _ in range(n_queries):
        chosen = set(rng.choice(schema.d, size=qd - 1, replace=False).tolist())
        qi = []
        for i, attr in enumerate(schema.qi_attributes):
            if i in chosen:
                a, b = place(attr.cardinality)
                qi.append((attr.lo + a, attr.lo + b))
            else:
                qi.append(None)
        queries.append(CountQuery(tuple(qi), place(len(universe)), universe))
    logger.info(f"Generated {n_queries} queries (qd={qd}, s={s})")
    return Workload(tuple(queries), qd, s, seed)


# ─── Answering ───

def _qi_mask(matrix: np.ndarray, q: CountQuery) -> np.ndarray:
    mask = np.ones(len(matrix), dtype=bool)
    for dim, iv in enumerate(q.qi):
        if iv is not None:
            col = matrix[:, dim]
            mask &= (col >= iv[0]) & (col <= iv[1])
    return mask


def exact_count(table: MicrodataTable, q: CountQuery) -> int:
    """Records satisfying every predicate."""
    if not len(table):
        return 0
    accepted = np.array([v in q.sensitive_values for v in table.schema.sensitive_values])
    mask = _qi_mask(table.qi_matrix, q) & accepted[table.sensitive_codes]
    return int(mask.sum())


class PublishedIndex:
    """Per-group arrays of a published table, built once and reused across a workload."""

    def __init__(self, published: AnonymizedTable):
        self.published = published
        self.anatomy = isinstance(published, Anatomy)
        groups = published.groups
        self.sizes = np.array([g.size for g in groups], dtype=np.float64)
        self.sensitive = [tuple(g.sensitive) for g in groups]
        if self.anatomy:
            self.qi = [np.array(g.qi, dtype=np.int64) for g in groups]
        else:
            d = len(groups[0].intervals) if groups else 0
            bounds = np.array([g.intervals for g in groups], dtype=np.int64).reshape(len(groups), d, 2)
            self.lo, self.hi = bounds[:, :, 0], bounds[:, :, 1]

    def _sensitive_hits(self, q: CountQuery) -> np.ndarray:
        allowed = q.sensitive_values
        return np.array([sum(v in allowed for v in vals) for vals in self.sensitive], dtype=np.float64)

    def estimate(self, q: CountQuery) -> float:
        if not len(self.sizes):
            return 0.0
        hits = self._sensitive_hits(q)
        if self.anatomy:
            qi_hits = np.array([_qi_mask(m, q).sum() for m in self.qi], dtype=np.float64)
            return float((qi_hits * hits / self.sizes).sum())
        fraction = np.ones(len(self.sizes))
        for dim, iv in enumerate(q.qi):
            if iv is None:
                continue
            lo, hi = self.lo[:, dim], self.hi[:, dim]
            overlap = np.minimum(hi, iv[1]) - np.maximum(lo, iv[0]) + 1
            fraction *= np.clip(overlap, 0, None) / (hi - lo + 1)
        return float((hits * fraction).sum())


def estimated_count(published: AnonymizedTable, q: CountQuery) -> float:
    """
    Uniform-spread estimate. Generalized rows contribute the fraction of
    their integer box inside the query; anatomy groups contribute
    (matching QI rows) * (matching sensitive rows) / group size.
    """
    return PublishedIndex(published).estimate(q)


# ─── Workload Error ───

@dataclass(frozen=True)
class QueryError:
    act: int
    est: float
    error: float


@dataclass
class EvalResult:
    per_query: list[QueryError]
    delta: float

    @property
    def workload_error(self) -> float:
        if not self.per_query:
            return 0.0
        return float(np.mean([r.error for r in self.per_query]))


def relative_error(act: int, est: float, delta: float) -> float:
    denom = max(act, delta)
    if denom == 0:
        return 0.0 if est == 0 else math.inf
    return abs(act - est) / denom


def workload_error(
    table: MicrodataTable,
    published: AnonymizedTable,
    workload: Workload,
    delta: Optional[float] = None,
) -> EvalResult:
    """
    Average |act - est| / max(act, delta) over the workload; delta defaults
    to `default_delta_pct` percent of the table's cardinality.
    """
    if delta is None:
        delta = settings.default_delta_pct / 100 * len(table)
    index = PublishedIndex(published)
    rows = []
    for q in workload.queries:
        act = exact_count(table, q)
        est = index.estimate(q)
        rows.append(QueryError(act, est, relative_error(act, est, delta)))
    result = EvalResult(rows, delta)
    logger.info(f"Workload error {result.workload_error:.4f} over {len(rows)} queries (delta={delta})")
    return result
