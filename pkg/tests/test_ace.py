"""
Glassbox — Ace Tests
Assign, divisions, Slice and the exact output distribution.
"""

import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent.resolve()))

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from src.anonymization.ace import (
    ace,
    ace_distribution,
    ace_partition_distribution,
    assign,
    assign_params,
    assign_probability,
    assign_skeleton,
    assign_support,
    canonical_division,
    draw_without_replacement,
    enumerate_assign_executions,
    enumerate_divisions,
    slice_buckets,
)
from src.anonymization.errors import AssignInvariantError, EnumerationLimitError
from src.anonymization.fixtures import HOSPITAL_SCHEMA, load_fixtures
from src.anonymization.model import (
    Bucket,
    BucketPartition,
    MicrodataTable,
    Record,
    are_symmetric,
    are_symmetric_partitions,
    is_l_diverse,
)
from src.anonymization.recoding import PerimeterMetric
from tests.helpers import l_and_table, make_table, random_eligible_table


@pytest.fixture(scope="module")
def fx():
    return load_fixtures()


@pytest.fixture(scope="module")
def metric():
    return PerimeterMetric(HOSPITAL_SCHEMA)


def _bucket(table, *ids):
    return Bucket.from_records(table.by_id[i] for i in ids)


def _u1(table):
    """Bucket partition U1 (Don joins Fred) over the given hospital table."""
    return BucketPartition((
        _bucket(table, "Ann", "Gill", "Bob", "Ed"),
        _bucket(table, "Don", "Fred"),
        _bucket(table, "Cate", "Hera"),
    ))


def _relabel(u: BucketPartition, rng: np.random.Generator) -> BucketPartition:
    """Symmetric rewrite: permute each bucket's column values."""
    out = []
    for b in u.buckets:
        sig = list(b.signature)
        perm = [sig[i] for i in rng.permutation(len(sig)).tolist()]
        out.append(Bucket(tuple(
            (new, tuple(Record(r.id, r.qi, new) for r in recs))
            for new, (_, recs) in zip(perm, b.columns)
        )))
    return BucketPartition(tuple(out))


def _union(schema, u: BucketPartition) -> MicrodataTable:
    return MicrodataTable(schema, tuple(r for b in u.buckets for _, recs in b.columns for r in recs))


class TestAssignParams:
    """Tests for the per-step (alpha, beta, signature) choice."""

    def test_first_step_of_t5(self, fx):
        assert assign_params(fx.t5.sensitive_counts, 2) == (2, 2, ("dyspepsia", "flu"))

    def test_residue_step(self):
        assert assign_params({"gastritis": 2, "bronchitis": 1, "diabetes": 1}, 2) == (
            1, 2, ("gastritis", "bronchitis"),
        )

    def test_exactly_l_equal_values(self):
        assert assign_params({"a": 3, "b": 3}, 2) == (3, 2, ("a", "b"))

    def test_beta_grows(self):
        # no alpha exists for beta = 2
        assert assign_params({"a": 1, "b": 1, "c": 1}, 2) == (1, 3, ("a", "b", "c"))

    def test_not_eligible(self):
        with pytest.raises(AssignInvariantError):
            assign_params({"a": 3, "b": 1}, 2)


class TestAssign:
    """Tests for Assign, its skeleton and its exact probabilities."""

    def test_skeleton_of_t5(self, fx):
        skeleton = assign_skeleton(fx.t5.sensitive_counts, 2)
        assert [(s.alpha, s.beta, s.signature) for s in skeleton] == [
            (2, 2, ("dyspepsia", "flu")),
            (1, 2, ("gastritis", "bronchitis")),
            (1, 2, ("diabetes", "gastritis")),
        ]
        assert skeleton.execution_count() == 2

    def test_two_executions(self, fx):
        executions = list(enumerate_assign_executions(fx.t5, 2))
        assert len(executions) == 2
        partners = {b.column("gastritis")[0].id for ex in executions for b in ex if "bronchitis" in b.signature}
        assert partners == {"Cate", "Don"}

    def test_support(self, fx):
        support = assign_support(fx.t5, 2)
        assert len(support) == 2
        assert [p for _, p in support] == [Fraction(1, 2), Fraction(1, 2)]

    def test_execution_limit(self, fx):
        with pytest.raises(EnumerationLimitError):
            list(enumerate_assign_executions(fx.t5, 2, limit=1))

    def test_assign_buckets(self, fx):
        u = assign(fx.t5, 2, 0)
        assert len(u) == 3
        first = next(b for b in u.buckets if b.alpha == 2)
        assert first.as_group().ids == {"Ann", "Bob", "Ed", "Gill"}
        assert all(b.x >= 2 for b in u.buckets)

    def test_probability_of_u1(self, fx):
        assert assign_probability(fx.t5, 2, _u1(fx.t5)) == Fraction(1, 2)

    def test_symmetric_rewrite_same_probability(self, fx):
        u1 = BucketPartition((
            _bucket(fx.t5, "Ann", "Gill", "Bob", "Ed"),
            _bucket(fx.t5, "Cate", "Fred"),
            _bucket(fx.t5, "Don", "Hera"),
        ))
        u2 = BucketPartition((
            _bucket(fx.t8, "Ann", "Gill", "Bob", "Ed"),
            _bucket(fx.t8, "Cate", "Fred"),
            _bucket(fx.t8, "Don", "Hera"),
        ))
        assert are_symmetric_partitions(u1, u2)
        assert assign_probability(fx.t5, 2, u1) == assign_probability(fx.t8, 2, u2) == Fraction(1, 2)

    def test_wrong_signature(self, fx):
        u = BucketPartition((
            _bucket(fx.t5, "Ann", "Bob"),
            _bucket(fx.t5, "Ed", "Gill"),
            _bucket(fx.t5, "Cate", "Fred"),
            _bucket(fx.t5, "Don", "Hera"),
        ))
        assert assign_probability(fx.t5, 2, u) == 0

    def test_all_distinct_single_bucket(self, fx):
        table = fx.t1.subset(["Ed", "Fred", "Gill", "Hera"])
        u = assign(table, 4, 0)
        assert len(u) == 1
        assert assign_probability(table, 4, u) == 1

    def test_draw_without_replacement(self):
        rng = np.random.default_rng(0)
        taken, rest = draw_without_replacement(np.arange(10), 4, rng)
        assert len(taken) == 4 and len(rest) == 6
        assert sorted(taken.tolist() + rest.tolist()) == list(range(10))

    @pytest.mark.slow
    def test_execution_frequencies(self, fx):
        rng = np.random.default_rng(2024)
        trials = 10_000
        cate = 0
        for _ in range(trials):
            u = assign(fx.t5, 2, rng)
            paired = next(b for b in u.buckets if "bronchitis" in b.signature)
            cate += paired.column("gastritis")[0].id == "Cate"
        assert abs(cate / trials - 0.5) <= 0.02


class TestDivisions:
    """Tests for divisions and the canonical division."""

    def test_b1_divisions(self, fx, metric):
        b1 = _bucket(fx.t5, "Ann", "Gill", "Bob", "Ed")
        assert len(enumerate_divisions(b1, metric)) == 2
        best = canonical_division(b1, metric)
        assert best.left.as_group().ids == {"Ann", "Bob"}
        assert best.right.as_group().ids == {"Ed", "Gill"}
        assert best.left.signature == best.right.signature == b1.signature

    def test_not_divisible(self, fx, metric):
        b = _bucket(fx.t5, "Cate", "Fred")
        assert enumerate_divisions(b, metric) == []
        assert canonical_division(b, metric) is None

    def test_columns_of_three(self):
        table = make_table([(0, 0), (1, 2), (3, 1), (2, 2), (0, 3), (1, 1)], ["x", "x", "x", "y", "y", "y"])
        b = Bucket.from_records(table.records)
        assert len(enumerate_divisions(b, PerimeterMetric(table.schema))) == 4

    def test_sensitive_blind(self, fx, metric):
        b5 = _bucket(fx.t5, "Ann", "Gill", "Bob", "Ed")
        b8 = _bucket(fx.t8, "Ann", "Gill", "Bob", "Ed")
        d5, d8 = canonical_division(b5, metric), canonical_division(b8, metric)
        assert d5.left.as_group().ids == d8.left.as_group().ids
        assert are_symmetric(d5.left, d8.left)

    def test_canonical_is_cheapest(self, fx, metric):
        b1 = _bucket(fx.t5, "Ann", "Gill", "Bob", "Ed")
        divisions = enumerate_divisions(b1, metric)
        assert canonical_division(b1, metric).perimeter == min(d.perimeter for d in divisions)


class TestSlice:
    """Tests for Slice."""

    def test_u1(self, fx, metric):
        out = slice_buckets(_u1(fx.t5), metric)
        assert sorted(b.as_group().id_key for b in out.buckets) == [
            ("Ann", "Bob"), ("Cate", "Hera"), ("Don", "Fred"), ("Ed", "Gill"),
        ]

    def test_non_divisible_unchanged(self, fx, metric):
        u = BucketPartition((_bucket(fx.t5, "Cate", "Fred"), _bucket(fx.t5, "Don", "Hera")))
        assert slice_buckets(u, metric).canonical_form() == u.canonical_form()

    def test_symmetric_inputs(self, fx, metric):
        u1, u2 = _u1(fx.t5), _u1(fx.t8)
        assert are_symmetric_partitions(slice_buckets(u1, metric), slice_buckets(u2, metric))

    def test_order_randomization(self, fx, metric):
        u = _u1(fx.t5)
        for seed in range(5):
            shuffled = slice_buckets(u, metric, np.random.default_rng(seed))
            assert shuffled.canonical_form() == slice_buckets(u, metric).canonical_form()


class TestAce:
    """Tests for the full algorithm and its output distribution."""

    def test_output_is_table_x(self, fx):
        for seed in range(5):
            assert ace(fx.t5, 2, seed) == fx.t7_star

    def test_not_eligible(self, fx):
        assert ace(fx.t1, 10, 0) is None

    def test_distribution(self, fx):
        # both executions decide the same MBR table
        assert ace_distribution(fx.t5, 2) == {fx.t7_star: Fraction(1)}

    def test_partition_distribution(self, fx):
        dist = ace_partition_distribution(fx.t5, 2)
        assert len(dist) == 2
        assert sum(p for _, p in dist) == 1
        assert all(p == Fraction(1, 2) for _, p in dist)

    def test_seed_reproducible(self, fx):
        assert ace(fx.t1, 2, 7) == ace(fx.t1, 2, 7)

    @hyp_settings(max_examples=100, deadline=None)
    @given(case=l_and_table(), seed=st.integers(0, 2 ** 32 - 1))
    def test_output_l_diverse(self, case, seed):
        l, table = case
        out = ace(table, l, seed)
        assert out.size == len(table)
        for g in out.groups:
            assert l * max(Counter(g.sensitive).values()) <= g.size

    @hyp_settings(max_examples=100, deadline=None)
    @given(case=l_and_table())
    def test_distribution_sums_to_one(self, case):
        l, table = case
        assert sum(ace_distribution(table, l).values()) == 1


@pytest.mark.slow
class TestAssignProperties:
    """Randomized checks of the counting formula and symmetric rewrites (1000 tiny cases each)."""

    CASES = 1000

    def test_counting_formula_matches_enumeration(self):
        rng = np.random.default_rng(11)
        for _ in range(self.CASES):
            l = int(rng.choice([2, 3]))
            table = random_eligible_table(rng, l)
            m = assign_skeleton(table.sensitive_counts, l).execution_count()
            executions = list(enumerate_assign_executions(table, l))
            assert len(executions) == m
            support = assign_support(table, l)
            assert sum(p for _, p in support) == 1
            for u, p in support:
                assert assign_probability(table, l, u) == p

    def test_symmetric_rewrites(self):
        rng = np.random.default_rng(12)
        for _ in range(self.CASES):
            l = int(rng.choice([2, 3]))
            table = random_eligible_table(rng, l)
            metric = PerimeterMetric(table.schema)
            u1 = assign(table, l, rng)
            u2 = _relabel(u1, rng)
            t2 = _union(table.schema, u2)
            assert are_symmetric_partitions(u1, u2)
            assert assign_probability(table, l, u1) == assign_probability(t2, l, u2)
            s1, s2 = slice_buckets(u1, metric), slice_buckets(u2, metric)
            assert are_symmetric_partitions(s1, s2)
            before = Counter(r.sensitive for b in u1.buckets for _, recs in b.columns for r in recs)
            after = Counter(r.sensitive for b in s1.buckets for _, recs in b.columns for r in recs)
            assert before == after
            assert all(is_l_diverse(b.as_group(), l) for b in s1.buckets)
