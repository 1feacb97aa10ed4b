"""
Glassbox — Tailor Tests
"""

import sys
from collections import Counter
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent.resolve()))

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from src.anonymization.fixtures import HOSPITAL_SCHEMA, load_fixtures
from src.anonymization.model import is_l_diverse
from src.anonymization.recoding import (
    AnonymizationFunction,
    Anatomy,
    DiscernabilityMetric,
    PerimeterMetric,
    perimeter,
    total_perimeter,
)
from src.anonymization.tailor import (
    best_split,
    canonical_l_cut,
    enumerate_l_cuts,
    tailor,
    tailor_partition,
)
from tests.helpers import TINY_SCHEMA, VALUES, l_and_table, random_eligible_table


@pytest.fixture(scope="module")
def fx():
    return load_fixtures()


class TestTailorFixtures:
    """Worked-example outputs."""

    def test_t5_gives_t6_star(self, fx):
        partition, published = tailor(fx.t5, 2)
        assert published == fx.t6_star
        assert sorted(partition.sizes) == [2, 2, 4]

    def test_t3_gives_same_table(self, fx):
        assert tailor(fx.t3, 2)[1] == fx.t6_star

    def test_not_eligible(self, fx):
        assert tailor(fx.t1, 10) is None
        assert tailor(fx.t9, 2) is None

    def test_anatomy_output(self, fx):
        _, published = tailor(fx.t5, 2, fn=AnonymizationFunction.ANATOMY)
        assert isinstance(published, Anatomy)
        assert sorted(published.group_sizes) == [2, 2, 4]


class TestLCuts:
    """Tests for l-cut enumeration and the canonical choice."""

    def test_first_cut_of_t5(self, fx):
        cut = canonical_l_cut(fx.t5.as_group(), 2, schema=HOSPITAL_SCHEMA)
        assert cut.left.ids == {"Ann", "Bob", "Cate", "Don"}
        assert cut.dimension == 0
        assert cut.split_size == 4

    def test_enumeration_size(self, fx):
        # c = 2 so both sides need 4 records: one split per dimension
        cuts = enumerate_l_cuts(fx.t5.as_group(), 2, schema=HOSPITAL_SCHEMA)
        assert len(cuts) == 2
        assert all(is_l_diverse(c.left, 2) and is_l_diverse(c.right, 2) for c in cuts)

    def test_canonical_is_cheapest(self, fx):
        group = fx.t5.subset(["Ed", "Fred", "Gill", "Hera"]).as_group()
        cuts = enumerate_l_cuts(group, 2, schema=HOSPITAL_SCHEMA)
        best = canonical_l_cut(group, 2, schema=HOSPITAL_SCHEMA)
        assert best.perimeter == min(c.perimeter for c in cuts)
        assert best.left.ids == {"Ed", "Fred"}

    def test_no_cut_below_2l(self, fx):
        group = fx.t5.subset(["Ann", "Bob", "Cate", "Don"]).as_group()
        assert canonical_l_cut(group, 2, schema=HOSPITAL_SCHEMA) is None
        assert enumerate_l_cuts(group, 2, schema=HOSPITAL_SCHEMA) == []

    def test_metric_or_schema_required(self, fx):
        with pytest.raises(ValueError):
            canonical_l_cut(fx.t5.as_group(), 2)


class TestBestSplit:
    """Tests for the ordered split search and its tie-breaks."""

    def test_smallest_dimension_on_tie(self):
        qi = np.array([[0, 0], [1, 1], [2, 2], [3, 3]])
        choice = best_split(qi, np.arange(4), DiscernabilityMetric(), 1)
        assert (choice.dimension, choice.split_size) == (0, 2)

    def test_left_side_tie_break(self):
        qi = np.array([[1, 1]] * 4)
        metric = PerimeterMetric(TINY_SCHEMA)
        assert best_split(qi, np.arange(4), metric, 1).split_size == 3
        assert best_split(qi, np.arange(4), metric, 1, prefer_larger=False).split_size == 1

    def test_too_small(self):
        assert best_split(np.array([[0, 0], [1, 1], [2, 2]]), np.arange(3), DiscernabilityMetric(), 2) is None


class TestTailorProperties:
    """Property tests on tiny tables."""

    @hyp_settings(max_examples=150, deadline=None)
    @given(case=l_and_table())
    def test_groups_diverse_and_final(self, case):
        l, table = case
        partition = tailor_partition(table, l)
        assert partition.covers(table)
        for g in partition.groups:
            assert is_l_diverse(g, l)
            assert canonical_l_cut(g, l, schema=table.schema) is None

    @hyp_settings(max_examples=150, deadline=None)
    @given(case=l_and_table(), seed=st.integers(0, 2 ** 32 - 1))
    def test_processing_order_irrelevant(self, case, seed):
        l, table = case
        fifo = tailor_partition(table, l)
        shuffled = tailor_partition(table, l, rng=np.random.default_rng(seed))
        assert fifo.canonical_form() == shuffled.canonical_form()

    @hyp_settings(max_examples=150, deadline=None)
    @given(case=l_and_table(), seed=st.integers(0, 2 ** 32 - 1))
    def test_isomorphic_rewrite_same_output(self, case, seed):
        l, table = case
        rng = np.random.default_rng(seed)
        partition, published = tailor(table, l)
        swaps = {}
        for g in partition.groups:
            values = [r.sensitive for r in g.members]
            for r, i in zip(g.members, rng.permutation(len(values)).tolist()):
                swaps[r.id] = values[i]
        rewritten = table.with_sensitive(swaps)
        other_partition, other = tailor(rewritten, l)
        assert other_partition.canonical_form() == partition.canonical_form()
        assert other == published

    @hyp_settings(max_examples=100, deadline=None)
    @given(case=l_and_table())
    def test_discernability_metric_pluggable(self, case):
        l, table = case
        partition = tailor_partition(table, l, DiscernabilityMetric())
        assert partition.covers(table)
        assert all(is_l_diverse(g, l) for g in partition.groups)


def _cut_key(cut):
    if cut is None:
        return None
    return cut.dimension, cut.split_size, cut.left.id_key, cut.right.id_key


def _same_max_multiplicity(values: list[str], rng: np.random.Generator) -> list[str]:
    """A fresh sensitive sequence of the same length and the same largest count."""
    c = max(Counter(values).values())
    first = str(rng.choice(VALUES))
    out = [first] * c
    counts = Counter(out)
    while len(out) < len(values):
        v = str(rng.choice([v for v in VALUES if counts[v] < c]))
        counts[v] += 1
        out.append(v)
    return [out[i] for i in rng.permutation(len(out)).tolist()]


@pytest.mark.slow
class TestCutProperties:
    """Randomized checks of canonical cuts and isomorphic rewrites (1000 tiny cases each)."""

    CASES = 1000

    def test_isomorphic_groups_same_cut(self):
        rng = np.random.default_rng(21)
        for _ in range(self.CASES):
            l = int(rng.choice([2, 3]))
            table = random_eligible_table(rng, l)
            values = [r.sensitive for r in table.records]
            shuffled = [values[i] for i in rng.permutation(len(values)).tolist()]
            other = table.with_sensitive({r.id: v for r, v in zip(table.records, shuffled)})
            g1, g2 = table.as_group(), other.as_group()
            assert g1.sensitive_counts == g2.sensitive_counts
            assert _cut_key(canonical_l_cut(g1, l, schema=table.schema)) == _cut_key(
                canonical_l_cut(g2, l, schema=table.schema)
            )

    def test_cut_ignores_values_beyond_max_multiplicity(self):
        rng = np.random.default_rng(22)
        for _ in range(self.CASES):
            l = int(rng.choice([2, 3]))
            table = random_eligible_table(rng, l)
            values = _same_max_multiplicity([r.sensitive for r in table.records], rng)
            other = table.with_sensitive({r.id: v for r, v in zip(table.records, values)})
            g1, g2 = table.as_group(), other.as_group()
            assert g1.max_multiplicity == g2.max_multiplicity
            assert _cut_key(canonical_l_cut(g1, l, schema=table.schema)) == _cut_key(
                canonical_l_cut(g2, l, schema=table.schema)
            )

    def test_cuts_never_raise_perimeter(self):
        rng = np.random.default_rng(23)
        for _ in range(self.CASES):
            l = int(rng.choice([2, 3]))
            table = random_eligible_table(rng, l)
            queue = [table.as_group()]
            while queue:
                g = queue.pop()
                cut = canonical_l_cut(g, l, schema=table.schema)
                if cut is None:
                    continue
                assert perimeter(cut.left, table.schema) + perimeter(cut.right, table.schema) <= perimeter(
                    g, table.schema
                )
                queue.extend((cut.left, cut.right))
            root = table.as_group()
            assert total_perimeter(tailor_partition(table, l), table.schema) <= perimeter(root, table.schema)

    def test_isomorphic_tables_same_output(self):
        rng = np.random.default_rng(24)
        for _ in range(self.CASES):
            l = int(rng.choice([2, 3]))
            table = random_eligible_table(rng, l)
            partition, published = tailor(table, l)
            swaps = {}
            for g in partition.groups:
                values = [r.sensitive for r in g.members]
                for r, i in zip(g.members, rng.permutation(len(values)).tolist()):
                    swaps[r.id] = values[i]
            other_partition, other = tailor(table.with_sensitive(swaps), l)
            assert other_partition.canonical_form() == partition.canonical_form()
            assert other == published
