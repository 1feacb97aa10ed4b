"""
Glassbox — Test Helpers
Tiny random tables for property tests.
"""

from collections import Counter

import numpy as np
from hypothesis import strategies as st

from src.anonymization.model import AttributeSchema, MicrodataTable, QIAttribute, Record

VALUES = ("w", "x", "y", "z")

TINY_SCHEMA = AttributeSchema((QIAttribute("a", 0, 3), QIAttribute("b", 0, 3)), "S", VALUES, "id")

POINT = st.tuples(st.integers(0, 3), st.integers(0, 3))


def make_table(qis, values) -> MicrodataTable:
    return MicrodataTable(
        TINY_SCHEMA,
        tuple(Record(f"p{i}", q, v) for i, (q, v) in enumerate(zip(qis, values))),
    )


def _eligible(values: list[str], l: int) -> bool:
    return l * max(Counter(values).values()) <= len(values)


@st.composite
def tiny_tables(draw, min_n: int = 2, max_n: int = 6, n_values: int = 3):
    n = draw(st.integers(min_n, max_n))
    qis = draw(st.lists(POINT, min_size=n, max_size=n))
    values = draw(st.lists(st.sampled_from(VALUES[:n_values]), min_size=n, max_size=n))
    return make_table(qis, values)


@st.composite
def eligible_tables(draw, l: int, max_n: int = 6):
    """
    l-eligible tables: blocks of l distinct values, then extra records that
    are dropped from the end until the table is eligible again.
    """
    blocks = draw(st.integers(1, max(1, max_n // l)))
    values: list[str] = []
    for _ in range(blocks):
        values.extend(draw(st.permutations(VALUES))[:l])
    extras = draw(st.lists(st.sampled_from(VALUES), max_size=max_n - len(values)))
    values.extend(extras)
    while not _eligible(values, l):
        values.pop()
    qis = draw(st.lists(POINT, min_size=len(values), max_size=len(values)))
    return make_table(qis, values)


def random_eligible_table(rng: np.random.Generator, l: int, max_n: int = 6) -> MicrodataTable:
    """Seeded counterpart of eligible_tables for the large randomized suites."""
    blocks = int(rng.integers(1, max(1, max_n // l) + 1))
    values: list[str] = []
    for _ in range(blocks):
        values.extend(VALUES[i] for i in rng.permutation(len(VALUES))[:l].tolist())
    extras = int(rng.integers(0, max_n - len(values) + 1))
    values.extend(VALUES[i] for i in rng.integers(0, len(VALUES), size=extras).tolist())
    while not _eligible(values, l):
        values.pop()
    qis = [tuple(q) for q in rng.integers(0, 4, size=(len(values), 2)).tolist()]
    return make_table(qis, values)


def l_and_table(ls=(2, 3), max_n: int = 6):
    """(l, l-eligible table) pairs."""
    return st.sampled_from(ls).flatmap(lambda l: st.tuples(st.just(l), eligible_tables(l, max_n)))
