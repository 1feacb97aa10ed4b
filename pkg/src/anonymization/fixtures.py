"""
Glassbox — Fixtures
The worked-example hospital tables and the publications expected from them.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

from src.anonymization.baselines import Partitioner
from src.anonymization.model import (
    AttributeSchema,
    ExternalSource,
    MicrodataTable,
    Partition,
    QIAttribute,
    Record,
)
from src.anonymization.recoding import Generalization, GeneralizedGroup

DISEASES = ("bronchitis", "diabetes", "dyspepsia", "flu", "gastritis")

HOSPITAL_SCHEMA = AttributeSchema(
    (QIAttribute("Age", 21, 60), QIAttribute("Zipcode", 10000, 63000)),
    "Disease",
    DISEASES,
    "Name",
)

APPENDIX_SCHEMA = AttributeSchema((QIAttribute("Age", 21, 60),), "Disease", ("dyspepsia", "flu"), "Name")

PEOPLE = (
    ("Ann", (21, 10000)),
    ("Bob", (27, 18000)),
    ("Cate", (32, 35000)),
    ("Don", (32, 35000)),
    ("Ed", (54, 60000)),
    ("Fred", (60, 63000)),
    ("Gill", (60, 63000)),
    ("Hera", (60, 63000)),
)

# Disease per person, in PEOPLE order
_T1 = ("dyspepsia", "flu", "gastritis", "bronchitis", "gastritis", "flu", "dyspepsia", "diabetes")
_T3 = ("dyspepsia", "flu", "gastritis", "gastritis", "bronchitis", "flu", "dyspepsia", "diabetes")
_T5 = ("dyspepsia", "flu", "gastritis", "gastritis", "flu", "bronchitis", "dyspepsia", "diabetes")
_T8 = ("flu", "dyspepsia", "gastritis", "gastritis", "dyspepsia", "bronchitis", "flu", "diabetes")

_T9 = (
    ("Ann", 21, "dyspepsia"),
    ("Bob", 27, "dyspepsia"),
    ("Cate", 32, "dyspepsia"),
    ("Don", 32, "flu"),
    ("Ed", 54, "flu"),
    ("Fred", 60, "flu"),
    ("Gill", 60, "flu"),
)

APPENDIX_GROUPS = (("Ann", "Bob"), ("Cate", "Don"), ("Ed", "Fred", "Gill"))


def hospital_table(diseases: Sequence[str]) -> MicrodataTable:
    return MicrodataTable(
        HOSPITAL_SCHEMA,
        tuple(Record(name, qi, v) for (name, qi), v in zip(PEOPLE, diseases)),
    )


def _gen(groups: Iterable[tuple], schema: AttributeSchema = HOSPITAL_SCHEMA) -> Generalization:
    return Generalization(tuple(GeneralizedGroup(iv, vals) for iv, vals in groups), schema=schema)


def fixed_partitioner(id_sets: Sequence[Sequence[str]]) -> Partitioner:
    """A partitioner that ignores k and always returns the given grouping."""
    def partition(table: MicrodataTable, k: int) -> Partition:
        return Partition.from_id_sets(table, id_sets)
    return partition


@dataclass(frozen=True)
class FixtureSet:
    """Named worked-example tables. Zipcodes are stored as integers (10k -> 10000)."""
    t1: MicrodataTable
    e1: ExternalSource
    t3: MicrodataTable
    t5: MicrodataTable
    t8: MicrodataTable
    t9: MicrodataTable
    t2_star: Generalization
    t4_star: Generalization
    t6_star: Generalization
    t7_star: Generalization
    t10_star: Generalization

    def get(self, name: str):
        key = name.lower().replace("*", "_star")
        if not hasattr(self, key):
            raise KeyError(f"unknown fixture '{name}'")
        return getattr(self, key)

    @property
    def appendix_partitioner(self) -> Partitioner:
        return fixed_partitioner(APPENDIX_GROUPS)


@lru_cache(maxsize=1)
def load_fixtures() -> FixtureSet:
    t1 = hospital_table(_T1)
    e1 = ExternalSource(HOSPITAL_SCHEMA, tuple(r.key for r in t1.records) + (("Bruce", (29, 19000)),))
    t9 = MicrodataTable(APPENDIX_SCHEMA, tuple(Record(n, (age,), v) for n, age, v in _T9))

    young = ((21, 27), (10000, 18000))
    twins = ((32, 32), (35000, 35000))
    old = ((54, 60), (60000, 63000))
    return FixtureSet(
        t1=t1,
        e1=e1,
        t3=hospital_table(_T3),
        t5=hospital_table(_T5),
        t8=hospital_table(_T8),
        t9=t9,
        t2_star=_gen([
            (young, ("dyspepsia", "flu")),
            (twins, ("bronchitis", "gastritis")),
            (old, ("diabetes", "dyspepsia", "flu", "gastritis")),
        ]),
        t4_star=_gen([
            (young, ("dyspepsia", "flu")),
            (((32, 60), (35000, 63000)), ("bronchitis", "diabetes", "dyspepsia", "flu", "gastritis", "gastritis")),
        ]),
        t6_star=_gen([
            (((21, 32), (10000, 35000)), ("dyspepsia", "flu", "gastritis", "gastritis")),
            (old, ("bronchitis", "flu")),
            (((60, 60), (63000, 63000)), ("diabetes", "dyspepsia")),
        ]),
        t7_star=_gen([
            (young, ("dyspepsia", "flu")),
            (old, ("dyspepsia", "flu")),
            (((32, 60), (35000, 63000)), ("bronchitis", "gastritis")),
            (((32, 60), (35000, 63000)), ("diabetes", "gastritis")),
        ]),
        t10_star=_gen([
            (((21, 27),), ("dyspepsia", "flu")),
            (((32, 32),), ("dyspepsia", "flu")),
            (((54, 60),), ("flu", "flu", "flu")),
        ], APPENDIX_SCHEMA),
    )
