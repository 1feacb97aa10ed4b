# Glassbox — Anonymization Package

from src.anonymization.model import AttributeSchema, MicrodataTable, QIAttribute, Record
from src.anonymization.registry import Algorithm, AlgorithmSpec, distribution, run

__all__ = [
    "Algorithm",
    "AlgorithmSpec",
    "AttributeSchema",
    "MicrodataTable",
    "QIAttribute",
    "Record",
    "distribution",
    "run",
]
