"""
Glassbox — Data I/O
CSV tables, schema configs, published-table files and synthetic microdata.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from dotenv import dotenv_values, set_key

from config.settings import settings
from src.anonymization.ace import Seed
from src.anonymization.errors import SchemaError
from src.anonymization.model import (
    AttributeSchema,
    ExternalSource,
    MicrodataTable,
    QIAttribute,
    Record,
)
from src.anonymization.recoding import (
    Anatomy,
    AnatomyGroup,
    AnonymizedTable,
    Generalization,
    GeneralizedGroup,
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
GROUP_ID = "group_id"


# ─── Schema Config ───

@dataclass
class SchemaConfig:
    """
    Flat key/value schema document:

        id=Name
        qi=Age,Zipcode
        qi.Age.lo=21
        qi.Age.hi=60
        sensitive=Disease
        sensitive.values=bronchitis,diabetes,dyspepsia,flu,gastritis

    Bounds and the sensitive universe are optional and filled from the data.
    """
    id_name: str
    qi_names: list[str]
    sensitive_name: str
    bounds: dict[str, tuple[Optional[int], Optional[int]]] = field(default_factory=dict)
    sensitive_values: Optional[list[str]] = None

    @classmethod
    def parse(cls, values: dict[str, Optional[str]]) -> "SchemaConfig":
        for key in ("id", "qi", "sensitive"):
            if not values.get(key):
                raise SchemaError(f"schema config is missing '{key}'")
        qi_names = _split(values["qi"])
        bounds = {}
        for name in qi_names:
            lo, hi = values.get(f"qi.{name}.lo"), values.get(f"qi.{name}.hi")
            try:
                bounds[name] = (int(lo) if lo else None, int(hi) if hi else None)
            except ValueError as e:
                raise SchemaError(f"non-integer bound in schema config: {e}", column=name) from e
        universe = values.get("sensitive.values")
        return cls(values["id"], qi_names, values["sensitive"], bounds, _split(universe) if universe else None)

    @classmethod
    def of(cls, schema: AttributeSchema) -> "SchemaConfig":
        return cls(
            schema.id_name,
            schema.qi_names,
            schema.sensitive_name,
            {a.name: (a.lo, a.hi) for a in schema.qi_attributes},
            list(schema.sensitive_values),
        )

    def resolve(self, frame: pd.DataFrame, universe: Optional[Sequence[str]] = None) -> AttributeSchema:
        """Schema with missing bounds and universe taken from the data."""
        attrs = []
        for name in self.qi_names:
            lo, hi = self.bounds.get(name, (None, None))
            if (lo is None or hi is None) and not len(frame):
                raise SchemaError(f"no bounds declared for '{name}' and no data to observe", column=name)
            lo = int(frame[name].min()) if lo is None else lo
            hi = int(frame[name].max()) if hi is None else hi
            attrs.append(QIAttribute(name, lo, hi))
        values = self.sensitive_values
        if values is None:
            values = list(universe) if universe is not None else []
            if self.sensitive_name in frame.columns:
                values = sorted(set(values) | set(frame[self.sensitive_name]))
        if not values:
            raise SchemaError("sensitive universe is neither declared nor observable", column=self.sensitive_name)
        return AttributeSchema(tuple(attrs), self.sensitive_name, tuple(values), self.id_name)


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def load_schema_config(path: PathLike) -> SchemaConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"schema config not found: {path}")
    return SchemaConfig.parse(dotenv_values(path))


def write_schema_config(schema: AttributeSchema, path: PathLike) -> Path:
    """Write a fully-specified schema config (explicit bounds and universe)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("", encoding="utf-8")
    pairs = [("id", schema.id_name), ("qi", ",".join(schema.qi_names))]
    for a in schema.qi_attributes:
        pairs += [(f"qi.{a.name}.lo", str(a.lo)), (f"qi.{a.name}.hi", str(a.hi))]
    pairs += [("sensitive", schema.sensitive_name), ("sensitive.values", ",".join(schema.sensitive_values))]
    for key, value in pairs:
        set_key(path, key, value, quote_mode="never")
    return path


ConfigLike = Union[PathLike, SchemaConfig, AttributeSchema]


def _config(config: ConfigLike) -> SchemaConfig:
    if isinstance(config, SchemaConfig):
        return config
    if isinstance(config, AttributeSchema):
        return SchemaConfig.of(config)
    return load_schema_config(config)


# ─── Microdata ───

def _read_frame(path: PathLike, required: Sequence[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"cannot parse {path.name}: {e}") from e
    for col in required:
        if col not in frame.columns:
            raise SchemaError(f"missing column in {path.name}", column=col)
    return frame


def _integer_columns(frame: pd.DataFrame, names: Sequence[str]) -> pd.DataFrame:
    """Parse QI columns as integers; the first bad cell is reported with its 1-based data row."""
    out = frame.copy()
    for name in names:
        parsed = pd.to_numeric(frame[name].str.strip(), errors="coerce")
        bad = parsed.isna() | (parsed != parsed.round())
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise SchemaError(f"'{frame[name].iloc[row]}' is not an integer", row=row + 1, column=name)
        out[name] = parsed.astype(np.int64)
    return out


def load_table(path: PathLike, config: ConfigLike) -> MicrodataTable:
    """
    Read a microdata CSV (header row, UTF-8, comma-separated).

    Raises:
        SchemaError: missing columns, unparseable cells or domain violations
        DuplicateIdError: two rows share an identifier
    """
    cfg = _config(config)
    frame = _read_frame(path, [cfg.id_name, *cfg.qi_names, cfg.sensitive_name])
    frame = _integer_columns(frame, cfg.qi_names)
    schema = cfg.resolve(frame)
    qi = frame[cfg.qi_names].to_numpy(dtype=np.int64)
    records = tuple(
        Record(str(i), tuple(row), str(s))
        for i, row, s in zip(frame[cfg.id_name], qi.tolist(), frame[cfg.sensitive_name])
    )
    table = MicrodataTable(schema, records)
    logger.info(f"Loaded {len(table)} records from {Path(path).name}")
    return table


def load_external(path: PathLike, config: ConfigLike, universe: Optional[Sequence[str]] = None) -> ExternalSource:
    """Read an (id, QI) external source; a sensitive column, if present, is ignored."""
    cfg = _config(config)
    frame = _read_frame(path, [cfg.id_name, *cfg.qi_names])
    frame = _integer_columns(frame, cfg.qi_names)
    schema = cfg.resolve(frame, universe)
    qi = frame[cfg.qi_names].to_numpy(dtype=np.int64)
    entries = tuple((str(i), tuple(row)) for i, row in zip(frame[cfg.id_name], qi.tolist()))
    for row, (_, q) in enumerate(entries, start=1):
        schema.check_qi(q, row=row)
    return ExternalSource(schema, entries)


def _to_csv(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def write_table(table: MicrodataTable, path: PathLike) -> Path:
    return _to_csv(table.to_frame(), Path(path))


# ─── Published Tables ───

def anatomy_paths(path: PathLike) -> tuple[Path, Path]:
    """`x.csv` -> (`x_qi.csv`, `x_sens.csv`)."""
    path = Path(path)
    stem = path.stem
    for suffix in ("_qi", "_sens"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return path.with_name(f"{stem}_qi.csv"), path.with_name(f"{stem}_sens.csv")


def _require_schema(published: AnonymizedTable, schema: Optional[AttributeSchema]) -> AttributeSchema:
    schema = schema or published.schema
    if schema is None:
        raise SchemaError("writing a published table needs its schema (attribute names)")
    return schema


def write_published(
    published: AnonymizedTable,
    path: PathLike,
    schema: Optional[AttributeSchema] = None,
) -> list[Path]:
    """
    Generalization: one CSV with `<attr>_lo`, `<attr>_hi` per QI attribute,
    `group_id` (blank without boundaries) and the sensitive column.
    Anatomy: `<stem>_qi.csv` (QI columns + group_id) and `<stem>_sens.csv`
    (group_id + sensitive). Groups are numbered from 1 in canonical order.
    """
    schema = _require_schema(published, schema)
    if isinstance(published, Anatomy):
        qi_path, sens_path = anatomy_paths(path)
        qi_rows = [(*q, gid) for q, gid in published.qi_rows]
        qi_frame = pd.DataFrame(qi_rows, columns=[*schema.qi_names, GROUP_ID])
        sens_frame = pd.DataFrame(published.sensitive_rows, columns=[GROUP_ID, schema.sensitive_name])
        return [_to_csv(qi_frame, qi_path), _to_csv(sens_frame, sens_path)]

    columns = [c for name in schema.qi_names for c in (f"{name}_lo", f"{name}_hi")]
    rows = []
    for gid, g in enumerate(published.groups, start=1):
        bounds = [b for iv in g.intervals for b in iv]
        for v in g.sensitive:
            rows.append([*bounds, gid if published.has_boundaries else "", v])
    frame = pd.DataFrame(rows, columns=[*columns, GROUP_ID, schema.sensitive_name])
    return [_to_csv(frame, Path(path))]


def _generalization_from_frame(frame: pd.DataFrame, path: Path, schema: Optional[AttributeSchema]) -> Generalization:
    names = [c[:-3] for c in frame.columns if c.endswith("_lo")]
    if not names:
        raise SchemaError(f"no '<attr>_lo' columns in {path.name}")
    rest = [c for c in frame.columns if c != GROUP_ID and not c.endswith(("_lo", "_hi"))]
    if len(rest) != 1:
        raise SchemaError(f"expected exactly one sensitive column in {path.name}, found {rest}")
    bound_cols = [c for n in names for c in (f"{n}_lo", f"{n}_hi")]
    for c in bound_cols:
        if c not in frame.columns:
            raise SchemaError(f"missing column in {path.name}", column=c)
    frame = _integer_columns(frame, bound_cols)
    gids = frame[GROUP_ID].str.strip() if GROUP_ID in frame.columns else pd.Series([""] * len(frame), dtype=str)
    labelled = gids != ""
    if labelled.any() and not labelled.all():
        raise SchemaError(f"group_id must be set on every row or on none in {path.name}", column=GROUP_ID)
    has_boundaries = bool(labelled.all())

    bounds = frame[bound_cols].to_numpy(dtype=np.int64).reshape(len(frame), len(names), 2)
    values = frame[rest[0]].astype(str).tolist()
    grouped: dict[object, tuple[tuple, list[str]]] = {}
    for i, key in enumerate(gids.tolist() if has_boundaries else range(len(frame))):
        intervals = tuple(tuple(iv) for iv in bounds[i].tolist())
        prev = grouped.get(key)
        if prev is not None and prev[0] != intervals:
            raise SchemaError(f"group {key} has rows with different intervals", row=i + 1, column=GROUP_ID)
        grouped.setdefault(key, (intervals, []))[1].append(values[i])
    groups = tuple(GeneralizedGroup(iv, tuple(vals)) for iv, vals in grouped.values())
    return Generalization(groups, has_boundaries=has_boundaries, schema=schema)


def load_published(path: PathLike, schema: Optional[AttributeSchema] = None) -> AnonymizedTable:
    """
    Read a table written by `write_published`. `path` may name the
    generalization CSV, either anatomy file, or the shared anatomy stem.
    """
    path = Path(path)
    qi_path, sens_path = anatomy_paths(path)
    if path.exists() and not path.stem.endswith(("_qi", "_sens")):
        frame = _read_frame(path, [])
        return _generalization_from_frame(frame, path, schema)
    if not (qi_path.exists() and sens_path.exists()):
        raise FileNotFoundError(f"published table not found: {path}")

    qi_frame = _read_frame(qi_path, [GROUP_ID])
    sens_frame = _read_frame(sens_path, [GROUP_ID])
    qi_names = [c for c in qi_frame.columns if c != GROUP_ID]
    sensitive = [c for c in sens_frame.columns if c != GROUP_ID]
    if len(sensitive) != 1:
        raise SchemaError(f"expected one sensitive column in {sens_path.name}, found {sensitive}")
    qi_frame = _integer_columns(qi_frame, [*qi_names, GROUP_ID])
    sens_frame = _integer_columns(sens_frame, [GROUP_ID])
    qi_by_gid = qi_frame.groupby(GROUP_ID)[qi_names].apply(lambda f: [tuple(r) for r in f.to_numpy().tolist()])
    sens_by_gid = sens_frame.groupby(GROUP_ID)[sensitive[0]].apply(list)
    if set(qi_by_gid.index) != set(sens_by_gid.index):
        raise SchemaError("QI and sensitive files disagree on group ids", column=GROUP_ID)
    groups = []
    for gid in sorted(qi_by_gid.index):
        qis, vals = qi_by_gid[gid], sens_by_gid[gid]
        if len(qis) != len(vals):
            raise SchemaError(f"group {gid} has {len(qis)} QI rows but {len(vals)} sensitive rows", column=GROUP_ID)
        groups.append(AnatomyGroup(tuple(qis), tuple(str(v) for v in vals)))
    return Anatomy(tuple(groups), schema=schema)


# ─── Synthetic Data ───

def synthetic_schema(
    domains: Optional[Sequence[int]] = None,
    values: Optional[Sequence[str]] = None,
) -> AttributeSchema:
    """QI attributes q1..qd over [0, |domain| - 1] and sensitive attribute S."""
    domains = settings.synth_qi_domains if domains is None else domains
    values = settings.synth_sensitive_values if values is None else values
    attrs = tuple(QIAttribute(f"q{i + 1}", 0, int(size) - 1) for i, size in enumerate(domains))
    return AttributeSchema(attrs, "S", tuple(values), "id")


def synthesize(
    n: int,
    schema: Optional[AttributeSchema] = None,
    rho: float = 0.0,
    rng: Seed = None,
) -> MicrodataTable:
    """
    Uniform QI values; each sensitive value is, with probability rho, a
    deterministic bucketing of the first QI attribute into the universe,
    and uniform otherwise.

    Args:
        n: Number of records (>= 1)
        schema: Target schema (synthetic_schema() by default)
        rho: Correlation knob in [0, 1]
        rng: numpy Generator or seed
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must be in [0, 1], got {rho}")
    schema = schema or synthetic_schema()
    rng = np.random.default_rng(rng)
    lo = np.array([a.lo for a in schema.qi_attributes], dtype=np.int64)
    hi = np.array([a.hi for a in schema.qi_attributes], dtype=np.int64)
    qi = rng.integers(lo, hi + 1, size=(n, schema.d))
    universe = schema.sensitive_values
    first = schema.qi_attributes[0]
    bucketed = ((qi[:, 0] - first.lo) * len(universe)) // first.cardinality
    uniform = rng.integers(0, len(universe), size=n)
    codes = np.where(rng.random(n) < rho, bucketed, uniform)
    width = len(str(n - 1))
    records = tuple(
        Record(f"r{i:0{width}d}", tuple(row), universe[c])
        for i, (row, c) in enumerate(zip(qi.tolist(), codes.tolist()))
    )
    logger.info(f"Synthesized {n} records (d={schema.d}, rho={rho})")
    return MicrodataTable(schema, records)
