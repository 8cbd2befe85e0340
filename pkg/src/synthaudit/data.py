"""Schema-typed tabular data and its file formats.

A dataset is a read-only float64 matrix tied to a SchemaMetadata. Categorical
cells hold the integer index of the category in the schema's category list;
continuous cells hold the raw value. Strings exist only at the CSV boundary.

The schema file format is JSON:

    {
      "attributes": [
        {"name": "sex", "kind": "categorical", "categories": ["F", "M"]},
        {"name": "age", "kind": "continuous", "min": 0, "max": 100, "bins": 10}
      ],
      "quasi_identifiers": ["sex", "age"]
    }

CSV files are comma-separated with a header row, UTF-8, `.` decimal point.
Columns may appear in any order; extra columns are ignored.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from synthaudit.errors import (
    EmptyDataset,
    InvalidConfig,
    MissingColumn,
    OutOfRange,
    ParseError,
    SchemaMismatch,
    UnknownCategory,
)

CATEGORICAL = "categorical"
CONTINUOUS = "continuous"


@dataclass(frozen=True)
class AttributeSpec:
    """One column: either a closed category list or a bounded numeric range.

    Continuous attributes carry a bin count for the uniform-width histogram
    view used by generators, feature maps and the sanitiser's equivalence
    classes. The declared range is authoritative: values at `hi` fall into
    the last bin, values outside the range clamp to the nearest bin.
    """

    name: str
    kind: str
    categories: tuple[str, ...] = ()
    lo: float = 0.0
    hi: float = 1.0
    bins: int = 10

    def __post_init__(self):
        if not self.name:
            raise InvalidConfig("attribute name must be non-empty")
        if self.kind == CATEGORICAL:
            if len(self.categories) == 0:
                raise InvalidConfig(f"attribute {self.name!r}: empty category list")
            if len(set(self.categories)) != len(self.categories):
                raise InvalidConfig(f"attribute {self.name!r}: duplicate categories")
            object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        elif self.kind == CONTINUOUS:
            lo, hi = float(self.lo), float(self.hi)
            if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
                raise InvalidConfig(f"attribute {self.name!r}: need finite lo < hi")
            if self.bins < 1:
                raise InvalidConfig(f"attribute {self.name!r}: bins must be >= 1")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        else:
            raise InvalidConfig(f"attribute {self.name!r}: unknown kind {self.kind!r}")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL

    @property
    def domain_size(self) -> int:
        """Size of the discrete view: category count, or bin count."""
        return len(self.categories) if self.is_categorical else self.bins

    def category_index(self, value: str) -> int:
        try:
            return self.categories.index(value)
        except ValueError:
            raise UnknownCategory(self.name, value) from None


def bin_index(value: float, spec: AttributeSpec) -> int:
    """Uniform-width bin of `value` over the spec's declared range.

    Values outside [lo, hi] clamp to the first/last bin; value == hi maps to
    the last bin. Monotone non-decreasing in `value`.
    """
    if spec.is_categorical:
        raise InvalidConfig(f"bin_index on categorical attribute {spec.name!r}")
    if value <= spec.lo:
        return 0
    if value >= spec.hi:
        return spec.bins - 1
    width = (spec.hi - spec.lo) / spec.bins
    idx = int(math.floor((value - spec.lo) / width))
    return min(max(idx, 0), spec.bins - 1)


def bin_edges(spec: AttributeSpec) -> np.ndarray:
    return np.linspace(spec.lo, spec.hi, spec.bins + 1)


@dataclass(frozen=True)
class SchemaMetadata:
    attributes: tuple[AttributeSpec, ...]
    quasi_identifiers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "quasi_identifiers", tuple(self.quasi_identifiers))
        names = [a.name for a in self.attributes]
        if len(self.attributes) == 0:
            raise InvalidConfig("schema needs at least one attribute")
        if len(set(names)) != len(names):
            raise InvalidConfig("duplicate attribute names in schema")
        for q in self.quasi_identifiers:
            if q not in names:
                raise InvalidConfig(f"quasi-identifier {q!r} not in schema")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    @property
    def n_columns(self) -> int:
        return len(self.attributes)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise InvalidConfig(f"unknown attribute {name!r}") from None

    def attribute(self, name: str) -> AttributeSpec:
        return self.attributes[self.index_of(name)]

    def to_json_dict(self) -> dict:
        attrs = []
        for a in self.attributes:
            if a.is_categorical:
                attrs.append({"name": a.name, "kind": a.kind, "categories": list(a.categories)})
            else:
                attrs.append(
                    {"name": a.name, "kind": a.kind, "min": a.lo, "max": a.hi, "bins": a.bins}
                )
        return {"attributes": attrs, "quasi_identifiers": list(self.quasi_identifiers)}

    @staticmethod
    def from_json_dict(d: dict) -> "SchemaMetadata":
        try:
            raw_attrs = d["attributes"]
        except (KeyError, TypeError):
            raise InvalidConfig("schema JSON needs an 'attributes' list") from None
        attrs = []
        for a in raw_attrs:
            kind = a.get("kind")
            if kind == CATEGORICAL:
                attrs.append(
                    AttributeSpec(a["name"], CATEGORICAL, categories=tuple(a["categories"]))
                )
            elif kind == CONTINUOUS:
                attrs.append(
                    AttributeSpec(
                        a["name"],
                        CONTINUOUS,
                        lo=a["min"],
                        hi=a["max"],
                        bins=int(a.get("bins", 10)),
                    )
                )
            else:
                raise InvalidConfig(f"unknown attribute kind {kind!r} in schema JSON")
        return SchemaMetadata(tuple(attrs), tuple(d.get("quasi_identifiers", ())))


def load_schema(path) -> SchemaMetadata:
    with open(path, "r", encoding="utf-8") as fh:
        return SchemaMetadata.from_json_dict(json.load(fh))


def save_schema(schema: SchemaMetadata, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


class Dataset:
    """Records against a fixed schema; backing array is read-only float64."""

    __slots__ = ("schema", "values")

    def __init__(self, schema: SchemaMetadata, values):
        arr = np.array(values, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.shape[1] != schema.n_columns:
            raise SchemaMismatch(
                f"values shape {arr.shape} does not match schema with {schema.n_columns} columns"
            )
        arr.setflags(write=False)
        self.schema = schema
        self.values = arr

    @property
    def n_records(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n_records

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.schema.index_of(name)]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]

    def take(self, indices) -> "Dataset":
        return Dataset(self.schema, self.values[np.asarray(indices, dtype=np.intp)])

    def with_appended(self, record: np.ndarray) -> "Dataset":
        return Dataset(self.schema, np.vstack([self.values, np.asarray(record)[None, :]]))

    def equal_rows_mask(self, record: np.ndarray) -> np.ndarray:
        """Boolean mask of rows exactly equal to `record` on every cell."""
        return np.all(self.values == np.asarray(record, dtype=np.float64), axis=1)


def load_csv(path, schema: SchemaMetadata, policy: str = "reject") -> Dataset:
    """Parse a CSV file against `schema`.

    policy='reject' raises OutOfRange for continuous values outside the
    declared range; policy='clamp' clips them to the range instead. Unknown
    categories and unparseable or empty cells are errors under both policies.
    """
    if policy not in ("reject", "clamp"):
        raise InvalidConfig(f"unknown policy {policy!r}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty CSV file") from None
        col_of = {}
        for name in schema.names:
            if name not in header:
                raise MissingColumn(f"column {name!r} missing from {path}")
            col_of[name] = header.index(name)
        rows = []
        for r, rec in enumerate(reader):
            out = np.empty(schema.n_columns, dtype=np.float64)
            for j, spec in enumerate(schema.attributes):
                try:
                    cell = rec[col_of[spec.name]]
                except IndexError:
                    raise ParseError(f"row has too few cells", row=r) from None
                if cell == "":
                    raise ParseError(f"empty cell in column {spec.name!r}", row=r)
                if spec.is_categorical:
                    try:
                        out[j] = spec.categories.index(cell)
                    except ValueError:
                        raise UnknownCategory(spec.name, cell, row=r) from None
                else:
                    try:
                        v = float(cell)
                    except ValueError:
                        raise ParseError(
                            f"cannot parse {cell!r} in column {spec.name!r}", row=r
                        ) from None
                    if not math.isfinite(v):
                        raise ParseError(f"non-finite value in column {spec.name!r}", row=r)
                    if v < spec.lo or v > spec.hi:
                        if policy == "reject":
                            raise OutOfRange(spec.name, v, row=r)
                        v = min(max(v, spec.lo), spec.hi)
                    out[j] = v
            rows.append(out)
    values = np.vstack(rows) if rows else np.empty((0, schema.n_columns))
    return Dataset(schema, values)


def write_csv(dataset: Dataset, path) -> None:
    """Inverse of load_csv: floats via repr so a round-trip is exact."""
    schema = dataset.schema
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(schema.names)
        for row in dataset.values:
            cells = []
            for j, spec in enumerate(schema.attributes):
                if spec.is_categorical:
                    cells.append(spec.categories[int(row[j])])
                else:
                    cells.append(repr(float(row[j])))
            writer.writerow(cells)


def derive_metadata(dataset: Dataset, pad_fraction: float = 0.0) -> SchemaMetadata:
    """Learn metadata from the data itself.

    The resulting category lists contain exactly the observed categories and
    ranges hug the observed min/max (optionally padded by pad_fraction of the
    span on each side). Convenient, but the output depends on every record,
    including any record under attack: fitting a generator with learned
    metadata leaks presence through the metadata itself. Callers wanting a
    privacy-respecting pipeline must pass metadata from an independent source.
    """
    if dataset.n_records == 0:
        raise EmptyDataset("cannot derive metadata from an empty dataset")
    if pad_fraction < 0:
        raise InvalidConfig("pad_fraction must be >= 0")
    attrs = []
    for j, spec in enumerate(dataset.schema.attributes):
        col = dataset.values[:, j]
        if spec.is_categorical:
            seen = np.unique(col.astype(np.intp))
            cats = tuple(spec.categories[i] for i in seen)
            attrs.append(AttributeSpec(spec.name, CATEGORICAL, categories=cats))
        else:
            lo, hi = float(col.min()), float(col.max())
            span = hi - lo
            if span == 0.0:
                delta = max(1.0, abs(lo)) * max(pad_fraction, 1e-9)
            else:
                delta = span * pad_fraction
            attrs.append(
                AttributeSpec(
                    spec.name, CONTINUOUS, lo=lo - delta, hi=hi + delta, bins=spec.bins
                )
            )
    return SchemaMetadata(tuple(attrs), dataset.schema.quasi_identifiers)
