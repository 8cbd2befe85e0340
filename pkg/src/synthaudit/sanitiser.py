"""Deterministic anonymisation pipeline and literal record linkage.

sanitise() applies, in order:

  1. category grouping per the config's grouping map (values must map onto
     existing categories of the same attribute, so the schema is unchanged);
  2. rare-category row suppression: any row holding a categorical value
     whose post-grouping count falls below the threshold is dropped;
  3. capping of continuous attributes at their empirical nearest-rank
     quantile, computed on the input data;
  4. k-anonymity suppression: every equivalence class over the schema's
     quasi-identifiers (continuous ones compared by schema bin) with fewer
     than k rows is dropped. Binning defines the classes; published cell
     values are not coarsened.

No randomness anywhere: equal inputs give equal outputs, byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from synthaudit.data import Dataset, bin_index
from synthaudit.errors import EmptyDataset, InvalidConfig, UnknownAttributeInConfig


@dataclass(frozen=True)
class SanitiserConfig:
    k: int = 10
    rare_category_threshold: int = 0
    quantile_cap: float = 0.95
    grouping_map: dict = field(default_factory=dict)  # attr -> {old_cat: new_cat}

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfig("k must be >= 1")
        if self.rare_category_threshold < 0:
            raise InvalidConfig("rare_category_threshold must be >= 0")
        if not 0.0 < self.quantile_cap <= 1.0:
            raise InvalidConfig("quantile_cap must lie in (0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "rare_category_threshold": self.rare_category_threshold,
            "quantile_cap": self.quantile_cap,
            "grouping_map": {a: dict(m) for a, m in self.grouping_map.items()},
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SanitiserConfig":
        return SanitiserConfig(
            k=int(d.get("k", 10)),
            rare_category_threshold=int(d.get("rare_category_threshold", 0)),
            quantile_cap=float(d.get("quantile_cap", 0.95)),
            grouping_map={a: dict(m) for a, m in d.get("grouping_map", {}).items()},
        )


def nearest_rank_quantile(col: np.ndarray, q: float) -> float:
    """The ceil(q*n)-th smallest value: an actual data point, no interpolation."""
    if col.size == 0:
        raise EmptyDataset("quantile of an empty column")
    s = np.sort(col)
    rank = max(1, math.ceil(q * col.size))
    return float(s[rank - 1])


def sanitise(data: Dataset, config: SanitiserConfig) -> Dataset:
    schema = data.schema
    values = np.array(data.values, copy=True)

    # 1. grouping
    for attr, mapping in config.grouping_map.items():
        spec = schema.attribute(attr)
        if not spec.is_categorical:
            raise UnknownAttributeInConfig(f"grouping on non-categorical attribute {attr!r}")
        j = schema.index_of(attr)
        remap = np.arange(len(spec.categories))
        for old, new in mapping.items():
            if old not in spec.categories:
                raise UnknownAttributeInConfig(
                    f"grouping source {old!r} not a category of {attr!r}"
                )
            if new not in spec.categories:
                raise UnknownAttributeInConfig(
                    f"grouping target {new!r} not a category of {attr!r}"
                )
            remap[spec.categories.index(old)] = spec.categories.index(new)
        values[:, j] = remap[values[:, j].astype(np.intp)].astype(np.float64)

    # 2. rare-category suppression (counts after grouping)
    if config.rare_category_threshold > 0 and values.shape[0] > 0:
        keep = np.ones(values.shape[0], dtype=bool)
        for j, spec in enumerate(schema.attributes):
            if not spec.is_categorical:
                continue
            idx = values[:, j].astype(np.intp)
            counts = np.bincount(idx, minlength=len(spec.categories))
            keep &= counts[idx] >= config.rare_category_threshold
        values = values[keep]

    # 3. quantile capping, thresholds from the input data
    for j, spec in enumerate(schema.attributes):
        if spec.is_categorical:
            continue
        cap = nearest_rank_quantile(data.values[:, j], config.quantile_cap)
        values[:, j] = np.minimum(values[:, j], cap)

    # 4. k-anonymity over binned quasi-identifiers
    if config.k > 1 and schema.quasi_identifiers and values.shape[0] > 0:
        class_key = np.zeros(values.shape[0], dtype=np.int64)
        for name in schema.quasi_identifiers:
            j = schema.index_of(name)
            spec = schema.attributes[j]
            if spec.is_categorical:
                cells = values[:, j].astype(np.int64)
                domain = len(spec.categories)
            else:
                cells = np.array([bin_index(v, spec) for v in values[:, j]], dtype=np.int64)
                domain = spec.bins
            class_key = class_key * domain + cells
        _, inverse, counts = np.unique(class_key, return_inverse=True, return_counts=True)
        values = values[counts[inverse] >= config.k]

    return Dataset(schema, values)


def literal_link(data: Dataset, probe: dict) -> np.ndarray:
    """Indices of rows matching every probe cell exactly.

    The probe maps attribute names to encoded cell values (category index or
    raw float); continuous comparison is exact floating-point equality, so a
    capped or perturbed published value no longer links.
    """
    if not probe:
        raise InvalidConfig("probe must constrain at least one attribute")
    mask = np.ones(data.n_records, dtype=bool)
    for name, value in probe.items():
        j = data.schema.index_of(name)
        mask &= data.values[:, j] == float(value)
    return np.nonzero(mask)[0]


def unique_link(data: Dataset, probe: dict) -> int | None:
    """Row index when exactly one row matches the probe, else None."""
    hits = literal_link(data, probe)
    return int(hits[0]) if hits.size == 1 else None
