"""Config-driven toy populations for desk-scale experiments.

Base records are i.i.d.: categoricals from a weight table, continuous values
from a clipped Gaussian mixture. Optional couplings rewrite a child column
from a parent column so structure learners have something to find, and
planted outliers append hand-written rare/extreme records at the end of the
population where select_outlier_targets can pick them up.

Categories may be declared without a sampling weight: such values never
occur in the i.i.d. body and exist only for planting (a record carrying one
is unique in the population by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from synthaudit.data import (
    CATEGORICAL,
    CONTINUOUS,
    AttributeSpec,
    Dataset,
    SchemaMetadata,
    bin_index,
)
from synthaudit.errors import InvalidConfig, UnknownAttributeInConfig


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: float
    std: float

    def __post_init__(self):
        if self.weight <= 0 or not math.isfinite(self.weight):
            raise InvalidConfig("mixture component weight must be positive")
        if self.std < 0 or not math.isfinite(self.std):
            raise InvalidConfig("mixture component std must be >= 0")


@dataclass(frozen=True)
class ToyAttribute:
    name: str
    kind: str
    categories: tuple[str, ...] = ()
    weights: tuple[float, ...] = ()  # aligned with a prefix of categories; see below
    weighted: tuple[str, ...] = ()  # categories that receive sampling weight
    lo: float = 0.0
    hi: float = 1.0
    bins: int = 10
    components: tuple[MixtureComponent, ...] = ()

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            weighted = self.weighted or self.categories
            object.__setattr__(self, "weighted", tuple(weighted))
            if len(self.weights) != len(self.weighted):
                raise InvalidConfig(
                    f"attribute {self.name!r}: {len(self.weighted)} weighted categories "
                    f"but {len(self.weights)} weights"
                )
            if not self.weights:
                raise InvalidConfig(f"attribute {self.name!r}: needs at least one weight")
            for w in self.weights:
                if w <= 0 or not math.isfinite(w):
                    raise InvalidConfig(f"attribute {self.name!r}: weights must be positive")
            for c in self.weighted:
                if c not in self.categories:
                    raise InvalidConfig(
                        f"attribute {self.name!r}: weighted category {c!r} not declared"
                    )
        elif self.kind == CONTINUOUS:
            if not self.components:
                raise InvalidConfig(f"attribute {self.name!r}: needs mixture components")
        else:
            raise InvalidConfig(f"attribute {self.name!r}: unknown kind {self.kind!r}")

    def spec(self) -> AttributeSpec:
        if self.kind == CATEGORICAL:
            return AttributeSpec(self.name, CATEGORICAL, categories=self.categories)
        return AttributeSpec(self.name, CONTINUOUS, lo=self.lo, hi=self.hi, bins=self.bins)


@dataclass(frozen=True)
class Coupling:
    """Rewrites `child` (categorical) from `parent` with probability `strength`.

    The copied value is the parent's category index (or bin index for a
    continuous parent) modulo the child's category count.
    """

    parent: str
    child: str
    strength: float

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise InvalidConfig("coupling strength must lie in [0, 1]")


@dataclass(frozen=True)
class PlantedOutlier:
    """Cell overrides for one appended record; missing cells are sampled."""

    overrides: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ToyPopulationConfig:
    attributes: tuple[ToyAttribute, ...]
    couplings: tuple[Coupling, ...] = ()
    outliers: tuple[PlantedOutlier, ...] = ()
    quasi_identifiers: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "outliers", tuple(self.outliers))
        object.__setattr__(self, "quasi_identifiers", tuple(self.quasi_identifiers))
        names = {a.name for a in self.attributes}
        for c in self.couplings:
            if c.parent not in names or c.child not in names:
                raise UnknownAttributeInConfig(f"coupling references unknown attribute")
            if self._attr(c.child).kind != CATEGORICAL:
                raise InvalidConfig("coupling child must be categorical")
            if c.parent == c.child:
                raise InvalidConfig("coupling parent and child must differ")
        for o in self.outliers:
            for k, v in o.overrides.items():
                if k not in names:
                    raise UnknownAttributeInConfig(f"outlier override for unknown attribute {k!r}")
                a = self._attr(k)
                if a.kind == CATEGORICAL:
                    if str(v) not in a.categories:
                        raise InvalidConfig(
                            f"outlier override {v!r} not a category of {k!r}"
                        )
                else:
                    if not (a.lo <= float(v) <= a.hi):
                        raise InvalidConfig(f"outlier override {v!r} outside range of {k!r}")

    def _attr(self, name: str) -> ToyAttribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise UnknownAttributeInConfig(name)

    def schema(self) -> SchemaMetadata:
        return SchemaMetadata(
            tuple(a.spec() for a in self.attributes), self.quasi_identifiers
        )

    def to_json_dict(self) -> dict:
        attrs = []
        for a in self.attributes:
            if a.kind == CATEGORICAL:
                attrs.append(
                    {
                        "name": a.name,
                        "kind": a.kind,
                        "categories": list(a.categories),
                        "weights": {c: w for c, w in zip(a.weighted, a.weights)},
                    }
                )
            else:
                attrs.append(
                    {
                        "name": a.name,
                        "kind": a.kind,
                        "min": a.lo,
                        "max": a.hi,
                        "bins": a.bins,
                        "components": [
                            {"weight": c.weight, "mean": c.mean, "std": c.std}
                            for c in a.components
                        ],
                    }
                )
        return {
            "attributes": attrs,
            "couplings": [
                {"parent": c.parent, "child": c.child, "strength": c.strength}
                for c in self.couplings
            ],
            "outliers": [{"overrides": dict(o.overrides)} for o in self.outliers],
            "quasi_identifiers": list(self.quasi_identifiers),
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ToyPopulationConfig":
        attrs = []
        for a in d.get("attributes", []):
            kind = a.get("kind")
            if kind == CATEGORICAL:
                weights = a.get("weights")
                if isinstance(weights, dict):
                    weighted = tuple(weights.keys())
                    wvals = tuple(float(v) for v in weights.values())
                else:
                    weighted = tuple(a["categories"])
                    wvals = tuple(float(v) for v in weights)
                attrs.append(
                    ToyAttribute(
                        a["name"],
                        CATEGORICAL,
                        categories=tuple(a["categories"]),
                        weights=wvals,
                        weighted=weighted,
                    )
                )
            elif kind == CONTINUOUS:
                attrs.append(
                    ToyAttribute(
                        a["name"],
                        CONTINUOUS,
                        lo=float(a["min"]),
                        hi=float(a["max"]),
                        bins=int(a.get("bins", 10)),
                        components=tuple(
                            MixtureComponent(float(c["weight"]), float(c["mean"]), float(c["std"]))
                            for c in a["components"]
                        ),
                    )
                )
            else:
                raise InvalidConfig(f"unknown attribute kind {kind!r} in toy config")
        return ToyPopulationConfig(
            attributes=tuple(attrs),
            couplings=tuple(
                Coupling(c["parent"], c["child"], float(c["strength"]))
                for c in d.get("couplings", [])
            ),
            outliers=tuple(
                PlantedOutlier(dict(o.get("overrides", {}))) for o in d.get("outliers", [])
            ),
            quasi_identifiers=tuple(d.get("quasi_identifiers", ())),
        )


def _sample_cell_block(attr: ToyAttribute, count: int, rng: np.random.Generator) -> np.ndarray:
    if attr.kind == CATEGORICAL:
        w = np.asarray(attr.weights, dtype=np.float64)
        w = w / w.sum()
        picks = rng.choice(len(attr.weighted), size=count, p=w)
        full_idx = np.array([attr.categories.index(c) for c in attr.weighted])
        return full_idx[picks].astype(np.float64)
    w = np.asarray([c.weight for c in attr.components], dtype=np.float64)
    w = w / w.sum()
    comp = rng.choice(len(attr.components), size=count, p=w)
    means = np.asarray([c.mean for c in attr.components])[comp]
    stds = np.asarray([c.std for c in attr.components])[comp]
    vals = rng.normal(means, stds)
    return np.clip(vals, attr.lo, attr.hi)


def _apply_couplings(
    config: ToyPopulationConfig,
    schema: SchemaMetadata,
    block: np.ndarray,
    rng: np.random.Generator,
) -> None:
    for c in config.couplings:
        pj = schema.index_of(c.parent)
        cj = schema.index_of(c.child)
        parent_attr = config._attr(c.parent)
        child_spec = schema.attributes[cj]
        if parent_attr.kind == CATEGORICAL:
            src = block[:, pj].astype(np.intp)
        else:
            pspec = schema.attributes[pj]
            src = np.array([bin_index(v, pspec) for v in block[:, pj]], dtype=np.intp)
        copy_mask = rng.random(block.shape[0]) < c.strength
        block[copy_mask, cj] = (src[copy_mask] % len(child_spec.categories)).astype(np.float64)


def sample_toy_population(
    config: ToyPopulationConfig, n: int, rng: np.random.Generator
) -> Dataset:
    """Draw n records: n - len(outliers) i.i.d. rows, then the planted ones.

    Deterministic given the generator state. Planted outliers occupy the last
    rows in declaration order; their unspecified cells are sampled like body
    cells (couplings included, overrides win).
    """
    n_out = len(config.outliers)
    if n < n_out:
        raise InvalidConfig(f"n={n} smaller than {n_out} planted outliers")
    if n == 0:
        raise InvalidConfig("n must be positive")
    schema = config.schema()
    body_n = n - n_out
    block = np.empty((n, schema.n_columns), dtype=np.float64)
    for j, attr in enumerate(config.attributes):
        block[:, j] = _sample_cell_block(attr, n, rng)
    _apply_couplings(config, schema, block, rng)
    for i, out in enumerate(config.outliers):
        row = body_n + i
        for name, v in out.overrides.items():
            j = schema.index_of(name)
            spec = schema.attributes[j]
            if spec.is_categorical:
                block[row, j] = spec.categories.index(str(v))
            else:
                block[row, j] = float(v)
    return Dataset(schema, block)
