"""The three publishing mechanisms a challenger can apply to a training set.

raw        publish the training records as they are.
sanitiser  publish the deterministic anonymisation of the training records.
generator  publish m fresh records sampled from a model fitted on them.

publish() is the single entry point used by shadow training and by every
game iteration, so the adversary and the challenger run literally the same
code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from synthaudit.data import Dataset, SchemaMetadata
from synthaudit.errors import InvalidConfig
from synthaudit.generators import GeneratorSpec, synthesize
from synthaudit.sanitiser import SanitiserConfig, sanitise

MECHANISM_KINDS = ("raw", "sanitiser", "generator")


@dataclass(frozen=True)
class MechanismSpec:
    name: str
    kind: str
    generator: GeneratorSpec | None = None
    sanitiser: SanitiserConfig | None = None

    def __post_init__(self):
        if self.kind not in MECHANISM_KINDS:
            raise InvalidConfig(f"unknown mechanism kind {self.kind!r}")
        if self.kind == "generator" and self.generator is None:
            raise InvalidConfig("generator mechanism requires a GeneratorSpec")
        if self.kind == "sanitiser" and self.sanitiser is None:
            raise InvalidConfig("sanitiser mechanism requires a SanitiserConfig")
        if not self.name:
            raise InvalidConfig("mechanism needs a name")

    @property
    def published_kind(self) -> str:
        """What the adversary sees: 'raw', 'sanitised' or 'synthetic'."""
        return {"raw": "raw", "sanitiser": "sanitised", "generator": "synthetic"}[self.kind]

    @property
    def deterministic(self) -> bool:
        return self.kind in ("raw", "sanitiser")

    def to_json_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.generator is not None:
            d["generator"] = self.generator.to_json_dict()
        if self.sanitiser is not None:
            d["sanitiser"] = self.sanitiser.to_json_dict()
        return d

    @staticmethod
    def from_json_dict(d: dict) -> "MechanismSpec":
        return MechanismSpec(
            name=d["name"],
            kind=d["kind"],
            generator=GeneratorSpec.from_json_dict(d["generator"]) if "generator" in d else None,
            sanitiser=SanitiserConfig.from_json_dict(d["sanitiser"]) if "sanitiser" in d else None,
        )


def publish(
    mechanism: MechanismSpec,
    training: Dataset,
    metadata: SchemaMetadata | None,
    m: int,
    rng: np.random.Generator,
) -> Dataset:
    if mechanism.kind == "raw":
        return training
    if mechanism.kind == "sanitiser":
        return sanitise(training, mechanism.sanitiser)
    return synthesize(mechanism.generator, training, metadata, m, rng)
