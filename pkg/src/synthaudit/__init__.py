"""synthaudit: adversarial privacy evaluation for data publishing mechanisms.

Quantifies what a synthetic-data generator or sanitiser actually buys a
targeted individual, by playing membership and attribute-inference games
against matched raw/published worlds and reporting the privacy gain per
target, per mechanism, per attacker feature set.
"""

from synthaudit.data import (
    AttributeSpec,
    Dataset,
    SchemaMetadata,
    derive_metadata,
    load_csv,
    load_schema,
    write_csv,
)
from synthaudit.dp import PrivacyBudget
from synthaudit.errors import AuditError
from synthaudit.generators import GeneratorSpec, fit, sample, synthesize
from synthaudit.mechanisms import MechanismSpec, publish
from synthaudit.sanitiser import SanitiserConfig, sanitise

__version__ = "0.1.0"

__all__ = [
    "AttributeSpec",
    "AuditError",
    "Dataset",
    "GeneratorSpec",
    "MechanismSpec",
    "PrivacyBudget",
    "SanitiserConfig",
    "SchemaMetadata",
    "derive_metadata",
    "fit",
    "load_csv",
    "load_schema",
    "publish",
    "sample",
    "sanitise",
    "synthesize",
    "write_csv",
]
