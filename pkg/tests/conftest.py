import numpy as np
import pytest

from synthaudit.data import AttributeSpec, Dataset, SchemaMetadata


@pytest.fixture
def mixed_schema():
    return SchemaMetadata(
        (
            AttributeSpec("colour", "categorical", categories=("red", "blue", "green")),
            AttributeSpec("size", "continuous", lo=0.0, hi=10.0, bins=5),
            AttributeSpec("flag", "categorical", categories=("no", "yes")),
        ),
        quasi_identifiers=("colour", "size"),
    )


@pytest.fixture
def mixed_dataset(mixed_schema):
    rng = np.random.default_rng(17)
    n = 60
    values = np.column_stack(
        [
            rng.integers(0, 3, n).astype(float),
            rng.random(n) * 10.0,
            rng.integers(0, 2, n).astype(float),
        ]
    )
    return Dataset(mixed_schema, values)


@pytest.fixture
def chain_training():
    """Three categorical attributes with a planted a -> b -> c chain."""
    rng = np.random.default_rng(42)
    n = 2000
    a = rng.integers(0, 3, n)
    b = np.where(rng.random(n) < 0.85, a, rng.integers(0, 3, n))
    c = np.where(rng.random(n) < 0.85, b, rng.integers(0, 3, n))
    schema = SchemaMetadata(
        tuple(
            AttributeSpec(nm, "categorical", categories=("x", "y", "z"))
            for nm in ("a", "b", "c")
        )
    )
    return Dataset(schema, np.column_stack([a, b, c]).astype(np.float64))
