import math
from collections import Counter

import numpy as np
import pytest

from synthaudit.data import AttributeSpec, Dataset, SchemaMetadata
from synthaudit.errors import EmptyDataset, InvalidConfig, UnknownAttributeInConfig
from synthaudit.sanitiser import (
    SanitiserConfig,
    literal_link,
    nearest_rank_quantile,
    sanitise,
    unique_link,
)

PASS_THROUGH = SanitiserConfig(k=1, rare_category_threshold=0, quantile_cap=1.0)


def qi_dataset(mixed_schema, class_sizes):
    """Rows grouped into (colour, size-bin) classes of the given sizes."""
    rows = []
    for (colour, size_bin), count in class_sizes.items():
        for _ in range(count):
            rows.append([float(colour), 2.0 * size_bin + 1.0, 0.0])
    return Dataset(mixed_schema, np.asarray(rows))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(k=0),
            dict(rare_category_threshold=-1),
            dict(quantile_cap=0.0),
            dict(quantile_cap=1.5),
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(InvalidConfig):
            SanitiserConfig(**kwargs)

    def test_json_round_trip(self):
        config = SanitiserConfig(
            k=5,
            rare_category_threshold=3,
            quantile_cap=0.9,
            grouping_map={"colour": {"green": "blue"}},
        )
        assert SanitiserConfig.from_json_dict(config.to_json_dict()) == config

    def test_json_defaults(self):
        assert SanitiserConfig.from_json_dict({}) == SanitiserConfig()


class TestKAnonymity:
    CLASS_SIZES = {
        (0, 0): 1,
        (0, 1): 2,
        (1, 2): 4,
        (1, 3): 5,
        (2, 4): 10,
        (2, 0): 12,
    }

    @pytest.mark.parametrize("k", [2, 5, 10])
    def test_exactly_the_small_classes_are_dropped(self, mixed_schema, k):
        data = qi_dataset(mixed_schema, self.CLASS_SIZES)
        out = sanitise(data, SanitiserConfig(k=k, quantile_cap=1.0))

        # independent class key: colour index and floor(size / bin width)
        def key(row):
            return (int(row[0]), int(row[1] // 2.0))

        expected_rows = [
            row for row in data.values if self.CLASS_SIZES[key(row)] >= k
        ]
        assert np.array_equal(out.values, np.asarray(expected_rows))
        counts = Counter(key(row) for row in out.values)
        assert all(c >= k for c in counts.values())

    def test_k_one_is_a_no_op(self, mixed_schema):
        data = qi_dataset(mixed_schema, self.CLASS_SIZES)
        out = sanitise(data, PASS_THROUGH)
        assert np.array_equal(out.values, data.values)

    def test_schema_without_quasi_identifiers_skips_suppression(self):
        schema = SchemaMetadata(
            (AttributeSpec("c", "categorical", categories=("A", "B")),)
        )
        data = Dataset(schema, np.array([[0.0], [1.0]]))
        out = sanitise(data, SanitiserConfig(k=10))
        assert out.n_records == 2


class TestQuantileCapping:
    def test_nearest_rank_matches_sorting(self):
        rng = np.random.default_rng(31)
        col = rng.random(20) * 100.0
        for q in (0.05, 0.5, 0.9, 0.95, 1.0):
            expected = sorted(col.tolist())[max(1, math.ceil(q * 20)) - 1]
            assert nearest_rank_quantile(col, q) == expected

    def test_empty_column(self):
        with pytest.raises(EmptyDataset):
            nearest_rank_quantile(np.array([]), 0.5)

    def test_caps_apply_and_leave_small_values_alone(self, mixed_schema):
        rng = np.random.default_rng(32)
        n = 40
        values = np.column_stack(
            [
                rng.integers(0, 3, n).astype(float),
                rng.random(n) * 10.0,
                rng.integers(0, 2, n).astype(float),
            ]
        )
        data = Dataset(mixed_schema, values)
        config = SanitiserConfig(k=1, quantile_cap=0.9)
        cap = nearest_rank_quantile(values[:, 1], 0.9)
        out = sanitise(data, config)
        assert out.values[:, 1].max() <= cap
        below = values[:, 1] <= cap
        assert np.array_equal(out.values[below, 1], values[below, 1])

    def test_cap_computed_on_input_not_suppressed_rows(self):
        # the two rare-coloured rows hold the top sizes; the cap must still
        # come from the full input column
        schema = SchemaMetadata(
            (
                AttributeSpec("colour", "categorical", categories=("red", "green")),
                AttributeSpec("size", "continuous", lo=0.0, hi=20.0, bins=5),
            )
        )
        colour = np.array([0.0] * 8 + [1.0] * 2)
        size = np.arange(1.0, 11.0)
        data = Dataset(schema, np.column_stack([colour, size]))
        config = SanitiserConfig(k=1, rare_category_threshold=3, quantile_cap=0.8)
        out = sanitise(data, config)
        # input cap is 8.0; a post-suppression cap would have been 7.0
        assert out.n_records == 8
        assert out.values[:, 1].max() == 8.0


class TestGroupingAndSuppression:
    def test_grouping_remaps_categories(self, mixed_dataset):
        config = SanitiserConfig(
            k=1, quantile_cap=1.0, grouping_map={"colour": {"green": "blue"}}
        )
        out = sanitise(mixed_dataset, config)
        assert out.n_records == mixed_dataset.n_records
        assert not (out.values[:, 0] == 2.0).any()
        merged = (mixed_dataset.values[:, 0] == 1.0) | (mixed_dataset.values[:, 0] == 2.0)
        assert (out.values[:, 0] == 1.0).sum() == merged.sum()

    def test_rare_rows_dropped_by_post_grouping_counts(self):
        schema = SchemaMetadata(
            (AttributeSpec("colour", "categorical", categories=("red", "blue", "green")),)
        )
        codes = np.array([0.0] * 5 + [1.0] * 2 + [2.0] * 2)[:, None]
        data = Dataset(schema, codes)
        dropped = sanitise(data, SanitiserConfig(k=1, rare_category_threshold=4))
        assert dropped.n_records == 5
        merged = sanitise(
            data,
            SanitiserConfig(
                k=1, rare_category_threshold=4, grouping_map={"colour": {"green": "blue"}}
            ),
        )
        assert merged.n_records == 9

    def test_row_dropped_when_any_attribute_is_rare(self, mixed_schema):
        values = np.array(
            [
                [0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 1.0, 1.0],  # flag 'yes' is rare even though colour is not
            ]
        )
        data = Dataset(mixed_schema, values)
        out = sanitise(data, SanitiserConfig(k=1, rare_category_threshold=2, quantile_cap=1.0))
        assert out.n_records == 2

    @pytest.mark.parametrize(
        "grouping, message",
        [
            ({"size": {"a": "b"}}, "non-categorical"),
            ({"colour": {"purple": "red"}}, "source"),
            ({"colour": {"red": "purple"}}, "target"),
        ],
    )
    def test_bad_grouping(self, mixed_dataset, grouping, message):
        config = SanitiserConfig(k=1, grouping_map=grouping)
        with pytest.raises(UnknownAttributeInConfig, match=message):
            sanitise(mixed_dataset, config)

    def test_grouping_unknown_attribute(self, mixed_dataset):
        config = SanitiserConfig(k=1, grouping_map={"shape": {"a": "b"}})
        with pytest.raises(InvalidConfig):
            sanitise(mixed_dataset, config)


class TestPipelineProperties:
    @pytest.mark.parametrize(
        "config",
        [
            PASS_THROUGH,
            SanitiserConfig(k=2),
            SanitiserConfig(k=5, rare_category_threshold=2, quantile_cap=0.9),
            SanitiserConfig(k=10, rare_category_threshold=5),
        ],
    )
    def test_never_adds_rows(self, mixed_dataset, config):
        out = sanitise(mixed_dataset, config)
        assert out.n_records <= mixed_dataset.n_records
        assert out.schema is mixed_dataset.schema

    def test_bitwise_deterministic(self, mixed_dataset):
        config = SanitiserConfig(
            k=3,
            rare_category_threshold=2,
            quantile_cap=0.9,
            grouping_map={"colour": {"green": "blue"}},
        )
        first = sanitise(mixed_dataset, config)
        again = sanitise(mixed_dataset, config)
        copy = Dataset(mixed_dataset.schema, np.array(mixed_dataset.values, copy=True))
        third = sanitise(copy, config)
        assert first.values.tobytes() == again.values.tobytes() == third.values.tobytes()

    def test_empty_categorical_only_dataset_passes_through(self):
        schema = SchemaMetadata(
            (AttributeSpec("c", "categorical", categories=("A", "B")),)
        )
        out = sanitise(Dataset(schema, np.empty((0, 1))), SanitiserConfig(k=5))
        assert out.n_records == 0

    def test_empty_dataset_with_continuous_attribute(self, mixed_schema):
        # capping has no input column to take its threshold from
        with pytest.raises(EmptyDataset):
            sanitise(Dataset(mixed_schema, np.empty((0, 3))), PASS_THROUGH)


class TestLinkage:
    def test_literal_link_exact_matches(self, mixed_schema):
        values = np.array(
            [
                [0.0, 2.5, 0.0],
                [0.0, 2.5, 1.0],
                [1.0, 7.5, 1.0],
            ]
        )
        data = Dataset(mixed_schema, values)
        assert literal_link(data, {"colour": 0, "size": 2.5}).tolist() == [0, 1]
        assert literal_link(data, {"colour": 0, "size": 2.5, "flag": 1}).tolist() == [1]
        assert literal_link(data, {"size": 7.4}).tolist() == []

    def test_empty_probe(self, mixed_dataset):
        with pytest.raises(InvalidConfig):
            literal_link(mixed_dataset, {})

    def test_unique_link(self, mixed_schema):
        values = np.array(
            [
                [0.0, 2.5, 0.0],
                [0.0, 2.5, 1.0],
                [1.0, 7.5, 1.0],
            ]
        )
        data = Dataset(mixed_schema, values)
        assert unique_link(data, {"colour": 1}) == 2
        assert unique_link(data, {"colour": 0}) is None  # two matches
        assert unique_link(data, {"colour": 2}) is None  # no match

    def test_capped_value_no_longer_links(self, mixed_schema):
        rng = np.random.default_rng(33)
        n = 30
        values = np.column_stack(
            [
                rng.integers(0, 3, n).astype(float),
                rng.random(n) * 9.0,
                rng.integers(0, 2, n).astype(float),
            ]
        )
        values[0, 1] = 9.9  # unique extreme size
        data = Dataset(mixed_schema, values)
        assert unique_link(data, {"size": 9.9}) == 0
        out = sanitise(data, SanitiserConfig(k=1, quantile_cap=0.9))
        assert unique_link(out, {"size": 9.9}) is None
