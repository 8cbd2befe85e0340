import numpy as np
import pytest

from synthaudit.errors import InvalidConfig, UnknownAttributeInConfig
from synthaudit.toy import (
    Coupling,
    MixtureComponent,
    PlantedOutlier,
    ToyAttribute,
    ToyPopulationConfig,
    sample_toy_population,
)


def cat(name, weights, categories=None, weighted=None):
    categories = categories or tuple(weights.keys())
    return ToyAttribute(
        name,
        "categorical",
        categories=tuple(categories),
        weights=tuple(weights.values()),
        weighted=weighted or tuple(weights.keys()),
    )


def gauss(name, mean, std, lo=0.0, hi=1000.0, bins=10):
    return ToyAttribute(
        name,
        "continuous",
        lo=lo,
        hi=hi,
        bins=bins,
        components=(MixtureComponent(1.0, mean, std),),
    )


class TestValidation:
    def test_weight_count_mismatch(self):
        with pytest.raises(InvalidConfig):
            ToyAttribute("c", "categorical", categories=("a", "b"), weights=(1.0,),
                         weighted=("a", "b"))

    def test_nonpositive_weight(self):
        with pytest.raises(InvalidConfig):
            cat("c", {"a": 0.0, "b": 1.0})

    def test_weighted_category_must_be_declared(self):
        with pytest.raises(InvalidConfig):
            ToyAttribute("c", "categorical", categories=("a",), weights=(1.0,),
                         weighted=("z",))

    def test_continuous_needs_components(self):
        with pytest.raises(InvalidConfig):
            ToyAttribute("x", "continuous")

    def test_unknown_kind(self):
        with pytest.raises(InvalidConfig):
            ToyAttribute("x", "both")

    def test_mixture_component_bounds(self):
        with pytest.raises(InvalidConfig):
            MixtureComponent(0.0, 1.0, 1.0)
        with pytest.raises(InvalidConfig):
            MixtureComponent(1.0, 1.0, -1.0)

    def test_coupling_strength_range(self):
        with pytest.raises(InvalidConfig):
            Coupling("a", "b", 1.5)

    def test_coupling_references_checked(self):
        attrs = (cat("a", {"x": 1.0, "y": 1.0}), gauss("g", 100, 10))
        with pytest.raises(UnknownAttributeInConfig):
            ToyPopulationConfig(attrs, couplings=(Coupling("a", "zz", 0.5),))
        with pytest.raises(InvalidConfig):
            ToyPopulationConfig(attrs, couplings=(Coupling("a", "g", 0.5),))
        with pytest.raises(InvalidConfig):
            ToyPopulationConfig(attrs, couplings=(Coupling("a", "a", 0.5),))

    def test_outlier_overrides_checked(self):
        attrs = (cat("a", {"x": 1.0, "y": 1.0}), gauss("g", 100, 10, lo=0, hi=200))
        with pytest.raises(UnknownAttributeInConfig):
            ToyPopulationConfig(attrs, outliers=(PlantedOutlier({"zz": "x"}),))
        with pytest.raises(InvalidConfig):
            ToyPopulationConfig(attrs, outliers=(PlantedOutlier({"a": "nope"}),))
        with pytest.raises(InvalidConfig):
            ToyPopulationConfig(attrs, outliers=(PlantedOutlier({"g": 999.0}),))


class TestJson:
    def test_round_trip(self):
        config = ToyPopulationConfig(
            attributes=(
                cat("a", {"x": 0.7, "y": 0.3}),
                cat("b", {"u": 0.5, "v": 0.5}),
                gauss("g", 300, 80),
            ),
            couplings=(Coupling("a", "b", 0.4),),
            outliers=(PlantedOutlier({"a": "y", "g": 950.0}),),
            quasi_identifiers=("a",),
        )
        again = ToyPopulationConfig.from_json_dict(config.to_json_dict())
        assert again == config

    def test_weights_as_list(self):
        config = ToyPopulationConfig.from_json_dict(
            {
                "attributes": [
                    {"name": "a", "kind": "categorical",
                     "categories": ["x", "y"], "weights": [0.5, 0.5]}
                ]
            }
        )
        assert config.attributes[0].weighted == ("x", "y")

    def test_unknown_kind(self):
        with pytest.raises(InvalidConfig):
            ToyPopulationConfig.from_json_dict(
                {"attributes": [{"name": "a", "kind": "fancy"}]}
            )


class TestSampling:
    def test_category_frequencies(self):
        config = ToyPopulationConfig((cat("a", {"A": 0.9, "B": 0.1}),))
        pop = sample_toy_population(config, 10_000, np.random.default_rng(5))
        freq_a = float(np.mean(pop.values[:, 0] == 0.0))
        assert 0.88 <= freq_a <= 0.92

    def test_unweighted_category_never_sampled(self):
        attr = ToyAttribute(
            "a", "categorical", categories=("x", "y", "ghost"),
            weights=(0.5, 0.5), weighted=("x", "y"),
        )
        pop = sample_toy_population(ToyPopulationConfig((attr,)), 5000,
                                    np.random.default_rng(6))
        assert not (pop.values[:, 0] == 2.0).any()

    def test_continuous_clipped_to_range(self):
        config = ToyPopulationConfig((gauss("g", 990, 200, lo=0, hi=1000),))
        pop = sample_toy_population(config, 2000, np.random.default_rng(7))
        col = pop.values[:, 0]
        assert col.min() >= 0.0 and col.max() <= 1000.0

    def test_bitwise_reproducible(self):
        config = ToyPopulationConfig(
            (cat("a", {"x": 0.6, "y": 0.4}), gauss("g", 300, 50))
        )
        p1 = sample_toy_population(config, 500, np.random.default_rng(9))
        p2 = sample_toy_population(config, 500, np.random.default_rng(9))
        p3 = sample_toy_population(config, 500, np.random.default_rng(10))
        assert p1.values.tobytes() == p2.values.tobytes()
        assert p1.values.tobytes() != p3.values.tobytes()

    def test_size_validation(self):
        config = ToyPopulationConfig(
            (cat("a", {"x": 1.0}),), outliers=(PlantedOutlier({}), PlantedOutlier({}))
        )
        with pytest.raises(InvalidConfig):
            sample_toy_population(config, 1, np.random.default_rng(0))
        with pytest.raises(InvalidConfig):
            sample_toy_population(
                ToyPopulationConfig((cat("a", {"x": 1.0}),)), 0, np.random.default_rng(0)
            )


class TestCouplings:
    def test_full_strength_copies_parent(self):
        config = ToyPopulationConfig(
            attributes=(
                cat("p", {"a": 1.0, "b": 1.0, "c": 1.0}),
                cat("ch", {"u": 1.0, "v": 1.0}),
            ),
            couplings=(Coupling("p", "ch", 1.0),),
        )
        pop = sample_toy_population(config, 1000, np.random.default_rng(11))
        parent = pop.values[:, 0].astype(int)
        child = pop.values[:, 1].astype(int)
        assert np.array_equal(child, parent % 2)

    def test_zero_strength_is_inert(self):
        attrs = (cat("p", {"a": 1.0, "b": 1.0}), cat("ch", {"u": 1.0, "v": 1.0}))
        plain = ToyPopulationConfig(attrs)
        coupled = ToyPopulationConfig(attrs, couplings=(Coupling("p", "ch", 0.0),))
        p1 = sample_toy_population(plain, 400, np.random.default_rng(12))
        p2 = sample_toy_population(coupled, 400, np.random.default_rng(12))
        assert p1.values.tobytes() == p2.values.tobytes()

    def test_continuous_parent_uses_bins(self):
        config = ToyPopulationConfig(
            attributes=(
                gauss("g", 500, 300, lo=0, hi=1000, bins=4),
                cat("ch", {"u": 1.0, "v": 1.0}),
            ),
            couplings=(Coupling("g", "ch", 1.0),),
        )
        pop = sample_toy_population(config, 500, np.random.default_rng(13))
        bins = np.clip((pop.values[:, 0] / 250).astype(int), 0, 3)
        assert np.array_equal(pop.values[:, 1].astype(int), bins % 2)


class TestPlantedOutliers:
    def test_outliers_occupy_last_rows(self):
        config = ToyPopulationConfig(
            attributes=(cat("a", {"x": 1.0, "y": 1.0}), gauss("g", 300, 50)),
            outliers=(
                PlantedOutlier({"a": "y", "g": 950.0}),
                PlantedOutlier({"g": 975.0}),
            ),
        )
        pop = sample_toy_population(config, 100, np.random.default_rng(14))
        assert pop.values[98, 0] == 1.0 and pop.values[98, 1] == 950.0
        assert pop.values[99, 1] == 975.0
        # the unspecified cell was sampled, not zeroed
        assert pop.values[99, 0] in (0.0, 1.0)
