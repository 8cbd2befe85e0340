import numpy as np
import pytest

import synthaudit.attacks as attacks
from synthaudit.attacks import (
    AttrGuess,
    MiaAttacker,
    PriorKnowledge,
    attr_inference_guess,
    mia_guess,
    train_mia,
)
from synthaudit.data import Dataset
from synthaudit.errors import InvalidConfig, ReferenceTooSmall
from synthaudit.features import feature_length
from synthaudit.generators import GeneratorSpec
from synthaudit.mechanisms import MechanismSpec
from synthaudit.sanitiser import SanitiserConfig

GEN = MechanismSpec(name="IndHist", kind="generator", generator=GeneratorSpec(kind="ind_hist"))
RAW = MechanismSpec(name="Raw", kind="raw")

TARGET = np.array([0.0, 5.0, 1.0])


@pytest.fixture
def prior(mixed_dataset):
    return PriorKnowledge(
        reference=mixed_dataset,
        mechanism=GEN,
        metadata=mixed_dataset.schema,
        n=10,
        m=10,
    )


class StubModel:
    def __init__(self, out):
        self.out = out

    def predict(self, X):
        return np.array([self.out])


def stub_attacker(schema, target, out=0):
    return MiaAttacker(
        target=np.asarray(target, dtype=float),
        feature_set="naive",
        model=StubModel(out),
        schema=schema,
        n_train_vectors=0,
    )


class TestPriorKnowledge:
    def test_n_too_small(self, mixed_dataset):
        with pytest.raises(InvalidConfig):
            PriorKnowledge(mixed_dataset, GEN, mixed_dataset.schema, n=1, m=10)

    def test_m_too_small(self, mixed_dataset):
        with pytest.raises(InvalidConfig):
            PriorKnowledge(mixed_dataset, GEN, mixed_dataset.schema, n=10, m=0)

    def test_reference_smaller_than_n(self, mixed_dataset):
        with pytest.raises(ReferenceTooSmall):
            PriorKnowledge(mixed_dataset, GEN, mixed_dataset.schema, n=61, m=10)


class TestTrainMia:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(feature_set="everything"),
            dict(shadow_mode="sideways"),
            dict(n_shadows=0),
            dict(synth_per_shadow=0),
        ],
    )
    def test_rejected(self, prior, kwargs):
        defaults = dict(feature_set="naive", n_shadows=2, synth_per_shadow=1)
        defaults.update(kwargs)
        with pytest.raises(InvalidConfig):
            train_mia(
                TARGET,
                prior,
                defaults["feature_set"],
                defaults["n_shadows"],
                defaults["synth_per_shadow"],
                np.random.default_rng(0),
                shadow_mode=defaults.get("shadow_mode", "mirror"),
            )

    def test_labels_balanced_and_vector_count(self, prior, monkeypatch):
        captured = {}
        real = attacks.fit_forest

        def capture(X, y, params, rng):
            captured["X"], captured["y"] = X, y
            return real(X, y, params, rng)

        monkeypatch.setattr(attacks, "fit_forest", capture)
        attacker = train_mia(TARGET, prior, "hist", 4, 3, np.random.default_rng(1))
        y = captured["y"]
        assert len(y) == 24
        assert int(y.sum()) == 12
        assert captured["X"].shape == (24, feature_length(prior.reference.schema, "hist"))
        assert attacker.n_train_vectors == 24

    def test_deterministic_mechanism_replicates_shadow_vectors(
        self, mixed_dataset, monkeypatch
    ):
        prior = PriorKnowledge(mixed_dataset, RAW, None, n=10, m=10)
        captured = {}
        real = attacks.fit_forest

        def capture(X, y, params, rng):
            captured["X"], captured["y"] = X, y
            return real(X, y, params, rng)

        monkeypatch.setattr(attacks, "fit_forest", capture)
        train_mia(TARGET, prior, "naive", 2, 3, np.random.default_rng(2))
        X, y = captured["X"], captured["y"]
        assert y.tolist() == [0, 0, 0, 1, 1, 1] * 2
        for block in range(4):
            rows = X[3 * block : 3 * block + 3]
            assert np.array_equal(rows[0], rows[1])
            assert np.array_equal(rows[0], rows[2])

    @pytest.mark.parametrize(
        "shadow_mode, expected",
        [("mirror", [10, 10, 10, 10]), ("append", [10, 11, 10, 11])],
    )
    def test_shadow_training_sizes(self, prior, monkeypatch, shadow_mode, expected):
        sizes = []
        real = attacks.publish

        def spy(mechanism, training, metadata, m, rng):
            sizes.append(training.n_records)
            return real(mechanism, training, metadata, m, rng)

        monkeypatch.setattr(attacks, "publish", spy)
        train_mia(
            TARGET, prior, "naive", 2, 1, np.random.default_rng(3), shadow_mode=shadow_mode
        )
        assert sizes == expected

    def test_pool_excludes_the_target_itself(self, mixed_schema):
        rows = np.array(
            [
                [0.0, 1.0, 0.0],
                [1.0, 2.0, 0.0],
                [2.0, 3.0, 1.0],
                [0.0, 4.0, 1.0],
                [1.0, 5.0, 0.0],
            ]
        )
        reference = Dataset(mixed_schema, rows)
        prior = PriorKnowledge(reference, RAW, None, n=5, m=5)
        with pytest.raises(ReferenceTooSmall, match="distinct from the target"):
            train_mia(rows[2], prior, "naive", 1, 1, np.random.default_rng(4))

    def test_empty_shadow_publication_flag(self, mixed_dataset):
        smash = MechanismSpec(
            name="San", kind="sanitiser", sanitiser=SanitiserConfig(k=50)
        )
        prior = PriorKnowledge(mixed_dataset, smash, None, n=10, m=10)
        attacker = train_mia(TARGET, prior, "hist", 2, 1, np.random.default_rng(5))
        assert "empty_shadow_publication" in attacker.flags
        assert attacker.n_train_vectors == 4


class TestMiaGuess:
    def test_raw_is_literal_membership(self, mixed_schema):
        rows = np.array(
            [
                [0.0, 1.0, 0.0],
                [1.0, 2.0, 1.0],
                [2.0, 3.0, 0.0],
            ]
        )
        absent = np.array([0.0, 9.0, 1.0])
        for bits in range(8):
            subset = [i for i in range(3) if bits >> i & 1]
            published = Dataset(mixed_schema, rows[subset])
            for i in range(3):
                attacker = stub_attacker(mixed_schema, rows[i])
                assert mia_guess(attacker, published, "raw") == int(i in subset)
            attacker = stub_attacker(mixed_schema, absent)
            assert mia_guess(attacker, published, "raw") == 0

    def test_sanitised_unique_match_wins(self, mixed_schema):
        target = np.array([1.0, 2.0, 1.0])
        published = Dataset(mixed_schema, np.vstack([[0.0, 1.0, 0.0], target]))
        attacker = stub_attacker(mixed_schema, target, out=0)
        assert mia_guess(attacker, published, "sanitised") == 1

    def test_sanitised_empty_publication_means_out(self, mixed_schema):
        attacker = stub_attacker(mixed_schema, TARGET, out=1)
        published = Dataset(mixed_schema, np.empty((0, 3)))
        assert mia_guess(attacker, published, "sanitised") == 0

    def test_sanitised_ambiguous_match_falls_back_to_classifier(self, mixed_schema):
        target = np.array([1.0, 2.0, 1.0])
        published = Dataset(mixed_schema, np.vstack([target, target]))
        assert mia_guess(stub_attacker(mixed_schema, target, out=0), published, "sanitised") == 0
        assert mia_guess(stub_attacker(mixed_schema, target, out=1), published, "sanitised") == 1

    def test_synthetic_uses_classifier(self, mixed_dataset):
        attacker = stub_attacker(mixed_dataset.schema, TARGET, out=1)
        assert mia_guess(attacker, mixed_dataset, "synthetic") == 1
        attacker = stub_attacker(mixed_dataset.schema, TARGET, out=0)
        assert mia_guess(attacker, mixed_dataset, "synthetic") == 0

    def test_unknown_published_kind(self, mixed_dataset):
        attacker = stub_attacker(mixed_dataset.schema, TARGET)
        with pytest.raises(InvalidConfig):
            mia_guess(attacker, mixed_dataset, "plaintext")

    def test_trained_attacker_end_to_end(self, prior, mixed_dataset):
        attacker = train_mia(TARGET, prior, "hist", 3, 2, np.random.default_rng(6))
        guess = mia_guess(attacker, mixed_dataset, "synthetic")
        assert guess in (0, 1)


class TestAttrInference:
    def make(self, mixed_schema, rows):
        return Dataset(mixed_schema, np.asarray(rows, dtype=float))

    def test_known_must_cover_other_attributes(self, mixed_dataset):
        with pytest.raises(InvalidConfig, match="missing"):
            attr_inference_guess(
                mixed_dataset, "raw", {"colour": 0.0}, "flag", np.random.default_rng(0)
            )

    def test_unknown_published_kind(self, mixed_dataset):
        known = {"colour": 0.0, "size": 1.0}
        with pytest.raises(InvalidConfig):
            attr_inference_guess(
                mixed_dataset, "plaintext", known, "flag", np.random.default_rng(0)
            )

    def test_link_path(self, mixed_schema):
        published = self.make(
            mixed_schema,
            [[0.0, 1.5, 0.0], [1.0, 2.5, 1.0], [2.0, 3.5, 0.0]],
        )
        guess = attr_inference_guess(
            published, "raw", {"colour": 1.0, "size": 2.5}, "flag", np.random.default_rng(0)
        )
        assert guess.via == "link"
        assert guess.value == 1.0
        assert guess.success_probability(1.0) == 1.0
        assert guess.success_probability(0.0) == 0.0

    def test_empty_publication_fails_cleanly(self, mixed_schema):
        published = Dataset(mixed_schema, np.empty((0, 3)))
        guess = attr_inference_guess(
            published, "sanitised", {"colour": 0.0, "size": 1.0}, "flag",
            np.random.default_rng(0),
        )
        assert guess.via == "failed"
        assert "empty_publication" in guess.flags
        assert guess.success_probability(0.0) == 0.0

    def test_categorical_forest_path(self, mixed_schema):
        rng = np.random.default_rng(7)
        n = 40
        flag = (np.arange(n) % 2).astype(float)
        rows = np.column_stack([flag, rng.random(n) * 10.0, flag])  # colour == flag
        published = Dataset(mixed_schema, rows)
        guess = attr_inference_guess(
            published, "synthetic", {"size": 5.0, "flag": 1.0}, "colour",
            np.random.default_rng(8),
        )
        assert guess.via == "forest"
        assert guess.value == 1.0
        assert guess.is_categorical
        assert guess.success_probability(1.0) == 1.0
        assert guess.success_probability(2.0) == 0.0

    def test_constant_sensitive_column(self, mixed_schema):
        rng = np.random.default_rng(9)
        n = 12
        rows = np.column_stack(
            [np.zeros(n), rng.random(n) * 10.0, rng.integers(0, 2, n).astype(float)]
        )
        published = Dataset(mixed_schema, rows)
        guess = attr_inference_guess(
            published, "synthetic", {"size": 3.0, "flag": 0.0}, "colour",
            np.random.default_rng(10),
        )
        assert guess.via == "constant"
        assert guess.value == 0.0
        assert "degenerate_labels" in guess.flags

    def test_continuous_linear_path(self, mixed_schema):
        rng = np.random.default_rng(11)
        n = 30
        colour = rng.integers(0, 3, n).astype(float)
        flag = rng.integers(0, 2, n).astype(float)
        size = 2.0 + 3.0 * flag + 0.5 * colour + rng.normal(0.0, 0.2, n)
        published = Dataset(mixed_schema, np.column_stack([colour, size, flag]))
        guess = attr_inference_guess(
            published, "synthetic", {"colour": 1.0, "flag": 1.0}, "size",
            np.random.default_rng(12),
        )
        assert guess.via == "linear"
        assert not guess.is_categorical
        assert guess.linear_model is not None
        assert guess.success_probability(guess.value) >= 1.0 - 1e-9
        assert guess.success_probability(guess.value + 100.0) <= 1e-12

    def test_too_few_rows_for_regression(self, mixed_schema):
        published = self.make(
            mixed_schema, [[0.0, 1.0, 0.0], [1.0, 2.0, 1.0], [2.0, 3.0, 0.0]]
        )
        guess = attr_inference_guess(
            published, "synthetic", {"colour": 0.0, "flag": 0.0}, "size",
            np.random.default_rng(13),
        )
        assert guess.via == "failed"
        assert guess.flags == ("InsufficientRows",)
        assert guess.success_probability(1.0) == 0.0


class TestAttrGuessScoring:
    def test_failed_scores_zero(self):
        guess = AttrGuess(value=np.nan, via="failed", is_categorical=False)
        assert guess.success_probability(3.0) == 0.0

    def test_link_requires_exact_match(self):
        guess = AttrGuess(value=4.25, via="link", is_categorical=False)
        assert guess.success_probability(4.25) == 1.0
        assert guess.success_probability(4.26) == 0.0

    def test_categorical_exact_match(self):
        guess = AttrGuess(value=2.0, via="forest", is_categorical=True)
        assert guess.success_probability(2.0) == 1.0
        assert guess.success_probability(1.0) == 0.0
