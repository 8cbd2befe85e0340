import numpy as np
import pytest

from synthaudit.errors import EmptyDataset, InvalidConfig
from synthaudit.learners import ForestParams, RandomForest, fit_forest


def blobs(n_per=60, gap=8.0, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(0.0, 1.0, (n_per, 2))
    b = rng.normal(gap, 1.0, (n_per, 2))
    X = np.vstack([a, b])
    y = np.array([0] * n_per + [1] * n_per)
    return X, y


class TestParams:
    def test_validation(self):
        with pytest.raises(InvalidConfig):
            ForestParams(n_trees=0)
        with pytest.raises(InvalidConfig):
            ForestParams(min_leaf=0)


class TestFit:
    def test_separable_accuracy(self):
        X, y = blobs()
        model = fit_forest(X, y, ForestParams(n_trees=50), np.random.default_rng(1))
        Xt, yt = blobs(seed=99)
        assert float(np.mean(model.predict(Xt) == yt)) >= 0.99

    def test_deterministic_given_seed(self):
        X, y = blobs(seed=3)
        probe = np.random.default_rng(4).normal(4.0, 3.0, (40, 2))
        m1 = fit_forest(X, y, rng=np.random.default_rng(42))
        m2 = fit_forest(X, y, rng=np.random.default_rng(42))
        assert np.array_equal(m1.predict(probe), m2.predict(probe))

    def test_labels_kept_as_given(self):
        X, y = blobs(seed=5)
        model = fit_forest(X, y + 5, ForestParams(n_trees=10), np.random.default_rng(0))
        assert set(np.unique(model.predict(X))) <= {5, 6}

    def test_degenerate_single_class(self):
        X = np.random.default_rng(0).random((10, 3))
        model = fit_forest(X, np.full(10, 7), rng=np.random.default_rng(0))
        assert model.degenerate
        assert model.trees == []
        assert np.array_equal(model.predict(X), np.full(10, 7))

    def test_input_validation(self):
        with pytest.raises(InvalidConfig):
            fit_forest(np.zeros(5), np.zeros(5), rng=np.random.default_rng(0))
        with pytest.raises(EmptyDataset):
            fit_forest(np.zeros((0, 2)), np.zeros(0), rng=np.random.default_rng(0))

    def test_no_bootstrap_mode(self):
        X, y = blobs(seed=8)
        model = fit_forest(
            X, y, ForestParams(n_trees=5, bootstrap=False), np.random.default_rng(2)
        )
        assert float(np.mean(model.predict(X) == y)) == 1.0


class TestPredict:
    def test_single_record_reshaped(self):
        X, y = blobs(seed=6)
        model = fit_forest(X, y, ForestParams(n_trees=10), np.random.default_rng(0))
        out = model.predict(X[0])
        assert out.shape == (1,)

    def test_feature_count_checked(self):
        X, y = blobs(seed=7)
        model = fit_forest(X, y, ForestParams(n_trees=5), np.random.default_rng(0))
        with pytest.raises(InvalidConfig):
            model.predict(np.zeros((3, 5)))

    def test_vote_tie_goes_to_lowest_class(self):
        # two constant single-leaf trees, one per class: a guaranteed 1-1 tie
        leaf = lambda cls: (
            np.array([-1], dtype=np.int64),
            np.array([0.0]),
            np.array([0], dtype=np.int64),
            np.array([0], dtype=np.int64),
            np.array([cls], dtype=np.int64),
        )
        model = RandomForest(
            trees=[leaf(0), leaf(1)],
            classes=np.array([3, 7]),
            n_features=2,
            degenerate=False,
        )
        assert model.predict(np.zeros((4, 2))).tolist() == [3, 3, 3, 3]
