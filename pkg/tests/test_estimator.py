"""Estimator API conformance and a small learning check."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from crowdviews import MultiviewTripletEmbedder


def toy_problem(seed=0, n=12):
    """Items carry two independent binary attributes in disjoint pixels;
    one worker judges by each attribute."""
    rng = np.random.default_rng(seed)
    attrs = rng.integers(0, 2, size=(n, 2))
    X = rng.normal(size=(n, 8)) * 0.01
    X += 0.2
    X[:, 0] += attrs[:, 0] * 0.8
    X[:, 4] += attrs[:, 1] * 0.8
    X = np.clip(X, 0, 1)
    triplets = []
    for _ in range(220):
        a, b, c = rng.choice(n, size=3, replace=False)
        for w, attr in (("color-ish", 0), ("shape-ish", 1)):
            trio = attrs[[a, b, c], attr]
            if trio[0] == trio[1] and trio[2] != trio[0]:
                triplets.append((w, a, b, c))
            elif trio[0] == trio[2] and trio[1] != trio[0]:
                triplets.append((w, a, c, b))
            elif trio[1] == trio[2] and trio[0] != trio[1]:
                triplets.append((w, b, c, a))
    return X, triplets


def small_estimator(**kw):
    base = dict(
        n_views=2, embed_dim=2, trunk_hidden=(16, 8), epochs=30, batch_size=32,
        learning_rate=5e-3, random_state=0,
    )
    base.update(kw)
    return MultiviewTripletEmbedder(**base)


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        est = small_estimator()
        params = est.get_params()
        assert params["n_views"] == 2
        est.set_params(embed_dim=5)
        assert est.embed_dim == 5

    def test_clone(self):
        est = small_estimator(epochs=3)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_not_fitted_error(self):
        with pytest.raises(NotFittedError):
            small_estimator().transform(np.zeros((2, 8)))


class TestFitTransform:
    def test_shapes(self):
        X, triplets = toy_problem()
        est = small_estimator(epochs=3).fit(X, triplets)
        assert est.transform(X).shape == (len(X), 4)
        assert est.embed(X).shape == (len(X), 2, 2)
        assert est.predict_proba(X, triplets[:5]).shape == (5, 3)
        assert set(est.predict(X, triplets[:5])) <= {0, 1, 2}

    def test_learning_improves_score(self):
        X, triplets = toy_problem()
        untrained = small_estimator(epochs=0).fit(X, triplets)
        trained = small_estimator(epochs=40).fit(X, triplets)
        assert trained.score(X, triplets) > untrained.score(X, triplets) + 0.2

    def test_deterministic_given_state(self):
        X, triplets = toy_problem()
        a = small_estimator(epochs=4).fit(X, triplets)
        b = small_estimator(epochs=4).fit(X, triplets)
        np.testing.assert_array_equal(a.transform(X), b.transform(X))

    def test_preference_shares_shape(self):
        X, triplets = toy_problem()
        est = small_estimator(epochs=3).fit(X, triplets)
        shares = est.preference_shares()
        assert shares.shape == (2, 2)
        np.testing.assert_allclose(shares.sum(axis=1), 1.0, atol=1e-12)

    def test_rejects_nonfinite(self):
        X, triplets = toy_problem()
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            small_estimator().fit(X, triplets)

    def test_4d_items(self):
        rng = np.random.default_rng(1)
        X = rng.random((8, 3, 3, 1))
        triplets = [("w", 0, 1, 2), ("w", 3, 4, 5), ("w", 6, 7, 0)]
        est = small_estimator(trunk_hidden=(6, 4), epochs=2).fit(X, triplets)
        assert est.config_.height == 3 and est.config_.channels == 1
        assert est.transform(X).shape == (8, 4)
