import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline

from binaf import ActivationSearch, BinaryNetClassifier, ComplementaryActivation
from binaf.data import make_synthetic, split


@pytest.fixture(scope="module")
def data():
    x, y = make_synthetic(400, 3, 0.5, seed=1)
    return split(x, y)


def test_classifier_fit_predict(data):
    clf = BinaryNetClassifier(af="AF13", epochs=5).fit(data.x_train, data.y_train)
    assert clf.score(data.x_val, data.y_val) > 0.9
    proba = clf.predict_proba(data.x_val)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    assert set(clf.predict(data.x_val)) <= set(clf.classes_)


def test_classifier_string_labels(data):
    y = np.array(["a", "b", "c"])[data.y_train]
    clf = BinaryNetClassifier(epochs=2).fit(data.x_train, y)
    assert set(clf.predict(data.x_val)) <= {"a", "b", "c"}


def test_params_clone():
    clf = BinaryNetClassifier(af="t1:U11-U12-B1", width=16)
    c2 = clone(clf)
    assert c2.get_params() == clf.get_params()
    assert c2.set_params(width=8).width == 8


def test_transformer():
    t = ComplementaryActivation("AF1").fit()
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(t.transform(x), np.sin(x) - np.cos(x), rtol=0, atol=1e-15)
    assert t.thresholds().status == "piecewise"
    assert np.array_equal(ComplementaryActivation("baseline").fit().transform(x), x)


def test_transformer_in_pipeline(data):
    pipe = make_pipeline(ComplementaryActivation("AF13"), BinaryNetClassifier(epochs=2))
    pipe.fit(data.x_train, data.y_train)
    assert pipe.predict(data.x_val).shape == data.y_val.shape


def test_search_analytic():
    s = ActivationSearch(fitness="analytic", pop_size=10, budget=200, random_state=3).fit()
    assert 0 <= s.best_fitness_ <= 1 and len(s.population_) == 10
    assert s.population_[0][1] == s.best_fitness_
    assert s.transform(np.array([0.5])).shape == (1,)


def test_search_train(data):
    s = ActivationSearch(pop_size=4, budget=6, epochs=1, width=16).fit(data.x_train, data.y_train)
    assert s.report_["evaluations"] >= 6


def test_search_requires_data():
    with pytest.raises(ValueError):
        ActivationSearch().fit()
