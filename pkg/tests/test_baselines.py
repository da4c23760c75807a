import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featlearn.baselines import (
    FrozenAfterSteps,
    LinearModel,
    RandomFeatures,
    TangentFeatures,
    featurize,
    train_linear,
)
from featlearn.network import NetworkParams, forward, init_unbiased
from featlearn.rng import stream
from featlearn.synthdata import Dataset


def _params(seed=0, m=4, d=5):
    return init_unbiased(m, d, 2, 1.0, 0.5, stream(seed, "init"))


def _data(n=300, d=5, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.normal(0, 1, (n, d)), np.where(rng.random(n) < 0.5, -1, 1))


def test_ntk_dimension():
    p = _params(m=4, d=5)
    X = _data(7).X
    phi = TangentFeatures(p).featurize(X)
    assert phi.shape == (7, 8 * (5 + 2))
    assert TangentFeatures(p).dim == 8 * 7


def test_ntk_a_block_is_random_features():
    p = _params()
    X = _data(20).X
    phi = TangentFeatures(p).featurize(X)
    assert np.array_equal(phi[:, : p.n_neurons], RandomFeatures(p).featurize(X))


def test_ntk_is_directional_derivative():
    # away from kinks, Phi(x) . v equals d/dt g(theta + t v)(x) at t = 0
    rng = np.random.default_rng(3)
    p = NetworkParams(rng.normal(0, 0.2, (6, 4)), rng.uniform(0.3, 0.7, 6), rng.normal(0, 1, 6))
    X = rng.normal(0, 0.2, (10, 4))
    tf = TangentFeatures(p)
    v = rng.normal(0, 1, tf.dim)
    va, VW, vb = tf.split(v)
    h = 1e-6
    up = NetworkParams(p.W + h * VW, p.b + h * vb, p.a + h * va)
    dn = NetworkParams(p.W - h * VW, p.b - h * vb, p.a - h * va)
    fd = (forward(up, X) - forward(dn, X)) / (2 * h)
    assert np.allclose(tf.featurize(X) @ v, fd, atol=1e-7)


def test_ntk_implicit_matches_explicit():
    p = _params(seed=1)
    data = _data(50)
    tf = TangentFeatures(p)
    phi = tf.featurize(data.X)
    v = np.random.default_rng(0).normal(0, 1, tf.dim)
    c = np.random.default_rng(1).normal(0, 1, 50)
    assert np.allclose(tf.scores(v, data.X), phi @ v, atol=1e-12)
    assert np.allclose(tf.feature_dot(c, data.X), phi.T @ c, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000))
def test_random_features_in_unit_interval(seed):
    p = _params(seed)
    X = np.random.default_rng(seed).normal(0, 3, (40, 5))
    phi = featurize(RandomFeatures(p), X)
    assert phi.shape == (40, p.n_neurons)
    assert phi.min() >= 0 and phi.max() <= 1


def test_feature_dimension_check():
    with pytest.raises(ValueError):
        RandomFeatures(_params()).featurize(np.zeros((2, 3)))


def test_frozen_names():
    assert FrozenAfterSteps(_params(), 1).name == "One Step"
    assert FrozenAfterSteps(_params(), 2).name == "Two Step"


def test_linear_fits_separable_features():
    # make the first random feature carry the label
    rng = np.random.default_rng(0)
    p = NetworkParams(np.eye(4, 6), np.full(4, 0.5), np.ones(4))
    X = rng.normal(0, 0.1, (400, 6))
    y = np.where(rng.random(400) < 0.5, -1, 1)
    X[:, 0] = 0.3 * y
    data = Dataset(X, y)
    model, hist = train_linear(RandomFeatures(p), data, data, steps=300, eta=1.0, batch_size=100)
    assert hist.best_test()[0] == 1.0
    assert hist.final_test() == 1.0
    assert model.dim == 4 and model.norm > 0


def test_linear_deterministic_and_anchor_unchanged():
    p = _params(seed=2)
    data = _data(200)
    before = RandomFeatures(p).digest()
    m1, h1 = train_linear(TangentFeatures(p), data, steps=20, batch_size=50, seed=3)
    m2, _ = train_linear(TangentFeatures(p), data, steps=20, batch_size=50, seed=3)
    assert np.array_equal(m1.weights, m2.weights)
    assert RandomFeatures(p).digest() == before
    assert len(h1) == 20


def test_linear_model_json():
    p = _params()
    model = LinearModel(RandomFeatures(p), np.arange(p.n_neurons, dtype=float))
    d = json.loads(model.to_json())
    assert d["feature_map"] == "RF" and d["dim"] == p.n_neurons
    assert d["norm"] == pytest.approx(np.linalg.norm(np.arange(p.n_neurons)))


def test_linear_rejects_zero_steps():
    with pytest.raises(ValueError):
        train_linear(RandomFeatures(_params()), _data(10), steps=0)
