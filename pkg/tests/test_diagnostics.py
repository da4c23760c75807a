import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from featlearn.diagnostics import (
    Embedding2D,
    classical_mds,
    cosine_distances,
    eval_metrics,
    max_cosine_to_target,
    row_cosines,
    target_direction,
)
from featlearn.network import NetworkParams
from featlearn.synthdata import make_orthonormal_dictionary


def test_row_cosines_cases():
    t = np.array([1.0, 0.0])
    W = np.array([[2.0, 0.0], [-3.0, 0.0], [0.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    assert np.allclose(row_cosines(W, t), [1.0, -1.0, 0.0, 0.0, 1 / np.sqrt(2)])


def test_zero_target_rejected():
    with pytest.raises(ValueError):
        row_cosines(np.ones((2, 2)), np.zeros(2))


def test_max_cosine_report():
    dic = make_orthonormal_dictionary(8, 4, seed=0)
    t = target_direction((0, 2), dic)
    W = np.vstack([0.5 * t, -t, dic.columns[:, 1]])
    rep = max_cosine_to_target(NetworkParams(W, np.zeros(3), np.zeros(3)), (0, 2), dic)
    assert rep.max_cos == pytest.approx(1.0) and rep.best_index == 0
    assert rep.max_cos_neg == pytest.approx(1.0)
    assert rep.cosines[2] == pytest.approx(0.0, abs=1e-12)


def test_alignment_csv(tmp_path):
    dic = make_orthonormal_dictionary(5, 3, seed=1)
    rep = max_cosine_to_target(np.eye(3, 5), (0,), dic)
    rep.to_csv(tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines[0] == "neuron,cosine" and len(lines) == 4


def test_cosine_distance_range():
    W = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 2.0]])
    Dm = cosine_distances(W)
    assert Dm[0, 1] == pytest.approx(2.0) and Dm[0, 2] == pytest.approx(1.0)
    assert np.all(np.diag(Dm) == 0)


def test_mds_recovers_triangle():
    # three unit vectors in a plane at 0, 90, 180 degrees: cosine distances 1, 2, 1
    W = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    emb = classical_mds(W)
    Dm = cosine_distances(W)
    P = emb.points
    got = np.linalg.norm(P[:, None] - P[None, :], axis=-1)
    assert np.max(np.abs(got - Dm)) <= 1e-6
    assert emb.stress <= 1e-6


def test_mds_identical_rows_collapse():
    W = np.tile([1.0, 2.0, 3.0], (5, 1))
    emb = classical_mds(W)
    assert np.allclose(emb.points, 0.0, atol=1e-10)


def test_mds_needs_three_points():
    with pytest.raises(ValueError):
        classical_mds(np.eye(2))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 4), elements=st.floats(-3, 3)).filter(
    lambda W: np.all(np.linalg.norm(W, axis=1) > 1e-3)))
def test_mds_centred_and_deterministic(W):
    e1 = classical_mds(W)
    e2 = classical_mds(W)
    assert np.array_equal(e1.points, e2.points)
    assert np.max(np.abs(e1.points.mean(axis=0))) <= 1e-10
    assert np.all(e1.points.sum(axis=0) >= -1e-10)
    assert 0 <= e1.stress <= 1 + 1e-9


def test_embedding_csv(tmp_path):
    Embedding2D(np.array([[0.0, 1.0], [2.0, 3.0]]), 0.0).to_csv(tmp_path / "e.csv", ["p", "q"])
    assert (tmp_path / "e.csv").read_text().splitlines()[2] == "1,2.0,3.0,q"


def test_eval_metrics():
    X = np.array([[2.0], [-0.5], [0.0]])
    y = np.array([1, 1, -1])
    out = eval_metrics(lambda Z: Z[:, 0], X, y)
    # scores 2, -0.5, 0 ; sign(0)=+1 counts the last as wrong
    assert out["accuracy"] == pytest.approx(1 / 3)
    assert out["hinge"] == pytest.approx((0 + 1.5 + 1) / 3)
    with pytest.raises(ValueError):
        eval_metrics(lambda Z: Z[:, 0], X[:0], y[:0])
