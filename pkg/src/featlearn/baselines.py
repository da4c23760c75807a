"""Linear hinge classifiers on fixed (data-independent or frozen) features.

Three feature maps over a network's first layer:

* ``RandomFeatures``: activations of the untrained network;
* ``FrozenAfterSteps``: activations of a snapshot taken after one or two
  training steps (the "One Step" / "Two Step" models);
* ``TangentFeatures``: the parameter gradient of the network output at an
  anchor, laid out as ``[a-block (n), W-block (n*d, row-major), b-block (n)]``.

Tangent features have ``n (d + 2)`` dimensions, so the linear model on them
is evaluated without materialising the feature matrix: the weight vector is
held as a network-shaped triple ``(v_a, V_W, v_b)`` and

``score(x) = sum_i v_a[i] act_i(x) + a_i 1_i(x) (<V_W[i], x> + v_b[i])``

where ``1_i`` is the activation indicator at the anchor (hard, no smoothing).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .activation import trunc_relu, trunc_relu_deriv
from .network import NetworkParams
from .rng import stream
from .trainer import StepRecord, TrainHistory, hinge_and_acc

ROW_BLOCK = 8192


def _params_digest(params):
    h = hashlib.sha256()
    for v in (params.W, params.b, params.a):
        h.update(np.ascontiguousarray(v).tobytes())
    return h.hexdigest()


@dataclass(eq=False)
class RandomFeatures:
    params: NetworkParams
    name = "RF"

    @property
    def dim(self):
        return self.params.n_neurons

    def featurize(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.params.d:
            raise ValueError("input dimension mismatch")
        return trunc_relu(X @ self.params.W.T + self.params.b)

    def digest(self):
        return _params_digest(self.params)


@dataclass(eq=False)
class FrozenAfterSteps(RandomFeatures):
    steps: int = 1

    @property
    def name(self):
        return {1: "One Step", 2: "Two Step"}.get(self.steps, f"{self.steps} Steps")


@dataclass(eq=False)
class TangentFeatures:
    params: NetworkParams
    name = "NTK"

    @property
    def dim(self):
        p = self.params
        return p.n_neurons * (p.d + 2)

    def _parts(self, X):
        Z = X @ self.params.W.T + self.params.b
        return trunc_relu(Z), trunc_relu_deriv(Z) * self.params.a

    def featurize(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.params.d:
            raise ValueError("input dimension mismatch")
        act, gate = self._parts(X)
        wblock = (gate[:, :, None] * X[:, None, :]).reshape(len(X), -1)
        return np.hstack([act, wblock, gate])

    def split(self, v):
        n, d = self.params.n_neurons, self.params.d
        return v[:n], v[n:n + n * d].reshape(n, d), v[n + n * d:]

    def scores(self, v, X):
        va, VW, vb = self.split(v)
        out = []
        for lo in range(0, len(X), ROW_BLOCK):
            Xb = X[lo:lo + ROW_BLOCK]
            act, gate = self._parts(Xb)
            out.append(act @ va + np.sum(gate * (Xb @ VW.T + vb), axis=1))
        return np.concatenate(out)

    def feature_dot(self, coef, X):
        """``Phi(X)^T coef`` without forming ``Phi``."""
        n, d = self.params.n_neurons, self.params.d
        ga = np.zeros(n)
        gW = np.zeros((n, d))
        gb = np.zeros(n)
        for lo in range(0, len(X), ROW_BLOCK):
            Xb, cb = X[lo:lo + ROW_BLOCK], coef[lo:lo + ROW_BLOCK]
            act, gate = self._parts(Xb)
            ga += act.T @ cb
            G = gate * cb[:, None]
            gW += G.T @ Xb
            gb += G.sum(axis=0)
        return np.concatenate([ga, gW.ravel(), gb])

    def digest(self):
        return _params_digest(self.params)


def featurize(kind, X):
    return kind.featurize(X)


class _Explicit:
    """Materialised features for the low-dimensional maps."""

    def __init__(self, kind):
        self.kind = kind
        self._cache = {}

    def phi(self, X):
        key = id(X)
        if key not in self._cache:
            self._cache[key] = (X, self.kind.featurize(X))
        return self._cache[key][1]

    def scores(self, v, X, idx=slice(None)):
        return self.phi(X)[idx] @ v

    def feature_dot(self, coef, X, idx=slice(None)):
        return self.phi(X)[idx].T @ coef


class _Implicit:
    def __init__(self, kind):
        self.kind = kind

    def scores(self, v, X, idx=slice(None)):
        return self.kind.scores(v, X[idx])

    def feature_dot(self, coef, X, idx=slice(None)):
        return self.kind.feature_dot(coef, X[idx])


def _engine(kind):
    return _Implicit(kind) if isinstance(kind, TangentFeatures) else _Explicit(kind)


@dataclass(eq=False)
class LinearModel:
    kind: object
    weights: np.ndarray

    @property
    def dim(self):
        return len(self.weights)

    @property
    def norm(self):
        """The weight-norm diagnostic ``B``."""
        return float(np.linalg.norm(self.weights))

    def predict(self, X):
        return _engine(self.kind).scores(self.weights, np.atleast_2d(np.asarray(X, dtype=float)))

    __call__ = predict

    def to_json(self):
        return json.dumps({"feature_map": self.kind.name, "dim": self.dim,
                           "norm": self.norm, "weights": self.weights.tolist()})


def train_linear(kind, train_data, test_data=None, steps=600, eta=1.0, seed=0,
                 batch_size=1000, full_steps=2, eval_stride=10):
    """Subgradient descent on the unregularised mean hinge over fixed features.

    The first ``full_steps`` steps use the whole training set, the rest
    minibatches drawn with replacement, mirroring the network trainer.  The
    weights start at zero.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    eng = _engine(kind)
    X, y = train_data.X, train_data.y
    v = np.zeros(kind.dim)
    digest = kind.digest()
    hist = TrainHistory()
    for t in range(1, steps + 1):
        if t <= full_steps:
            idx = slice(None)
        else:
            idx = stream(seed, "minibatch", t).integers(0, len(y), size=batch_size)
        yb = y[idx]
        s = eng.scores(v, X, idx)
        coef = np.where(yb * s <= 1.0, yb, 0.0) / len(yb)
        v = v + eta * eng.feature_dot(coef, X, idx)
        hinge, acc = hinge_and_acc(eng.scores(v, X, idx), yb)
        rec = StepRecord(t, hinge, acc)
        if test_data is not None and (t % eval_stride == 0 or t <= 2 or t == steps):
            rec.test_hinge, rec.test_acc = hinge_and_acc(eng.scores(v, test_data.X), test_data.y)
        hist.records.append(rec)
    if kind.digest() != digest:
        raise RuntimeError("feature map changed during training")
    return LinearModel(kind, v), hist
