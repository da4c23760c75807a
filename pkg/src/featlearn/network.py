"""Two-layer truncated-ReLU network with a smoothed hinge loss.

``g(x) = sum_i a_i * act(<w_i, x> + b_i)``; with smoothing ``sigma > 0`` the
activation is replaced by its Gaussian-smoothed version, i.e. the network is
averaged over independent per-neuron pre-activation noise.

Gradients are exact for the loss as implemented.  The hinge subgradient
counts ``y g = 1`` as active.  Large batches are processed in fixed-size row
blocks whose partial sums are added in block order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .activation import smoothed_act, smoothed_act_deriv, trunc_relu

ROW_BLOCK = 8192


@dataclass(eq=False)
class NetworkParams:
    W: np.ndarray
    b: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        n = self.W.shape[0]
        if self.W.ndim != 2 or self.b.shape != (n,) or self.a.shape != (n,):
            raise ValueError("inconsistent parameter shapes")

    @property
    def n_neurons(self):
        return self.W.shape[0]

    @property
    def m(self):
        return self.n_neurons // 2

    @property
    def d(self):
        return self.W.shape[1]

    def copy(self):
        return NetworkParams(self.W.copy(), self.b.copy(), self.a.copy())

    def is_finite(self):
        return all(np.all(np.isfinite(v)) for v in (self.W, self.b, self.a))

    def __call__(self, X):
        return forward(self, X)

    # checkpoint layout: neuron count, d, then W row-major, b, a
    def to_flat(self):
        head = np.array([self.n_neurons, self.d], dtype=float)
        return np.concatenate([head, self.W.ravel(), self.b, self.a])

    @classmethod
    def from_flat(cls, flat):
        flat = np.asarray(flat, dtype=float)
        n, d = int(flat[0]), int(flat[1])
        W = flat[2 : 2 + n * d].reshape(n, d)
        b = flat[2 + n * d : 2 + n * d + n]
        a = flat[2 + n * d + n : 2 + n * d + 2 * n]
        return cls(W.copy(), b.copy(), a.copy())

    def save(self, path):
        path = str(path)
        if path.endswith(".json"):
            with open(path, "w") as fh:
                json.dump({"n_neurons": self.n_neurons, "d": self.d,
                           "W": self.W.tolist(), "b": self.b.tolist(), "a": self.a.tolist()}, fh)
        else:
            self.to_flat().astype("<f8").tofile(path)

    @classmethod
    def load(cls, path):
        path = str(path)
        if path.endswith(".json"):
            with open(path) as fh:
                d = json.load(fh)
            return cls(np.array(d["W"]), np.array(d["b"]), np.array(d["a"]))
        return cls.from_flat(np.fromfile(path, dtype="<f8"))


@dataclass
class GradientSet:
    dW: np.ndarray
    db: np.ndarray
    da: np.ndarray


@dataclass(frozen=True)
class ClassWeights:
    w_plus: float = 1.0
    w_minus: float = 1.0

    def __post_init__(self):
        if not (self.w_plus > 0 and self.w_minus > 0):
            raise ValueError("class weights must be positive")

    @classmethod
    def balanced_for(cls, pr_neg):
        """``w_v = 1 / (2 Pr[y = v])``."""
        return cls(1.0 / (2.0 * (1.0 - pr_neg)), 1.0 / (2.0 * pr_neg))

    @classmethod
    def from_labels(cls, y):
        return cls.balanced_for(float(np.mean(np.asarray(y) < 0)))

    @property
    def p_min(self):
        """Smaller class probability implied by balanced weights."""
        return 1.0 / (2.0 * max(self.w_plus, self.w_minus))

    def of(self, y):
        return np.where(np.asarray(y) > 0, self.w_plus, self.w_minus)


UNWEIGHTED = ClassWeights()


def init_unbiased(m, d, k, sigma_x, p, rng):
    """Mirrored init: ``w_{m+i} = w_i``, ``b_{m+i} = b_i``, ``a_{m+i} = -a_i``.

    Scales: ``sigma_w = 1/k``, ``sigma_b = 1/k^2``, ``sigma_a = sigma_x^2 / (p k^2)``.
    """
    if min(m, d, k) < 1 or sigma_x <= 0 or p <= 0:
        raise ValueError("init_unbiased needs m, d, k >= 1 and sigma_x, p > 0")
    W = rng.normal(0.0, 1.0 / k, size=(m, d))
    b = rng.normal(0.0, 1.0 / k**2, size=m)
    a = rng.normal(0.0, sigma_x**2 / (p * k**2), size=m)
    return NetworkParams(np.vstack([W, W]), np.concatenate([b, b]), np.concatenate([a, -a]))


def init_gaussian(m, d, scale, rng):
    return NetworkParams(
        rng.normal(0.0, 1.0, size=(2 * m, d)) * scale,
        rng.normal(0.0, 1.0, size=2 * m) * scale,
        rng.normal(0.0, 1.0, size=2 * m) * scale,
    )


def _as_batch(params, X):
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if X2.shape[1] != params.d:
        raise ValueError(f"input dimension {X2.shape[1]} != network dimension {params.d}")
    return X2, single


def preactivations(params, X):
    X2, _ = _as_batch(params, X)
    return X2 @ params.W.T + params.b


def forward(params, X):
    """Network output for one input (scalar) or a batch (vector)."""
    X2, single = _as_batch(params, X)
    out = np.concatenate([
        trunc_relu(X2[lo:lo + ROW_BLOCK] @ params.W.T + params.b) @ params.a
        for lo in range(0, len(X2), ROW_BLOCK)
    ]) if len(X2) else np.zeros(0)
    return float(out[0]) if single else out


def forward_smoothed(params, X, sigma):
    if sigma == 0:
        return forward(params, X)
    X2, single = _as_batch(params, X)
    out = np.concatenate([
        smoothed_act(X2[lo:lo + ROW_BLOCK] @ params.W.T + params.b, sigma) @ params.a
        for lo in range(0, len(X2), ROW_BLOCK)
    ])
    return float(out[0]) if single else out


def regularizer(params, lam_a, lam_w):
    return lam_a * float(params.a @ params.a) + lam_w * float(np.sum(params.W * params.W))


def batch_loss(params, X, y, sigma=0.0, weights=UNWEIGHTED, lam_a=0.0, lam_w=0.0):
    """Mean weighted hinge of the smoothed network plus the l2 penalty."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty batch")
    g = forward_smoothed(params, X, sigma)
    hinge = np.maximum(0.0, 1.0 - y * g)
    return float(np.mean(weights.of(y) * hinge)) + regularizer(params, lam_a, lam_w)


def batch_gradients(params, X, y, sigma=0.0, weights=UNWEIGHTED, lam_a=0.0, lam_w=0.0):
    """Exact gradient of :func:`batch_loss` with respect to ``(W, b, a)``."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    n = len(y)
    if n == 0:
        raise ValueError("empty batch")
    dW = np.zeros_like(params.W)
    db = np.zeros_like(params.b)
    da = np.zeros_like(params.a)
    for lo in range(0, n, ROW_BLOCK):
        Xb, yb = X[lo:lo + ROW_BLOCK], y[lo:lo + ROW_BLOCK]
        Z = Xb @ params.W.T + params.b
        act = smoothed_act(Z, sigma)
        g = act @ params.a
        # d(loss)/dg = -weight * y on the active side of the hinge
        coef = np.where(yb * g <= 1.0, weights.of(yb) * yb, 0.0) / n
        da -= act.T @ coef
        G = smoothed_act_deriv(Z, sigma) * coef[:, None]
        db -= G.sum(axis=0)
        dW -= G.T @ Xb
    dW *= params.a[:, None]
    db *= params.a
    dW += 2.0 * lam_w * params.W
    da += 2.0 * lam_a * params.a
    return GradientSet(dW, db, da)
