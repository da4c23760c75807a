"""Alignment metrics, MDS embeddings of neuron weights, and evaluation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .trainer import hinge_and_acc


@dataclass
class AlignmentReport:
    cosines: np.ndarray
    max_cos: float
    best_index: int
    max_cos_neg: float  # best alignment with the negated target

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["neuron", "cosine"])
            for i, c in enumerate(self.cosines):
                w.writerow([i, repr(float(c))])


def target_direction(A, dictionary):
    return dictionary.columns[:, list(A)].sum(axis=1)


def row_cosines(W, t):
    """Cosine of each row of ``W`` with ``t``; zero rows give 0."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    norms = np.linalg.norm(W, axis=1)
    tn = np.linalg.norm(t)
    if tn == 0:
        raise ValueError("target direction is zero")
    out = np.zeros(len(W))
    nz = norms > 0
    out[nz] = (W[nz] @ t) / (norms[nz] * tn)
    return np.clip(out, -1.0, 1.0)


def max_cosine_to_target(params, A, dictionary):
    W = params.W if hasattr(params, "W") else params
    cos = row_cosines(W, target_direction(A, dictionary))
    i = int(np.argmax(cos))
    return AlignmentReport(cos, float(cos[i]), i, float(-cos.min()))


@dataclass
class Embedding2D:
    points: np.ndarray
    stress: float

    def to_csv(self, path, labels=None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "x", "y"] + (["label"] if labels is not None else []))
            for i, (a, b) in enumerate(self.points):
                row = [i, repr(float(a)), repr(float(b))]
                if labels is not None:
                    row.append(labels[i])
                w.writerow(row)


def cosine_distances(W):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    norms = np.linalg.norm(W, axis=1)
    U = np.zeros_like(W)
    nz = norms > 0
    U[nz] = W[nz] / norms[nz, None]
    C = np.clip(U @ U.T, -1.0, 1.0)
    Dm = 1.0 - C
    np.fill_diagonal(Dm, 0.0)
    return np.maximum(Dm, 0.0)


def classical_mds(W, dims=2):
    """Planar embedding of rows of ``W`` from their cosine distances.

    Double-centres the squared distances, keeps the top eigenpairs (negative
    eigenvalues clipped to zero) and orients every axis so its coordinates
    have a nonnegative sum.  ``stress`` is Kruskal's stress-1.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    n = len(W)
    if n < 3:
        raise ValueError("MDS needs at least 3 points")
    Dm = cosine_distances(W)
    J = np.eye(n) - 1.0 / n
    B = -0.5 * J @ (Dm**2) @ J
    B = 0.5 * (B + B.T)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1][:dims]
    lam = np.maximum(evals[order], 0.0)
    Y = evecs[:, order] * np.sqrt(lam)
    Y -= Y.mean(axis=0)
    sign = np.where(Y.sum(axis=0) < 0, -1.0, 1.0)
    Y *= sign
    Y[np.abs(Y) < 1e-15] = 0.0
    diff = Y[:, None, :] - Y[None, :, :]
    Dhat = np.sqrt(np.sum(diff**2, axis=-1))
    denom = np.sum(Dm**2)
    stress = float(np.sqrt(np.sum((Dm - Dhat) ** 2) / denom)) if denom > 0 else 0.0
    return Embedding2D(Y, stress)


def eval_metrics(model, X, y):
    """Accuracy (``sign(0) = +1``) and mean unweighted hinge of ``model(X)``."""
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("empty data")
    hinge, acc = hinge_and_acc(model(X), y)
    assert 1.0 - acc <= hinge + 1e-12, "0-1 error exceeds hinge loss"
    return {"accuracy": acc, "hinge": hinge}
