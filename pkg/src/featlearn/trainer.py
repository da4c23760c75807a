"""Gradient-descent drivers.

``paper_schedule`` produces the three-phase schedule: a tiny first step whose
weight decay ``lambda_w = 1 / (2 eta)`` wipes the initial first-layer weights,
a second step that wipes both layers the same way (``lambda = 1 / (2 eta2)``),
then many small unsmoothed steps that mostly fit the output layer.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .network import (
    UNWEIGHTED,
    ClassWeights,
    NetworkParams,
    batch_gradients,
    forward,
)
from .rng import stream

FULL = "full"


@dataclass(frozen=True)
class StepConfig:
    eta: float
    lam_a: float = 0.0
    lam_w: float = 0.0
    sigma: float = 0.0
    batch: Union[str, int] = FULL
    weighted: bool = False

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if min(self.lam_a, self.lam_w, self.sigma) < 0:
            raise ValueError("regularisation and smoothing must be nonnegative")
        if self.batch != FULL and int(self.batch) < 1:
            raise ValueError("batch size must be positive")


def default_sigma_first_two(k):
    return k ** -1.5


def paper_schedule(k, m, T, sigma_x, p, p_min=None, lam_late=None,
                   sigma_first_two=None, batch_size=1000, weighted=False,
                   eta1=None, eta2=1.0, eta_late=None):
    """Step configs for ``t = 1..T``.

    ``eta1`` defaults to ``p^2 sigma_x^2 / (k m^3)``, or
    ``p^2 p_min sigma_x / (k m^3)`` when ``weighted`` (class-imbalanced data).
    Step 2 uses ``eta2`` with ``lambda = 1 / (2 eta2)``, so it also wipes the
    old weights; ``eta2 = 1`` gives ``lambda = 1/2``.
    ``eta_late`` defaults to ``k^2 / (T m^{1/3})`` and ``lam_late`` to its
    upper bound ``k^3 / (sigma_x m^{1/3})``.
    """
    if T < 3:
        raise ValueError("the schedule needs T >= 3")
    if min(k, m, sigma_x, p) <= 0:
        raise ValueError("k, m, sigma_x and p must be positive")
    if sigma_first_two is None:
        sigma_first_two = default_sigma_first_two(k)
    if eta1 is None:
        if weighted:
            if p_min is None:
                raise ValueError("weighted schedule needs p_min")
            eta1 = p**2 * p_min * sigma_x / (k * m**3)
        else:
            eta1 = p**2 * sigma_x**2 / (k * m**3)
    if not eta2 > 0:
        raise ValueError("eta2 must be positive")
    if lam_late is None:
        lam_late = k**3 / (sigma_x * m ** (1.0 / 3.0))
    if eta_late is None:
        eta_late = k**2 / (T * m ** (1.0 / 3.0))
    steps = [
        StepConfig(eta1, 0.0, 1.0 / (2.0 * eta1), sigma_first_two, FULL, weighted),
        StepConfig(eta2, 0.5 / eta2, 0.5 / eta2, sigma_first_two, FULL, weighted),
    ]
    steps += [StepConfig(eta_late, lam_late, lam_late, 0.0, batch_size, False)] * (T - 2)
    return steps


def gd_step(params, cfg, X, y, class_weights=UNWEIGHTED):
    """One update ``theta - eta * grad(loss + penalty)``."""
    w = class_weights if cfg.weighted else UNWEIGHTED
    g = batch_gradients(params, X, y, cfg.sigma, w, cfg.lam_a, cfg.lam_w)
    return NetworkParams(
        params.W - cfg.eta * g.dW,
        params.b - cfg.eta * g.db,
        params.a - cfg.eta * g.da,
    )


@dataclass
class StepRecord:
    step: int
    train_hinge: float
    train_acc: float
    test_acc: float = math.nan
    test_hinge: float = math.nan
    max_cos: float = math.nan
    wall_time: float = 0.0


CSV_COLUMNS = ("step", "train_hinge", "train_acc", "test_acc", "max_cos")


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if math.isnan(v) else repr(float(v))


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def best_test(self):
        """(best test accuracy, its step) over evaluated steps."""
        acc = self.column("test_acc")
        if np.all(np.isnan(acc)):
            return math.nan, -1
        i = int(np.nanargmax(acc))
        return float(acc[i]), self.records[i].step

    def final_test(self):
        acc = self.column("test_acc")
        ok = ~np.isnan(acc)
        return float(acc[ok][-1]) if ok.any() else math.nan

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def hinge_and_acc(scores, y):
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y)
    pred = np.where(scores >= 0, 1, -1)
    return float(np.mean(np.maximum(0.0, 1.0 - y * scores))), float(np.mean(pred == y))


def _batch(cfg_batch, n, seed, step, full_size=None):
    if cfg_batch == FULL:
        if full_size is None or full_size >= n:
            return slice(None)
        return slice(0, full_size)
    return stream(seed, "minibatch", step).integers(0, n, size=int(cfg_batch))


def train(params, schedule, train_data, test_data=None, snapshot_steps=(), seed=0,
          eval_stride=10, class_weights=None, monitor: Optional[Callable] = None,
          full_size=None):
    """Run ``gd_step`` for each config; return final params and history.

    Steps with ``batch="full"`` use the whole training set (or its first
    ``full_size`` rows); later steps draw minibatches with replacement from a
    generator keyed by ``(seed, step)``.  Test metrics are evaluated every
    ``eval_stride`` steps, at steps 1 and 2, and at the last step.
    """
    if not schedule:
        raise ValueError("empty schedule")
    X, y = train_data.X, train_data.y
    if class_weights is None:
        class_weights = ClassWeights.from_labels(y)
    hist = TrainHistory()
    snaps = set(snapshot_steps) | {1, 2}
    if 0 in snaps:
        hist.snapshots[0] = params.copy()
    T = len(schedule)
    t0 = time.perf_counter()
    for t, cfg in enumerate(schedule, start=1):
        idx = _batch(cfg.batch, len(y), seed, t, full_size)
        Xb, yb = X[idx], y[idx]
        params = gd_step(params, cfg, Xb, yb, class_weights)
        if not params.is_finite():
            raise FloatingPointError(f"non-finite parameters after step {t}")
        hinge, acc = hinge_and_acc(forward(params, Xb), yb)
        rec = StepRecord(t, hinge, acc)
        if test_data is not None and (t % eval_stride == 0 or t <= 2 or t == T):
            rec.test_hinge, rec.test_acc = hinge_and_acc(forward(params, test_data.X), test_data.y)
            if monitor is not None:
                rec.max_cos = float(monitor(params))
        rec.wall_time = time.perf_counter() - t0
        hist.records.append(rec)
        if t in snaps:
            hist.snapshots[t] = params.copy()
    return params, hist


def sgd_momentum_train(params, lr, momentum, epochs, batch_size, data, seed=0,
                       test_data=None, monitor=None):
    """Heavy-ball SGD on the plain hinge loss, no regularisation, no smoothing.

    ``v <- momentum * v - lr * grad``; ``theta <- theta + v``; ``v`` starts at
    zero.  One history record per epoch.
    """
    if not 0 <= momentum < 1:
        raise ValueError("momentum must lie in [0, 1)")
    X, y = data.X, data.y
    n = len(y)
    vel = [np.zeros_like(params.W), np.zeros_like(params.b), np.zeros_like(params.a)]
    hist = TrainHistory()
    t0 = time.perf_counter()
    for ep in range(1, epochs + 1):
        order = stream(seed, "minibatch", ep).permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            g = batch_gradients(params, X[idx], y[idx])
            for v, grad in zip(vel, (g.dW, g.db, g.da)):
                v *= momentum
                v -= lr * grad
            params = NetworkParams(params.W + vel[0], params.b + vel[1], params.a + vel[2])
        hinge, acc = hinge_and_acc(forward(params, X), y)
        rec = StepRecord(ep, hinge, acc)
        if test_data is not None:
            rec.test_hinge, rec.test_acc = hinge_and_acc(forward(params, test_data.X), test_data.y)
        if monitor is not None:
            rec.max_cos = float(monitor(params))
        rec.wall_time = time.perf_counter() - t0
        hist.records.append(rec)
    return params, hist
