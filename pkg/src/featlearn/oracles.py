"""Small-scale checks of the constructive facts behind the method.

* ``build_gstar``: an explicit ``3(k+1)``-neuron truncated-ReLU network that
  reproduces the label exactly on noiseless in-model inputs;
* ``estimate_gradient_components``: Monte-Carlo projection of the first-step
  weight gradient onto the dictionary columns;
* ``parity_correlation`` / ``sq_dimension_check``: exact enumeration showing
  distinct sparse parities are uncorrelated under the uniform distribution.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .activation import smoothed_act, smoothed_act_deriv
from .network import UNWEIGHTED, NetworkParams
from .rng import chunks, stream
from .synthdata import (
    Codebook,
    ParityMixture,
    ProductBernoulli,
    UniformNoStructure,
    gen_dataset,
)


def relu(z):
    return np.maximum(z, 0.0)


def peak(s, a, b, z):
    """Triangle of height ``a*b`` on ``[s-b, s+b]`` built from three ReLUs."""
    return a * relu(z - s + b) - 2 * a * relu(z - s) + a * relu(z - s - b)


def expected_relevant_count(dist, rule):
    """``sum_{j in A} E[phi_j]`` where the family allows it, else ``None``."""
    A = list(rule.A)
    if isinstance(dist, ProductBernoulli):
        return float(np.sum(np.asarray(dist.q)[A]))
    if isinstance(dist, (ParityMixture, UniformNoStructure)):
        return rule.k / 2.0
    if isinstance(dist, Codebook):
        words = np.vstack([dist.positive, dist.negative])
        return float(words.sum(axis=1).mean())
    return None


def relevant_offset(spec):
    """``sum_{j in A} <M_j, mean>``: the relevant count that the fitted
    normalisation maps to zero.  Equals the expected count up to the
    calibration error, and is what makes ``build_gstar`` exact on
    normalised data."""
    M = spec.dictionary.columns
    return float(np.sum(M[:, list(spec.rule.A)].T @ spec.mean))


def _gstar_terms(rule, mu, height, shift):
    """(output coef, relu bias) pairs for one of the two peak layouts."""
    terms = []
    for p in range(rule.k + 1):
        sign = 1.0 if p in rule.P else -1.0
        s = p - mu + shift
        for coef, off in ((height, 0.5), (-2 * height, 0.0), (height, -0.5)):
            terms.append((sign * coef, -s + off))
    return terms


def build_gstar(rule, mu_A, sigma_x, dictionary):
    """Exact-fit network with ``3(k+1)`` neurons along ``sum_{j in A} M_j``.

    Two peak layouts are available (height 2 centred on each count, or
    height 4 centred a quarter to the right); the first one whose ReLU
    biases all have magnitude >= 1/8 is used, then everything is rescaled by
    ``4k`` into the linear range of the truncated ReLU.
    """
    k = rule.k
    w = sigma_x * dictionary.columns[:, list(rule.A)].sum(axis=1)
    chosen = None
    for height, shift in ((2.0, 0.0), (4.0, 0.25)):
        terms = _gstar_terms(rule, mu_A, height, shift)
        if all(abs(bias) >= 0.125 for _, bias in terms):
            chosen = terms
            break
    if chosen is None:  # cannot happen: the two layouts' biases are 1/4 apart
        raise RuntimeError("no bias layout clears 1/8")
    scale = 4.0 * k
    a = np.array([c * scale for c, _ in chosen])
    b = np.array([bias / scale for _, bias in chosen])
    W = np.tile(w / scale, (len(chosen), 1))
    return NetworkParams(W, b, a)


@dataclass
class GradientComponentReport:
    neurons: list
    T: np.ndarray  # (neurons, D)
    stderr: np.ndarray
    A: tuple
    n_mc: int
    notes: list = field(default_factory=list)

    def _masks(self):
        inA = np.zeros(self.T.shape[1], dtype=bool)
        inA[list(self.A)] = True
        return inA

    @property
    def mean_abs_A(self):
        return float(np.mean(np.abs(self.T[:, self._masks()])))

    @property
    def mean_abs_notA(self):
        return float(np.mean(np.abs(self.T[:, ~self._masks()])))

    @property
    def snr(self):
        off = self.mean_abs_notA
        return math.inf if off == 0 else self.mean_abs_A / off

    def to_json(self):
        return json.dumps({
            "neurons": list(map(int, self.neurons)), "A": list(self.A), "n_mc": self.n_mc,
            "mean_abs_A": self.mean_abs_A, "mean_abs_notA": self.mean_abs_notA,
            "snr": self.snr, "notes": self.notes,
            "T": self.T.tolist(), "stderr": self.stderr.tolist(),
        })


def estimate_gradient_components(params, spec, sigma, n_mc, neurons, seed=0,
                                 weights=UNWEIGHTED, shuffle_labels=False):
    """Monte-Carlo ``T_ij = E[w_y y 1[y g <= 1] act'(z_i) <M_j, x>]``.

    This is ``-d loss / d w_i`` divided by ``a_i`` and projected on each
    dictionary column.  ``shuffle_labels`` replaces labels by independent
    fair signs (a null check).
    """
    if n_mc < 10_000:
        raise ValueError("n_mc must be at least 1e4")
    notes = []
    keep = []
    for i in neurons:
        if params.a[i] == 0:
            notes.append(f"neuron {i} skipped: a_i = 0")
        else:
            keep.append(int(i))
    M = spec.dictionary.columns
    r, D = len(keep), spec.D
    s1 = np.zeros((r, D))
    s2 = np.zeros((r, D))
    data = gen_dataset(spec, n_mc, seed)
    for c, lo, hi in chunks(n_mc):
        X, y = data.X[lo:hi], data.y[lo:hi]
        if shuffle_labels:
            y = np.where(stream(seed, "oracle", c).random(hi - lo) < 0.5, -1, 1)
        Z = X @ params.W.T + params.b
        g = smoothed_act(Z, sigma) @ params.a
        v = np.where(y * g <= 1.0, weights.of(y) * y, 0.0)
        G = smoothed_act_deriv(Z[:, keep], sigma) * v[:, None]
        proj = X @ M
        s1 += G.T @ proj
        s2 += (G * G).T @ (proj * proj)
    T = s1 / n_mc
    var = np.maximum(s2 / n_mc - T * T, 0.0)
    return GradientComponentReport(keep, T, np.sqrt(var / n_mc), spec.rule.A, n_mc, notes)


MAX_ENUM = 20


def parity_correlation(A1, A2, D=None):
    """Exact ``E[chi_A1(z) chi_A2(z)]`` for uniform ``z`` in ``{-1, 1}^D``.

    Only the coordinates in ``A1 | A2`` matter, so only those are enumerated.
    """
    if D is not None and D > MAX_ENUM:
        raise ValueError(f"D={D} exceeds the enumeration limit {MAX_ENUM}")
    support = sorted(set(A1) | set(A2))
    if len(support) > MAX_ENUM:
        raise ValueError("support too large to enumerate")
    pos = {j: i for i, j in enumerate(support)}
    i1 = [pos[j] for j in A1]
    i2 = [pos[j] for j in A2]
    total = 0
    for z in itertools.product((-1, 1), repeat=len(support)):
        total += math.prod(z[i] for i in i1) * math.prod(z[i] for i in i2)
    return total / 2 ** len(support)


def sq_dimension_check(D, k, max_concepts=5000):
    """Enumerate all ``C(D, k)`` parities and confirm pairwise orthogonality.

    The correlation Gram matrix is formed exactly in integers over all
    ``2^D`` points.  Returns the number of concepts.
    """
    if D > 12:
        raise ValueError("D must be <= 12 for exhaustive enumeration")
    n = math.comb(D, k)
    if n > max_concepts:
        raise ValueError(f"{n} concepts exceed the limit {max_concepts}")
    concepts = list(itertools.combinations(range(D), k))
    Z = np.array(list(itertools.product((-1, 1), repeat=D)), dtype=np.int64)
    chi = np.stack([Z[:, list(c)].prod(axis=1) for c in concepts])
    gram = chi @ chi.T
    expected = np.eye(n, dtype=np.int64) * 2**D
    if not np.array_equal(gram, expected):
        raise AssertionError("found correlated parity concepts")
    return n
