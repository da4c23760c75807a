"""Dictionary-based synthetic data.

An input is a sum of dictionary columns selected by a binary hidden vector,
optionally plus isotropic Gaussian noise; the label depends on how many of the
``k`` class-relevant patterns are present.  Inputs are centred and scaled so
that the total variance is one before training.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .rng import chunks, stream


class DimensionError(ValueError):
    pass


class FeasibilityError(RuntimeError):
    pass


class SpecError(ValueError):
    pass


class DegenerateSpecError(ValueError):
    pass


class EmptyRequestError(ValueError):
    pass


# --------------------------------------------------------------------------
# dictionaries


@dataclass(frozen=True, eq=False)
class Dictionary:
    columns: np.ndarray
    coherence: float = 0.0

    @property
    def d(self):
        return self.columns.shape[0]

    @property
    def D(self):
        return self.columns.shape[1]

    def check(self, tol=1e-10):
        """Raise ``SpecError`` if any invariant is violated."""
        M = self.columns
        norms = np.linalg.norm(M, axis=0)
        if np.any(np.abs(norms - 1.0) > tol):
            raise SpecError("dictionary columns are not unit norm")
        G = M.T @ M
        off = G - np.diag(np.diag(G))
        bound = self.coherence / math.sqrt(self.d) + tol
        if off.size and np.max(np.abs(off)) > bound:
            raise SpecError(f"coherence bound {bound:.3g} violated")
        return self


def make_orthonormal_dictionary(d, D, seed):
    """Orthonormal columns from the QR factor of a seeded Gaussian matrix."""
    if D > d:
        raise DimensionError(f"orthonormal dictionary needs D <= d (D={D}, d={d})")
    G = stream(seed, "dictionary").standard_normal((d, D))
    Q, R = np.linalg.qr(G)
    # fix the sign ambiguity of QR so the result only depends on the seed
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return Dictionary(Q, 0.0)


def make_incoherent_dictionary(d, D, mu, seed, max_attempts=100):
    """Unit columns with pairwise ``|<c_i, c_j>| <= mu / sqrt(d)``.

    Columns involved in a violation are redrawn (the later index of each
    offending pair) until the bound holds or ``max_attempts`` rounds pass.
    """
    if mu <= 0:
        raise SpecError("incoherence mu must be positive; use the orthonormal builder for mu=0")
    rng = stream(seed, "dictionary")
    bound = mu / math.sqrt(d)
    M = rng.standard_normal((d, D))
    M /= np.linalg.norm(M, axis=0)
    for _ in range(max_attempts):
        G = np.abs(M.T @ M)
        np.fill_diagonal(G, 0.0)
        bad = np.unique(np.nonzero(np.triu(G > bound))[1])
        if bad.size == 0:
            return Dictionary(M, float(mu)).check()
        fresh = rng.standard_normal((d, bad.size))
        M[:, bad] = fresh / np.linalg.norm(fresh, axis=0)
    raise FeasibilityError(
        f"could not reach coherence {mu} with d={d}, D={D} in {max_attempts} attempts"
    )


# --------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class LabelRule:
    A: tuple
    P: frozenset

    def __post_init__(self):
        A = tuple(sorted(int(i) for i in self.A))
        if len(set(A)) != len(A):
            raise SpecError("relevant set A has repeated indices")
        object.__setattr__(self, "A", A)
        P = frozenset(int(p) for p in self.P)
        if any(p < 0 or p > len(A) for p in P):
            raise SpecError(f"P must be a subset of 0..{len(A)}")
        object.__setattr__(self, "P", P)

    @property
    def k(self):
        return len(self.A)

    def check_range(self, D):
        if self.A and (self.A[0] < 0 or self.A[-1] >= D):
            raise SpecError(f"relevant indices out of range for D={D}")

    def labels(self, phi):
        """Vectorised label: +1 iff the relevant count is in P."""
        phi = np.asarray(phi)
        counts = phi[..., list(self.A)].sum(axis=-1).astype(int)
        member = np.isin(counts, sorted(self.P))
        return np.where(member, 1, -1)

    def to_dict(self):
        return {"A": list(self.A), "P": sorted(self.P)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["A"]), frozenset(d["P"]))


def label(phi, rule):
    return int(rule.labels(np.asarray(phi)))


def parity_rule(A):
    k = len(A)
    return LabelRule(tuple(A), frozenset(range(1, k + 1, 2)))


def interval_rule(A, lo, hi):
    return LabelRule(tuple(A), frozenset(range(lo, hi + 1)))


def choose_relevant(D, k, seed):
    rng = stream(seed, "relevant")
    return tuple(sorted(int(i) for i in rng.choice(D, size=k, replace=False)))


# --------------------------------------------------------------------------
# hidden-vector distributions
#
# Each family implements ``sample(D, rule, rng, n) -> (n, D) uint8`` and
# ``labels(phi, rule)``; the default label is the count rule.


class HiddenDistribution:
    kind = "base"

    def validate(self, D, rule):
        rule.check_range(D)

    def sample(self, D, rule, rng, n):
        raise NotImplementedError

    def labels(self, phi, rule):
        return rule.labels(phi)

    def to_dict(self):
        raise NotImplementedError

    @staticmethod
    def from_dict(d):
        kinds = {
            "product_bernoulli": ProductBernoulli,
            "parity_mixture": ParityMixture,
            "uniform": UniformNoStructure,
            "codebook": Codebook,
            "rebalanced": ClassRebalanced,
            "constant": Constant,
        }
        d = dict(d)
        cls = kinds.get(d.pop("kind", None))
        if cls is None:
            raise SpecError(f"unknown hidden distribution {d!r}")
        return cls._from_dict(d)


@dataclass(frozen=True, eq=False)
class ProductBernoulli(HiddenDistribution):
    q: np.ndarray
    kind = "product_bernoulli"

    def validate(self, D, rule):
        super().validate(D, rule)
        q = np.asarray(self.q, dtype=float)
        if q.shape != (D,):
            raise SpecError(f"q has shape {q.shape}, expected ({D},)")
        if np.any((q < 0) | (q > 1)):
            raise SpecError("probabilities must lie in [0, 1]")

    def sample(self, D, rule, rng, n):
        return (rng.random((n, D)) < np.asarray(self.q)).astype(np.uint8)

    def to_dict(self):
        return {"kind": self.kind, "q": np.asarray(self.q).tolist()}

    @classmethod
    def _from_dict(cls, d):
        return cls(np.asarray(d["q"], dtype=float))


def relevant_bernoulli(D, A, p_relevant, p_background):
    q = np.full(D, float(p_background))
    q[list(A)] = p_relevant
    return ProductBernoulli(q)


@dataclass(frozen=True)
class UniformNoStructure(HiddenDistribution):
    kind = "uniform"

    def sample(self, D, rule, rng, n):
        return (rng.random((n, D)) < 0.5).astype(np.uint8)

    def to_dict(self):
        return {"kind": self.kind}

    @classmethod
    def _from_dict(cls, d):
        return cls()


@dataclass(frozen=True)
class ParityMixture(HiddenDistribution):
    """Weight ``p0``: all coordinates fair coins.  Weight ``1 - p0``: the
    relevant block is all-zeros or all-ones (fair), the rest are
    Bernoulli(p0 / (2 - 2 p0))."""

    p0: float = 0.5
    kind = "parity_mixture"

    def validate(self, D, rule):
        super().validate(D, rule)
        if not 0 < self.p0 <= 1:
            raise SpecError("p0 must lie in (0, 1]")
        if self.p0 < 1 and self.p0 / (2 - 2 * self.p0) > 1:
            raise SpecError("p0 / (2 - 2 p0) exceeds 1; need p0 <= 2/3")

    def sample_with_component(self, D, rule, rng, n):
        """Like :meth:`sample` but also return the structured-component mask."""
        structured = rng.random(n) >= self.p0
        u = rng.random((n, D))
        phi = (u < 0.5).astype(np.uint8)
        if self.p0 < 1:
            q_bg = self.p0 / (2 - 2 * self.p0)
            A = list(rule.A)
            bg = (u < q_bg).astype(np.uint8)
            block = (rng.random(n) < 0.5).astype(np.uint8)
            s = structured
            phi[s] = bg[s]
            phi[np.ix_(s, A)] = block[s, None]
        return phi, structured

    def sample(self, D, rule, rng, n):
        return self.sample_with_component(D, rule, rng, n)[0]

    def to_dict(self):
        return {"kind": self.kind, "p0": self.p0}

    @classmethod
    def _from_dict(cls, d):
        return cls(float(d["p0"]))


@dataclass(frozen=True, eq=False)
class Codebook(HiddenDistribution):
    """Relevant block drawn uniformly from a fixed list of codewords, each
    codeword carrying its own class; background coordinates are
    Bernoulli(``background``)."""

    positive: np.ndarray
    negative: np.ndarray
    background: float = 0.5
    kind = "codebook"

    def validate(self, D, rule):
        super().validate(D, rule)
        words = np.vstack([self.positive, self.negative])
        if words.shape[1] != rule.k:
            raise SpecError("codewords must have length k")
        if np.any((words != 0) & (words != 1)):
            raise SpecError("codewords must be binary")
        if len({w.tobytes() for w in words.astype(np.uint8)}) != len(words):
            raise SpecError("codewords must be distinct")
        if not 0 <= self.background <= 1:
            raise SpecError("background probability must lie in [0, 1]")

    def sample(self, D, rule, rng, n):
        words = np.vstack([self.positive, self.negative]).astype(np.uint8)
        pick = rng.integers(0, len(words), size=n)
        phi = (rng.random((n, D)) < self.background).astype(np.uint8)
        phi[:, list(rule.A)] = words[pick]
        return phi

    def labels(self, phi, rule):
        block = np.asarray(phi)[..., list(rule.A)].astype(np.uint8)
        pos = {w.tobytes() for w in np.asarray(self.positive, dtype=np.uint8)}
        flat = block.reshape(-1, rule.k)
        out = np.array([1 if row.tobytes() in pos else -1 for row in flat])
        return out.reshape(block.shape[:-1]) if block.ndim > 1 else int(out[0])

    def mean_abs_correlation(self):
        """Mean over the relevant block of ``|Cov(y, phi_j)|`` for a uniform codeword.

        Classes are assigned at random, so the signed correlation averages to
        zero; the magnitude is what sets the gradient scale.
        """
        words = np.vstack([self.positive, self.negative]).astype(float)
        y = np.concatenate([np.ones(len(self.positive)), -np.ones(len(self.negative))])
        cov = (y @ words) / len(y) - y.mean() * words.mean(axis=0)
        return float(np.mean(np.abs(cov)))

    def to_dict(self):
        return {
            "kind": self.kind,
            "positive": np.asarray(self.positive).astype(int).tolist(),
            "negative": np.asarray(self.negative).astype(int).tolist(),
            "background": self.background,
        }

    @classmethod
    def _from_dict(cls, d):
        return cls(
            np.asarray(d["positive"], dtype=np.uint8),
            np.asarray(d["negative"], dtype=np.uint8),
            float(d["background"]),
        )


def make_codebook(k, per_class, seed, background=0.5):
    """``per_class`` distinct random codewords for each label."""
    if 2 * per_class > 2**k:
        raise SpecError("not enough distinct binary vectors of length k")
    rng = stream(seed, "codebook")
    seen, words = set(), []
    while len(words) < 2 * per_class:
        w = (rng.random(k) < 0.5).astype(np.uint8)
        if w.tobytes() not in seen:
            seen.add(w.tobytes())
            words.append(w)
    words = np.array(words)
    return Codebook(words[:per_class], words[per_class:], background)


@dataclass(frozen=True)
class Constant(HiddenDistribution):
    """Every draw equals ``value`` (all ones by default); a degenerate case."""

    value: int = 1
    kind = "constant"

    def sample(self, D, rule, rng, n):
        return np.full((n, D), self.value, dtype=np.uint8)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def _from_dict(cls, d):
        return cls(int(d.get("value", 1)))


@dataclass(frozen=True)
class ClassRebalanced(HiddenDistribution):
    """Condition ``base`` on the label so that Pr[y = -1] = ``neg_ratio``.

    Each sample first picks its class, then redraws from ``base`` until the
    label matches.
    """

    base: HiddenDistribution
    neg_ratio: float
    kind = "rebalanced"

    def validate(self, D, rule):
        self.base.validate(D, rule)
        if not 0 < self.neg_ratio < 1:
            raise SpecError("neg_ratio must lie in (0, 1)")

    def sample(self, D, rule, rng, n):
        want = np.where(rng.random(n) < self.neg_ratio, -1, 1)
        out = np.zeros((n, D), dtype=np.uint8)
        todo = np.arange(n)
        for _ in range(10_000):
            if todo.size == 0:
                return out
            draw = self.base.sample(D, rule, rng, max(2 * todo.size, 64))
            ylab = self.base.labels(draw, rule)
            for cls in (-1, 1):
                slots = todo[want[todo] == cls]
                pool = draw[ylab == cls][: slots.size]
                out[slots[: len(pool)]] = pool
                todo = np.setdiff1d(todo, slots[: len(pool)], assume_unique=True)
        raise FeasibilityError("class never produced by the base distribution")

    def labels(self, phi, rule):
        return self.base.labels(phi, rule)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "neg_ratio": self.neg_ratio}

    @classmethod
    def _from_dict(cls, d):
        return cls(HiddenDistribution.from_dict(d["base"]), float(d["neg_ratio"]))


def sample_hidden(dist, D, rule, rng, n=None):
    """One draw (shape ``(D,)``) or ``n`` draws (shape ``(n, D)``)."""
    dist.validate(D, rule)
    phi = dist.sample(D, rule, rng, 1 if n is None else n)
    return phi[0] if n is None else phi


# --------------------------------------------------------------------------
# data spec and datasets


@dataclass(frozen=True, eq=False)
class DataSpec:
    dictionary: Dictionary
    hidden: HiddenDistribution
    rule: LabelRule
    noise_std: float = 0.0
    mean: Optional[np.ndarray] = None
    scale: Optional[float] = None
    p: Optional[float] = None

    @property
    def d(self):
        return self.dictionary.d

    @property
    def D(self):
        return self.dictionary.D

    @property
    def fitted(self):
        return self.mean is not None and self.scale is not None

    def validate(self):
        self.hidden.validate(self.D, self.rule)
        if self.noise_std < 0:
            raise SpecError("noise_std must be >= 0")
        if self.fitted:
            if self.scale <= 0:
                raise SpecError("scale must be positive")
            if np.shape(self.mean) != (self.d,):
                raise SpecError("mean has the wrong dimension")
        if self.p is not None and not 0 < self.p <= 1:
            raise SpecError("p must lie in (0, 1]")
        return self

    def to_dict(self):
        return {
            "dictionary": {
                "columns": self.dictionary.columns.tolist(),
                "coherence": self.dictionary.coherence,
            },
            "hidden": self.hidden.to_dict(),
            "rule": self.rule.to_dict(),
            "noise_std": self.noise_std,
            "mean": None if self.mean is None else np.asarray(self.mean).tolist(),
            "scale": self.scale,
            "p": self.p,
        }

    @classmethod
    def from_dict(cls, d):
        dic = d["dictionary"]
        return cls(
            dictionary=Dictionary(np.asarray(dic["columns"], dtype=float), float(dic["coherence"])),
            hidden=HiddenDistribution.from_dict(d["hidden"]),
            rule=LabelRule.from_dict(d["rule"]),
            noise_std=float(d["noise_std"]),
            mean=None if d.get("mean") is None else np.asarray(d["mean"], dtype=float),
            scale=d.get("scale"),
            p=d.get("p"),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    hidden: Optional[np.ndarray] = None
    spec: Optional[DataSpec] = field(default=None, repr=False)

    def __len__(self):
        return len(self.y)

    def subset(self, idx):
        h = None if self.hidden is None else self.hidden[idx]
        return Dataset(self.X[idx], self.y[idx], h, self.spec)

    def to_csv(self, path):
        d = self.X.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{i}" for i in range(d)] + ["y"])
            for row, lab in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [int(lab)])


def _raw_chunk(spec, seed, c, lo, hi, rng_name="hidden"):
    """Raw inputs ``M phi + zeta`` plus hidden vectors and labels for one chunk."""
    rng_h = stream(seed, rng_name, c)
    phi = spec.hidden.sample(spec.D, spec.rule, rng_h, hi - lo)
    y = np.asarray(spec.hidden.labels(phi, spec.rule))
    x = phi @ spec.dictionary.columns.T
    if spec.noise_std > 0:
        x = x + spec.noise_std * stream(seed, "noise", c).standard_normal(x.shape)
    return x, phi, y


def fit_normalization(spec, n_calib=100_000, seed=0, p=None):
    """Estimate mean, total-variance scale and label correlation ``p``.

    ``p`` is the average over relevant coordinates of
    ``E[y phi_i] - E[y] E[phi_i]``.  Passing ``p`` skips that estimate (used
    when a run must share the init scale of a companion spec).
    """
    spec.validate()
    if n_calib < 1000:
        raise SpecError("n_calib must be at least 1000")
    d, A = spec.d, list(spec.rule.A)
    s1 = np.zeros(d)
    s2 = np.zeros(d)
    sy = 0.0
    sphi = np.zeros(len(A))
    syphi = np.zeros(len(A))
    seed = int(seed) + 7919  # keep calibration draws apart from dataset seeds
    for c, lo, hi in chunks(n_calib):
        x, phi, y = _raw_chunk(spec, seed, c, lo, hi, "calibration")
        s1 += x.sum(axis=0)
        s2 += (x * x).sum(axis=0)
        pa = phi[:, A].astype(float)
        sy += y.sum()
        sphi += pa.sum(axis=0)
        syphi += (y[:, None] * pa).sum(axis=0)
    n = float(n_calib)
    mean = s1 / n
    var = np.maximum(s2 / n - mean**2, 0.0).sum()
    scale = math.sqrt(var)
    if scale <= 1e-12:
        raise DegenerateSpecError("estimated sigma_x is zero")
    if p is None:
        p = float(np.mean(syphi / n - (sy / n) * (sphi / n)))
        if not p > 0:
            raise DegenerateSpecError(f"estimated label correlation p={p:.3g} is not positive")
    return replace(spec, mean=mean, scale=scale, p=float(min(p, 1.0))).validate()


def gen_dataset(spec, n, seed, keep_hidden=False):
    """``n`` normalised samples ``(M phi + zeta - mean) / scale`` with labels.

    Generation runs in fixed-size chunks, each with its own generator keyed
    by ``(seed, chunk index)``.
    """
    if n <= 0:
        raise EmptyRequestError("n must be positive")
    if not spec.fitted:
        raise SpecError("spec has no normalization; call fit_normalization first")
    X = np.empty((n, spec.d))
    y = np.empty(n, dtype=int)
    H = np.empty((n, spec.D), dtype=np.uint8) if keep_hidden else None
    for c, lo, hi in chunks(n):
        x, phi, lab = _raw_chunk(spec, seed, c, lo, hi)
        X[lo:hi] = (x - spec.mean) / spec.scale
        y[lo:hi] = lab
        if keep_hidden:
            H[lo:hi] = phi
    return Dataset(X, y, H, spec)


def sample_gaussian_mixture(d, k, sigma_r, dictionary, rng, n=None):
    """Parity-labelled Gaussian clusters at the hypercube vertices of the span.

    ``x = sum_i eps_i M_i + g`` with ``g ~ N(0, sigma_r^2 k/d I)`` and
    ``y = prod_i eps_i``.
    """
    M = dictionary.columns
    if M.shape != (d, k):
        raise DimensionError(f"dictionary must be {d}x{k}, got {M.shape}")
    m = 1 if n is None else n
    eps = np.where(rng.random((m, k)) < 0.5, -1.0, 1.0)
    x = eps @ M.T
    if sigma_r > 0:
        x = x + sigma_r * math.sqrt(k / d) * rng.standard_normal((m, d))
    y = np.prod(eps, axis=1).astype(int)
    if n is None:
        return x[0], int(y[0])
    return x, y


def hypercube_centers(dictionary):
    """All ``2^k`` centres and their parity labels."""
    k = dictionary.D
    eps = np.array(np.meshgrid(*[[-1.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
    return eps @ dictionary.columns.T, np.prod(eps, axis=1).astype(int)


def mixture_dataset(d, k, sigma_r, dictionary, n, seed):
    X = np.empty((n, d))
    y = np.empty(n, dtype=int)
    for c, lo, hi in chunks(n):
        X[lo:hi], y[lo:hi] = sample_gaussian_mixture(
            d, k, sigma_r, dictionary, stream(seed, "mixture", c), hi - lo
        )
    return Dataset(X, y)
