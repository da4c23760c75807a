"""Truncated ReLU and its Gaussian-smoothed version.

The smoothed activation is ``E_xi[clip(z + xi, 0, 1)]`` with
``xi ~ N(0, sigma^2)``.  Writing ``clip(u, 0, 1) = relu(u) - relu(u - 1)`` and
using ``E[relu(N(mu, s^2))] = mu * Phi(mu/s) + s * phi(mu/s)`` gives a closed
form; its derivative is ``Phi(z/s) - Phi((z-1)/s)``, the probability that the
noisy pre-activation lands in the linear region.

At ``sigma = 0`` the derivative is the indicator of the half-open interval
``[0, 1)``: 1 at ``z = 0`` and 0 at ``z = 1``.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class SmoothingConfig:
    sigma: float = 0.0
    method: str = "closed_form"
    nodes: int = 64

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if self.method not in ("closed_form", "quadrature"):
            raise ValueError(f"unknown smoothing method {self.method!r}")
        if self.method == "quadrature" and self.nodes < 16:
            raise ValueError("quadrature needs at least 16 nodes")

    def act(self, z):
        if self.method == "quadrature":
            return smoothed_act_quad(z, self.sigma, self.nodes)
        return smoothed_act(z, self.sigma)

    def deriv(self, z):
        if self.method == "quadrature":
            return smoothed_act_deriv_quad(z, self.sigma, self.nodes)
        return smoothed_act_deriv(z, self.sigma)


def trunc_relu(z):
    """min(1, max(z, 0)), elementwise."""
    return np.clip(z, 0.0, 1.0)


def trunc_relu_deriv(z):
    z = np.asarray(z, dtype=float)
    return ((z >= 0.0) & (z < 1.0)).astype(float)


def _gauss_relu_mean(mu, s):
    t = mu / s
    return mu * ndtr(t) + s * _INV_SQRT_2PI * np.exp(-0.5 * t * t)


def _lower_half(z, s):
    # valid for z <= 1/2; values below ~1e-290 are flushed to keep monotonicity
    out = _gauss_relu_mean(z, s) - _gauss_relu_mean(z - 1.0, s)
    return np.where(out < 1e-290, 0.0, out)


def smoothed_act(z, sigma):
    """Expected truncated ReLU of ``z + N(0, sigma^2)``.

    Evaluated on ``z <= 1/2`` and reflected with ``f(z) = 1 - f(1 - z)`` so
    both tails stay accurate.
    """
    if sigma == 0:
        return trunc_relu(z)
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        lo = np.minimum(z, 1.0 - z)
        f = _lower_half(lo, sigma)
    return np.clip(np.where(z <= 0.5, f, 1.0 - f), 0.0, 1.0)


def smoothed_act_deriv(z, sigma):
    """d/dz of :func:`smoothed_act`; the zero-noise limit uses ``[0, 1)``."""
    if sigma == 0:
        return trunc_relu_deriv(z)
    z = np.asarray(z, dtype=float)
    lo = np.minimum(z, 1.0 - z)  # the derivative is symmetric about 1/2
    with np.errstate(over="ignore"):
        return ndtr(lo / sigma) - ndtr((lo - 1.0) / sigma)


def _panels(z, sigma):
    # split [0, 1] where the integrand changes fast (around t = z)
    cuts = {0.0, 1.0}
    for c in (z - 6 * sigma, z, z + 6 * sigma):
        if 0.0 < c < 1.0:
            cuts.add(float(c))
    return sorted(cuts)


def _composite_gl(f, cuts, nodes):
    x, w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (hi - lo)
        t = lo + half * (x + 1.0)
        total += half * np.dot(w, f(t))
    return total


def smoothed_act_quad(z, sigma, nodes=64):
    """Same quantity as :func:`smoothed_act`, by composite Gauss-Legendre.

    Uses ``E[clip(X, 0, 1)] = int_0^1 Pr[X > t] dt``.
    """
    if sigma == 0:
        return trunc_relu(z)
    z = np.asarray(z, dtype=float)
    flat = [
        _composite_gl(lambda t, zz=zz: ndtr((zz - t) / sigma), _panels(zz, sigma), nodes)
        for zz in z.ravel()
    ]
    return np.asarray(flat).reshape(z.shape)


def smoothed_act_deriv_quad(z, sigma, nodes=64):
    if sigma == 0:
        return trunc_relu_deriv(z)
    z = np.asarray(z, dtype=float)

    def dens(t, zz):
        u = (zz - t) / sigma
        return _INV_SQRT_2PI * np.exp(-0.5 * u * u) / sigma

    flat = [
        _composite_gl(lambda t, zz=zz: dens(t, zz), _panels(zz, sigma), nodes)
        for zz in z.ravel()
    ]
    return np.asarray(flat).reshape(z.shape)
