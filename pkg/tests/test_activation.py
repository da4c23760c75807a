import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featlearn.activation import (
    SmoothingConfig,
    smoothed_act,
    smoothed_act_deriv,
    smoothed_act_quad,
    smoothed_act_deriv_quad,
    trunc_relu,
)


@pytest.mark.parametrize("z,expected", [(-0.5, 0.0), (0.3, 0.3), (2.0, 1.0)])
def test_trunc_relu(z, expected):
    assert trunc_relu(z) == expected


@pytest.mark.parametrize("z", [-1.0, 0.25, 3.0])
def test_zero_noise_limit(z):
    assert smoothed_act(z, 0.0) == trunc_relu(z)


@pytest.mark.parametrize("s", [0.01, 0.2, 1.0, 7.0])
def test_midpoint_is_half(s):
    assert smoothed_act(0.5, s) == pytest.approx(0.5, abs=1e-15)


def test_matches_monte_carlo():
    rng = np.random.default_rng(20240)
    xi = rng.normal(0.0, 0.2, size=10_000_000)
    samples = np.clip(-0.3 + xi, 0.0, 1.0)
    mc = samples.mean()
    se = samples.std() / np.sqrt(samples.size)
    assert abs(smoothed_act(-0.3, 0.2) - mc) <= 3 * se


def test_deriv_zero_noise_convention():
    assert smoothed_act_deriv(0.5, 0.0) == 1.0
    assert smoothed_act_deriv(1.5, 0.0) == 0.0
    assert smoothed_act_deriv(0.0, 0.0) == 1.0
    assert smoothed_act_deriv(1.0, 0.0) == 0.0


@pytest.mark.parametrize("z", [-0.4, 0.1, 0.9])
@pytest.mark.parametrize("s", [0.05, 0.3, 1.0])
def test_deriv_matches_finite_difference(z, s):
    h = 1e-5
    fd = (smoothed_act(z + h, s) - smoothed_act(z - h, s)) / (2 * h)
    assert smoothed_act_deriv(z, s) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("s", [0.0, 0.01, 0.3, 2.0])
def test_bounded_and_monotone_on_grid(s):
    z = np.linspace(-3, 4, 10_000)
    f = smoothed_act(z, s)
    assert np.all((f >= 0) & (f <= 1))
    assert np.all(np.diff(f) >= 0)


@settings(max_examples=200, deadline=None)
@given(z=st.floats(-20, 20), s=st.floats(0, 10))
def test_point_symmetry(z, s):
    assert smoothed_act(z, s) + smoothed_act(1 - z, s) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("s", [0.02, 0.1, 0.5, 3.0])
def test_quadrature_agrees_with_closed_form(s):
    z = np.linspace(-2, 3, 101)
    assert np.max(np.abs(smoothed_act_quad(z, s) - smoothed_act(z, s))) < 1e-8
    assert np.max(np.abs(smoothed_act_deriv_quad(z, s) - smoothed_act_deriv(z, s))) < 1e-8


def test_smoothing_config():
    cfg = SmoothingConfig(0.3, "quadrature", 32)
    assert cfg.act(0.2) == pytest.approx(smoothed_act(0.2, 0.3), abs=1e-8)
    with pytest.raises(ValueError):
        SmoothingConfig(-1.0)
    with pytest.raises(ValueError):
        SmoothingConfig(0.1, "quadrature", 8)
