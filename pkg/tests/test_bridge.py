"""Bridge marginal: endpoint pinning, worked midpoint values, Monte-Carlo
moment agreement, and the pre-limit endpoint parameterization."""

import math

import numpy as np
import pytest

from bridgerec.bridge import (
    lemma_quantities,
    marginal_coeffs,
    marginal_params,
    sample_xt,
)
from bridgerec.errors import ContractError, DimensionError
from bridgerec.schedule import ScheduleParams, coeffs
from bridgerec.verify import check_bridge_moments, check_lemma_product

GMAX = ScheduleParams(kind="gmax", beta0=0.01, beta1=10.0)
VP = ScheduleParams(kind="vp", beta0=0.01, beta1=20.0)


@pytest.mark.parametrize("params", [GMAX, VP], ids=["gmax", "vp"])
def test_endpoints_exact(params, rng):
    x0 = rng.normal(size=10)
    x1 = rng.normal(size=10)
    mean0, var0 = marginal_params(x0, x1, coeffs(params, 0.0))
    assert np.array_equal(mean0, x0) and var0 == 0.0
    mean1, var1 = marginal_params(x0, x1, coeffs(params, 1.0))
    assert np.array_equal(mean1, x1) and var1 == 0.0


def test_gmax_midpoint_worked_values():
    cs = coeffs(GMAX, 0.5)
    c0, c1, std = marginal_coeffs(cs)
    assert math.isclose(c0, 3.75125 / 5.005, rel_tol=1e-15)
    assert math.isclose(c1, 1.25375 / 5.005, rel_tol=1e-15)
    assert math.isclose(std, math.sqrt(3.75125 * 1.25375 / 5.005), rel_tol=1e-15)
    # c0 ≈ 0.74950, c1 ≈ 0.25050, std ≈ 0.96937
    assert abs(c0 - 0.74950) < 5e-6
    assert abs(c1 - 0.25050) < 5e-6
    assert abs(std - 0.96937) < 5e-6


def test_gmax_mean_is_convex_combination():
    for t in np.linspace(0, 1, 21):
        c0, c1, _ = marginal_coeffs(coeffs(GMAX, float(t)))
        assert abs(c0 + c1 - 1.0) < 1e-15
        assert c0 >= 0.0 and c1 >= 0.0


def test_sample_matches_mean_plus_scaled_noise(rng):
    cs = coeffs(VP, 0.3)
    x0 = rng.normal(size=(4, 6))
    x1 = rng.normal(size=(4, 6))
    eps = rng.normal(size=(4, 6))
    mean, var = marginal_params(x0, x1, cs)
    got = sample_xt(x0, x1, cs, eps)
    assert np.array_equal(got, mean + math.sqrt(var) * eps)


def test_monte_carlo_moments():
    for name, ok, detail in check_bridge_moments(n=30_000, seed=5):
        assert ok, f"{name}: {detail}"


def test_shape_mismatch_rejected(rng):
    cs = coeffs(GMAX, 0.5)
    with pytest.raises(DimensionError):
        marginal_params(rng.normal(size=(3, 4)), rng.normal(size=(3, 5)), cs)


class TestEndpointParameterization:
    def test_product_recovers_marginal(self):
        for name, ok, detail in check_lemma_product(trials=10, seed=11):
            assert ok, f"{name}: {detail}"

    def test_sigma2_solves_its_defining_equation(self):
        """σ² is the positive root of σ²(σ²+σ₁²)/(2σ²+σ₁²) = ε², which is
        what makes the endpoint product collapse to a width-ε ball."""
        for params in (GMAX, VP):
            cs = coeffs(params, 0.5)
            for eps in (1e-2, 1e-4, 1e-6):
                lq = lemma_quantities(np.zeros(2), np.ones(2), cs, eps)
                s2 = lq.sigma2
                lhs = s2 * (s2 + cs.sigma2_1) / (2 * s2 + cs.sigma2_1)
                assert math.isclose(lhs, eps * eps, rel_tol=1e-9), (params.kind, eps)

    def test_sigma2_stable_at_tiny_epsilon(self):
        # the naive quadratic formula loses all digits here
        cs = coeffs(VP, 0.5)  # σ₁² ≈ 2.2e4
        lq = lemma_quantities(np.zeros(2), np.ones(2), cs, 1e-8)
        assert lq.sigma2 > 0.0
        assert math.isclose(lq.sigma2, 1e-16, rel_tol=1e-6)

    def test_epsilon_must_be_positive(self):
        cs = coeffs(GMAX, 0.5)
        with pytest.raises(ContractError):
            lemma_quantities(np.zeros(2), np.ones(2), cs, 0.0)

    def test_endpoint_vectors_interpolate(self, rng):
        """a and b are x₀ and x₁ plus O(σ²/σ₁²) corrections; at tiny ε they
        reduce to the endpoints themselves."""
        cs = coeffs(GMAX, 0.5)
        x0 = rng.normal(size=4)
        x1 = rng.normal(size=4)
        lq = lemma_quantities(x0, x1, cs, 1e-9)
        assert np.allclose(lq.a, x0, atol=1e-12)
        assert np.allclose(lq.b, x1, atol=1e-12)
