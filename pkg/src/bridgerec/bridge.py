"""Tractable bridge marginals between a target embedding x0 and a user state x1.

The marginal at time t is Gaussian with

    mean = (α_t σ̄_t² x0 + ᾱ_t σ_t² x1) / σ₁²,     var = α_t² σ̄_t² σ_t² / σ₁²,

so the path is pinned exactly at x0 (t=0) and x1 (t=1). ``lemma_quantities``
exposes the pre-limit construction (endpoint Gaussians of width ε) used only
for verification: the product of its two component Gaussians must recover the
marginal above as ε → 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ContractError, DimensionError
from .schedule import ScheduleCoeffs


class Gaussian(NamedTuple):
    mean: np.ndarray
    var: float  # isotropic: covariance is var * I


def gaussian_product(g1: Gaussian, g2: Gaussian) -> Gaussian:
    """Normalized product of two isotropic Gaussians."""
    v1, v2 = g1.var, g2.var
    return Gaussian(
        mean=(v2 * g1.mean + v1 * g2.mean) / (v1 + v2),
        var=v1 * v2 / (v1 + v2),
    )


def _check_endpoints(x0: np.ndarray, x1: np.ndarray, cs: ScheduleCoeffs):
    if x0.shape != x1.shape:
        raise DimensionError(f"endpoint shapes differ: {x0.shape} vs {x1.shape}")
    if not cs.sigma2_1 > 0.0:
        raise ContractError("degenerate schedule: total variance is zero")


def marginal_coeffs(cs: ScheduleCoeffs) -> tuple[float, float, float]:
    """Scalars (coef_x0, coef_x1, std) of the marginal at cs.t.

    Grouped as ratios against σ₁² so the endpoint pinning is exact:
    at t=0 the x0 coefficient is literally σ₁²/σ₁² = 1.0, at t=1 likewise
    for x1, and the std vanishes with σ_t·σ̄_t.
    """
    coef_x0 = cs.alpha * (cs.sigma_bar2 / cs.sigma2_1)
    coef_x1 = cs.alpha_bar * (cs.sigma2 / cs.sigma2_1)
    std = cs.alpha * math.sqrt(cs.sigma_bar2 * cs.sigma2) / math.sqrt(cs.sigma2_1)
    return coef_x0, coef_x1, std


def marginal_params(x0: np.ndarray, x1: np.ndarray, cs: ScheduleCoeffs) -> tuple[np.ndarray, float]:
    """Mean vector and scalar variance of the bridge marginal at cs.t."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_endpoints(x0, x1, cs)
    coef_x0, coef_x1, _ = marginal_coeffs(cs)
    var = cs.alpha * cs.alpha * cs.sigma_bar2 * cs.sigma2 / cs.sigma2_1
    return coef_x0 * x0 + coef_x1 * x1, var


def sample_xt(x0: np.ndarray, x1: np.ndarray, cs: ScheduleCoeffs, eps: np.ndarray) -> np.ndarray:
    """One forward draw x_t = mean + std·eps with caller-provided noise."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_endpoints(x0, x1, cs)
    coef_x0, coef_x1, std = marginal_coeffs(cs)
    return coef_x0 * x0 + coef_x1 * x1 + std * np.asarray(eps, dtype=np.float64)


@dataclass(frozen=True)
class LemmaQuantities:
    """Pre-limit endpoint parameterization at width ε (verification only)."""

    a: np.ndarray
    b: np.ndarray
    sigma2: float
    epsilon: float
    psi_hat: Gaussian  # N(α_t·a, α_t²(σ² + σ_t²)·I)
    psi: Gaussian      # N(ᾱ_t·b, α_t²(σ² + σ̄_t²)·I)


def lemma_quantities(x0: np.ndarray, x1: np.ndarray, cs: ScheduleCoeffs, epsilon: float) -> LemmaQuantities:
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    _check_endpoints(x0, x1, cs)
    if not epsilon > 0.0:
        raise ContractError(f"epsilon must be positive, got {epsilon}")
    s21 = cs.sigma2_1
    e2 = epsilon * epsilon
    # rationalized form of e2 + (sqrt(s21² + 4e4) - s21)/2; the naive form
    # cancels to zero digits once 4e4 << s21²
    e4 = e2 * e2
    root = math.sqrt(s21 * s21 + 4.0 * e4)
    sigma2 = e2 + 2.0 * e4 / (root + s21)
    alpha1 = cs.alpha / cs.alpha_bar
    a = x0 + (sigma2 / s21) * (x0 - x1 / alpha1)
    b = x1 + (sigma2 / s21) * (x1 - alpha1 * x0)
    a2 = cs.alpha * cs.alpha
    return LemmaQuantities(
        a=a,
        b=b,
        sigma2=sigma2,
        epsilon=epsilon,
        psi_hat=Gaussian(mean=cs.alpha * a, var=a2 * (sigma2 + cs.sigma2)),
        psi=Gaussian(mean=cs.alpha_bar * b, var=a2 * (sigma2 + cs.sigma_bar2)),
    )
