"""Noise-schedule coefficients for the two drift/diffusion definitions.

Both kinds share the linear rate β(t) = β₀ + t(β₁−β₀) and its integral
B(t) = β₀t + (β₁−β₀)t²/2.

``gmax``  — zero drift:          α_t = ᾱ_t = 1, σ_t² = B(t).
``vp``    — drift −β(t)/2:       α_t = exp(−B(t)/2), ᾱ_t = exp((B(1)−B(t))/2),
                                 σ_t² = expm1(B(t)).

σ̄_t² is always stored as the exact complement σ₁² − σ_t², which makes the
boundary identities (σ̄₁² = 0, σ̄₀² = σ₁²) hold bitwise. The quadrature oracle
integrates the defining integrals directly and never consults the closed
forms; it exists for verification only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError

KINDS = ("gmax", "vp")


@dataclass(frozen=True)
class ScheduleParams:
    kind: str = "gmax"
    beta0: float = 0.01
    beta1: float = 10.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown schedule kind {self.kind!r}; expected one of {KINDS}")
        if not self.beta0 > 0:
            raise ContractError(f"beta0 must be positive, got {self.beta0}")
        if not self.beta1 > self.beta0:
            raise ContractError(f"beta1 must exceed beta0, got beta1={self.beta1} beta0={self.beta0}")


@dataclass(frozen=True)
class ScheduleCoeffs:
    t: float
    alpha: float
    alpha_bar: float
    sigma2: float
    sigma_bar2: float
    sigma2_1: float

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def sigma_bar(self) -> float:
        return math.sqrt(self.sigma_bar2)


def _integrated_rate(params: ScheduleParams, t: float) -> float:
    return params.beta0 * t + 0.5 * (params.beta1 - params.beta0) * t * t


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"t must lie in [0, 1], got {t}")
    return t


def coeffs(params: ScheduleParams, t: float) -> ScheduleCoeffs:
    """Closed-form coefficients at time ``t``."""
    t = _check_t(t)
    bt = _integrated_rate(params, t)
    b1 = _integrated_rate(params, 1.0)
    if params.kind == "gmax":
        alpha = 1.0
        alpha_bar = 1.0
        sigma2 = bt
        sigma2_1 = b1
    else:
        alpha = math.exp(-0.5 * bt)
        alpha_bar = math.exp(0.5 * (b1 - bt))
        sigma2 = math.expm1(bt)
        sigma2_1 = math.expm1(b1)
    return ScheduleCoeffs(
        t=t,
        alpha=alpha,
        alpha_bar=alpha_bar,
        sigma2=sigma2,
        sigma_bar2=sigma2_1 - sigma2,
        sigma2_1=sigma2_1,
    )


@dataclass(frozen=True)
class ScheduleCoeffsBatch:
    """Vectorized coefficients over an array of times (training path)."""

    t: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma2: np.ndarray
    sigma_bar2: np.ndarray
    sigma2_1: float


def coeffs_batch(params: ScheduleParams, t: np.ndarray) -> ScheduleCoeffsBatch:
    """Coefficients for an array of times.

    Delegates to the scalar closed form per element so batch and scalar
    paths agree bitwise (np.expm1 and math.expm1 can differ in the last ulp).
    Batches are a few hundred times per training step, so the loop is cheap.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.size and (t.min() < 0.0 or t.max() > 1.0):
        raise DomainError("all times must lie in [0, 1]")
    per = [coeffs(params, float(x)) for x in t.ravel()]
    shape = t.shape

    def gather(name):
        return np.array([getattr(c, name) for c in per]).reshape(shape)

    return ScheduleCoeffsBatch(
        t=t,
        alpha=gather("alpha"),
        alpha_bar=gather("alpha_bar"),
        sigma2=gather("sigma2"),
        sigma_bar2=gather("sigma_bar2"),
        sigma2_1=_integrated_rate(params, 1.0) if params.kind == "gmax"
        else math.expm1(_integrated_rate(params, 1.0)),
    )


# -- quadrature oracle (verification only) -------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _drift(params: ScheduleParams, tau):
    if params.kind == "gmax":
        return np.zeros_like(np.asarray(tau, dtype=float))
    return -0.5 * (params.beta0 + np.asarray(tau, dtype=float) * (params.beta1 - params.beta0))


def _rate(params: ScheduleParams, tau):
    return params.beta0 + tau * (params.beta1 - params.beta0)


def _int_drift(params: ScheduleParams, lo: float, hi: float) -> float:
    """∫ drift over [lo, hi] by 5-point Gauss–Legendre (exact: drift is linear)."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    return half * float(np.sum(_GL_WEIGHTS * _drift(params, mid + half * _GL_NODES)))


def coeffs_quadrature_oracle(params: ScheduleParams, t: float) -> ScheduleCoeffs:
    """Coefficients by adaptive quadrature of the defining integrals."""
    from scipy.integrate import quad

    t = _check_t(t)

    def variance_integrand(tau: float) -> float:
        return _rate(params, tau) * math.exp(-2.0 * _int_drift(params, 0.0, tau))

    kw = dict(epsabs=1e-12, epsrel=1e-12, limit=200)
    sigma2 = quad(variance_integrand, 0.0, t, **kw)[0] if t > 0.0 else 0.0
    sigma_bar2 = quad(variance_integrand, t, 1.0, **kw)[0] if t < 1.0 else 0.0
    alpha = math.exp(quad(lambda u: float(_drift(params, u)), 0.0, t, **kw)[0])
    alpha_bar = math.exp(-quad(lambda u: float(_drift(params, u)), t, 1.0, **kw)[0])
    return ScheduleCoeffs(
        t=t,
        alpha=alpha,
        alpha_bar=alpha_bar,
        sigma2=sigma2,
        sigma_bar2=sigma_bar2,
        sigma2_1=sigma2 + sigma_bar2,
    )
