"""Reverse-time generation from x1 to the predicted target embedding.

Both transitions run on the uniform descending grid t_i = 1 - i/steps. The
coefficients are grouped as variance ratios (v = σ_t²/σ_s², w = σ̄_t²/σ̄_s²)
so two identities hold exactly in floating point:

  * zero elapsed time (t = s)  →  x_t = x_s bitwise,
  * final step (t = 0)         →  x_t = prediction bitwise.

The deterministic transition is singular at s = 1 (σ̄_s = 0). Writing it out
with x_s = x1 (how every chain starts), the divergent x_s and x1 pieces are
(α_tσ_tσ̄_t)/(α_sσ_sσ̄_s)·(x_s − x1) and cancel, leaving the regular part

    x_t = ᾱ_t(σ_t²/σ₁²)·x_s + α_t(σ̄_t²/σ₁²)·prediction,

which is the bridge marginal mean with x0 replaced by the prediction. Tests
check this limit against s = 1−1e-6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, NumericError, OrderingError
from .schedule import ScheduleCoeffs, ScheduleParams, coeffs

MODES = ("sde", "ode")

Predictor = Callable[[np.ndarray, float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = "sde"
    steps: int = 12
    guidance_w: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"unknown sampler mode {self.mode!r}; expected one of {MODES}")
        if self.steps < 1:
            raise ContractError(f"steps must be >= 1, got {self.steps}")
        if self.guidance_w < 0.0:
            raise ContractError(f"guidance_w must be >= 0, got {self.guidance_w}")


def _check_times(s: float, t: float, cs_s: ScheduleCoeffs):
    if t > s:
        raise OrderingError(f"reverse step needs t <= s, got s={s} t={t}")
    if cs_s.sigma2 == 0.0:
        raise ContractError("cannot step from s=0 (zero source variance)")


def sde_step(x_s, s: float, t: float, pred, cs_s: ScheduleCoeffs, cs_t: ScheduleCoeffs, eps) -> np.ndarray:
    """Stochastic transition from time s to t <= s."""
    _check_times(s, t, cs_s)
    v = cs_t.sigma2 / cs_s.sigma2
    coef_xs = (cs_t.alpha / cs_s.alpha) * v
    coef_pred = cs_t.alpha * (1.0 - v)
    noise_scale = cs_t.alpha * math.sqrt(cs_t.sigma2) * math.sqrt(1.0 - v)
    return coef_xs * np.asarray(x_s) + coef_pred * np.asarray(pred) + noise_scale * np.asarray(eps)


def ode_step(x_s, s: float, t: float, pred, x1, cs_s: ScheduleCoeffs, cs_t: ScheduleCoeffs) -> np.ndarray:
    """Deterministic transition from time s to t <= s."""
    _check_times(s, t, cs_s)
    x_s = np.asarray(x_s)
    pred = np.asarray(pred)
    if cs_s.sigma_bar2 == 0.0:
        # boundary limit at s=1; valid because chains start with x_s = x1
        coef_xs = cs_t.alpha_bar * (cs_t.sigma2 / cs_t.sigma2_1)
        coef_pred = cs_t.alpha * (cs_t.sigma_bar2 / cs_t.sigma2_1)
        return coef_xs * x_s + coef_pred * pred
    v = cs_t.sigma2 / cs_s.sigma2
    w = cs_t.sigma_bar2 / cs_s.sigma_bar2
    coef_xs = (cs_t.alpha / cs_s.alpha) * math.sqrt(v * w)
    coef_pred = cs_t.alpha * (cs_t.sigma_bar2 / cs_t.sigma2_1) * (1.0 - math.sqrt(v / w))
    if cs_t.sigma2 == 0.0:
        coef_x1 = 0.0
    else:
        coef_x1 = cs_t.alpha_bar * (cs_t.sigma2 / cs_t.sigma2_1) * (1.0 - math.sqrt(w / v))
    return coef_xs * x_s + coef_pred * pred + coef_x1 * np.asarray(x1)


def guided_predict(cond_pred, uncond_pred, w: float) -> np.ndarray:
    """Guidance mix (1+w)·cond − w·uncond, computed as cond + w·(cond − uncond)
    so that w=0 and cond==uncond reduce to cond exactly."""
    cond_pred = np.asarray(cond_pred)
    uncond_pred = np.asarray(uncond_pred)
    if cond_pred.shape != uncond_pred.shape:
        raise ContractError(
            f"prediction shapes differ: {cond_pred.shape} vs {uncond_pred.shape}"
        )
    return cond_pred + w * (cond_pred - uncond_pred)


def sample(
    x1: np.ndarray,
    predictor: Predictor | tuple[Predictor, Predictor],
    params: ScheduleParams,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Run the reverse chain from x1 down to t=0 and return the final state.

    ``predictor`` is either a single callable (x_s, s, x1) -> x̂₀ or a
    (conditional, unconditional) pair mixed with config.guidance_w. x1 may be
    a single vector or a batch (rows); predictions must match its shape.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    if not np.all(np.isfinite(x1)):
        raise ContractError("x1 contains non-finite values")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    guided = isinstance(predictor, tuple)

    x = x1.copy()
    cs_s = coeffs(params, 1.0)
    for i in range(config.steps):
        s = 1.0 - i / config.steps
        t = 1.0 - (i + 1) / config.steps
        cs_t = coeffs(params, t)
        if guided:
            cond, uncond = predictor
            pred = guided_predict(cond(x, s, x1), uncond(x, s, x1), config.guidance_w)
        else:
            pred = predictor(x, s, x1)
        pred = np.asarray(pred, dtype=np.float64)
        if not np.all(np.isfinite(pred)):
            raise NumericError(f"predictor returned non-finite values at step {i} (s={s})")
        if config.mode == "sde":
            eps = rng.standard_normal(x.shape)
            x = sde_step(x, s, t, pred, cs_s, cs_t, eps)
        else:
            x = ode_step(x, s, t, pred, x1, cs_s, cs_t)
        cs_s = cs_t
    return x
