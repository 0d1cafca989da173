"""Self-contained oracle checks: quadrature vs closed forms, Monte-Carlo
moments, analytic sampler identities, guidance degeneracies, finite-difference
gradient checks and metric hand cases.

Each check returns a list of (name, passed, detail) rows; run_all() flattens
them. These are the same oracles the acceptance tests assert on.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .bridge import lemma_quantities, marginal_params, sample_xt
from .errors import ContractError
from .metrics import hr_at_k, ndcg_at_k
from .model import Model, ModelConfig
from .sampler import SamplerConfig, ode_step, sample, sde_step
from .schedule import ScheduleParams, coeffs, coeffs_quadrature_oracle

Row = tuple[str, bool, str]


def numeric_gradient(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f at x (float64)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def rel_error(got: np.ndarray, want: np.ndarray) -> float:
    num = np.linalg.norm(got - want)
    den = max(np.linalg.norm(got), np.linalg.norm(want), 1e-12)
    return float(num / den)


# -- schedule ---------------------------------------------------------------


def check_schedule_oracle(beta1s=(10.0, 20.0, 30.0, 40.0, 50.0), grid: int = 101,
                          tol: float = 1e-8, perturb=None) -> list[Row]:
    """Closed forms vs adaptive quadrature on a t grid, scaled tolerance
    |closed − oracle| ≤ tol · max(1, |oracle|).

    ``perturb`` (testing hook) maps the closed-form σ_t² before comparison.
    """
    rows: list[Row] = []
    ts = np.linspace(0.0, 1.0, grid)
    start = time.time()
    for kind in ("gmax", "vp"):
        for beta1 in beta1s:
            params = ScheduleParams(kind=kind, beta0=0.01, beta1=beta1)
            worst = 0.0
            for t in ts:
                cs = coeffs(params, float(t))
                oracle = coeffs_quadrature_oracle(params, float(t))
                got = {"alpha": cs.alpha, "alpha_bar": cs.alpha_bar,
                       "sigma2": cs.sigma2, "sigma_bar2": cs.sigma_bar2}
                if perturb is not None:
                    got["sigma2"] = perturb(got["sigma2"])
                for key, want in (("alpha", oracle.alpha),
                                  ("alpha_bar", oracle.alpha_bar),
                                  ("sigma2", oracle.sigma2),
                                  ("sigma_bar2", oracle.sigma_bar2)):
                    err = abs(got[key] - want) / max(1.0, abs(want))
                    worst = max(worst, err)
            rows.append((f"schedule/{kind}/beta1={beta1:g}", worst <= tol,
                         f"max scaled error {worst:.3e} (tol {tol:g})"))
    rows.append(("schedule/runtime", time.time() - start < 5.0,
                 f"{time.time() - start:.2f} s (budget 5 s)"))
    return rows


# -- bridge ------------------------------------------------------------------


def check_bridge_endpoints(seed: int = 0) -> list[Row]:
    rows: list[Row] = []
    rng = np.random.default_rng(seed)
    for kind, beta1 in (("gmax", 10.0), ("vp", 20.0)):
        params = ScheduleParams(kind=kind, beta0=0.01, beta1=beta1)
        x0 = rng.normal(size=8)
        x1 = rng.normal(size=8)
        m0, v0 = marginal_params(x0, x1, coeffs(params, 0.0))
        m1, v1 = marginal_params(x0, x1, coeffs(params, 1.0))
        ok = (np.array_equal(m0, x0) and v0 == 0.0
              and np.array_equal(m1, x1) and v1 == 0.0)
        rows.append((f"bridge/endpoints/{kind}", ok,
                     "mean≡x0@t=0, x1@t=1; var≡0 (exact)" if ok else "endpoint mismatch"))
    return rows


def check_bridge_moments(n: int = 100_000, seed: int = 0) -> list[Row]:
    rows: list[Row] = []
    rng = np.random.default_rng(seed)
    for kind, beta1 in (("gmax", 10.0), ("vp", 20.0)):
        params = ScheduleParams(kind=kind, beta0=0.01, beta1=beta1)
        x0 = rng.normal(size=4)
        x1 = rng.normal(size=4)
        worst = 0.0
        for t in (0.25, 0.5, 0.75):
            cs = coeffs(params, t)
            mean, var = marginal_params(x0, x1, cs)
            draws = sample_xt(np.broadcast_to(x0, (n, 4)),
                              np.broadcast_to(x1, (n, 4)), cs,
                              rng.standard_normal((n, 4)))
            se_mean = math.sqrt(var / n)
            se_var = var * math.sqrt(2.0 / (n - 1))
            z_mean = float(np.max(np.abs(draws.mean(axis=0) - mean))) / se_mean
            z_var = float(np.max(np.abs(draws.var(axis=0, ddof=1) - var))) / se_var
            worst = max(worst, z_mean, z_var)
        rows.append((f"bridge/mc-moments/{kind}", worst <= 4.0,
                     f"max |z| = {worst:.2f} (bound 4 SE, n={n})"))
    return rows


def check_lemma_product(epsilon: float = 1e-4, trials: int = 10,
                        seed: int = 0, tol: float = 1e-3) -> list[Row]:
    """Product of the two transition Gaussians vs the closed-form marginal."""
    rows: list[Row] = []
    rng = np.random.default_rng(seed)
    for kind, beta1 in (("gmax", 10.0), ("vp", 20.0)):
        params = ScheduleParams(kind=kind, beta0=0.01, beta1=beta1)
        worst_mean = worst_var = 0.0
        for _ in range(trials):
            x0 = rng.normal(size=4)
            x1 = rng.normal(size=4)
            t = float(rng.uniform(0.05, 0.95))
            cs = coeffs(params, t)
            lq = lemma_quantities(x0, x1, cs, epsilon)
            mean_f = cs.alpha * lq.a
            var_f = cs.alpha ** 2 * (lq.sigma2 + cs.sigma2)
            mean_b = cs.alpha_bar * lq.b
            var_b = cs.alpha ** 2 * (lq.sigma2 + cs.sigma_bar2)
            var_prod = var_f * var_b / (var_f + var_b)
            mean_prod = (mean_f * var_b + mean_b * var_f) / (var_f + var_b)
            mean_ref, var_ref = marginal_params(x0, x1, cs)
            worst_mean = max(worst_mean, float(np.max(np.abs(mean_prod - mean_ref))))
            worst_var = max(worst_var, abs(var_prod - var_ref))
        ok = worst_mean <= tol and worst_var <= tol
        rows.append((f"bridge/lemma-product/{kind}", ok,
                     f"max |Δmean| {worst_mean:.2e}, |Δvar| {worst_var:.2e} (tol {tol:g})"))
    return rows


# -- sampler ------------------------------------------------------------------


def check_sampler_identities(seed: int = 0) -> list[Row]:
    rows: list[Row] = []
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=(3, 6))
    x1 = rng.normal(size=(3, 6))
    for kind, beta1 in (("gmax", 10.0), ("vp", 20.0)):
        params = ScheduleParams(kind=kind, beta0=0.01, beta1=beta1)
        xs = rng.normal(size=(3, 6))
        pred = rng.normal(size=(3, 6))
        eps = rng.normal(size=(3, 6))
        cs_s = coeffs(params, 0.6)
        cs_0 = coeffs(params, 0.0)
        ok_same = (np.array_equal(sde_step(xs, 0.6, 0.6, pred, cs_s, cs_s, eps), xs)
                   and np.array_equal(ode_step(xs, 0.6, 0.6, pred, x1, cs_s, cs_s), xs))
        rows.append((f"sampler/zero-elapsed/{kind}", ok_same, "t=s returns x_s bitwise"))
        ok_final = (np.array_equal(sde_step(xs, 0.6, 0.0, pred, cs_s, cs_0, eps), pred)
                    and np.array_equal(ode_step(xs, 0.6, 0.0, pred, x1, cs_s, cs_0), pred))
        rows.append((f"sampler/final-collapse/{kind}", ok_final,
                     "t=0 returns the prediction bitwise"))

        def oracle(x, s, x1v, _x0=x0):
            return _x0

        errs = []
        for steps in (1, 2, 4, 8, 16):
            cfg = SamplerConfig(mode="sde", steps=steps, guidance_w=0.0, seed=seed)
            out = sample(x1, oracle, params, cfg, rng=np.random.default_rng(seed))
            errs.append(float(np.linalg.norm(out - x0)))
        ok_mono = all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
        rows.append((f"sampler/oracle-nonincreasing/{kind}", ok_mono,
                     "errors " + ", ".join(f"{e:.2e}" for e in errs)))

        cfg = SamplerConfig(mode="ode", steps=7, guidance_w=0.0, seed=seed)
        a = sample(x1, oracle, params, cfg)
        b = sample(x1, oracle, params, cfg)
        rows.append((f"sampler/ode-deterministic/{kind}", np.array_equal(a, b),
                     "two runs bitwise equal"))
    return rows


def check_guidance(seed: int = 0) -> list[Row]:
    rows: list[Row] = []
    rng = np.random.default_rng(seed)
    x1 = rng.normal(size=(4, 5))
    w_cond = rng.normal(size=(5, 5))
    w_uncond = rng.normal(size=(5, 5))
    params = ScheduleParams(kind="gmax", beta0=0.01, beta1=10.0)

    def cond(x, s, v):
        return x @ w_cond

    def uncond(x, s, v):
        return x @ w_uncond

    for mode in ("sde", "ode"):
        cfg0 = SamplerConfig(mode=mode, steps=9, guidance_w=0.0, seed=seed)
        guided = sample(x1, (cond, uncond), params, cfg0, rng=np.random.default_rng(seed))
        plain = sample(x1, cond, params, cfg0, rng=np.random.default_rng(seed))
        rows.append((f"guidance/w0-degenerate/{mode}", np.array_equal(guided, plain),
                     "w=0 equals conditional-only bitwise (shared RNG stream)"))
        outs = []
        for w in (0.0, 0.8, 3.7):
            cfg = SamplerConfig(mode=mode, steps=9, guidance_w=w, seed=seed)
            outs.append(sample(x1, (cond, cond), params, cfg,
                               rng=np.random.default_rng(seed)))
        ok = np.array_equal(outs[0], outs[1]) and np.array_equal(outs[0], outs[2])
        rows.append((f"guidance/cond-eq-uncond/{mode}", ok,
                     "output independent of w when branches agree"))
    return rows


# -- gradients ----------------------------------------------------------------


def _gradcheck_op(build, shapes, seed, tol=1e-4, trials=10) -> tuple[bool, str]:
    """FD-check d(weighted sum of op output)/d(inputs), `trials` random
    instances. The random weighting keeps the probe non-degenerate for ops
    whose plain sum is constant (softmax rows sum to 1, layernorm to 0).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        arrays = [rng.normal(size=s) for s in shapes]
        out_shape = build(*[Tensor(a) for a in arrays]).data.shape
        probe = rng.normal(size=out_shape)

        def loss_of(tensors):
            return ad.reduce_sum(build(*tensors) * Tensor(probe))

        tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
        with Tape() as tape:
            tape.backward(loss_of(tensors))
        for i, a in enumerate(arrays):
            def f(x, _i=i):
                vals = [x if j == _i else arrays[j] for j in range(len(arrays))]
                return loss_of([Tensor(v) for v in vals]).item()

            fd = numeric_gradient(f, a.copy())
            worst = max(worst, rel_error(tensors[i].grad, fd))
    return worst <= tol, f"max rel err {worst:.2e} (tol {tol:g})"


def check_op_gradients(seed: int = 0, trials: int = 10) -> list[Row]:
    d = 4
    cases = {
        "add": (lambda a, b: a + b, [(3, d), (3, d)]),
        "add-broadcast": (lambda a, b: a + b, [(3, d), (d,)]),
        "sub": (lambda a, b: a - b, [(3, d), (3, d)]),
        "mul": (lambda a, b: a * b, [(3, d), (3, d)]),
        "mul-broadcast": (lambda a, b: a * b, [(3, d), (1, d)]),
        "matmul": (ad.matmul, [(3, d), (d, 5)]),
        "matmul-batched": (ad.matmul, [(2, 3, d), (2, d, 5)]),
        "transpose": (ad.transpose, [(3, d)]),
        "reshape": (lambda a: ad.reshape(a, (d, 3)), [(3, d)]),
        "concat": (lambda a, b: ad.concat([a, b], axis=-1), [(3, d), (3, 2)]),
        "slice_last": (lambda a: ad.slice_last(a, 1, 3), [(3, d)]),
        "take_position": (lambda a: ad.take_position(a, 1), [(3, 2, d)]),
        "gather_rows": (lambda a: ad.gather_rows(a, np.array([2, 0, 2])), [(3, d)]),
        "reduce_sum": (ad.reduce_sum, [(3, d)]),
        "reduce_mean": (ad.reduce_mean, [(3, d)]),
        "relu": (ad.relu, [(3, d)]),
        "gelu": (ad.gelu, [(3, d)]),
        "softmax": (lambda a: ad.softmax(a, axis=-1), [(3, d)]),
        "layernorm": (lambda a: ad.layernorm(a), [(3, d)]),
        "dropout": (lambda a: ad.dropout(a, 0.4, True, seed=7, stream=1, step=2), [(5, d)]),
        "cross_entropy": (
            lambda a: ad.cross_entropy_with_logits(a, np.array([1, 0, 3])),
            [(3, d)],
        ),
    }
    rows: list[Row] = []
    for name, (build, shapes) in cases.items():
        ok, detail = _gradcheck_op(build, shapes, seed=seed, trials=trials)
        rows.append((f"grad/op/{name}", ok, detail))
    return rows


def check_composite_gradient(seed: int = 0, trials: int = 10,
                             tol: float = 1e-3) -> list[Row]:
    """FD the CE loss through encoder + bridge state + prediction MLP w.r.t.
    every parameter."""
    cfg = ModelConfig(vocab=7, dim=8, blocks=1, max_len=5, dropout=0.0)
    params_s = ScheduleParams(kind="gmax", beta0=0.01, beta1=10.0)
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_name = ""
    for _ in range(trials):
        model = Model(cfg, seed=int(rng.integers(2**31)))
        histories = [[0, 3, 2], [5, 1], [4, 4, 6, 2]]
        targets = np.array([1, 6, 0])
        t = rng.uniform(0.1, 0.9, size=3)
        noise = rng.normal(size=(3, cfg.dim))

        def forward() -> float:
            from .schedule import coeffs_batch
            cb = coeffs_batch(params_s, t)
            c0 = (cb.alpha * (cb.sigma_bar2 / cb.sigma2_1))[:, None]
            c1 = (cb.alpha_bar * (cb.sigma2 / cb.sigma2_1))[:, None]
            x1 = model.encode(histories)
            x0 = ad.gather_rows(model.params["item_emb"], targets)
            x_t = Tensor(c0) * x0 + Tensor(c1) * x1 + Tensor(noise)
            x0_hat = model.predict_x0(x_t, t, x1)
            return ad.cross_entropy_with_logits(model.score_candidates(x0_hat), targets)

        model.zero_grad()
        with Tape() as tape:
            tape.backward(forward())
        grads = {n: p.grad.copy() for n, p in model.params.items()}

        for name, p in model.params.items():
            def f(x, _p=p):
                saved = _p.data.copy()
                _p.data[...] = x
                try:
                    return forward().item()
                finally:
                    _p.data[...] = saved

            fd = numeric_gradient(f, p.data.copy())
            err = rel_error(grads[name], fd)
            if err > worst:
                worst, worst_name = err, name
    ok = worst <= tol
    return [("grad/composite", ok,
             f"max rel err {worst:.2e} at {worst_name or '-'} (tol {tol:g})")]


# -- metrics -------------------------------------------------------------------


def check_metric_hand_cases() -> list[Row]:
    rows: list[Row] = []
    ranked = [7, 3, 9, 1, 4, 2]  # target's position in this list sets its rank
    try:
        cases = [
            ("hr rank1", hr_at_k(ranked, 7, 5) == 1.0),
            ("hr rank>k", hr_at_k(ranked, 2, 5) == 0.0),
            ("ndcg rank1", ndcg_at_k(ranked, 7, 5) == 1.0),
            ("ndcg rank3", ndcg_at_k(ranked, 9, 5) == 0.5),
            ("ndcg rank>k", ndcg_at_k(ranked, 2, 5) == 0.0),
        ]
        ok = all(passed for _, passed in cases)
        detail = "; ".join(n for n, passed in cases if not passed) or "all hand cases hold"
        rows.append(("metrics/hand-cases", ok, detail))
    except ContractError as exc:
        rows.append(("metrics/hand-cases", False, f"unexpected error: {exc}"))
    return rows


# -- harness --------------------------------------------------------------------


def run_all(fast: bool = False) -> list[Row]:
    """Everything; ``fast`` trims trial counts (used by demos, not the gate)."""
    trials = 3 if fast else 10
    rows: list[Row] = []
    rows += check_schedule_oracle()
    rows += check_bridge_endpoints()
    rows += check_bridge_moments(n=20_000 if fast else 100_000)
    rows += check_lemma_product(trials=trials)
    rows += check_sampler_identities()
    rows += check_guidance()
    rows += check_op_gradients(trials=trials)
    rows += check_composite_gradient(trials=1 if fast else 3)
    rows += check_metric_hand_cases()
    return rows


def format_report(rows: list[Row]) -> str:
    width = max(len(name) for name, _, _ in rows)
    lines = []
    for name, passed, detail in rows:
        lines.append(f"{'PASS' if passed else 'FAIL'}  {name:<{width}}  {detail}")
    n_fail = sum(not p for _, p, _ in rows)
    lines.append(f"{len(rows) - n_fail}/{len(rows)} checks passed")
    return "\n".join(lines)
