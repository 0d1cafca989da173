"""Training loop, evaluation driver and synthetic dataset generation.

One training example is a (prefix, target) pair taken from the train region
of the leave-one-out split (every position of every user's prefix). Each step
draws a time t ~ U(0,1) per example, forms the bridge state x_t between the
target embedding x0 and the encoded user state x1, predicts x̂₀ and minimizes
cross entropy of x̂₀·E over the full vocabulary. In conditional mode the
encoder input condition is dropped with probability p per example, which
trains the unconditional branch used for guidance at sampling time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .bridge import marginal_coeffs  # noqa: F401  (re-exported for demos)
from .cluster import ClusterModel, fit_centers, svd_user_embeddings
from .data import Dataset, SplitView, split, write_dataset
from .errors import ContractError, NumericError
from .metrics import EvalReport, UserResult, bucket_report, ranks_from_scores
from .model import Model, ModelConfig
from .sampler import SamplerConfig, sample
from .schedule import ScheduleParams, coeffs_batch


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 256
    epochs: int = 100
    cond_drop_p: float = 0.1
    seed: int = 0
    con_mode: bool = False
    patience: int = 20
    eval_every: int = 1
    target_hr1: float | None = None  # optional stop once validation HR@1 reaches this

    def __post_init__(self):
        if not 0.0 <= self.cond_drop_p <= 1.0:
            raise ContractError(f"cond_drop_p must be in [0, 1], got {self.cond_drop_p}")


class Adam:
    def __init__(self, params: dict[str, Tensor], lr: float,
                 betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in params.items()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for name, p in self.params.items():
            g = p._grad
            if g is None:
                continue
            m = self.m[name]
            v = self.v[name]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


def _stitch_rows(parts: list, order: np.ndarray) -> Tensor:
    """Reassemble encoder outputs computed on a permuted batch back into
    original row order (differentiable row gather)."""
    stacked = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    return ad.gather_rows(stacked, order)


def condition_drop_mask(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Per-example coin: True means train this example unconditionally."""
    return rng.uniform(size=n) < p


def train_step(model: Model, batch: dict, schedule_params: ScheduleParams,
               config: TrainConfig, optimizer: Adam, rng: np.random.Generator,
               step: int, conditions: np.ndarray | None = None) -> float:
    """One optimizer update; returns the scalar loss."""
    histories = batch["histories"]
    targets = np.asarray(batch["targets"], dtype=np.int64)
    n = len(histories)
    d = model.config.dim

    t = rng.uniform(0.0, 1.0, size=n)
    cb = coeffs_batch(schedule_params, t)
    coef_x0 = (cb.alpha * (cb.sigma_bar2 / cb.sigma2_1))[:, None]
    coef_x1 = (cb.alpha_bar * (cb.sigma2 / cb.sigma2_1))[:, None]
    std = (cb.alpha * np.sqrt(cb.sigma_bar2 * cb.sigma2) / math.sqrt(cb.sigma2_1))[:, None]
    noise = std * rng.standard_normal((n, d))
    alpha_scale = rng.normal(model.config.mu, model.config.sigma, size=(n, d))

    drop = None
    if conditions is not None:
        drop = condition_drop_mask(rng, n, config.cond_drop_p)

    optimizer.zero_grad()
    with Tape() as tape:
        if conditions is None:
            x1 = model.encode(histories, train=True, step=step)
        elif bool(drop.all()):
            x1 = model.encode(histories, train=True, step=step)
        elif not bool(drop.any()):
            x1 = model.encode_conditional(histories, conditions, train=True, step=step)
        else:
            idx_c = np.flatnonzero(~drop)
            idx_u = np.flatnonzero(drop)
            h_c = model.encode_conditional([histories[i] for i in idx_c],
                                           conditions[idx_c], train=True, step=step)
            h_u = model.encode([histories[i] for i in idx_u], train=True, step=step)
            restore = np.empty(n, dtype=np.int64)
            restore[np.concatenate([idx_c, idx_u])] = np.arange(n)
            x1 = _stitch_rows([h_c, h_u], restore)
        x0 = ad.gather_rows(model.params["item_emb"], targets)
        x_t = Tensor(coef_x0) * x0 + Tensor(coef_x1) * x1 + Tensor(noise)
        x0_hat = model.predict_x0(x_t, t, x1, alpha_scale, train=True, step=step)
        logits = model.score_candidates(x0_hat)
        loss = ad.cross_entropy_with_logits(logits, targets)
        value = loss.item()
        if not math.isfinite(value):
            raise NumericError(
                f"non-finite loss at step {step}; t={np.round(t, 4).tolist()} "
                f"targets={targets.tolist()}"
            )
        tape.backward(loss)
    optimizer.step()
    return value


def _training_pairs(split_view: SplitView):
    pairs = []
    for u, prefix in enumerate(split_view.train):
        for j in range(1, len(prefix)):
            pairs.append((u, j))
    return pairs


def evaluate(model: Model, split_view: SplitView, num_items: int,
             schedule_params: ScheduleParams, sampler_config: SamplerConfig,
             which: str = "test", cluster: ClusterModel | None = None,
             ks=(5, 10), batch: int = 256) -> EvalReport:
    """Full-ranking evaluation of validation or test targets.

    Validation targets are predicted from the train prefix; test targets from
    the prefix plus the validation item. Users whose history is empty are
    skipped and counted.
    """
    if which not in ("valid", "test"):
        raise ContractError(f"which must be 'valid' or 'test', got {which!r}")
    histories, targets, users = [], [], []
    skipped = 0
    for u, prefix in enumerate(split_view.train):
        hist = list(prefix) if which == "valid" else list(prefix) + [split_view.valid[u]]
        if not hist:
            skipped += 1
            continue
        histories.append(hist)
        targets.append(split_view.valid[u] if which == "valid" else split_view.test[u])
        users.append(u)

    rng = np.random.default_rng(sampler_config.seed)
    results: list[UserResult] = []
    for lo in range(0, len(histories), batch):
        hi = min(lo + batch, len(histories))
        chunk = histories[lo:hi]
        chunk_targets = np.asarray(targets[lo:hi])
        if cluster is None:
            h = model.encode(chunk).data

            def predictor(x_s, s, x1, _h=h):
                return model.project_x0(model.predict_x0(x_s, s, _h).data)

            x0_hat = sample(h, predictor, schedule_params, sampler_config, rng=rng)
        else:
            onehot = cluster.one_hot[[users[lo + i] for i in range(hi - lo)]]
            h_con = model.encode_conditional(chunk, onehot).data
            h_un = model.encode(chunk).data

            def cond_fn(x_s, s, x1, _h=h_con):
                return model.project_x0(model.predict_x0(x_s, s, _h).data)

            def uncond_fn(x_s, s, x1, _h=h_un):
                return model.project_x0(model.predict_x0(x_s, s, _h).data)

            x0_hat = sample(h_con, (cond_fn, uncond_fn), schedule_params,
                            sampler_config, rng=rng)
        scores = model.score_candidates(Tensor(x0_hat)).data
        ranks = ranks_from_scores(scores, chunk_targets)
        for i, r in enumerate(ranks):
            u = users[lo + i]
            results.append(UserResult(user=u, rank=int(r),
                                      target=int(chunk_targets[i]),
                                      train_len=len(split_view.train[u])))
    report = bucket_report(results, split_view, num_items, ks=ks)
    report.skipped = skipped
    return report


@dataclass
class FitResult:
    model: Model
    history: list = field(default_factory=list)  # (epoch, mean loss, val hr@10, val hr@1)
    best_epoch: int = -1
    best_hr10: float = -1.0
    best_hr1: float = -1.0
    stopped_early: bool = False
    stop_reason: str = ""
    cluster: ClusterModel | None = None
    seconds: float = 0.0


def fit(dataset: Dataset, model_config: ModelConfig,
        schedule_params: ScheduleParams, sampler_config: SamplerConfig,
        config: TrainConfig, user_vectors: np.ndarray | None = None,
        log=None) -> FitResult:
    """Train with epoch shuffling, validation-driven model selection (HR@10)
    and patience-based early stopping."""
    t_start = time.time()
    if dataset.num_users == 0:
        raise ContractError("empty dataset")
    sv = split(dataset)
    pairs = _training_pairs(sv)
    if not pairs:
        raise ContractError("no training pairs: all train prefixes have length 1")

    model = Model(model_config, seed=config.seed)
    optimizer = Adam(model.params, lr=config.lr)
    rng = np.random.default_rng(config.seed)

    cluster = None
    conditions = None
    if config.con_mode:
        if model_config.k_clusters < 1:
            raise ContractError("con_mode requires k_clusters >= 1")
        if user_vectors is None:
            user_vectors = svd_user_embeddings(sv.train, dataset.num_items)
        cluster = fit_centers(user_vectors, model_config.k_clusters, seed=config.seed)
        conditions = cluster.one_hot

    result = FitResult(model=model, cluster=cluster)
    best_state = None
    since_best = 0
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        losses = []
        for lo in range(0, len(order), config.batch_size):
            chosen = [pairs[i] for i in order[lo:lo + config.batch_size]]
            batch = {
                "histories": [sv.train[u][:j] for u, j in chosen],
                "targets": np.array([sv.train[u][j] for u, j in chosen]),
            }
            cond = conditions[[u for u, _ in chosen]] if conditions is not None else None
            losses.append(train_step(model, batch, schedule_params, config,
                                     optimizer, rng, step, conditions=cond))
            step += 1
        if config.con_mode:
            # refresh centers/assignments between epochs
            cluster = fit_centers(user_vectors, model_config.k_clusters, seed=config.seed)
            conditions = cluster.one_hot
            result.cluster = cluster

        if (epoch + 1) % config.eval_every:
            continue
        report = evaluate(model, sv, dataset.num_items, schedule_params,
                          sampler_config, which="valid", cluster=cluster, ks=(1, 5, 10))
        hr10 = report.get("hr", 10)
        hr1 = report.get("hr", 1)
        result.history.append((epoch, float(np.mean(losses)), hr10, hr1))
        if log:
            log(f"epoch {epoch:4d}  loss {np.mean(losses):8.4f}  "
                f"val hr@10 {hr10:6.2f}  hr@1 {hr1:6.2f}")
        # selection on validation HR@10, ties broken by HR@1
        if (hr10, hr1) > (result.best_hr10, result.best_hr1):
            result.best_hr10 = hr10
            result.best_hr1 = hr1
            result.best_epoch = epoch
            best_state = model.state_dict()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                result.stopped_early = True
                result.stop_reason = f"no validation improvement for {config.patience} evals"
                break
        if config.target_hr1 is not None and hr1 >= config.target_hr1:
            result.stopped_early = True
            result.stop_reason = f"validation hr@1 reached {hr1:.2f}"
            best_state = model.state_dict()
            result.best_epoch = epoch
            result.best_hr10, result.best_hr1 = hr10, hr1
            break
    if best_state is not None:
        model.load_state_dict(best_state)
    result.seconds = time.time() - t_start
    return result


# -- synthetic data -------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    num_users: int
    num_items: int
    pattern: str = "block-cyclic"  # or "markov"
    noise_rate: float = 0.0
    seed: int = 0
    blocks: int = 2
    min_len: int = 12
    max_len: int = 20
    zipf: float = 0.0  # >0 skews markov start/noise draws toward low item ids

    def __post_init__(self):
        if self.pattern not in ("block-cyclic", "markov"):
            raise ContractError(f"unknown pattern {self.pattern!r}")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ContractError("noise_rate must be in [0, 1]")
        if self.min_len < 3 or self.max_len < self.min_len:
            raise ContractError("need max_len >= min_len >= 3")
        if self.pattern == "block-cyclic" and self.num_items < self.blocks:
            raise ContractError("need at least one item per block")


def generate_synthetic(spec: SyntheticSpec):
    """Sequences with learnable next-item structure.

    block-cyclic: users are split across ``blocks`` disjoint item ranges and
    walk their range cyclically (i -> i+1); substitutions stay inside the
    user's block so populations remain disjoint. markov: a seeded random
    successor permutation over all items; substitutions are global draws,
    Zipf-weighted when ``zipf`` > 0.

    Returns (user_ids, sequences).
    """
    rng = np.random.default_rng(spec.seed)
    n_items = spec.num_items
    if spec.zipf > 0.0:
        weights = 1.0 / np.arange(1, n_items + 1) ** spec.zipf
        weights /= weights.sum()
    else:
        weights = np.full(n_items, 1.0 / n_items)

    successor = rng.permutation(n_items)
    bounds = np.linspace(0, n_items, spec.blocks + 1).astype(int)

    sequences = []
    for u in range(spec.num_users):
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        if spec.pattern == "block-cyclic":
            b = u % spec.blocks
            lo, hi = bounds[b], bounds[b + 1]
            size = hi - lo
            cur = lo + int(rng.integers(size))
            seq = [cur]
            for _ in range(length - 1):
                nxt = lo + (cur - lo + 1) % size
                if spec.noise_rate > 0.0 and rng.uniform() < spec.noise_rate:
                    nxt = lo + int(rng.integers(size))
                seq.append(nxt)
                cur = nxt
        else:
            cur = int(rng.choice(n_items, p=weights))
            seq = [cur]
            for _ in range(length - 1):
                nxt = int(successor[cur])
                if spec.noise_rate > 0.0 and rng.uniform() < spec.noise_rate:
                    nxt = int(rng.choice(n_items, p=weights))
                seq.append(nxt)
                cur = nxt
        sequences.append(seq)
    return list(range(spec.num_users)), sequences


def generate_synthetic_file(spec: SyntheticSpec, path) -> int:
    """Generate and write in the ingest line format; returns the line count."""
    user_ids, sequences = generate_synthetic(spec)
    write_dataset(path, user_ids, sequences)
    return len(sequences)
