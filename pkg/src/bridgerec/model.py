"""Learned components.

* item-embedding table and positional embeddings,
* causal single-head transformer encoder producing the user state h_u from an
  interaction history (last-position output),
* optional feature-wise conditioning of the input embeddings (β⊙e + γ from a
  one-hot cluster condition; identity at initialization, bypassed entirely on
  the unconditional path),
* connectivity MLP predicting the target embedding x̂₀ from
  (α⊙x_t, time features of λ·t, x1).

All histories are left-truncated to ``max_len`` and left-padded, so the newest
item always sits at the final position; padded keys are masked out of
attention, which also zeroes their gradient paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, NumericError

NEG_INF = -1e9


@dataclass(frozen=True)
class ModelConfig:
    vocab: int
    dim: int = 128
    blocks: int = 4
    max_len: int = 50
    dropout: float = 0.2
    k_clusters: int = 0  # 0 disables the conditioning pathway
    mu: float = 1.0      # input-scaling distribution N(mu, sigma^2)
    sigma: float = 0.1
    lam: float = 100.0   # time amplification
    retrieval: str = "dot"  # or "cosine"

    def __post_init__(self):
        if self.vocab < 1:
            raise ContractError("vocab must be >= 1")
        if self.dim % 2 != 0:
            raise ContractError("dim must be even (sinusoidal time features)")
        if self.retrieval not in ("dot", "cosine"):
            raise ContractError(f"unknown retrieval metric {self.retrieval!r}")


def pad_histories(histories, max_len: int):
    """Left-truncate and left-pad to (B, max_len); returns (ids, lengths)."""
    n = len(histories)
    ids = np.zeros((n, max_len), dtype=np.int64)
    lengths = np.zeros(n, dtype=np.int64)
    for i, h in enumerate(histories):
        if len(h) == 0:
            raise ContractError("empty interaction history")
        h = h[-max_len:]
        ids[i, max_len - len(h):] = h
        lengths[i] = len(h)
    return ids, lengths


def time_features(tau, dim: int) -> np.ndarray:
    """Sinusoidal features of an (already amplified) time value or array."""
    tau = np.atleast_1d(np.asarray(tau, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    ang = tau[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def _xavier(rng, fan_in: int, fan_out: int) -> np.ndarray:
    std = math.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


class Model:
    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        d, k = config.dim, config.k_clusters
        p: dict[str, Tensor] = {}

        def param(name, array):
            p[name] = Tensor(array, requires_grad=True)

        param("item_emb", rng.normal(0.0, 0.02, size=(config.vocab, d)))
        param("pos_emb", rng.normal(0.0, 0.02, size=(config.max_len, d)))
        for b in range(config.blocks):
            for w in ("wq", "wk", "wv", "wo"):
                param(f"enc{b}.{w}", _xavier(rng, d, d))
            for bias in ("bq", "bk", "bv", "bo"):
                param(f"enc{b}.{bias}", np.zeros(d))
            param(f"enc{b}.ln1.g", np.ones(d))
            param(f"enc{b}.ln1.b", np.zeros(d))
            param(f"enc{b}.w1", _xavier(rng, d, d))
            param(f"enc{b}.b1", np.zeros(d))
            param(f"enc{b}.w2", _xavier(rng, d, d))
            param(f"enc{b}.b2", np.zeros(d))
            param(f"enc{b}.ln2.g", np.ones(d))
            param(f"enc{b}.ln2.b", np.zeros(d))
        param("lnf.g", np.ones(d))
        param("lnf.b", np.zeros(d))
        if k > 0:
            # zero init => beta = 1, gamma = 0: conditional == unconditional at step 0
            param("film.w", np.zeros((k, 2 * d)))
            param("film.b", np.zeros(2 * d))
        param("mlp.w1", _xavier(rng, 3 * d, 2 * d))
        param("mlp.b1", np.zeros(2 * d))
        param("mlp.w2", _xavier(rng, 2 * d, 2 * d))
        param("mlp.b2", np.zeros(2 * d))
        param("mlp.w3", _xavier(rng, 2 * d, d))
        param("mlp.b3", np.zeros(d))
        self.params = p

    # -- parameter plumbing ---------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        missing = set(self.params) ^ set(state)
        if missing:
            raise ContractError(f"parameter name mismatch: {sorted(missing)}")
        for name, t in self.params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ContractError(
                    f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}"
                )
            t.data = arr.copy()

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    # -- encoder ----------------------------------------------------------

    def _attention_mask(self, lengths: np.ndarray) -> np.ndarray:
        L = self.config.max_len
        causal = np.triu(np.full((L, L), NEG_INF), k=1)
        pad = np.zeros((len(lengths), 1, L))
        for i, n in enumerate(lengths):
            pad[i, 0, : L - n] = NEG_INF
        return causal[None, :, :] + pad

    def _ln(self, x: Tensor, site: str) -> Tensor:
        return ad.layernorm(x) * self.params[f"{site}.g"] + self.params[f"{site}.b"]

    def _encode_padded(self, ids, lengths, cond, train: bool, step: int) -> Tensor:
        cfg = self.config
        p = self.params
        B, L = ids.shape
        e = ad.gather_rows(p["item_emb"], ids)  # (B, L, d)
        if cond is not None:
            film = ad.matmul(Tensor(cond), p["film.w"]) + p["film.b"]  # (B, 2d)
            beta = ad.slice_last(film, 0, cfg.dim) + 1.0
            gamma = ad.slice_last(film, cfg.dim, 2 * cfg.dim)
            e = ad.reshape(beta, (B, 1, cfg.dim)) * e + ad.reshape(gamma, (B, 1, cfg.dim))
        x = e + p["pos_emb"]
        x = ad.dropout(x, cfg.dropout, train, self.seed, 0, step)
        mask = Tensor(self._attention_mask(lengths))
        inv_sqrt_d = 1.0 / math.sqrt(cfg.dim)
        for b in range(cfg.blocks):
            h = self._ln(x, f"enc{b}.ln1")
            q = ad.matmul(h, p[f"enc{b}.wq"]) + p[f"enc{b}.bq"]
            key = ad.matmul(h, p[f"enc{b}.wk"]) + p[f"enc{b}.bk"]
            v = ad.matmul(h, p[f"enc{b}.wv"]) + p[f"enc{b}.bv"]
            scores = ad.matmul(q, ad.transpose(key)) * inv_sqrt_d + mask
            att = ad.softmax(scores, axis=-1)
            att = ad.dropout(att, cfg.dropout, train, self.seed, 3 * b + 1, step)
            out = ad.matmul(att, v)
            out = ad.matmul(out, p[f"enc{b}.wo"]) + p[f"enc{b}.bo"]
            x = x + ad.dropout(out, cfg.dropout, train, self.seed, 3 * b + 2, step)
            h2 = self._ln(x, f"enc{b}.ln2")
            f = ad.matmul(ad.relu(ad.matmul(h2, p[f"enc{b}.w1"]) + p[f"enc{b}.b1"]),
                          p[f"enc{b}.w2"]) + p[f"enc{b}.b2"]
            x = x + ad.dropout(f, cfg.dropout, train, self.seed, 3 * b + 3, step)
        x = self._ln(x, "lnf")
        return ad.take_position(x, L - 1)  # (B, d)

    def encode(self, histories, train: bool = False, step: int = 0) -> Tensor:
        """User states from raw interaction histories (lists of item ids)."""
        ids, lengths = pad_histories(histories, self.config.max_len)
        return self._encode_padded(ids, lengths, None, train, step)

    def encode_unconditional(self, histories, train: bool = False, step: int = 0) -> Tensor:
        return self.encode(histories, train=train, step=step)

    def encode_conditional(self, histories, cond, train: bool = False, step: int = 0) -> Tensor:
        """Encode with per-history one-hot conditions (None means no condition)."""
        if cond is None:
            return self.encode(histories, train=train, step=step)
        cond = np.asarray(cond, dtype=np.float64)
        if self.config.k_clusters <= 0:
            raise ContractError("model was built without a conditioning pathway")
        if cond.shape != (len(histories), self.config.k_clusters):
            raise ContractError(
                f"conditions must be ({len(histories)}, {self.config.k_clusters}), got {cond.shape}"
            )
        onehot = (cond == 1.0).sum(axis=1) == 1
        zeros = (cond == 0.0).sum(axis=1) == self.config.k_clusters - 1
        if not np.all(onehot & zeros):
            raise ContractError("every condition row must be one-hot")
        ids, lengths = pad_histories(histories, self.config.max_len)
        return self._encode_padded(ids, lengths, cond, train, step)

    # -- connectivity model ------------------------------------------------

    def predict_x0(self, x_t, t, x1, alpha_scale=None, train: bool = False, step: int = 0) -> Tensor:
        """x̂₀ from the scaled intermediate state, time features and x1.

        ``alpha_scale`` is the input scaling (an array drawn from N(mu, sigma²)
        during training); defaults to the deterministic eval value mu.
        """
        cfg = self.config
        x_t = x_t if isinstance(x_t, Tensor) else Tensor(x_t)
        x1 = x1 if isinstance(x1, Tensor) else Tensor(x1)
        if x_t.data.ndim == 1:
            x_t = ad.reshape(x_t, (1, -1))
        if x1.data.ndim == 1:
            x1 = ad.reshape(x1, (1, -1))
        if not (np.all(np.isfinite(x_t.data)) and np.all(np.isfinite(x1.data))):
            raise NumericError("non-finite inputs to the connectivity model")
        if alpha_scale is None:
            alpha_scale = cfg.mu
        scale = Tensor(np.broadcast_to(np.asarray(alpha_scale, dtype=np.float64),
                                       x_t.data.shape).copy())
        temb = time_features(cfg.lam * np.asarray(t, dtype=np.float64), cfg.dim)
        if temb.shape[0] == 1 and x_t.data.shape[0] > 1:
            temb = np.broadcast_to(temb, x_t.data.shape).copy()
        h = ad.concat([x_t * scale, Tensor(temb), x1], axis=-1)
        p = self.params
        h = ad.gelu(ad.matmul(h, p["mlp.w1"]) + p["mlp.b1"])
        h = ad.gelu(ad.matmul(h, p["mlp.w2"]) + p["mlp.b2"])
        return ad.matmul(h, p["mlp.w3"]) + p["mlp.b3"]

    def project_x0(self, x0_hat: np.ndarray) -> np.ndarray:
        """Posterior-mean projection: softmax(x̂₀·Eᵀ) @ E.

        The raw network output is trained as a ranker, so its magnitude is
        unconstrained; reverse-step formulas expect an estimate of an item
        embedding. The expected embedding under the model's own item
        distribution has the right scale and converges to the true embedding
        as the distribution sharpens. Used in sampling chains (eval only).
        """
        emb = self.params["item_emb"].data
        logits = np.asarray(x0_hat, dtype=np.float64) @ emb.T
        logits -= logits.max(axis=-1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=-1, keepdims=True)
        return p @ emb

    # -- retrieval ----------------------------------------------------------

    def score_candidates(self, x0_hat) -> Tensor:
        """Scores over the whole vocabulary (differentiable)."""
        x0_hat = x0_hat if isinstance(x0_hat, Tensor) else Tensor(x0_hat)
        table = self.params["item_emb"]
        if self.config.retrieval == "cosine":
            norms = np.linalg.norm(table.data, axis=1)
            norms = np.where(norms == 0.0, 1.0, norms)
            scaled = ad.mul(table, Tensor((1.0 / norms)[:, None]))
            return ad.matmul(x0_hat, ad.transpose(scaled))
        return ad.matmul(x0_hat, ad.transpose(table))
