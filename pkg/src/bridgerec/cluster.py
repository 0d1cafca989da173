"""Cosine-similarity user clustering over static user embeddings.

Users are assigned to the nearest of k centers by cosine similarity, encoded
one-hot (ties go to the lowest index). Centers come from spherical k-means
(k-means++ init on the unit sphere, mean-then-renormalize updates, empty
clusters reseeded from the farthest point). When no external embedding file is
available, user vectors fall back to a truncated SVD of the binary user-item
interaction matrix so the conditional pathway stays runnable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, IngestError


def _normalize_rows(x: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise ContractError(f"zero-norm {what} row: cosine similarity undefined")
    return x / norms


def assign(u: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """One-hot assignment of a single user vector to the nearest center."""
    u = np.asarray(u, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.float64)
    un = _normalize_rows(u[None, :], "user")[0]
    cn = _normalize_rows(centers, "center")
    j = int(np.argmax(cn @ un))  # argmax takes the first max: lowest index on ties
    out = np.zeros(len(centers))
    out[j] = 1.0
    return out


@dataclass
class ClusterModel:
    centers: np.ndarray  # (k, d_u)
    labels: np.ndarray   # (num_users,) int cluster index per fitted user

    @property
    def k(self) -> int:
        return len(self.centers)

    @property
    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self.labels), self.k))
        out[np.arange(len(self.labels)), self.labels] = 1.0
        return out

    def assign(self, u: np.ndarray) -> np.ndarray:
        return assign(u, self.centers)


def fit_centers(user_embeddings: np.ndarray, k: int, iterations: int = 100,
                seed: int = 0, n_init: int = 8) -> ClusterModel:
    """Spherical k-means until assignments stabilize (or the iteration cap).

    Runs ``n_init`` restarts and keeps the solution with the highest total
    cosine similarity to assigned centers (Lloyd iterations only find local
    optima; restarts are the usual remedy).
    """
    x = np.asarray(user_embeddings, dtype=np.float64)
    n = len(x)
    if k < 1 or k > n:
        raise ContractError(f"need 1 <= k <= {n} users, got k={k}")
    xn = _normalize_rows(x, "user")
    rng = np.random.default_rng(seed)

    best = None
    best_score = -np.inf
    for _ in range(max(1, n_init)):
        centers, labels = _lloyd_once(xn, k, iterations, rng)
        score = (xn * centers[labels]).sum()
        if score > best_score:
            best_score = score
            best = (centers, labels)
    centers, labels = best
    return ClusterModel(centers=centers, labels=labels)


def _lloyd_once(xn: np.ndarray, k: int, iterations: int, rng) -> tuple:
    n = len(xn)
    # k-means++ seeding with cosine distance 1 - cos
    centers = np.empty((k, xn.shape[1]))
    centers[0] = xn[rng.integers(n)]
    dist = 1.0 - xn @ centers[0]
    for j in range(1, k):
        w = np.maximum(dist, 0.0)
        total = w.sum()
        if total <= 0.0:
            centers[j] = xn[rng.integers(n)]
        else:
            centers[j] = xn[rng.choice(n, p=w / total)]
        dist = np.minimum(dist, 1.0 - xn @ centers[j])

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(iterations):
        sims = xn @ centers.T
        new_labels = np.argmax(sims, axis=1)
        for j in range(k):
            members = xn[new_labels == j]
            if len(members) == 0:
                # reseed from the point farthest from its current center
                worst = int(np.argmin(sims[np.arange(n), new_labels]))
                centers[j] = xn[worst]
                new_labels[worst] = j
                continue
            m = members.mean(axis=0)
            norm = np.linalg.norm(m)
            centers[j] = xn[int(np.argmax(sims[:, j]))] if norm == 0.0 else m / norm
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels


@dataclass
class UserEmbeddings:
    user_ids: list[int]
    vectors: np.ndarray  # (num_users, d_u)

    def aligned(self, dataset_user_ids: list[int]) -> np.ndarray:
        """Rows reordered to the dataset's users; extras ignored with a note."""
        index = {u: i for i, u in enumerate(self.user_ids)}
        missing = [u for u in dataset_user_ids if u not in index]
        if missing:
            raise IngestError(
                f"embedding file is missing {len(missing)} dataset users "
                f"(first few: {missing[:5]})"
            )
        return self.vectors[[index[u] for u in dataset_user_ids]]


def load_user_embeddings(path) -> UserEmbeddings:
    """Parse 'num_users dim' header then 'user_id v1 ... v_dim' lines."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise IngestError(f"{path}: empty embedding file")
    head = lines[0].split()
    if len(head) != 2:
        raise IngestError(f"{path}:1: header must be 'num_users dim'")
    try:
        n, d = int(head[0]), int(head[1])
    except ValueError:
        raise IngestError(f"{path}:1: header must be two integers") from None
    if len(lines) - 1 != n:
        raise IngestError(f"{path}: header promises {n} users, found {len(lines) - 1} rows")
    ids: list[int] = []
    vecs = np.empty((n, d))
    for row, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != d + 1:
            raise IngestError(f"{path}:{row}: expected user_id + {d} values, got {len(parts)} fields")
        try:
            uid = int(parts[0])
            vec = np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise IngestError(f"{path}:{row}: malformed number") from None
        if not np.all(np.isfinite(vec)):
            raise IngestError(f"{path}:{row}: non-finite embedding for user {uid}")
        if uid in ids:
            raise IngestError(f"{path}:{row}: duplicate user id {uid}")
        ids.append(uid)
        vecs[row - 2] = vec
    return UserEmbeddings(user_ids=ids, vectors=vecs)


def svd_user_embeddings(sequences: list[list[int]], num_items: int, rank: int = 64) -> np.ndarray:
    """Fallback user vectors: truncated SVD of the binary interaction matrix."""
    n = len(sequences)
    m = np.zeros((n, num_items))
    for i, seq in enumerate(sequences):
        m[i, list(set(seq))] = 1.0
    r = min(rank, n, num_items)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    return u[:, :r] * s[:r]
