"""Top-K ranking metrics and the bucketed evaluation report.

Everything operates on full rankings over the whole vocabulary (no negative
sampling). Reported values are percentages (means over users, times 100).
Popularity buckets use training interactions only: the top ceil(0.2·V) items
by train-prefix frequency count as popular. Length buckets classify the
training-prefix length as short (<=5), medium (6-10) or long (>10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import SplitView
from .errors import ContractError


def hr_at_k(ranked, target, k: int) -> float:
    if len(set(ranked)) != len(ranked):
        raise ContractError("ranking contains duplicate items")
    return 1.0 if target in ranked[:k] else 0.0


def ndcg_at_k(ranked, target, k: int) -> float:
    if len(set(ranked)) != len(ranked):
        raise ContractError("ranking contains duplicate items")
    top = list(ranked[:k])
    if target not in top:
        return 0.0
    rank = top.index(target) + 1
    return 1.0 / math.log2(rank + 1)


class UserResult(NamedTuple):
    user: int
    rank: int       # 1-based position of the target in the full ranking
    target: int
    train_len: int


def ranks_from_scores(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """1-based rank of each row's target under descending stable order."""
    order = np.argsort(-scores, axis=1, kind="stable")
    return (order == np.asarray(targets)[:, None]).argmax(axis=1) + 1


def popular_items(split_view: SplitView, num_items: int) -> set[int]:
    """Top ceil(0.2·V) items by train-prefix frequency (count desc, id asc)."""
    counts = np.zeros(num_items, dtype=np.int64)
    for prefix in split_view.train:
        for item in prefix:
            counts[item] += 1
    top = math.ceil(0.2 * num_items)
    order = np.lexsort((np.arange(num_items), -counts))
    return set(int(i) for i in order[:top])


def _length_bucket(n: int) -> str:
    if n <= 5:
        return "short"
    if n <= 10:
        return "medium"
    return "long"


@dataclass
class EvalReport:
    values: dict  # (metric, k, bucket) -> percentage
    bucket_sizes: dict  # bucket -> user count
    skipped: int = 0

    def get(self, metric: str, k: int, bucket: str = "all") -> float:
        return self.values[(metric, k, bucket)]

    def rows(self):
        for (metric, k, bucket), v in sorted(self.values.items()):
            yield metric, k, bucket, v

    def to_csv(self, path=None) -> str:
        text = "metric,k,bucket,value\n" + "".join(
            f"{metric},{k},{bucket},{v:.6f}\n" for metric, k, bucket, v in self.rows())
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def format_table(self) -> str:
        lines = [f"{'metric':<8}{'k':>4}  {'bucket':<10}{'value':>10}"]
        for metric, k, bucket, v in self.rows():
            lines.append(f"{metric:<8}{k:>4}  {bucket:<10}{v:>10.4f}")
        if self.skipped:
            lines.append(f"(skipped {self.skipped} users with empty histories)")
        return "\n".join(lines)


def bucket_report(results: list[UserResult], split_view: SplitView,
                  num_items: int, ks=(5, 10)) -> EvalReport:
    """Aggregate per-user ranks into global and per-bucket HR/NDCG."""
    popular = popular_items(split_view, num_items)
    groups: dict[str, list[UserResult]] = {"all": list(results)}
    for r in results:
        groups.setdefault("popular" if r.target in popular else "longtail", []).append(r)
        groups.setdefault(_length_bucket(r.train_len), []).append(r)

    values = {}
    for bucket, rows in groups.items():
        if not rows:
            continue
        ranks = np.array([r.rank for r in rows], dtype=np.float64)
        for k in ks:
            hit = ranks <= k
            values[("hr", k, bucket)] = 100.0 * hit.mean()
            gains = np.where(hit, 1.0 / np.log2(ranks + 1), 0.0)
            values[("ndcg", k, bucket)] = 100.0 * gains.mean()
    return EvalReport(values=values,
                      bucket_sizes={b: len(rows) for b, rows in groups.items()})
